"""
The reference gesture network
=============================

The network is described by a small line-oriented config. Parsing it runs
shape inference layer by layer, so a wrong size is caught with a line number.
"""

from importlib import resources

from evsnn import network
from evsnn.errors import ShapeError

text = resources.files("evsnn.data").joinpath("dvs_gesture.net").read_text()
print(text)

net = network.parse_network(text)
print(f"{'idx':>3} {'kind':<6} {'size':>10} {'neurons':>8} {'weights':>14}")
for layer, w in zip(net.layers, net.weights):
    shape = "" if w is None else "x".join(map(str, w.shape))
    print(f"{layer.index:>3} {layer.kind:<6} {network.format_size(layer.size):>10} {layer.neurons:>8} {shape:>14}")

# the first dense layer sees the last pool flattened: 8*8*32
print("full layer fan-in:", net.weights[6].shape[0])

# without padding a 3x3 conv shrinks 32 -> 30 and the declared size is wrong
bad = text.replace("stride=1 padding=1", "stride=1 padding=0", 1)
try:
    network.parse_network(bad)
except ShapeError as exc:
    print("rejected:", exc)

# emit -> parse is the identity
print("round trip equal:", network.parse_network(network.emit_network(net)) == net)
