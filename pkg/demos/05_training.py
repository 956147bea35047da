"""
Surrogate-gradient training on a toy task
=========================================

The trainer uses the same LIF update as the engine, so trained weights run
unchanged on it. Two classes of spike patterns fire in different column
bands of an 8x8 frame; a pool layer plus one dense layer learns them.
"""

import numpy as np

from evsnn import engine, network, synthetic, trainer

net = network.parse_network(
    "layer 0 input size=8x8x2\n"
    "layer 1 pool size=4x4x2 kernel=2x2\n"
    "layer 2 full size=2 theta=1 lambda=0.9\n"
)
data = synthetic.pattern_dataset(20, 10, (8, 8, 2), np.random.default_rng(0))
print("dataset:", data.inputs.shape, "labels", np.bincount(data.labels))

print("epoch,loss,accuracy")
result = trainer.train(net, data, trainer.TrainConfig(epochs=15, seed=0), log=lambda m: print(m.to_line()))

# weights are quantized to 8 bits after training
w = result.net.weights[2]
print("int8 range:", w.values.min(), w.values.max(), "scale", w.scale)
preds = np.array([engine.run_network(result.net, x).prediction for x in data.inputs])
print("engine accuracy with quantized weights:", (preds == data.labels).mean())

# rectangular surrogate: 1/a inside a window of width a around theta
sur = trainer.SurrogateSpec(width=1.0)
u = np.linspace(0, 2, 9)
print("U     ", u)
print("h(U)  ", sur.derivative(u, 1.0))
