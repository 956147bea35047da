"""Layered SNN topology: config parsing, shape inference and weight files.

Config grammar (one directive per line, ``#`` starts a comment)::

    weights <path>
    layer <idx> <input|pool|conv|full> size=HxWxC [kernel=KhxKw] [features=F]
          [stride=S] [padding=P] [theta=T] [lambda=L]

Full layers take ``size=N``. Weight tensors are laid out as
``(kh, kw, in_channels, features)`` for conv and ``(in_size, out_size)`` for
full layers, where the input of a full layer is the predecessor flattened in
``(h, w, c)`` order.

Weight file: little-endian blocks in layer order, one per conv/full layer:
``u32 layer index, u32 element count, f32 scale, count x i8``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    ConfigSyntaxError,
    IncompatibleShape,
    MalformedRecord,
    MissingWeights,
    ShapeError,
)

KINDS = ("input", "pool", "conv", "full")
WEIGHTED = ("conv", "full")

DEFAULT_THETA = 1.0
DEFAULT_LAMBDA = 0.9

_BLOCK_HEADER = struct.Struct("<IIf")


@dataclass(frozen=True)
class LayerSpec:
    index: int
    kind: str
    size: tuple
    kernel: tuple | None = None
    features: int | None = None
    stride: int = 1
    padding: int = 0
    theta: float = DEFAULT_THETA
    lam: float = DEFAULT_LAMBDA

    @property
    def neurons(self) -> int:
        return math.prod(self.size)

    @property
    def spatial(self) -> bool:
        return len(self.size) == 3


@dataclass(frozen=True, eq=False)
class QuantWeights:
    """Signed integer weights with one real scale per layer."""

    values: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int8)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        # stored as f32 in the weight file
        object.__setattr__(self, "scale", float(np.float32(self.scale)))

    @property
    def real(self) -> np.ndarray:
        return self.values.astype(np.float64) * self.scale

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, QuantWeights):
            return NotImplemented
        return (
            self.scale == other.scale
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )


def quantize(weights: np.ndarray, bits: int = 8) -> QuantWeights:
    """Symmetric per-layer quantization; ``bits=2`` gives ternary weights."""
    if not 2 <= bits <= 8:
        raise ValueError(f"bit width must be in [2, 8], got {bits}")
    qmax = 2 ** (bits - 1) - 1
    w = np.asarray(weights, dtype=np.float64)
    peak = float(np.abs(w).max()) if w.size else 0.0
    if peak == 0.0:
        return QuantWeights(np.zeros(w.shape, dtype=np.int8), 1.0)
    scale = float(np.float32(peak / qmax))
    q = np.clip(np.rint(w / scale), -qmax, qmax).astype(np.int8)
    return QuantWeights(q, scale)


def weight_shape(layer: LayerSpec, in_shape: tuple) -> tuple | None:
    if layer.kind == "conv":
        kh, kw = layer.kernel
        return (kh, kw, in_shape[2], layer.size[2])
    if layer.kind == "full":
        return (math.prod(in_shape), layer.size[0])
    return None


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    layers: tuple
    weights: tuple = field(default=())

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not self.weights:
            object.__setattr__(self, "weights", zero_weights(layers))
        else:
            object.__setattr__(self, "weights", tuple(self.weights))
        _check_topology(layers)
        _check_weights(layers, self.weights)

    def __len__(self):
        return len(self.layers)

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec):
            return NotImplemented
        return self.layers == other.layers and self.weights == other.weights

    @property
    def input_shape(self) -> tuple:
        return self.layers[0].size

    @property
    def num_classes(self) -> int:
        return self.layers[-1].neurons

    def input_shape_of(self, i: int) -> tuple:
        return self.layers[i - 1].size

    def real_weights(self, i: int) -> np.ndarray | None:
        w = self.weights[i]
        return None if w is None else w.real

    def with_weights(self, weights) -> NetworkSpec:
        """Return a copy with some layers' weights replaced.

        ``weights`` maps layer index to a :class:`QuantWeights` or a real
        array; real arrays are quantized to 8 bits.
        """
        new = list(self.weights)
        for i, w in dict(weights).items():
            new[i] = w if isinstance(w, QuantWeights) else quantize(w)
        return replace(self, weights=tuple(new))


def zero_weights(layers) -> tuple:
    out = []
    for i, layer in enumerate(layers):
        shape = weight_shape(layer, layers[i - 1].size) if i else None
        out.append(None if shape is None else QuantWeights(np.zeros(shape, np.int8), 1.0))
    return tuple(out)


def _check_topology(layers):
    if not layers:
        raise ShapeError("network has no layers")
    if layers[0].kind != "input":
        raise ShapeError("layer 0 must be an input layer")
    for i, layer in enumerate(layers):
        if layer.index != i:
            raise ShapeError(f"layer at position {i} carries index {layer.index}")
        if i == 0:
            continue
        if layer.kind == "input":
            raise ShapeError(f"layer {i}: input layer only allowed at position 0")
        inferred = infer_shape(layers[i - 1].size, layer)
        if inferred != tuple(layer.size):
            raise ShapeError(
                f"layer {i}: declared size {format_size(layer.size)} but inferred "
                f"{format_size(inferred)}"
            )


def _check_weights(layers, weights):
    if len(weights) != len(layers):
        raise ShapeError(f"{len(weights)} weight entries for {len(layers)} layers")
    for i, (layer, w) in enumerate(zip(layers, weights)):
        expected = weight_shape(layer, layers[i - 1].size) if i else None
        if expected is None:
            if w is not None:
                raise ShapeError(f"layer {i} ({layer.kind}) takes no weights")
        elif w is None:
            raise MissingWeights(f"layer {i} ({layer.kind}) has no weights")
        elif tuple(w.shape) != expected:
            raise ShapeError(f"layer {i}: weight shape {w.shape}, expected {expected}")


def infer_shape(prev: tuple, layer: LayerSpec) -> tuple:
    """Output shape of ``layer`` given its predecessor's output shape."""
    prev = tuple(prev)
    if layer.kind == "input":
        raise IncompatibleShape("an input layer has no predecessor")
    if layer.kind == "full":
        return (int(layer.size[0]),)
    if len(prev) != 3:
        raise IncompatibleShape(
            f"{layer.kind} layer needs an HxWxC input, got {format_size(prev)}"
        )
    kh, kw = layer.kernel
    pad = layer.padding if layer.kind == "conv" else 0
    s = layer.stride
    h = (prev[0] + 2 * pad - kh) // s + 1
    w = (prev[1] + 2 * pad - kw) // s + 1
    if h < 1 or w < 1:
        raise IncompatibleShape(
            f"kernel {kh}x{kw} does not fit a {prev[0]}x{prev[1]} input with padding {pad}"
        )
    c = layer.features if layer.kind == "conv" else prev[2]
    return (h, w, c)


def format_size(size) -> str:
    return "x".join(str(int(d)) for d in size)


# -- config text -------------------------------------------------------------

_LAYER_KEYS = {
    "input": {"size"},
    "pool": {"size", "kernel", "features", "stride"},
    "conv": {"size", "kernel", "features", "stride", "padding", "theta", "lambda"},
    "full": {"size", "features", "theta", "lambda"},
}


def _tokens(line):
    """Split on whitespace, keeping 1-based start columns."""
    out, i, n = [], 0, len(line)
    while i < n:
        if line[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not line[j].isspace():
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _dims(text, lineno, col, count):
    parts = text.split("x")
    if len(parts) not in count or not all(p.isascii() and p.isdigit() for p in parts):
        want = " or ".join({1: "N", 2: "AxB", 3: "HxWxC"}[c] for c in count)
        raise ConfigSyntaxError(f"expected {want}, got {text!r}", lineno, col)
    dims = tuple(int(p) for p in parts)
    if min(dims) < 1:
        raise ConfigSyntaxError(f"dimensions must be positive in {text!r}", lineno, col)
    return dims


def _int(text, lineno, col, minimum):
    if not (text.isascii() and text.isdigit()) or int(text) < minimum:
        raise ConfigSyntaxError(f"expected an integer >= {minimum}, got {text!r}", lineno, col)
    return int(text)


def _float(text, lineno, col):
    try:
        v = float(text)
    except ValueError:
        raise ConfigSyntaxError(f"expected a number, got {text!r}", lineno, col) from None
    if not math.isfinite(v):
        raise ConfigSyntaxError(f"expected a finite number, got {text!r}", lineno, col)
    return v


def _parse_layer(toks, lineno, expected_index):
    if len(toks) < 3:
        raise ConfigSyntaxError("expected 'layer <idx> <kind> ...'", lineno, toks[0][1])
    (idx_text, idx_col), (kind, kind_col) = toks[1], toks[2]
    index = _int(idx_text, lineno, idx_col, 0)
    if index != expected_index:
        raise ConfigSyntaxError(
            f"layer index {index} out of order, expected {expected_index}", lineno, idx_col
        )
    if kind not in KINDS:
        raise ConfigSyntaxError(f"unknown layer kind {kind!r}", lineno, kind_col)
    opts = {}
    for tok, col in toks[3:]:
        key, eq, value = tok.partition("=")
        if not eq or not value:
            raise ConfigSyntaxError(f"expected key=value, got {tok!r}", lineno, col)
        if key not in _LAYER_KEYS[kind]:
            raise ConfigSyntaxError(f"option {key!r} not allowed for {kind} layers", lineno, col)
        if key in opts:
            raise ConfigSyntaxError(f"duplicate option {key!r}", lineno, col)
        opts[key] = (value, col + len(key) + 1)
    if "size" not in opts:
        raise ConfigSyntaxError("missing size=", lineno, kind_col)

    def get(key, conv, *args):
        value, col = opts[key]
        return conv(value, lineno, col, *args)

    size = get("size", _dims, (1,) if kind == "full" else (3,))
    fields = {"index": index, "kind": kind, "size": size}
    if kind in ("conv", "pool"):
        if "kernel" not in opts:
            raise ConfigSyntaxError(f"{kind} layer needs kernel=", lineno, kind_col)
        fields["kernel"] = get("kernel", _dims, (2,))
        fields["stride"] = (
            get("stride", _int, 1) if "stride" in opts else (1 if kind == "conv" else fields["kernel"][0])
        )
    if kind == "conv":
        fields["padding"] = get("padding", _int, 0) if "padding" in opts else 0
    channels = size[-1]
    if "features" in opts:
        features = get("features", _int, 1)
        if features != channels:
            raise ShapeError(
                f"line {lineno}: features={features} disagrees with size {format_size(size)}"
            )
    fields["features"] = channels if kind != "input" else None
    if kind in ("conv", "full"):
        if "theta" in opts:
            fields["theta"] = get("theta", _float)
            if fields["theta"] <= 0:
                raise ConfigSyntaxError("theta must be positive", lineno, opts["theta"][1])
        if "lambda" in opts:
            fields["lam"] = get("lambda", _float)
            if not 0.0 <= fields["lam"] <= 1.0:
                raise ConfigSyntaxError("lambda must lie in [0, 1]", lineno, opts["lambda"][1])
    else:
        # pooling is OR-pooling: unit weights, threshold 1, no leak
        fields["theta"], fields["lam"] = 1.0, 0.0
    return LayerSpec(**fields)


def parse_network(text: str, base_dir=None) -> NetworkSpec:
    """Parse a network config into a validated :class:`NetworkSpec`.

    A ``weights`` path is resolved against ``base_dir`` (or the working
    directory). Without one, every weighted layer is zero-initialized.
    """
    layers = []
    weights_ref = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        head, col = toks[0]
        if head == "weights":
            if len(toks) != 2:
                raise ConfigSyntaxError("expected 'weights <path>'", lineno, col)
            if weights_ref is not None:
                raise ConfigSyntaxError("duplicate weights directive", lineno, col)
            weights_ref = toks[1][0]
        elif head == "layer":
            layer = _parse_layer(toks, lineno, len(layers))
            if layer.kind == "input" and layers:
                raise ShapeError(f"line {lineno}: input layer only allowed at position 0")
            if layer.kind != "input" and not layers:
                raise ShapeError(f"line {lineno}: layer 0 must be an input layer")
            if layers:
                try:
                    inferred = infer_shape(layers[-1].size, layer)
                except IncompatibleShape as exc:
                    raise IncompatibleShape(f"line {lineno}: {exc}") from None
                if inferred != layer.size:
                    raise ShapeError(
                        f"line {lineno}: declared size {format_size(layer.size)} but "
                        f"inferred {format_size(inferred)}"
                    )
            layers.append(layer)
        else:
            raise ConfigSyntaxError(f"unknown directive {head!r}", lineno, col)
    net = NetworkSpec(tuple(layers))
    if weights_ref is None:
        return net
    path = Path(weights_ref)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MissingWeights(f"cannot read weight file {path}: {exc.strerror}") from None
    return load_weights(net, data)


def load_network(path) -> NetworkSpec:
    path = Path(path)
    return parse_network(path.read_text(encoding="utf-8"), base_dir=path.parent)


def emit_network(net: NetworkSpec, weights_path=None) -> str:
    lines = []
    if weights_path is not None:
        lines.append(f"weights {weights_path}")
    for layer in net.layers:
        parts = ["layer", str(layer.index), layer.kind, f"size={format_size(layer.size)}"]
        if layer.kind in ("conv", "pool"):
            parts.append(f"kernel={format_size(layer.kernel)}")
        if layer.kind != "input":
            parts.append(f"features={layer.features}")
        if layer.kind in ("conv", "pool"):
            parts.append(f"stride={layer.stride}")
        if layer.kind == "conv":
            parts.append(f"padding={layer.padding}")
        if layer.kind in WEIGHTED:
            parts += [f"theta={layer.theta!r}", f"lambda={layer.lam!r}"]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# -- weight file -------------------------------------------------------------


def read_weight_blocks(data: bytes) -> dict:
    """Decode a weight file into ``{layer_index: (scale, int8 values)}``."""
    blocks, pos = {}, 0
    last = -1
    while pos < len(data):
        if pos + _BLOCK_HEADER.size > len(data):
            raise MalformedRecord(f"truncated block header at byte {pos}")
        index, count, scale = _BLOCK_HEADER.unpack_from(data, pos)
        pos += _BLOCK_HEADER.size
        if pos + count > len(data):
            raise MalformedRecord(f"block for layer {index} truncated at byte {pos}")
        if index <= last:
            raise MalformedRecord(f"weight blocks out of layer order at layer {index}")
        last = index
        blocks[index] = (scale, np.frombuffer(data, dtype=np.int8, count=count, offset=pos))
        pos += count
    return blocks


def load_weights(net: NetworkSpec, data: bytes) -> NetworkSpec:
    blocks = read_weight_blocks(data)
    new = {}
    for i, layer in enumerate(net.layers):
        if layer.kind not in WEIGHTED:
            if i in blocks:
                raise ShapeError(f"weight file has a block for {layer.kind} layer {i}")
            continue
        if i not in blocks:
            raise MissingWeights(f"weight file has no block for layer {i}")
        scale, values = blocks.pop(i)
        shape = net.weights[i].shape
        if values.size != math.prod(shape):
            raise ShapeError(
                f"layer {i}: weight block has {values.size} values, expected {math.prod(shape)}"
            )
        new[i] = QuantWeights(values.reshape(shape), scale)
    if blocks:
        raise ShapeError(f"weight file has blocks for unknown layers {sorted(blocks)}")
    return net.with_weights(new)


def dump_weights(net: NetworkSpec) -> bytes:
    out = bytearray()
    for i, w in enumerate(net.weights):
        if w is None:
            continue
        out += _BLOCK_HEADER.pack(i, w.values.size, w.scale)
        out += w.values.tobytes()
    return bytes(out)


# -- reference network -------------------------------------------------------


def reference_config() -> str:
    """Config text of the 8-layer DVS gesture network."""
    return resources.files("evsnn.data").joinpath("dvs_gesture.net").read_text("utf-8")


def reference_network() -> NetworkSpec:
    return parse_network(reference_config())


def random_weights(net: NetworkSpec, rng: np.random.Generator, gain: float = 2.0) -> NetworkSpec:
    """Quantized random weights, scaled by fan-in so activity propagates."""
    new = {}
    for i, w in enumerate(net.weights):
        if w is None:
            continue
        fan_in = math.prod(w.shape[:-1])
        real = rng.normal(0.0, gain * net.layers[i].theta / math.sqrt(fan_in), w.shape)
        new[i] = quantize(real)
    return net.with_weights(new)
