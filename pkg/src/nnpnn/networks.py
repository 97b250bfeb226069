"""Target networks (G), random inputs, and the meta-parameterized network.

Target networks are plain dense nets with tanh hidden layers and a linear
output layer. They are frozen: their arrays are read-only and enter the
autodiff graph as constants, so gradients flow through ``G(x)`` with respect
to ``x`` but never into ``G``'s own weights.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore
from .errors import CheckpointError, ConfigError, ShapeError
from .serialize import from_hex, matrix_from_hex, matrix_to_hex, to_hex

MAX_HIDDEN_LAYERS = 5
INPUT_SCALE = 10.0  # std of random_input (variance 100)


@dataclass(frozen=True)
class NetSpec:
    input_dim: int = 2
    output_dim: int = 2
    hidden_layers: int = 1
    hidden_width: int = 5

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_width) < 1:
            raise ConfigError(f"network dimensions must be >= 1: {self}")
        if not 1 <= self.hidden_layers <= MAX_HIDDEN_LAYERS:
            raise ConfigError(f"hidden_layers must be in [1, {MAX_HIDDEN_LAYERS}], got {self.hidden_layers}")

    def layer_dims(self):
        dims = [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    def param_count(self):
        return sum(i * o + o for i, o in self.layer_dims())


@dataclass(frozen=True)
class NetTemplate:
    """The family ``generate_nn`` draws from: depth is uniform on [min_layers, max_layers]."""

    input_dim: int = 2
    output_dim: int = 2
    min_layers: int = 1
    max_layers: int = 5
    hidden_width: int = 5
    init_scale: float = 1.0

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_width) < 1:
            raise ConfigError(f"network dimensions must be >= 1: {self}")
        if not 1 <= self.min_layers <= self.max_layers <= MAX_HIDDEN_LAYERS:
            raise ConfigError(
                f"need 1 <= min_layers <= max_layers <= {MAX_HIDDEN_LAYERS}, "
                f"got {self.min_layers}..{self.max_layers}"
            )
        if not self.init_scale > 0:
            raise ConfigError("init_scale must be positive")

    def spec(self, hidden_layers):
        return NetSpec(self.input_dim, self.output_dim, hidden_layers, self.hidden_width)

    def min_param_count(self):
        """Smallest parameter count any network in the family can have."""
        return min(self.spec(k).param_count() for k in range(self.min_layers, self.max_layers + 1))


class DenseNetwork:
    """A frozen dense network: tanh on hidden layers, linear output."""

    def __init__(self, spec, layers, init=None, seed=None):
        self.spec = spec
        dims = spec.layer_dims()
        if len(layers) != len(dims):
            raise ShapeError(f"expected {len(dims)} layers, got {len(layers)}")
        frozen = []
        for (n_in, n_out), (W, b) in zip(dims, layers):
            W = np.array(W, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if W.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ShapeError(f"layer shapes {W.shape}, {b.shape} do not match ({n_out}, {n_in})")
            if not (np.isfinite(W).all() and np.isfinite(b).all()):
                raise ShapeError("network parameters must be finite")
            W.flags.writeable = False
            b.flags.writeable = False
            frozen.append((W, b))
        self.layers = frozen
        self.init = init or {"kind": "explicit"}
        self.seed = seed

    def to_json(self):
        return {
            "spec": asdict(self.spec),
            "layers": [{"weights": matrix_to_hex(W), "bias": to_hex(b)} for W, b in self.layers],
            "init": self.init,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            spec = NetSpec(**obj["spec"])
            dims = spec.layer_dims()
            if len(obj["layers"]) != len(dims):
                raise CheckpointError("layer count does not match spec")
            layers = [
                (matrix_from_hex(L["weights"], (o, i)), from_hex(L["bias"], (o,)))
                for (i, o), L in zip(dims, obj["layers"])
            ]
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"malformed network record: {exc}") from None
        return cls(spec, layers, init=obj.get("init"), seed=obj.get("seed"))

    def __repr__(self):
        return f"DenseNetwork({self.spec})"


def generate_nn(rng, template=NetTemplate()):
    """Draw a random target network from ``template``.

    Depth is uniform over the template's layer range; every weight and bias
    is i.i.d. uniform on ``[-init_scale, init_scale]``.
    """
    depth = rng.integer(template.min_layers, template.max_layers)
    spec = template.spec(depth)
    s = template.init_scale
    layers = []
    for n_in, n_out in spec.layer_dims():
        W = rng.uniform(-s, s, (n_out, n_in))
        b = rng.uniform(-s, s, n_out)
        layers.append((W, b))
    init = {"kind": "uniform", "low": -s, "high": s}
    return DenseNetwork(spec, layers, init=init, seed={"seed": rng.seed, "path": list(rng.path)})


def param_count(net):
    return sum(W.size + b.size for W, b in net.layers)


def random_input(rng, dim):
    """i.i.d. N(0, 100) vector."""
    if dim < 0:
        raise ValueError("dim must be non-negative")
    return rng.normal(INPUT_SCALE, dim)


def dense_forward(net, x, g):
    if x.dim != net.spec.input_dim:
        raise ShapeError(f"network expects input dim {net.spec.input_dim}, got {x.dim}")
    h = x
    last = len(net.layers) - 1
    for k, (W, b) in enumerate(net.layers):
        h = ad.affine(g, W, b, h)
        if k < last:
            h = ad.tanh_act(g, h)
    return h


def evaluate(net, x):
    """Graph-free convenience: ``G(x)`` as an array."""
    g = ad.Graph(record=False)
    return dense_forward(net, g.input(x), g).value


# --------------------------------------------------------------------------
# meta-parameterized network


CONNECTIVITY = ("dense", "chain")


class MetaNetwork:
    """Network of ``(x, x_meta)`` with the meta vector fed into every layer.

    ``dense`` connectivity: layer ``i`` reads ``concat(x_meta, x, h_1, ..., h_{i-1})``.
    ``chain`` connectivity: layer ``i`` reads ``concat(x_meta, h_{i-1})`` with
    ``h_0 = x``. Hidden layers use tanh, the output layer is linear.
    """

    def __init__(self, rng, meta_dim, input_dim=2, output_dim=2, hidden_layers=3,
                 hidden_width=32, connectivity="dense", store=None):
        if meta_dim < 0 or min(input_dim, output_dim, hidden_width) < 1 or hidden_layers < 0:
            raise ConfigError("invalid meta network dimensions")
        if connectivity not in CONNECTIVITY:
            raise ConfigError(f"connectivity must be one of {CONNECTIVITY}, got {connectivity!r}")
        self.meta_dim = meta_dim
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.hidden_layers = hidden_layers
        self.hidden_width = hidden_width
        self.connectivity = connectivity
        self.store = store if store is not None else ParamStore("meta")
        self.layers = []
        widths = [hidden_width] * hidden_layers + [output_dim]
        for i, n_out in enumerate(widths):
            n_in = self.layer_input_dim(i)
            s = 1.0 / np.sqrt(n_in)
            W = self.store.add(f"meta.{i}.W", rng.uniform(-s, s, (n_out, n_in)))
            b = self.store.add(f"meta.{i}.b", rng.uniform(-s, s, n_out))
            self.layers.append((W, b))

    def layer_input_dim(self, i):
        if self.connectivity == "dense":
            return self.meta_dim + self.input_dim + i * self.hidden_width
        return self.meta_dim + (self.input_dim if i == 0 else self.hidden_width)

    def param_count(self):
        return sum(W.size + b.size for W, b in self.layers)


def meta_forward(mn, x, x_meta, g):
    if x.dim != mn.input_dim:
        raise ShapeError(f"meta network expects input dim {mn.input_dim}, got {x.dim}")
    if x_meta.dim != mn.meta_dim:
        raise ShapeError(f"meta network expects meta dim {mn.meta_dim}, got {x_meta.dim}")
    outputs = [x]
    last = len(mn.layers) - 1
    h = x
    for i, (W, b) in enumerate(mn.layers):
        if mn.connectivity == "dense":
            inp = ad.concat(g, [x_meta] + outputs)
        else:
            inp = ad.concat(g, [x_meta, h])
        h = ad.affine(g, W, b, inp)
        if i < last:
            h = ad.tanh_act(g, h)
            outputs.append(h)
    return h
