"""The network-processing host network.

A host network runs ``l`` phases. Each phase maps its input through a
processing block to ``r`` query vectors, evaluates the target network on each
query, and hands ``(G(x_1), x_1, ..., G(x_r), x_r)`` to the next phase. A final
processing block turns the last phase's reads into the output.

A processing block is two chained sub-blocks; a sub-block is three dense
layers where the third sees the sub-block input together with the first two
layers' outputs.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore
from .errors import ConfigError, ShapeError
from .networks import DenseNetwork, dense_forward


@dataclass(frozen=True)
class NnpnnConfig:
    l: int = 2
    r: int = 4
    width: int = 32
    query_dim: int = 2
    read_dim: int = 2
    input_dim: int = 2
    output_dim: int = 2
    seed_input: bool = False
    carry_state: bool = False

    def __post_init__(self):
        if self.l < 1 or self.r < 1:
            raise ConfigError(f"need l >= 1 and r >= 1, got l={self.l}, r={self.r}")
        if min(self.width, self.query_dim, self.read_dim, self.output_dim) < 1:
            raise ConfigError("widths and dimensions must be >= 1")
        if self.input_dim < 0 or (self.input_dim == 0 and not self.seed_input):
            raise ConfigError("input_dim must be >= 1 (or 0 with seed_input)")

    def phase_input_dims(self):
        dims = [self.input_dim]
        pair = self.r * (self.read_dim + self.query_dim)
        for _ in range(self.l - 1):
            dims.append(pair + (dims[-1] if self.carry_state else 0))
        return dims

    def head_input_dim(self):
        pair = self.r * (self.read_dim + self.query_dim)
        return pair + (self.phase_input_dims()[-1] if self.carry_state else 0)


def sub_block_param_count(n_in, w1, w2, w3):
    return n_in * w1 + w1 + w1 * w2 + w2 + (n_in + w1 + w2) * w3 + w3


def block_param_count(n_in, n_out, width):
    return sub_block_param_count(n_in, width, width, width) + sub_block_param_count(width, width, width, n_out)


def expected_param_count(cfg):
    """Trainable scalar count implied by a config (closed form)."""
    total = sum(block_param_count(d, cfg.r * cfg.query_dim, cfg.width) for d in cfg.phase_input_dims())
    total += block_param_count(cfg.head_input_dim(), cfg.output_dim, cfg.width)
    return total + (cfg.input_dim if cfg.seed_input else 0)


def _dense(store, rng, name, n_in, n_out):
    s = 1.0 / np.sqrt(n_in) if n_in else 1.0
    W = store.add(f"{name}.W", rng.uniform(-s, s, (n_out, n_in)))
    b = store.add(f"{name}.b", rng.uniform(-s, s, n_out))
    return W, b


class SubBlock:
    def __init__(self, store, rng, name, n_in, w1, w2, w3, linear_output=False):
        self.in_dim = n_in
        self.widths = (w1, w2, w3)
        self.linear_output = linear_output
        self.d1 = _dense(store, rng, f"{name}.d1", n_in, w1)
        self.d2 = _dense(store, rng, f"{name}.d2", w1, w2)
        self.d3 = _dense(store, rng, f"{name}.d3", n_in + w1 + w2, w3)

    @property
    def out_dim(self):
        return self.widths[2]


class ProcessingBlock:
    def __init__(self, store, rng, name, n_in, n_out, width):
        self.sub_blocks = (
            SubBlock(store, rng, f"{name}.sb0", n_in, width, width, width),
            SubBlock(store, rng, f"{name}.sb1", width, width, width, n_out, linear_output=True),
        )

    @property
    def in_dim(self):
        return self.sub_blocks[0].in_dim

    @property
    def out_dim(self):
        return self.sub_blocks[1].out_dim


class NnpnnParams:
    """Trainable state of a host network; every array lives in ``store``."""

    def __init__(self, config, store, phases, head, seed_vector):
        self.config = config
        self.store = store
        self.phases = phases
        self.head = head
        self.seed_vector = seed_vector

    @property
    def l(self):
        return self.config.l

    @property
    def r(self):
        return self.config.r

    def param_count(self):
        return self.store.size


def nnpnn_init(rng, config=NnpnnConfig(), name="nnpnn"):
    """Fresh parameters: uniform on ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, zero seed vector."""
    if not isinstance(config, NnpnnConfig):
        raise ConfigError("config must be an NnpnnConfig")
    store = ParamStore(name)
    q = config.r * config.query_dim
    phases = [
        ProcessingBlock(store, rng, f"phase{k}", d, q, config.width)
        for k, d in enumerate(config.phase_input_dims())
    ]
    head = ProcessingBlock(store, rng, "head", config.head_input_dim(), config.output_dim, config.width)
    seed_vector = store.add("seed_vector", np.zeros(config.input_dim)) if config.seed_input else None
    return NnpnnParams(config, store, phases, head, seed_vector)


def sub_block_forward(sb, x, g):
    if x.dim != sb.in_dim:
        raise ShapeError(f"sub-block expects input dim {sb.in_dim}, got {x.dim}")
    y1 = ad.tanh_act(g, ad.affine(g, *sb.d1, x))
    y2 = ad.tanh_act(g, ad.affine(g, *sb.d2, y1))
    y3 = ad.affine(g, *sb.d3, ad.concat(g, [x, y1, y2]))
    return y3 if sb.linear_output else ad.tanh_act(g, y3)


def block_forward(pb, x, g):
    h = x
    for sb in pb.sub_blocks:
        h = sub_block_forward(sb, h, g)
    return h


@dataclass
class QueryRecord:
    phase: int
    index: int
    query: np.ndarray
    read: np.ndarray


class QueryTrace(list):
    """Query records in evaluation order, plus each phase's output state ``h_k``."""

    def __init__(self):
        super().__init__()
        self.states = []


def _reader(G, g):
    if isinstance(G, DenseNetwork):
        return lambda xn: dense_forward(G, xn, g)
    return lambda xn: G(g, xn)


def nnpnn_forward(f, x, G, g):
    """Run the host network on numeric input ``x`` (or its seed vector) and target ``G``.

    ``G`` is a :class:`DenseNetwork` or any callable ``G(graph, node) -> node``;
    it is consulted only through its input-output map. Returns the output
    node and a :class:`QueryTrace`.
    """
    cfg = f.config
    if isinstance(G, DenseNetwork):
        if G.spec.input_dim != cfg.query_dim or G.spec.output_dim != cfg.read_dim:
            raise ShapeError(
                f"target network maps {G.spec.input_dim}->{G.spec.output_dim}, "
                f"host expects {cfg.query_dim}->{cfg.read_dim}"
            )
    if x is None:
        if f.seed_vector is None:
            raise ShapeError("no input given and the host network has no seed vector")
        h = ad.param_vector(g, f.seed_vector)
    else:
        h = x if isinstance(x, ad.VecNode) else g.input(x)
        if h.dim != cfg.input_dim:
            raise ShapeError(f"host network expects input dim {cfg.input_dim}, got {h.dim}")
    read = _reader(G, g)
    trace = QueryTrace()
    qd = cfg.query_dim
    for k, block in enumerate(f.phases):
        queries = block_forward(block, h, g)
        pairs = []
        for n in range(cfg.r):
            xn = ad.take(g, queries, n * qd, (n + 1) * qd)
            yn = read(xn)
            if yn.dim != cfg.read_dim:
                raise ShapeError(f"read has dim {yn.dim}, expected {cfg.read_dim}")
            trace.append(QueryRecord(k, n, xn.value.copy(), yn.value.copy()))
            pairs += [yn, xn]
        if cfg.carry_state:
            pairs.append(h)
        h = ad.concat(g, pairs)
        trace.states.append(h.value.copy())
    return block_forward(f.head, h, g), trace


def config_to_json(cfg):
    return asdict(cfg)
