"""Randomized finite-difference suites over every differentiable component.

Each case builds a small random model, compares graph gradients with
central differences, and reports the worst relative error. Losses are
smooth (MSE against a random target) except for the inverse-loss suite,
which uses the training MAE through a linear target network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .model import NnpnnConfig, ProcessingBlock, SubBlock, block_forward, nnpnn_forward, nnpnn_init, sub_block_forward
from .networks import MetaNetwork, NetTemplate, dense_forward, generate_nn, meta_forward
from .rng import Rng

EPS = 1e-5
THRESHOLD = 1e-4
MAX_COORDS = 48


@dataclass
class CaseResult:
    suite: str
    case: int
    target: str
    max_rel_error: float
    worst_index: int


def _check(f, x, rng, fault):
    coords = None
    if x.size > MAX_COORDS:
        coords = np.sort(rng.choice(x.size, MAX_COORDS))
    if fault:
        inner = f

        def f(z):
            v, gr = inner(z)
            return v, -gr

    errs, _, _ = ad.gradient_errors(f, x, eps=EPS, coords=coords)
    k = int(np.argmax(errs))
    idx = k if coords is None else int(coords[k])
    return float(errs[k]), idx


def _dense_case(rng, fault):
    t = NetTemplate(input_dim=rng.integer(1, 3), output_dim=rng.integer(1, 3), hidden_width=rng.integer(2, 5))
    G = generate_nn(rng, t)
    x = rng.normal(1.0, t.input_dim)
    target = rng.normal(1.0, t.output_dim)

    def build(g, xn):
        return ad.mse_loss(g, dense_forward(G, xn, g), target)

    return [("input",) + _check(ad.wrt_input(build), x, rng, fault)]


def _sub_block_case(rng, fault):
    store = ad.ParamStore("sb")
    n_in = rng.integer(1, 4)
    sb = SubBlock(store, rng, "sb", n_in, rng.integer(1, 4), rng.integer(1, 4), rng.integer(1, 4),
                  linear_output=bool(rng.integer(0, 1)))
    x = rng.normal(1.0, n_in)
    target = rng.normal(1.0, sb.out_dim)

    def build_params(g):
        return ad.mse_loss(g, sub_block_forward(sb, g.input(x), g), target)

    def build_input(g, xn):
        return ad.mse_loss(g, sub_block_forward(sb, xn, g), target)

    return [
        ("params",) + _check(ad.wrt_store(build_params, store), store.flat.copy(), rng, fault),
        ("input",) + _check(ad.wrt_input(build_input), x, rng, fault),
    ]


def _block_case(rng, fault):
    store = ad.ParamStore("block")
    n_in, n_out = rng.integer(1, 4), rng.integer(1, 4)
    pb = ProcessingBlock(store, rng, "pb", n_in, n_out, rng.integer(2, 4))
    x = rng.normal(1.0, n_in)
    target = rng.normal(1.0, n_out)

    def build(g):
        return ad.mse_loss(g, block_forward(pb, g.input(x), g), target)

    return [("params",) + _check(ad.wrt_store(build, store), store.flat.copy(), rng, fault)]


_HOST_SHAPES = [(1, 1), (1, 4), (2, 1), (2, 4)]


def _nnpnn_case(rng, fault, case):
    l, r = _HOST_SHAPES[case % len(_HOST_SHAPES)]
    seeded = case % 8 >= 4
    t = NetTemplate(input_dim=2, output_dim=2, hidden_width=5)
    cfg = NnpnnConfig(l=l, r=r, width=3, query_dim=2, read_dim=2, input_dim=2, output_dim=2, seed_input=seeded)
    F = nnpnn_init(rng, cfg)
    G = generate_nn(rng, t)
    x = None if seeded else rng.normal(1.0, 2)
    target = rng.normal(1.0, 2)
    if seeded:
        F.store.flat[F.seed_vector.offset:F.seed_vector.offset + 2] = rng.normal(1.0, 2)

    def build(g):
        out, _ = nnpnn_forward(F, x, G, g)
        return ad.mse_loss(g, out, target)

    out = [(f"params[l={l},r={r}]",) + _check(ad.wrt_store(build, F.store), F.store.flat.copy(), rng, fault)]
    if not seeded:
        def build_input(g, xn):
            return ad.mse_loss(g, nnpnn_forward(F, xn, G, g)[0], target)

        out.append((f"input[l={l},r={r}]",) + _check(ad.wrt_input(build_input), x, rng, fault))
    return out


def _meta_case(rng, fault, case):
    meta_dim = rng.integer(0, 4)
    conn = "dense" if case % 2 == 0 else "chain"
    mn = MetaNetwork(rng, meta_dim, rng.integer(1, 3), rng.integer(1, 3), rng.integer(0, 3), rng.integer(1, 4), conn)
    x = rng.normal(1.0, mn.input_dim)
    xm = rng.normal(1.0, meta_dim)
    target = rng.normal(1.0, mn.output_dim)

    def build_params(g):
        return ad.mse_loss(g, meta_forward(mn, g.input(x), g.input(xm), g), target)

    def build_meta(g, mnode):
        return ad.mse_loss(g, meta_forward(mn, g.input(x), mnode, g), target)

    def build_x(g, xnode):
        return ad.mse_loss(g, meta_forward(mn, xnode, g.input(xm), g), target)

    res = [
        (f"params[{conn}]",) + _check(ad.wrt_store(build_params, mn.store), mn.store.flat.copy(), rng, fault),
        (f"input[{conn}]",) + _check(ad.wrt_input(build_x), x, rng, fault),
    ]
    if meta_dim:
        res.append((f"x_meta[{conn}]",) + _check(ad.wrt_input(build_meta), xm, rng, fault))
    return res


def linear_target(W, b):
    """A target network with no hidden nonlinearity, as a ``G(graph, node)`` callable."""
    return lambda g, xn: ad.affine(g, W, b, xn)


def _inverse_case(rng, fault):
    cfg = NnpnnConfig(l=1, r=1, width=3)
    F = nnpnn_init(rng, cfg)
    W = rng.uniform(-1, 1, (2, 2))
    b = rng.uniform(-1, 1, 2)
    G = linear_target(W, b)
    # unit-scale inputs keep tanh units out of saturation, where gradients fall below
    # the resolution of central differences
    f_in = W @ rng.normal(1.0, 2) + b

    def build(g):
        out, _ = nnpnn_forward(F, f_in, G, g)
        return ad.mae_loss(g, G(g, out), f_in)

    return [("params[mae,linear G]",) + _check(ad.wrt_store(build, F.store), F.store.flat.copy(), rng, fault)]


SUITES = ("dense", "sub_block", "block", "nnpnn", "meta", "inverse_loss")


def run_suites(seed=0, count=20, fault=False):
    """Run ``count`` random cases of every suite; returns a list of :class:`CaseResult`."""
    results = []
    base = Rng(seed)
    for s_idx, suite in enumerate(SUITES):
        for case in range(count):
            rng = base.substream(s_idx, case)
            if suite == "dense":
                rows = _dense_case(rng, fault)
            elif suite == "sub_block":
                rows = _sub_block_case(rng, fault)
            elif suite == "block":
                rows = _block_case(rng, fault)
            elif suite == "nnpnn":
                rows = _nnpnn_case(rng, fault, case)
            elif suite == "meta":
                rows = _meta_case(rng, fault, case)
            else:
                rows = _inverse_case(rng, fault)
            results += [CaseResult(suite, case, *row) for row in rows]
    return results


def report(results, threshold=THRESHOLD):
    """Format a per-suite summary; returns ``(text, ok)``."""
    lines = []
    ok = True
    for suite in SUITES:
        rs = [r for r in results if r.suite == suite]
        if not rs:
            continue
        worst = max(rs, key=lambda r: r.max_rel_error)
        passed = worst.max_rel_error < threshold
        ok &= passed
        lines.append(f"{suite:<13} cases={len({r.case for r in rs}):<4} max_rel_error={worst.max_rel_error:.3e} "
                     f"{'PASS' if passed else 'FAIL'}")
    if not ok:
        worst = max(results, key=lambda r: r.max_rel_error)
        lines.append(f"worst: suite={worst.suite} case={worst.case} target={worst.target} "
                     f"coordinate={worst.worst_index} rel_error={worst.max_rel_error:.3e}")
    return "\n".join(lines), ok
