"""Naive reference implementations: plain Python loops over lists, no graph.

These read parameters out of the model objects but share no evaluation code
with the package, so agreement with them is independent evidence.
"""

import math


def _mat(W):
    return [[float(v) for v in row] for row in W]


def _vec(b):
    return [float(v) for v in b]


def affine(W, b, x):
    W, b = _mat(W), _vec(b)
    out = []
    for i in range(len(b)):
        s = 0.0
        for j in range(len(x)):
            s += W[i][j] * x[j]
        out.append(s + b[i])
    return out


def tanh(v):
    return [math.tanh(t) for t in v]


def dense(layers, x):
    h = list(x)
    for k, (W, b) in enumerate(layers):
        h = affine(W, b, h)
        if k < len(layers) - 1:
            h = tanh(h)
    return h


def sub_block(sb, x):
    (W1, b1), (W2, b2), (W3, b3) = [(W.value, b.value) for W, b in (sb.d1, sb.d2, sb.d3)]
    y1 = tanh(affine(W1, b1, x))
    y2 = tanh(affine(W2, b2, y1))
    y3 = affine(W3, b3, list(x) + y1 + y2)
    return y3 if sb.linear_output else tanh(y3)


def block(pb, x):
    h = list(x)
    for sb in pb.sub_blocks:
        h = sub_block(sb, h)
    return h


def nnpnn(F, x, G_layers):
    cfg = F.config
    h = list(x) if x is not None else _vec(F.seed_vector.value)
    qd = cfg.query_dim
    for phase in F.phases:
        q = block(phase, h)
        nxt = []
        for n in range(cfg.r):
            xn = q[n * qd:(n + 1) * qd]
            nxt += dense(G_layers, xn) + xn
        if cfg.carry_state:
            nxt += h
        h = nxt
    return block(F.head, h)


def meta(mn, x, x_meta):
    outs = [list(x)]
    h = list(x)
    last = len(mn.layers) - 1
    for i, (W, b) in enumerate(mn.layers):
        if mn.connectivity == "dense":
            inp = list(x_meta)
            for o in outs:
                inp += o
        else:
            inp = list(x_meta) + h
        h = affine(W.value, b.value, inp)
        if i < last:
            h = tanh(h)
            outs.append(h)
    return h
