"""RMSProp and the two training loops (general inverse, compression).

Every iteration draws a fresh target network. The target is frozen; the
trainable state is the host network (and, for compression, the
meta-parameterized decoder). Training is strictly sequential so a run is a
pure function of its config and seed.

Random streams: model initialization, the training draws, and each periodic
evaluation use separate substreams of the run's base stream. Evaluation
streams are keyed by iteration, so evaluation never perturbs training and a
resumed run sees the same evaluation draws as an uninterrupted one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .errors import CheckpointError, ConfigError, NnpnnError, NonFiniteError, ResampleRequired
from .metrics import EvalStats, MetricsRow, manhattan_ratio, summarize
from .model import nnpnn_forward, nnpnn_init
from .networks import MetaNetwork, NetTemplate, dense_forward, evaluate, generate_nn, meta_forward, random_input
from .rng import Rng
from .serialize import from_hex, to_hex

log = logging.getLogger(__name__)

INIT_STREAM, TRAIN_STREAM, EVAL_STREAM = 0, 1, 2


class TrainingAborted(NnpnnError):
    """A non-finite loss or gradient stopped training.

    ``checkpoint`` holds the last good state (before the failing update).
    """

    def __init__(self, message, iteration, checkpoint):
        super().__init__(message)
        self.iteration = iteration
        self.checkpoint = checkpoint


@dataclass
class RmsState:
    v: np.ndarray
    lr: float = 2e-5
    rho: float = 0.9
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size, lr=2e-5, rho=0.9, eps=1e-8):
        return cls(np.zeros(size), lr, rho, eps)


def rmsprop_step(state, params, grads, iteration=None):
    """In-place RMSProp update of the flat ``params`` array.

    ``v <- rho*v + (1-rho)*g^2``; ``params <- params - lr*g/(sqrt(v)+eps)``.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape or state.v.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, v {state.v.shape}")
    if not np.isfinite(grads).all():
        raise NonFiniteError(f"non-finite gradient at iteration {iteration}", provenance=iteration)
    v = state.v
    v *= state.rho
    v += (1.0 - state.rho) * (grads * grads)
    params -= state.lr * grads / (np.sqrt(v) + state.eps)
    return params, state


# --------------------------------------------------------------------------
# evaluation


def evaluate_inverse(F, rng, trials, template=NetTemplate()):
    """Deviation ratio ``|G(F(G(x), G)) - G(x)|_1 / |G(x)|_1`` over fresh draws."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios = []
    while len(ratios) < trials:
        G = generate_nn(rng, template)
        target = evaluate(G, random_input(rng, template.input_dim))
        g = ad.Graph(record=False)
        out, _ = nnpnn_forward(F, target, G, g)
        pred = dense_forward(G, out, g).value
        try:
            ratios.append(manhattan_ratio(pred, target))
        except ResampleRequired:
            continue
    return summarize(ratios)


def _compression_samples(F1, F2, rng, trials, template, with_ratio=True):
    mses, ratios = [], []
    while len(mses) < trials:
        G = generate_nn(rng, template)
        g = ad.Graph(record=False)
        x_meta, _ = nnpnn_forward(F1, None, G, g)
        x = random_input(rng, template.input_dim)
        pred = meta_forward(F2, g.input(x), x_meta, g).value
        target = evaluate(G, x)
        if with_ratio:
            try:
                ratios.append(manhattan_ratio(pred, target))
            except ResampleRequired:
                continue
        r = pred - target
        mses.append(float(r @ r / r.size))
    return mses, ratios


def evaluate_compression(F1, F2, rng, trials, template=NetTemplate()):
    """Per-example MSE of ``F2(x, F1(G))`` against ``G(x)`` over fresh draws."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mses, _ = _compression_samples(F1, F2, rng, trials, template, with_ratio=False)
    return summarize(mses)


# --------------------------------------------------------------------------
# runs


class Run:
    """Mutable training state for one experiment.

    ``history`` holds one :class:`MetricsRow` per periodic evaluation; the
    row's ``loss`` is the mean training loss over the iterations since the
    previous row.
    """

    def __init__(self, cfg, rng=None):
        if not isinstance(cfg, RunConfig):
            raise ConfigError("cfg must be a RunConfig")
        self.cfg = cfg
        self.base = rng if rng is not None else Rng(cfg.seed)
        init = self.base.substream(INIT_STREAM)
        self.F = nnpnn_init(init, cfg.host_config(), name="nnpnn")
        self.F2 = None
        if cfg.experiment == "compress":
            m = cfg.meta
            self.F2 = MetaNetwork(init, m.meta_dim, cfg.target.input_dim, cfg.target.output_dim,
                                  m.hidden_layers, m.hidden_width, m.connectivity)
        self.opt = {s.name: RmsState.zeros(s.size, cfg.lr, cfg.rho, cfg.eps) for s in self.stores}
        self.train_rng = self.base.substream(TRAIN_STREAM)
        self.iteration = 0
        self.history = []
        self._window_sum = 0.0
        self._window_count = 0

    @property
    def stores(self):
        return [self.F.store] + ([self.F2.store] if self.F2 is not None else [])

    # -- one iteration ------------------------------------------------------

    def _inverse_loss(self, g):
        t = self.cfg.target
        G = generate_nn(self.train_rng, t)
        f_in = evaluate(G, random_input(self.train_rng, t.input_dim))
        out, _ = nnpnn_forward(self.F, f_in, G, g)
        return ad.mae_loss(g, dense_forward(G, out, g), f_in)

    def _compression_loss(self, g):
        t = self.cfg.target
        G = generate_nn(self.train_rng, t)
        x_meta, _ = nnpnn_forward(self.F, None, G, g)
        x = random_input(self.train_rng, t.input_dim)
        pred = meta_forward(self.F2, g.input(x), x_meta, g)
        return ad.mse_loss(g, pred, evaluate(G, x))

    def step(self):
        rng_state = self.train_rng.get_state()
        try:
            g = ad.Graph()
            one = self._inverse_loss if self.cfg.experiment == "inverse" else self._compression_loss
            losses = [one(g) for _ in range(self.cfg.batch_size)]
            loss = losses[0] if len(losses) == 1 else ad.mean_of(g, losses)
            grads = g.backward(loss)
        except NonFiniteError as exc:
            # nothing has been updated yet; rewind the draws so the state is the last good one
            self.train_rng = Rng.from_state(rng_state)
            raise TrainingAborted(f"training aborted at iteration {self.iteration + 1}: {exc}",
                                  self.iteration + 1, self.state_dict()) from exc
        value = float(loss.value[0])
        for s in self.stores:
            rmsprop_step(self.opt[s.name], s.flat, grads[s], self.iteration + 1)
        self.iteration += 1
        self._window_sum += value
        self._window_count += 1
        return value

    def evaluate(self, trials=None, rng=None):
        """Deviation-ratio statistics (and, for compression, MSE statistics)."""
        trials = trials or self.cfg.eval_trials
        rng = rng or self.base.substream(EVAL_STREAM, self.iteration)
        if self.cfg.experiment == "inverse":
            return evaluate_inverse(self.F, rng, trials, self.cfg.target), None
        mses, ratios = _compression_samples(self.F, self.F2, rng, trials, self.cfg.target)
        return summarize(ratios), summarize(mses)

    def log_row(self):
        ratio, _ = self.evaluate()
        loss = self._window_sum / self._window_count if self._window_count else math.nan
        row = MetricsRow(self.iteration, loss, ratio.mean, ratio.median, ratio.frac_within_10, ratio.frac_within_25)
        self.history.append(row)
        self._window_sum, self._window_count = 0.0, 0
        log.info("iter %d loss %.6g ratio mean %.4g median %.4g", row.iteration, row.loss,
                 row.ratio_mean, row.ratio_median)
        return row

    def advance(self, until=None, on_checkpoint=None):
        """Train up to iteration ``until`` (default: the configured count)."""
        until = self.cfg.iterations if until is None else until
        cfg = self.cfg
        while self.iteration < until:
            self.step()
            if self.iteration % cfg.eval_every == 0 or self.iteration == until:
                self.log_row()
            if on_checkpoint is not None and self.iteration % cfg.checkpoint_every == 0 and self.iteration < until:
                on_checkpoint(self.iteration, self.state_dict())
        return self.history

    # -- state ----------------------------------------------------------------

    def state_dict(self):
        models = {"nnpnn": _store_json(self.F.store, self.F.config.__dict__)}
        if self.F2 is not None:
            models["meta"] = _store_json(self.F2.store, {
                "meta_dim": self.F2.meta_dim, "hidden_layers": self.F2.hidden_layers,
                "hidden_width": self.F2.hidden_width, "connectivity": self.F2.connectivity})
        return {
            "config": self.cfg.to_json(),
            "iteration": self.iteration,
            "models": models,
            "optimizer": {
                name: {"v": to_hex(st.v), "lr": float(st.lr).hex(), "rho": float(st.rho).hex(),
                       "eps": float(st.eps).hex()}
                for name, st in self.opt.items()
            },
            "rng": {"base": {"seed": self.base.seed, "path": list(self.base.path)},
                    "train": self.train_rng.get_state()},
            "window": {"sum": float(self._window_sum).hex(), "count": self._window_count},
            "history": [
                [row.iteration] + [float(v).hex() for v in
                                   (row.loss, row.ratio_mean, row.ratio_median, row.frac10, row.frac25)]
                for row in self.history
            ],
        }

    def load_state_dict(self, state):
        try:
            for s, key in zip(self.stores, ("nnpnn", "meta")):
                _load_store(s, state["models"][key])
            for name, st in self.opt.items():
                rec = state["optimizer"][name]
                st.v = from_hex(rec["v"], (self.opt[name].v.size,))
                st.lr, st.rho, st.eps = (float.fromhex(rec[k]) for k in ("lr", "rho", "eps"))
            self.train_rng = Rng.from_state(state["rng"]["train"])
            self.iteration = int(state["iteration"])
            self._window_sum = float.fromhex(state["window"]["sum"])
            self._window_count = int(state["window"]["count"])
            self.history = [MetricsRow(int(r[0]), *(float.fromhex(v) for v in r[1:])) for r in state["history"]]
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            if isinstance(exc, CheckpointError):
                raise
            raise CheckpointError(f"malformed run state: {exc!r}") from None

    @classmethod
    def from_state(cls, state, cfg):
        b = state.get("rng", {}).get("base", {})
        run = cls(cfg, Rng(b.get("seed", cfg.seed), b.get("path", ())))
        models = state.get("models", {})
        try:
            _check_config(models["nnpnn"]["config"], run.F.config.__dict__, "nnpnn")
        except KeyError:
            raise CheckpointError("checkpoint has no host network record") from None
        run.load_state_dict(state)
        return run


def _store_json(store, config):
    return {
        "config": dict(config),
        "params": [{"name": p.name, "shape": list(p.shape), "values": to_hex(p.value)} for p in store.params],
    }


def _check_config(saved, expected, what):
    if dict(saved) != dict(expected):
        raise CheckpointError(f"{what} architecture in checkpoint {saved} does not match config {expected}")


def _load_store(store, rec):
    params = rec["params"]
    if len(params) != len(store.params):
        raise CheckpointError(f"{store.name}: expected {len(store.params)} arrays, found {len(params)}")
    for p, saved in zip(store.params, params):
        if saved["name"] != p.name or tuple(saved["shape"]) != p.shape:
            raise CheckpointError(
                f"{store.name}: array {saved['name']}{tuple(saved['shape'])} does not match {p.name}{p.shape}")
        store.flat[p.offset:p.offset + p.size] = from_hex(saved["values"], p.shape).ravel()


def _train(cfg, rng, experiment, on_checkpoint):
    if cfg.experiment != experiment:
        raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {experiment!r}")
    run = Run(cfg, rng)
    history = run.advance(on_checkpoint=on_checkpoint)
    return history, run.state_dict()


def train_inverse(cfg, rng=None, on_checkpoint=None):
    """Train a host network so that ``G(F(G(x), G)) ~ G(x)``; returns ``(history, state)``."""
    return _train(cfg, rng, "inverse", on_checkpoint)


def train_compression(cfg, rng=None, on_checkpoint=None):
    """Jointly train encoder ``F1`` and decoder ``F2`` so that ``F2(x, F1(G)) ~ G(x)``."""
    return _train(cfg, rng, "compress", on_checkpoint)
