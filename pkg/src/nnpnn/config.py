"""Run configuration: JSON in, validated frozen dataclasses out.

Unknown keys anywhere in a config document are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .model import NnpnnConfig
from .networks import CONNECTIVITY, NetTemplate

EXPERIMENTS = ("inverse", "compress")


@dataclass(frozen=True)
class HostConfig:
    l: int = 2
    r: int = 4
    width: int = 32
    carry_state: bool = False


@dataclass(frozen=True)
class MetaConfig:
    meta_dim: int = 16
    hidden_layers: int = 3
    hidden_width: int = 32
    connectivity: str = "dense"

    def __post_init__(self):
        if self.connectivity not in CONNECTIVITY:
            raise ConfigError(f"meta.connectivity must be one of {CONNECTIVITY}")
        if self.hidden_layers < 0 or self.hidden_width < 1:
            raise ConfigError("meta network needs hidden_layers >= 0 and hidden_width >= 1")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "inverse"
    seed: int = 0
    iterations: int = 100_000
    lr: float = 2e-5
    rho: float = 0.9
    eps: float = 1e-8
    batch_size: int = 1
    eval_every: int = 1_000
    eval_trials: int = 1_000
    checkpoint_every: int = 10_000
    target: NetTemplate = field(default_factory=NetTemplate)
    host: HostConfig = field(default_factory=HostConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not self.lr > 0 or not 0 < self.rho < 1 or not self.eps > 0:
            raise ConfigError("need lr > 0, 0 < rho < 1, eps > 0")
        if min(self.batch_size, self.eval_every, self.eval_trials, self.checkpoint_every) < 1:
            raise ConfigError("batch_size, eval_every, eval_trials and checkpoint_every must be >= 1")
        if self.experiment == "compress":
            limit = self.target.min_param_count()
            if not 1 <= self.meta.meta_dim < limit:
                raise ConfigError(
                    f"meta_dim must be >= 1 and smaller than the parameter count of every "
                    f"target network ({limit}); got {self.meta.meta_dim}"
                )
        self.host_config()  # validates l, r, width

    def host_config(self):
        t, h = self.target, self.host
        if self.experiment == "inverse":
            return NnpnnConfig(l=h.l, r=h.r, width=h.width, query_dim=t.input_dim, read_dim=t.output_dim,
                               input_dim=t.output_dim, output_dim=t.input_dim, carry_state=h.carry_state)
        return NnpnnConfig(l=h.l, r=h.r, width=h.width, query_dim=t.input_dim, read_dim=t.output_dim,
                           input_dim=t.input_dim, output_dim=self.meta.meta_dim, seed_input=True,
                           carry_state=h.carry_state)

    def to_json(self):
        return asdict(self)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def _build(cls, obj, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    return dict(obj)


def config_from_json(obj):
    try:
        top = _build(RunConfig, obj, "")
        for key, cls in (("target", NetTemplate), ("host", HostConfig), ("meta", MetaConfig)):
            if key in top:
                top[key] = cls(**_build(cls, top[key], key))
        return RunConfig(**top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, experiment=None):
    """Parse a config file; ``experiment`` fills in (and must agree with) the file's own key."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if experiment is not None and isinstance(obj, dict):
        if obj.get("experiment", experiment) != experiment:
            raise ConfigError(f"{path} is a config for experiment {obj['experiment']!r}, not {experiment!r}")
        obj = {**obj, "experiment": experiment}
    return config_from_json(obj)
