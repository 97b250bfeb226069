"""Run checkpoints as JSON documents.

Every float is stored as a hexadecimal string so a reload is bit-exact;
resuming from a checkpoint continues exactly as if the run had never
stopped.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .config import RunConfig, config_from_json
from .errors import CheckpointError, ConfigError

FORMAT_VERSION = 1


def make_checkpoint(state):
    return {"format_version": FORMAT_VERSION, **state}


def dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def save_checkpoint(path, state):
    """Atomically write ``state`` (a run state dict) to ``path``."""
    path = Path(path)
    obj = state if "format_version" in state else make_checkpoint(state)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(obj))
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Read and validate a checkpoint; returns ``(state, RunConfig)``."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint: {exc}") from None
    if not isinstance(obj, dict):
        raise CheckpointError(f"{path}: checkpoint must be a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version!r}, expected {FORMAT_VERSION}")
    try:
        cfg = config_from_json(obj["config"])
    except KeyError:
        raise CheckpointError(f"{path}: checkpoint has no config") from None
    except ConfigError as exc:
        raise CheckpointError(f"{path}: invalid config in checkpoint: {exc}") from None
    return obj, cfg


def restore_run(state, cfg: RunConfig):
    """Rebuild a :class:`~nnpnn.training.Run` from a loaded checkpoint."""
    from .training import Run

    return Run.from_state(state, cfg)
