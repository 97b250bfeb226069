"""Deviation ratios, summary statistics, and the training-curve CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ResampleRequired, ShapeError

CSV_COLUMNS = ("iteration", "loss", "ratio_mean", "ratio_median", "frac10", "frac25")


@dataclass(frozen=True)
class EvalStats:
    mean: float
    median: float
    frac_within_10: float
    frac_within_25: float
    trials: int

    def to_json(self):
        return {
            "mean": self.mean,
            "median": self.median,
            "frac_within_10": self.frac_within_10,
            "frac_within_25": self.frac_within_25,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    loss: float
    ratio_mean: float
    ratio_median: float
    frac10: float
    frac25: float


def manhattan_ratio(pred, target):
    """Sum of absolute errors divided by the target's L1 norm.

    Raises :class:`ResampleRequired` when the target has zero norm.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1 or pred.size < 1:
        raise ShapeError(f"manhattan_ratio needs equal non-empty vectors, got {pred.shape} and {target.shape}")
    norm = np.abs(target).sum()
    if norm == 0.0:
        raise ResampleRequired("target has zero Manhattan norm")
    return float(np.abs(pred - target).sum() / norm)


def summarize(samples):
    """Mean, median (midpoint of the central pair for even counts), and threshold fractions."""
    xs = np.asarray(list(samples), dtype=np.float64)
    if xs.size == 0:
        raise ShapeError("summarize needs at least one sample")
    xs_sorted = np.sort(xs)
    n = xs.size
    mid = n // 2
    median = xs_sorted[mid] if n % 2 else 0.5 * (xs_sorted[mid - 1] + xs_sorted[mid])
    return EvalStats(
        mean=float(math.fsum(xs_sorted) / n),
        median=float(median),
        frac_within_10=float(np.count_nonzero(xs <= 0.10) / n),
        frac_within_25=float(np.count_nonzero(xs <= 0.25) / n),
        trials=int(n),
    )


def _fmt(v):
    return f"{v:.9g}"


def write_csv(history, path):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in history:
                fh.write(
                    ",".join(
                        [str(row.iteration)]
                        + [_fmt(v) for v in (row.loss, row.ratio_mean, row.ratio_median, row.frac10, row.frac25)]
                    )
                    + "\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_csv(path):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected metrics header: {header}")
        return [
            MetricsRow(int(r[0]), *(float(v) for v in r[1:]))
            for r in reader
        ]
