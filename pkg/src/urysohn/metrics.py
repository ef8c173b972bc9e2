"""Accuracy metrics and run-level confidence intervals."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats


@dataclass
class EvalReport:
    n: int
    pearson: float | None  # None when either series is constant
    nrmse: float
    misclassified: int | None = None

    @property
    def accuracy(self) -> float | None:
        if self.misclassified is None:
            return None
        return 1.0 - self.misclassified / self.n

    def to_keyvalue(self) -> str:
        return to_keyvalue(asdict(self))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class ConfidenceInterval:
    mean: float
    half_width: float
    count: int

    def __str__(self) -> str:
        return f"{self.mean:.6g} +/- {self.half_width:.2g} (n={self.count})"


def pearson(z: Sequence[float], z_hat: Sequence[float]) -> float | None:
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    if z.shape != z_hat.shape or z.size < 2:
        raise ValueError(f"need two equal-length series of at least 2 values, got {z.shape}, {z_hat.shape}")
    dz = z - z.mean()
    dh = z_hat - z_hat.mean()
    sz = math.sqrt(float(dz @ dz))
    sh = math.sqrt(float(dh @ dh))
    if sz == 0.0 or sh == 0.0:
        return None
    return float(np.clip((dz @ dh) / (sz * sh), -1.0, 1.0))


def nrmse(z: Sequence[float], z_hat: Sequence[float], span: float | None = None) -> float:
    """RMSE divided by the range of the actual outputs (or by ``span``)."""
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    if z.shape != z_hat.shape or z.size == 0:
        raise ValueError(f"series shapes differ or are empty: {z.shape}, {z_hat.shape}")
    if span is None:
        span = float(z.max() - z.min())
    if not span > 0.0:
        raise ValueError("actual outputs are constant; normalized RMSE is undefined")
    return float(np.sqrt(np.mean((z - z_hat) ** 2)) / span)


def classification_errors(z: Sequence[float], z_hat: Sequence[float]) -> int:
    """Records whose predicted sign differs from the +1/-1 label; a zero prediction counts as wrong."""
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    if not np.all(np.isin(z, (-1.0, 1.0))):
        raise ValueError("labels must be +1 or -1")
    return int(np.count_nonzero(np.sign(z_hat) != z))


def ci95(samples: Sequence[float]) -> ConfidenceInterval:
    """Student-t 95% interval of the mean."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("a confidence interval needs at least 2 samples")
    s = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.975, x.size - 1)) * s / math.sqrt(x.size)
    return ConfidenceInterval(float(x.mean()), half, int(x.size))


def evaluate(z, z_hat, classify: bool = False, span: float | None = None) -> EvalReport:
    z = np.asarray(z, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    return EvalReport(
        n=int(z.size),
        pearson=pearson(z, z_hat) if z.size >= 2 else None,
        nrmse=nrmse(z, z_hat, span) if (span or np.ptp(z) > 0) else float("nan"),
        misclassified=classification_errors(z, z_hat) if classify else None,
    )


def to_keyvalue(fields: dict) -> str:
    """One ``key=value`` line per field, keys sorted; ``None`` is written as ``none``."""
    lines = []
    for key in sorted(fields):
        v = fields[key]
        if v is None:
            v = "none"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"
