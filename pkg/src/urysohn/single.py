"""Identification of a single Urysohn operator by projection descent.

Each record moves the nodal values the least distance needed to satisfy
that record's equation, scaled by ``alpha``. Starting from zeros, repeated
passes over consistent data converge to the minimum-norm solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .pwl import Domain, SegmentLocation, UrysohnOperator, apply_nodal_increment, locate

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    alpha: float = 0.5
    epochs: int = 100
    nodes_per_input: int | list[int] = 10
    seed: int = 0
    # stop once the epoch-mean |D| falls below this; None trains the full budget
    tolerance: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")


@dataclass
class TrainTrace:
    residuals: list[float] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def chi_norm(locations: Sequence[SegmentLocation]) -> float:
    """Squared norm of the record's interpolation weights, in [m/2, m]."""
    return float(sum((1.0 - loc.fraction) ** 2 + loc.fraction ** 2 for loc in locations))


def kaczmarz_step(u: UrysohnOperator, x: Sequence[float], z: float, alpha: float) -> float:
    """Project ``u`` toward the record ``(x, z)`` in place; returns the residual before the step.

    Re-evaluating the same record afterwards leaves a residual of ``(1 - alpha) * D``.
    """
    locs = [locate(f, xj) for f, xj in zip(u.functions, x)]
    zhat = 0.0
    for f, loc in zip(u.functions, locs):
        zhat += (1.0 - loc.fraction) * f.node_values[loc.floor] + loc.fraction * f.node_values[loc.ceiling]
    d = z - zhat
    step = alpha * d / chi_norm(locs)
    for f, loc in zip(u.functions, locs):
        apply_nodal_increment(f, loc, step * (1.0 - loc.fraction), step * loc.fraction)
    return d


def make_linear_baseline(m: int, ranges: Sequence[tuple[float, float]] | Sequence[Domain]) -> UrysohnOperator:
    """Linear regression written as a two-node operator per input."""
    if m < 1 or len(ranges) != m:
        raise ValueError(f"need {m} ranges, got {len(ranges)}")
    domains = [r if isinstance(r, Domain) else Domain(float(r[0]), float(r[1])) for r in ranges]
    # quantized inputs keep their levels; the baseline is linear in the level index
    domains = [Domain(d.lo, d.hi) for d in domains]
    return UrysohnOperator.zeros(domains, 2)


@dataclass
class LinearRegression:
    """Weights-only linear model, z = sum_j w_j x_j, with no intercept term."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.m)
        return X @ self.weights

    def copy(self) -> "LinearRegression":
        return LinearRegression(self.weights.copy())


def train_linear(X: np.ndarray, z: np.ndarray, cfg: TrainConfig) -> tuple[LinearRegression, TrainTrace]:
    """Projection descent on the raw inputs from zero weights (minimum-norm start)."""
    X = np.ascontiguousarray(X, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    model = LinearRegression(np.zeros(X.shape[1]))
    trace = TrainTrace()
    for _ in range(cfg.epochs):
        trace.residuals.append(_kernels.linear_epoch(model.weights, X, z, cfg.alpha, rng.permutation(X.shape[0])))
        if cfg.tolerance is not None and trace.residuals[-1] < cfg.tolerance:
            break
    return model, trace


def train_single(u: UrysohnOperator, X: np.ndarray, z: np.ndarray,
                 cfg: TrainConfig) -> tuple[UrysohnOperator, TrainTrace]:
    """Run ``cfg.epochs`` shuffled passes of projection steps over the records.

    ``u`` is updated in place and returned with the per-epoch mean |D|.
    """
    X = np.ascontiguousarray(X, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if X.shape[1] != u.m or z.shape[0] != X.shape[0]:
        raise ValueError(f"records have shape {X.shape} / {z.shape}, operator expects {u.m} inputs")
    rng = np.random.default_rng(cfg.seed)
    layout = u.layout()
    vals = u.packed_values().reshape(1, -1)
    trace = TrainTrace()
    for epoch in range(cfg.epochs):
        order = rng.permutation(X.shape[0])
        trace.residuals.append(_kernels.kaczmarz_epoch(*layout, vals, 0, X, z, cfg.alpha, order))
        if cfg.tolerance is not None and trace.residuals[-1] < cfg.tolerance:
            log.debug("converged after %d epochs", epoch + 1)
            break
    u.load_values(vals[0])
    return u, trace


def fit_urysohn(X: np.ndarray, z: np.ndarray, domains: Sequence[Domain],
                cfg: TrainConfig) -> tuple[UrysohnOperator, TrainTrace]:
    """Zero-initialized operator over ``domains`` trained on the records."""
    u = UrysohnOperator.zeros(domains, cfg.nodes_per_input)
    return train_single(u, X, z, cfg)
