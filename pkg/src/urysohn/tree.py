"""Two-layer Urysohn trees (the Kolmogorov-Arnold form).

    z = sum_k Phi_k(phi_k),    phi_k = sum_j f_kj(x_j)

The branch operators produce the auxiliary variables ``phi``; the root
operator maps them to the output. Training nudges ``phi`` toward lower
error for each record and, when the nudge helps, treats the nudged values
as targets for the branches and as inputs for the root.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .pwl import Domain, PiecewiseLinear, UrysohnOperator, _as_records, evaluate_pwl
from .single import TrainTrace

log = logging.getLogger(__name__)


@dataclass
class TreeConfig:
    addends: int | None = None  # None means 2m + 1
    branch_nodes: int | list[int] = 10
    root_nodes: int = 10
    mu: float = 0.2
    delta: float | None = None  # None derives it from each root function's range
    alpha_branch: float = 0.5
    alpha_root: float = 0.5
    epochs: int = 100
    seed: int = 0
    init_spread: float = 1.0
    root_init_epochs: int = 5

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")
        if self.delta is not None and self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        for name in ("alpha_branch", "alpha_root"):
            a = getattr(self, name)
            if not 0.0 < a < 2.0:
                raise ValueError(f"{name} must lie in (0, 2), got {a}")
        if self.addends is not None and self.addends < 1:
            raise ValueError(f"addends must be at least 1, got {self.addends}")
        if self.root_nodes < 2:
            raise ValueError("root functions need at least 2 nodes")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")

    def addend_count(self, m: int) -> int:
        return self.addends if self.addends is not None else 2 * m + 1


@dataclass
class UrysohnTree:
    branches: list[UrysohnOperator]
    root: UrysohnOperator

    def __post_init__(self):
        if not self.branches or len(self.branches) != self.root.m:
            raise ValueError(f"{len(self.branches)} branches but the root has {self.root.m} functions")
        first = self.branches[0].layout()
        for b in self.branches[1:]:
            other = b.layout()
            if any(not np.array_equal(a, o) for a, o in zip(first, other)):
                raise ValueError("all branches must share the same input layout")
        if len({f.n for f in self.root.functions}) != 1:
            raise ValueError("root functions must share one node count")
        if any(f.quantized for f in self.root.functions):
            raise ValueError("root functions are continuous")

    @property
    def K(self) -> int:
        return len(self.branches)

    @property
    def m(self) -> int:
        return self.branches[0].m

    def copy(self) -> "UrysohnTree":
        return UrysohnTree([b.copy() for b in self.branches], self.root.copy())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _as_records(X, self.m)
        out, _ = _kernels.tree_predict(*_Packed.of(self).args(), X, True)
        return out

    def auxiliary(self, X: np.ndarray) -> np.ndarray:
        """Branch outputs ``phi`` for every record, shape (N, K)."""
        X = _as_records(X, self.m)
        _, phi = _kernels.tree_predict(*_Packed.of(self).args(), X, True)
        return phi


@dataclass
class _Packed:
    """Kernel-side arrays for a tree; write back with :meth:`store`."""

    layout: tuple
    bvals: np.ndarray
    rlo: np.ndarray
    rhi: np.ndarray
    rvals: np.ndarray

    @classmethod
    def of(cls, tree: UrysohnTree) -> "_Packed":
        return cls(
            tuple(tree.branches[0].layout()),
            np.stack([b.packed_values() for b in tree.branches]),
            np.array([f.domain_min for f in tree.root.functions]),
            np.array([f.domain_max for f in tree.root.functions]),
            np.stack([f.node_values for f in tree.root.functions]),
        )

    def args(self) -> tuple:
        return (*self.layout, self.bvals, self.rlo, self.rhi, self.rvals)

    def store(self, tree: UrysohnTree) -> UrysohnTree:
        for b, row in zip(tree.branches, self.bvals):
            b.load_values(row)
        for k, f in enumerate(tree.root.functions):
            f.domain_min = float(self.rlo[k])
            f.domain_max = float(self.rhi[k])
            f.node_values[:] = self.rvals[k]
        return tree


def forward(tree: UrysohnTree, x: Sequence[float]) -> tuple[float, np.ndarray]:
    """Model output and auxiliary variables; ``phi`` is clamped into each root domain."""
    phi = np.array([b(x) for b in tree.branches])
    return float(sum(evaluate_pwl(f, p) for f, p in zip(tree.root.functions, phi))), phi


def threshold_derivative(zeta: float, delta: float) -> float:
    """Push a slope away from zero so it is at least ``delta`` in magnitude."""
    if abs(zeta) >= delta:
        return zeta
    return delta if zeta >= 0.0 else -delta


def extrapolate(f: PiecewiseLinear, x: float) -> tuple[float, float]:
    """Value and slope at ``x``, extending the boundary segments past the domain."""
    n = f.n
    t = (n - 1) * (x - f.domain_min) / (f.domain_max - f.domain_min)
    s = min(max(math.floor(t), 0), n - 2)
    w = t - s
    g0, g1 = f.node_values[s], f.node_values[s + 1]
    return (1.0 - w) * g0 + w * g1, (g1 - g0) * (n - 1) / (f.domain_max - f.domain_min)


def default_delta(f: PiecewiseLinear) -> float:
    return max(1e-3 * float(np.ptp(f.node_values)), 1e-6)


def phi_increments(tree: UrysohnTree, x: Sequence[float], z: float, mu: float,
                   delta: float | None = None) -> np.ndarray:
    """Shift of each auxiliary variable that splits the residual across the addends."""
    phi = np.array([b(x) for b in tree.branches])
    evals = [extrapolate(f, p) for f, p in zip(tree.root.functions, phi)]
    r = z - sum(v for v, _ in evals)
    K = tree.K
    out = np.empty(K)
    for k, (f, (_, slope)) in enumerate(zip(tree.root.functions, evals)):
        d = default_delta(f) if delta is None else delta
        out[k] = mu * r / (K * threshold_derivative(slope, d))
    return out


def reposition_root_domain(f: PiecewiseLinear, value: float) -> PiecewiseLinear:
    """Stretch ``f``'s domain to reach ``value``, keeping the node count; in place.

    New nodal values are read off the old function, extending its end
    segments linearly where the new nodes fall outside the old domain.
    """
    if f.domain_min <= value <= f.domain_max:
        return f
    lo, hi = min(f.domain_min, value), max(f.domain_max, value)
    fresh = [extrapolate(f, at)[0] for at in np.linspace(lo, hi, f.n)]
    f.domain_min, f.domain_max = float(lo), float(hi)
    f.node_values[:] = fresh
    return f


def tree_step(tree: UrysohnTree, x: Sequence[float], z: float, cfg: TreeConfig) -> bool:
    """One descent step on a single record, in place. Returns whether it was accepted.

    A rejected record leaves the tree untouched.
    """
    p = _Packed.of(tree)
    X = _as_records(x, tree.m)
    _, skipped = _kernels.tree_epoch(*p.args(), X, np.array([float(z)]), cfg.mu, cfg.delta or 0.0,
                                     cfg.alpha_branch, cfg.alpha_root, np.zeros(1, dtype=np.int64))
    if skipped:
        return False
    p.store(tree)
    return True


def initialize_tree(X: np.ndarray, z: np.ndarray, domains: Sequence[Domain],
                    cfg: TreeConfig) -> UrysohnTree:
    """Random auxiliary targets for the branches, then a root fitted to the resulting ``phi``.

    Distinct random targets keep the branches from starting identical,
    which would make them move in lockstep.
    """
    X = _as_records(X, len(domains))
    z = np.ascontiguousarray(z, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot initialize on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    N, K = X.shape[0], cfg.addend_count(len(domains))

    template = UrysohnOperator.zeros(domains, cfg.branch_nodes)
    layout = template.layout()
    bvals = np.zeros((K, layout.total))
    targets = rng.uniform(-cfg.init_spread, cfg.init_spread, size=(K, N))
    for k in range(K):
        _kernels.kaczmarz_epoch(*layout, bvals, k, X, targets[k], cfg.alpha_branch, rng.permutation(N))
    branches = []
    for row in bvals:
        b = template.copy()
        b.load_values(row)
        branches.append(b)

    phi = np.ascontiguousarray(_kernels.evaluate_many(*layout, bvals, X))
    root_domains = []
    for k in range(K):
        lo, hi = float(phi[:, k].min()), float(phi[:, k].max())
        if not hi - lo > 1e-12 * max(1.0, abs(lo)):
            lo, hi = lo - 0.5, hi + 0.5
        root_domains.append(Domain(lo, hi))
    root = UrysohnOperator.zeros(root_domains, cfg.root_nodes)
    rlayout = root.layout()
    rvals = root.packed_values().reshape(1, -1)
    for _ in range(cfg.root_init_epochs):
        _kernels.kaczmarz_epoch(*rlayout, rvals, 0, phi, z, cfg.alpha_root, rng.permutation(N))
    root.load_values(rvals[0])
    return UrysohnTree(branches, root)


def train_tree(X: np.ndarray, z: np.ndarray, domains: Sequence[Domain], cfg: TreeConfig,
               init: UrysohnTree | None = None) -> tuple[UrysohnTree, TrainTrace]:
    """Initialize (unless ``init`` is given) and run ``cfg.epochs`` shuffled descent passes.

    If a whole epoch is rejected, ``mu`` is halved for the following
    epochs, down to 1/64 of its configured value.
    """
    X = _as_records(X, len(domains))
    z = np.ascontiguousarray(z, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if init is None:
        tree = initialize_tree(X, z, domains, cfg)
    else:
        tree = init.copy()
    # epoch shuffles draw from a stream separate from initialization
    rng = np.random.default_rng([cfg.seed, 1])
    p = _Packed.of(tree)
    mu, mu_floor = cfg.mu, cfg.mu / 64.0
    delta = cfg.delta or 0.0
    trace = TrainTrace()
    N = X.shape[0]
    for _ in range(cfg.epochs):
        r, skipped = _kernels.tree_epoch(*p.args(), X, z, mu, delta, cfg.alpha_branch, cfg.alpha_root,
                                         rng.permutation(N))
        trace.residuals.append(r)
        trace.skipped.append(int(skipped))
        if skipped == N and mu > mu_floor:
            mu = max(mu / 2.0, mu_floor)
            log.debug("every record rejected; mu lowered to %g", mu)
    return p.store(tree), trace
