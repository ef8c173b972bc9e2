"""Piecewise-linear functions and discrete Urysohn operators.

A :class:`PiecewiseLinear` holds ``n`` nodal values on a uniform grid over
``[domain_min, domain_max]``. Quantized functions take integer inputs
``1..levels`` that always land on a node.

Node indices are 0-based in code. :func:`locate` is the only place where
an input is turned into a (floor, ceiling, fraction) triple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Domain:
    """Input range of one function; ``levels`` marks a quantized input."""

    lo: float
    hi: float
    levels: int | None = None

    @classmethod
    def quantized(cls, levels: int) -> "Domain":
        return cls(1.0, float(levels), int(levels))

    @property
    def is_quantized(self) -> bool:
        return self.levels is not None


@dataclass
class PiecewiseLinear:
    domain_min: float
    domain_max: float
    node_values: np.ndarray
    levels: int | None = None

    def __post_init__(self):
        self.node_values = np.array(self.node_values, dtype=float)
        self.domain_min = float(self.domain_min)
        self.domain_max = float(self.domain_max)
        n = self.node_values.shape[0]
        if self.node_values.ndim != 1 or n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.node_values.shape}")
        if not self.domain_min < self.domain_max:
            raise ValueError(f"degenerate domain [{self.domain_min}, {self.domain_max}]")
        if self.levels is not None:
            self.levels = int(self.levels)
            if n != self.levels or self.domain_min != 1.0 or self.domain_max != self.levels:
                raise ValueError(
                    f"quantized function with {self.levels} levels needs {self.levels} nodes on "
                    f"[1, {self.levels}]"
                )

    @classmethod
    def zeros(cls, domain: Domain, nodes: int) -> "PiecewiseLinear":
        if domain.is_quantized:
            return cls(1.0, float(domain.levels), np.zeros(domain.levels), domain.levels)
        return cls(domain.lo, domain.hi, np.zeros(nodes))

    @property
    def n(self) -> int:
        return self.node_values.shape[0]

    @property
    def quantized(self) -> bool:
        return self.levels is not None

    @property
    def domain(self) -> Domain:
        return Domain(self.domain_min, self.domain_max, self.levels)

    @property
    def abscissae(self) -> np.ndarray:
        return np.linspace(self.domain_min, self.domain_max, self.n)

    def __call__(self, x: float) -> float:
        return evaluate_pwl(self, x)

    def copy(self) -> "PiecewiseLinear":
        return PiecewiseLinear(self.domain_min, self.domain_max, self.node_values.copy(), self.levels)


class SegmentLocation(NamedTuple):
    floor: int
    ceiling: int
    fraction: float


def locate(f: PiecewiseLinear, x: float) -> SegmentLocation:
    """Segment holding ``x`` (clamped into the domain).

    ``x`` exactly on a node gives that node as floor and ceiling with
    fraction 0; quantized inputs always do.
    """
    q, psi = _kernels.locate(f.domain_min, f.domain_max, f.n, f.quantized, float(x))
    return SegmentLocation(q, q + 1 if psi > 0.0 else q, psi)


def evaluate_pwl(f: PiecewiseLinear, x: float) -> float:
    loc = locate(f, x)
    g = f.node_values
    return (1.0 - loc.fraction) * g[loc.floor] + loc.fraction * g[loc.ceiling]


def apply_nodal_increment(f: PiecewiseLinear, loc: SegmentLocation,
                          amount_floor: float, amount_ceiling: float) -> PiecewiseLinear:
    """Add the two amounts to the nodes bracketing ``loc``, in place.

    When the location sits on a node, only ``amount_floor`` is applied.
    """
    f.node_values[loc.floor] += amount_floor
    if loc.ceiling != loc.floor:
        f.node_values[loc.ceiling] += amount_ceiling
    return f


class Layout(NamedTuple):
    """Flat description of the inputs an operator reads; see ``_kernels``."""

    lo: np.ndarray
    hi: np.ndarray
    counts: np.ndarray
    offsets: np.ndarray
    quant: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def split(self, row: np.ndarray) -> list[np.ndarray]:
        return [row[o:o + c] for o, c in zip(self.offsets, self.counts)]


@dataclass
class UrysohnOperator:
    """Sum of one piecewise-linear function per input."""

    functions: list[PiecewiseLinear] = field(default_factory=list)

    def __post_init__(self):
        if not self.functions:
            raise ValueError("an operator needs at least one function")

    @classmethod
    def zeros(cls, domains: Sequence[Domain], nodes: int | Sequence[int]) -> "UrysohnOperator":
        counts = _broadcast_nodes(nodes, len(domains))
        return cls([PiecewiseLinear.zeros(d, n) for d, n in zip(domains, counts)])

    @property
    def m(self) -> int:
        return len(self.functions)

    @property
    def domains(self) -> list[Domain]:
        return [f.domain for f in self.functions]

    def __call__(self, x: Sequence[float]) -> float:
        return evaluate_operator(self, x)

    def copy(self) -> "UrysohnOperator":
        return UrysohnOperator([f.copy() for f in self.functions])

    def layout(self) -> Layout:
        counts = np.array([f.n for f in self.functions], dtype=np.int64)
        offsets = np.zeros_like(counts)
        offsets[1:] = np.cumsum(counts)[:-1]
        return Layout(
            np.array([f.domain_min for f in self.functions]),
            np.array([f.domain_max for f in self.functions]),
            counts,
            offsets,
            np.array([f.quantized for f in self.functions], dtype=np.bool_),
        )

    def packed_values(self) -> np.ndarray:
        return np.concatenate([f.node_values for f in self.functions])

    def load_values(self, row: np.ndarray) -> None:
        for f, part in zip(self.functions, self.layout().split(row)):
            f.node_values[:] = part

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _as_records(X, self.m)
        vals = self.packed_values().reshape(1, -1)
        return _kernels.evaluate_many(*self.layout(), vals, X)[:, 0]


def evaluate_operator(u: UrysohnOperator, x: Sequence[float]) -> float:
    if len(x) != u.m:
        raise ValueError(f"operator has {u.m} inputs, got {len(x)}")
    return float(sum(evaluate_pwl(f, xj) for f, xj in zip(u.functions, x)))


def _broadcast_nodes(nodes: int | Sequence[int], m: int) -> list[int]:
    if np.isscalar(nodes):
        counts = [int(nodes)] * m
    else:
        counts = [int(n) for n in nodes]
        if len(counts) != m:
            raise ValueError(f"{len(counts)} node counts given for {m} inputs")
    if min(counts) < 2:
        raise ValueError("each function needs at least 2 nodes")
    return counts


def _as_records(X, m: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != m:
        raise ValueError(f"expected {m} inputs per record, got {X.shape[1]}")
    return X
