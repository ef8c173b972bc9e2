"""Dataset ingestion, encoding, windowing and splitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .pwl import Domain

INPUT, OUTPUT, IGNORED = "input", "output", "ignored"
CONTINUOUS, CATEGORICAL = "continuous", "categorical"

# input ranges of the synthetic benchmark function
SYNTH_LOW = np.array([0.0, 0.0, 1.0, 0.4, 0.0])
SYNTH_HIGH = np.array([0.99, 1.55, 1.49, 1.39, 0.49])


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str = INPUT
    kind: str = CONTINUOUS
    lo: float | None = None
    hi: float | None = None
    categories: tuple[str, ...] = ()

    @property
    def level_count(self) -> int:
        return len(self.categories)

    def encode(self, label: str) -> int:
        try:
            return self.categories.index(label) + 1
        except ValueError:
            raise ValueError(f"column {self.name!r}: unknown category {label!r}") from None

    def decode(self, code: int) -> str:
        if not 1 <= code <= len(self.categories):
            raise ValueError(f"column {self.name!r}: code {code} outside 1..{len(self.categories)}")
        return self.categories[code - 1]

    def domain(self, values: np.ndarray | None = None) -> Domain:
        """Input domain, taking continuous ranges from ``values`` when given."""
        if self.kind == CATEGORICAL:
            # a single-level column still needs two nodes
            return Domain.quantized(max(2, self.level_count))
        lo, hi = (self.lo, self.hi) if values is None else (float(values.min()), float(values.max()))
        if not lo < hi:
            raise ValueError(f"column {self.name!r} is constant ({lo}); ignore it or supply more data")
        return Domain(lo, hi)


@dataclass
class Dataset:
    columns: list[ColumnSpec]
    X: np.ndarray
    y: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"inputs {self.X.shape} do not match outputs {self.y.shape}")
        if self.X.shape[1] != len(self.inputs):
            raise ValueError(f"{len(self.inputs)} input columns but {self.X.shape[1]} input values")
        if sum(c.role == OUTPUT for c in self.columns) != 1:
            raise ValueError("a dataset has exactly one output column")
        for j, c in enumerate(self.inputs):
            if c.kind == CATEGORICAL and len(self.X):
                col = self.X[:, j]
                if col.min() < 1 or col.max() > max(c.level_count, 1) or np.any(col != np.round(col)):
                    raise ValueError(f"column {c.name!r}: codes outside 1..{c.level_count}")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def inputs(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.role == INPUT]

    @property
    def output(self) -> ColumnSpec:
        return next(c for c in self.columns if c.role == OUTPUT)

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def domains(self, rows: np.ndarray | None = None) -> list[Domain]:
        """Per-input domains; continuous ranges come from ``rows`` (all rows by default)."""
        X = self.X if rows is None else self.X[rows]
        return [c.domain(X[:, j]) for j, c in enumerate(self.inputs)]

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.columns, self.X[rows], self.y[rows], dict(self.provenance, rows=len(rows)))

    def is_binary(self) -> bool:
        return bool(len(self.y)) and set(np.unique(self.y)) <= {-1.0, 1.0}


def _sniff(line: str) -> str | None:
    for d in (";", ",", "\t"):
        if d in line:
            return d
    return None  # whitespace


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        return line.split()
    return [cell.strip() for cell in next(csv.reader([line], delimiter=delimiter))]


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _column_index(key, names: Sequence[str]) -> int:
    """0-based index of a 1-based position, a negative position, or a column name."""
    if isinstance(key, str) and not key.lstrip("-").isdigit():
        if key not in names:
            raise ValueError(f"no column named {key!r}")
        return names.index(key)
    pos = int(key)
    if pos == 0 or abs(pos) > len(names):
        raise ValueError(f"column {pos} outside 1..{len(names)}")
    return pos - 1 if pos > 0 else len(names) + pos


def parse_csv(path, delimiter: str | None = "auto", header: bool = False, output=-1,
              ignore: Iterable = (), categorical: Iterable = (), pm1: bool = False) -> Dataset:
    """Read a delimited text file into a typed dataset.

    Columns whose every cell parses as a number are continuous, others
    categorical with levels numbered 1.. in lexicographic order. A
    two-level categorical output is encoded as +1 (first level) and -1.
    ``pm1`` maps a two-valued numeric output to -1 (smaller) and +1.
    Column selectors are 1-based positions, negative positions, or names.
    """
    path = Path(path)
    lines = [(no, line.strip()) for no, line in enumerate(path.read_text().splitlines(), 1)]
    lines = [(no, line) for no, line in lines if line]
    if not lines:
        raise ValueError(f"{path}: empty file")
    if delimiter == "auto":
        delimiter = _sniff(lines[0][1])
    rows = [(no, _split(line, delimiter)) for no, line in lines]
    width = len(rows[0][1])
    for no, cells in rows:
        if len(cells) != width:
            raise ValueError(f"{path}:{no}: expected {width} fields, got {len(cells)}")
        for cell in cells:
            if cell == "":
                raise ValueError(f"{path}:{no}: empty field")
    if header:
        names = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no records")
    else:
        names = [f"c{i + 1}" for i in range(width)]
    out_idx = _column_index(output, names)
    ignored = {_column_index(k, names) for k in ignore}
    forced = {_column_index(k, names) for k in categorical}
    if out_idx in ignored:
        raise ValueError("the output column cannot be ignored")

    cells = [c for _, c in rows]
    columns, values = [], []
    for j, name in enumerate(names):
        raw = [r[j] for r in cells]
        role = OUTPUT if j == out_idx else IGNORED if j in ignored else INPUT
        if role == IGNORED:
            columns.append(ColumnSpec(name, IGNORED))
            values.append(None)
            continue
        numeric = j not in forced and all(_is_number(v) for v in raw)
        if numeric:
            col = np.array([float(v) for v in raw])
            if role == OUTPUT and pm1:
                col = _to_pm1(col, name)
            columns.append(ColumnSpec(name, role, CONTINUOUS, float(col.min()), float(col.max())))
        else:
            levels = tuple(sorted(set(raw)))
            spec = ColumnSpec(name, role, CATEGORICAL, categories=levels)
            if role == OUTPUT:
                if len(levels) != 2:
                    bad = next((no for no, r in rows if not _is_number(r[j])), rows[0][0])
                    raise ValueError(
                        f"{path}:{bad}: output column {name!r} is not numeric and has "
                        f"{len(levels)} levels (two are needed for a +1/-1 encoding)"
                    )
                col = np.array([1.0 if v == levels[0] else -1.0 for v in raw])
            else:
                lookup = {lvl: i + 1 for i, lvl in enumerate(levels)}
                col = np.array([lookup[v] for v in raw], dtype=float)
            columns.append(spec)
        values.append(col)

    inputs = [v for c, v in zip(columns, values) if c.role == INPUT]
    X = np.column_stack(inputs) if inputs else np.empty((len(cells), 0))
    provenance = {"source": str(path), "delimiter": delimiter, "header": header, "output": output,
                  "ignore": sorted(ignored), "categorical": sorted(forced), "pm1": pm1}
    return Dataset(columns, X, values[out_idx], provenance)


def _to_pm1(col: np.ndarray, name: str) -> np.ndarray:
    levels = np.unique(col)
    if len(levels) != 2:
        raise ValueError(f"output column {name!r} has {len(levels)} distinct values, need 2 for +1/-1")
    return np.where(col == levels[1], 1.0, -1.0)


def to_pm1(ds: Dataset) -> Dataset:
    """Copy of ``ds`` with a two-valued output mapped to -1 (smaller) / +1."""
    if ds.is_binary():
        return ds
    y = _to_pm1(ds.y, ds.output.name)
    columns = [replace(c, lo=-1.0, hi=1.0) if c.role == OUTPUT else c for c in ds.columns]
    return Dataset(columns, ds.X, y, dict(ds.provenance, pm1=True))


def load_series(path) -> np.ndarray:
    """Single-column numeric file as a 1-D array."""
    data = np.loadtxt(path, ndmin=1, dtype=float)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected a single column, got shape {data.shape}")
    return data


def window_siso(x: np.ndarray, z: np.ndarray, m: int) -> Dataset:
    """Records of ``m`` lagged inputs (newest first) and the matching output.

    Record ``i`` holds inputs ``(x[i+m-1], ..., x[i])`` and output ``z[i+m-1]``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape or x.ndim != 1:
        raise ValueError(f"input and output series must be 1-D and equal length, got {x.shape}, {z.shape}")
    if m < 1 or len(x) < m:
        raise ValueError(f"window {m} needs at least {m} samples, got {len(x)}")
    X = np.lib.stride_tricks.sliding_window_view(x, m)[:, ::-1]
    columns = [ColumnSpec(f"lag{j}", INPUT, CONTINUOUS, float(X[:, j].min()), float(X[:, j].max()))
               for j in range(m)]
    y = z[m - 1:]
    columns.append(ColumnSpec("output", OUTPUT, CONTINUOUS, float(y.min()), float(y.max())))
    return Dataset(columns, X, y, {"window": m})


@dataclass
class FoldPlan:
    k: int
    permutation: np.ndarray
    folds: list[tuple[np.ndarray, np.ndarray]]


def _count(data) -> int:
    return len(data) if not isinstance(data, (int, np.integer)) else int(data)


def split_kfold(data, k: int, seed: int) -> FoldPlan:
    """Shuffle once, cut into ``k`` contiguous near-equal validation folds."""
    n = _count(data)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"cannot make {k} folds from {n} records")
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, k)
    folds = []
    for i, val in enumerate(chunks):
        train = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        folds.append((train, val))
    return FoldPlan(k, perm, folds)


def split_fractions(data, fractions: Sequence[float], seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Train/selection/test indices; first two sizes are floored, test takes the rest."""
    n = _count(data)
    if len(fractions) != 3 or min(fractions) <= 0:
        raise ValueError(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    a = int(np.floor(fractions[0] * n))
    b = a + int(np.floor(fractions[1] * n))
    if a == 0 or b == a or b == n:
        raise ValueError(f"fractions {fractions} leave an empty subset of {n} records")
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:a], perm[a:b], perm[b:]


def synth_function(X: np.ndarray) -> np.ndarray:
    """|sin(x2)^x1 - exp(-x3)| / x4 + x5 cos(x5), with 0^0 taken as 1."""
    X = np.asarray(X, dtype=float)
    x1, x2, x3, x4, x5 = X.T
    return np.abs(np.power(np.sin(x2), x1) - np.exp(-x3)) / x4 + x5 * np.cos(x5)


def synth_generate(count: int, seed: int) -> Dataset:
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    X = SYNTH_LOW + (SYNTH_HIGH - SYNTH_LOW) * rng.random((count, 5))
    y = synth_function(X)
    columns = [ColumnSpec(f"x{j + 1}", INPUT, CONTINUOUS, float(lo), float(hi))
               for j, (lo, hi) in enumerate(zip(SYNTH_LOW, SYNTH_HIGH))]
    columns.append(ColumnSpec("z", OUTPUT, CONTINUOUS, float(y.min()), float(y.max())))
    return Dataset(columns, X, y, {"source": "synthetic", "count": count, "seed": seed})


def write_csv(ds: Dataset, path, delimiter: str = ",") -> None:
    """Write inputs and output (in that order) with a header row; floats use repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([c.name for c in ds.inputs] + [ds.output.name])
        for x, y in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def parse_with_columns(path, columns: Sequence[ColumnSpec], delimiter: str | None = "auto",
                       header: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Encode a file with an existing column layout (e.g. a saved model's).

    Rows carry either every column or every column except the output.
    Returns the inputs and, when present, the outputs.
    """
    path = Path(path)
    lines = [(no, line.strip()) for no, line in enumerate(path.read_text().splitlines(), 1)]
    lines = [(no, line) for no, line in lines if line]
    if header:
        lines = lines[1:]
    if not lines:
        raise ValueError(f"{path}: no records")
    if delimiter == "auto":
        delimiter = _sniff(lines[0][1])
    full = len(columns)
    out_idx = next(i for i, c in enumerate(columns) if c.role == OUTPUT)
    X, y = [], []
    width = None
    for no, line in lines:
        cells = _split(line, delimiter)
        if width is None:
            width = len(cells)
            if width not in (full, full - 1):
                raise ValueError(f"{path}:{no}: {width} columns, the model expects {full} "
                                 f"(or {full - 1} without the output)")
        if len(cells) != width:
            raise ValueError(f"{path}:{no}: expected {width} fields, got {len(cells)}")
        if width == full - 1:
            cells = cells[:out_idx] + [None] + cells[out_idx:]
        row = []
        for c, cell in zip(columns, cells):
            if c.role == IGNORED:
                continue
            if c.role == OUTPUT:
                if cell is not None:
                    y.append(_encode_output(c, cell, path, no))
                continue
            try:
                row.append(float(c.encode(cell)) if c.kind == CATEGORICAL else float(cell))
            except ValueError as exc:
                raise ValueError(f"{path}:{no}: {exc}") from None
        X.append(row)
    return np.array(X, dtype=float), (np.array(y) if width == full else None)


def _encode_output(c: ColumnSpec, cell: str, path, no: int) -> float:
    if c.kind == CATEGORICAL:
        if cell not in c.categories:
            raise ValueError(f"{path}:{no}: unknown output label {cell!r}")
        return 1.0 if cell == c.categories[0] else -1.0
    try:
        return float(cell)
    except ValueError:
        raise ValueError(f"{path}:{no}: output {cell!r} is not a number") from None
