"""Text serialization of trained operators and trees.

Every line is ``<keyword> <json>``. Floats that define the model are
written as hex strings (``float.hex``) so a reload is bit-exact. See the
README for the field-by-field layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import ColumnSpec
from .pwl import PiecewiseLinear, UrysohnOperator
from .single import LinearRegression
from .tree import UrysohnTree

MAGIC = "urysohn-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class ModelFile:
    model: UrysohnOperator | UrysohnTree | LinearRegression
    columns: list[ColumnSpec] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def kind(self) -> str:
        if isinstance(self.model, UrysohnTree):
            return "tree"
        if isinstance(self.model, LinearRegression):
            return "linear"
        return "single"

    def predict(self, X):
        return self.model.predict(X)


def _hex(v) -> str | None:
    return None if v is None else float(v).hex()


def _unhex(v) -> float | None:
    return None if v is None else float.fromhex(v)


def _line(keyword: str, payload) -> str:
    return f"{keyword} {json.dumps(payload, sort_keys=True)}"


def _function(f: PiecewiseLinear) -> str:
    return _line("function", {
        "lo": _hex(f.domain_min),
        "hi": _hex(f.domain_max),
        "levels": f.levels,
        "values": [_hex(v) for v in f.node_values],
    })


def _operator(label: str, index: int, u: UrysohnOperator) -> list[str]:
    head = _line("operator", {"label": label, "index": index, "functions": u.m})
    return [head] + [_function(f) for f in u.functions]


def dumps(mf: ModelFile) -> str:
    lines = [f"{MAGIC} {FORMAT_VERSION}", _line("kind", mf.kind), _line("seed", mf.seed),
             _line("config", mf.config)]
    for c in mf.columns:
        lines.append(_line("column", {
            "name": c.name, "role": c.role, "kind": c.kind,
            "lo": _hex(c.lo), "hi": _hex(c.hi), "categories": list(c.categories),
        }))
    if isinstance(mf.model, UrysohnTree):
        lines.append(_line("branches", mf.model.K))
        for k, b in enumerate(mf.model.branches):
            lines += _operator("branch", k, b)
        lines += _operator("root", 0, mf.model.root)
    elif isinstance(mf.model, LinearRegression):
        lines.append(_line("weights", [_hex(w) for w in mf.model.weights]))
    else:
        lines += _operator("single", 0, mf.model)
    lines.append("end")
    return "\n".join(lines) + "\n"


def save(mf: ModelFile, path) -> None:
    Path(path).write_text(dumps(mf))


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, keyword: str):
        if self.pos >= len(self.lines):
            raise ModelFormatError(self.pos + 1, f"unexpected end of file, expected {keyword!r}")
        self.pos += 1
        raw = self.lines[self.pos - 1]
        head, _, rest = raw.partition(" ")
        if head != keyword:
            self.fail(f"expected {keyword!r}, found {head!r}")
        if keyword == "end":
            return None
        try:
            return json.loads(rest)
        except json.JSONDecodeError as exc:
            self.fail(f"malformed {keyword} payload: {exc.msg}")

    def peek(self) -> str:
        return self.lines[self.pos].partition(" ")[0] if self.pos < len(self.lines) else ""

    def fail(self, message: str):
        raise ModelFormatError(self.pos, message)


def _read_function(r: _Reader) -> PiecewiseLinear:
    p = r.next("function")
    try:
        return PiecewiseLinear(_unhex(p["lo"]), _unhex(p["hi"]), [_unhex(v) for v in p["values"]],
                               p["levels"])
    except (KeyError, TypeError, ValueError) as exc:
        r.fail(f"bad function: {exc}")


def _read_operator(r: _Reader, label: str, index: int) -> UrysohnOperator:
    p = r.next("operator")
    if not isinstance(p, dict) or p.get("label") != label or p.get("index") != index:
        r.fail(f"expected operator {label} {index}, found {p}")
    count = p.get("functions")
    if not isinstance(count, int) or count < 1:
        r.fail(f"bad function count {count!r}")
    return UrysohnOperator([_read_function(r) for _ in range(count)])


def loads(text: str) -> ModelFile:
    r = _Reader(text)
    if not r.lines:
        raise ModelFormatError(1, "empty model file")
    magic, _, version = r.lines[0].partition(" ")
    r.pos = 1
    if magic != MAGIC:
        r.fail(f"not a model file (starts with {magic!r})")
    if version != str(FORMAT_VERSION):
        r.fail(f"unsupported format version {version!r} (this reader handles {FORMAT_VERSION})")
    kind = r.next("kind")
    if kind not in ("single", "tree", "linear"):
        r.fail(f"unknown model kind {kind!r}")
    seed = r.next("seed")
    config = r.next("config")
    if not isinstance(config, dict):
        r.fail("config must be an object")
    columns = []
    while r.peek() == "column":
        c = r.next("column")
        try:
            columns.append(ColumnSpec(c["name"], c["role"], c["kind"], _unhex(c["lo"]), _unhex(c["hi"]),
                                      tuple(c["categories"])))
        except (KeyError, TypeError, ValueError) as exc:
            r.fail(f"bad column: {exc}")
    if kind == "tree":
        K = r.next("branches")
        if not isinstance(K, int) or K < 1:
            r.fail(f"bad branch count {K!r}")
        branches = [_read_operator(r, "branch", k) for k in range(K)]
        root = _read_operator(r, "root", 0)
        try:
            model = UrysohnTree(branches, root)
        except ValueError as exc:
            r.fail(str(exc))
    elif kind == "linear":
        weights = r.next("weights")
        try:
            model = LinearRegression([_unhex(w) for w in weights])
        except (TypeError, ValueError) as exc:
            r.fail(f"bad weights: {exc}")
        if model.weights.ndim != 1 or model.m < 1:
            r.fail("weights must be a non-empty list")
    else:
        model = _read_operator(r, "single", 0)
    r.next("end")
    return ModelFile(model, columns, config, seed)


def load(path) -> ModelFile:
    return loads(Path(path).read_text())
