"""Pinned benchmark experiments with pass/fail bands.

Each experiment names its data files, a frozen :class:`RunConfig` per
model kind, and the metric bands its results must fall in. Real datasets
are never bundled; point ``URYSOHN_DATA`` (default ``./data``) at a
directory holding the files listed in :data:`SOURCES`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Dataset, load_series, parse_csv, synth_generate, to_pm1, window_siso
from .experiment import RunConfig, load_dataset, run_cv, run_holdout, run_select, run_train

log = logging.getLogger(__name__)

PASS, FAIL, FETCH = "pass", "fail", "fetch-required"

# tuned once on the synthetic data (see README) and reused for every tree
TREE_TUNING = dict(mu=0.5, alpha_branch=0.3, alpha_root=0.1, epochs=200)
# slope floor for the root functions, as a fraction of the output range
DELTA_SCALE = 0.04
SYNTH_RECORDS = 4000
SYNTH_SEED = 2024
REDUCTION_ADDENDS = (1, 2, 3, 6, 11)


def data_dir() -> Path:
    return Path(os.environ.get("URYSOHN_DATA", "data"))


@dataclass(frozen=True)
class Source:
    """A fetched file: where to get it and how to recognise it."""

    filename: str
    url: str
    records: int
    first_record: str | None = None  # first data line, delimiters folded to single spaces
    note: str = ""
    header_allowed: bool = False

    def path(self) -> Path:
        return data_dir() / self.filename

    def verify(self) -> str:
        """sha256 of the file, after checking the record count and first record."""
        path = self.path()
        raw = path.read_bytes()
        lines = [ln for ln in raw.decode(errors="replace").splitlines() if ln.strip()]
        if self.header_allowed and lines and _is_header(lines[0]):
            lines = lines[1:]
        if len(lines) != self.records:
            raise ValueError(f"{path}: expected {self.records} records, found {len(lines)}")
        if self.first_record is not None and _normalise(lines[0]) != self.first_record:
            raise ValueError(f"{path}: first record {lines[0]!r} does not match the expected dataset")
        return hashlib.sha256(raw).hexdigest()


def _normalise(line: str) -> str:
    return " ".join(line.replace(";", " ").replace(",", " ").split())


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _is_header(line: str) -> bool:
    """A line none of whose fields is numeric (only meaningful for numeric-led files)."""
    return not any(_is_number(c) for c in _normalise(line).split())


SOURCES = {
    "airfoil": Source(
        "airfoil_self_noise.dat",
        "https://archive.ics.uci.edu/dataset/291/airfoil+self+noise",
        1503, "800 0 0.3048 71.3 0.00266337 126.201"),
    "mushroom": Source(
        "agaricus-lepiota.data",
        "https://archive.ics.uci.edu/dataset/73/mushroom",
        8124, "p x s n t p f c n k e e s s w w p w o p k s u", "comma-separated, class letter first"),
    "wh-input": Source(
        "wh_input.txt", "http://www.nonlinearbenchmark.org/ (Wiener-Hammerstein System, 2009)",
        188000, None, "one input sample per line (uBenchMark)"),
    "wh-output": Source(
        "wh_output.txt", "http://www.nonlinearbenchmark.org/ (Wiener-Hammerstein System, 2009)",
        188000, None, "one output sample per line (yBenchMark)"),
    "bank-churn": Source(
        "bank_churn.csv", "https://www.neuraldesigner.com/learning/examples/bank-churn",
        10000, None, "12 columns: id, 10 features, exited flag; an optional header line is skipped",
        header_allowed=True),
}


@dataclass(frozen=True)
class Band:
    """Acceptance band for one metric; ``reference`` is the published figure."""

    metric: str
    low: float = -np.inf
    high: float = np.inf
    reference: str = ""

    def holds(self, value: float | None) -> bool:
        return value is not None and self.low <= value <= self.high

    def describe(self) -> str:
        lo = "" if self.low == -np.inf else f"{self.low:g} <= "
        hi = "" if self.high == np.inf else f" <= {self.high:g}"
        return f"{lo}{self.metric}{hi}"


@dataclass
class Check:
    label: str
    band: Band
    value: float | None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.band.holds(self.value)

    def to_dict(self) -> dict:
        return {"label": self.label, "metric": self.band.metric, "value": self.value,
                "low": _finite(self.band.low), "high": _finite(self.band.high),
                "reference": self.band.reference, "passed": self.passed, "seconds": round(self.seconds, 3)}


def _finite(v: float) -> float | None:
    return None if not np.isfinite(v) else v


@dataclass
class Outcome:
    name: str
    status: str
    checks: list[Check] = field(default_factory=list)
    checksum: dict[str, str] = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "message": self.message,
                "checksum": self.checksum, "checks": [c.to_dict() for c in self.checks]}


@dataclass
class Experiment:
    name: str
    sources: tuple[str, ...]
    runner: Callable[["Experiment", Dataset | None], list[Check]]
    loader: Callable[[], Dataset] | None = None
    description: str = ""

    def run(self) -> Outcome:
        missing = [s for s in self.sources if not SOURCES[s].path().exists()]
        if missing:
            hints = "; ".join(f"{SOURCES[s].path()} from {SOURCES[s].url}" for s in missing)
            return Outcome(self.name, FETCH, message=f"fetch required: {hints}")
        try:
            checksum = {s: SOURCES[s].verify() for s in self.sources}
        except ValueError as exc:
            return Outcome(self.name, FAIL, message=str(exc))
        ds = self.loader() if self.loader else None
        checks = self.runner(self, ds)
        status = PASS if all(c.passed for c in checks) else FAIL
        return Outcome(self.name, status, checks, checksum)


def _timed(label: str, band: Band, fn: Callable[[], float | None]) -> Check:
    t0 = time.perf_counter()
    value = fn()
    return Check(label, band, value, time.perf_counter() - t0)


def synthetic_dataset() -> Dataset:
    return synth_generate(SYNTH_RECORDS, SYNTH_SEED)


def tree_delta(ds: Dataset | None) -> float | None:
    """Pinned slope floor for ``ds``; None (automatic) when no data is at hand."""
    return None if ds is None else DELTA_SCALE * float(np.ptp(ds.y))


def synthetic_configs(ds: Dataset | None = None) -> dict[str, RunConfig]:
    return {
        "tree": RunConfig(model="tree", addends=11, nodes=[10], root_nodes=10, repeats=5, seed=1,
                          delta=tree_delta(ds), **TREE_TUNING),
        "urysohn": RunConfig(model="urysohn", nodes=[10], alpha=0.1, epochs=100, seed=1),
        "linear": RunConfig(model="linear", alpha=0.5, epochs=100, seed=1),
    }


def _fit_all_pearson(ds: Dataset, cfg: RunConfig) -> float | None:
    return run_train(ds, cfg).report.pearson


def _run_synthetic(exp: Experiment, ds: Dataset) -> list[Check]:
    cfgs = synthetic_configs(ds)
    checks = []
    t0 = time.perf_counter()
    cv = run_cv(ds, cfgs["tree"])
    seconds = time.perf_counter() - t0
    checks.append(Check("tree K=11 10-fold pearson", Band("pearson", 0.985, 1.0, "0.9935 +/- 0.0014"),
                        cv.mean("pearson"), seconds))
    checks.append(Check("tree K=11 10-fold nrmse", Band("nrmse", 0.0, 0.027, "0.0203 +/- 0.0023"),
                        cv.mean("nrmse"), seconds))
    # the baselines are reported on the data they were fitted to
    checks.append(_timed("linear pearson", Band("pearson", 0.86, 0.90, "0.88"),
                         lambda: _fit_all_pearson(ds, cfgs["linear"])))
    checks.append(_timed("urysohn pearson", Band("pearson", 0.91, 0.95, "0.93"),
                         lambda: _fit_all_pearson(ds, cfgs["urysohn"])))
    return checks


REDUCTION_BANDS = {
    1: Band("pearson", 0.86, 0.90, "0.88"),
    2: Band("pearson", 0.91, 0.95, "0.93"),
    3: Band("pearson", 0.94, 0.98, "0.96"),
    6: Band("pearson", 0.98, 1.0, "comparable to the full model"),
    11: Band("pearson", 0.98, 1.0, "0.9935 +/- 0.0014"),
}
MONOTONE_SLACK = 0.01


def reduction_config(K: int, ds: Dataset | None = None) -> RunConfig:
    return RunConfig(model="tree", addends=K, nodes=[10], root_nodes=10, repeats=3, seed=3,
                     delta=tree_delta(ds), **TREE_TUNING)


def run_reduction_study(ds: Dataset | None = None,
                        addends: tuple[int, ...] = REDUCTION_ADDENDS) -> list[tuple[int, float, float]]:
    """(K, mean 10-fold Pearson, seconds) for each addend count."""
    ds = ds if ds is not None else synthetic_dataset()
    rows = []
    for K in addends:
        t0 = time.perf_counter()
        cv = run_cv(ds, reduction_config(K, ds))
        rows.append((K, cv.mean("pearson"), time.perf_counter() - t0))
        log.info("reduction K=%d pearson=%.4f", K, rows[-1][1])
    return rows


def monotone_within(values: list[float], slack: float = MONOTONE_SLACK) -> bool:
    """Non-decreasing up to ``slack``: no value drops more than ``slack`` below an earlier one."""
    best = -np.inf
    for v in values:
        if v < best - slack:
            return False
        best = max(best, v)
    return True


def _run_reduction(exp: Experiment, ds: Dataset) -> list[Check]:
    rows = run_reduction_study(ds)
    checks = [Check(f"K={K} pearson", REDUCTION_BANDS[K], p, s) for K, p, s in rows]
    trend = 1.0 if monotone_within([p for _, p, _ in rows]) else 0.0
    checks.append(Check("pearson non-decreasing in K (slack 0.01)", Band("monotone", 1.0, 1.0, "trend"), trend))
    return checks


def airfoil_config(ds: Dataset | None = None) -> RunConfig:
    return RunConfig(data=str(SOURCES["airfoil"].path()), model="tree", addends=11, nodes=[15], root_nodes=10,
                     repeats=10, fractions=[0.6, 0.2, 0.2], seed=5, delta=tree_delta(ds), **TREE_TUNING)


def _run_airfoil(exp: Experiment, ds: Dataset) -> list[Check]:
    cfg = airfoil_config(ds)
    t0 = time.perf_counter()
    # five executions of the select protocol, each with its own split
    scores = [run_select(ds, cfg, execution=e).test.pearson for e in range(5)]
    return [Check("select test pearson (mean of 5)", Band("pearson", 0.93, 1.0, "0.9506 +/- 0.0049"),
                  float(np.mean(scores)), time.perf_counter() - t0)]


def mushroom_config() -> RunConfig:
    return RunConfig(data=str(SOURCES["mushroom"].path()), delimiter=",", output="1", model="urysohn",
                     alpha=0.5, epochs=20, kfold=10, repeats=10, classify=True, seed=11)


def _run_mushroom(exp: Experiment, ds: Dataset) -> list[Check]:
    cfg = mushroom_config()
    t0 = time.perf_counter()
    cv = run_cv(ds, cfg)
    total = time.perf_counter() - t0
    per_cv = total / cfg.repeats
    return [
        Check("mean misclassified over 8124", Band("misclassified", 0.0, 10.0, "3.60 +/- 0.37"),
              cv.mean("misclassified"), total),
        Check("seconds per full 10-fold run", Band("seconds", 0.0, 30.0, "2 s"), per_cv, total),
    ]


WH_WINDOW = 35


def wh_dataset() -> Dataset:
    x = load_series(SOURCES["wh-input"].path())
    z = load_series(SOURCES["wh-output"].path())
    return window_siso(x, z, WH_WINDOW)


def wh_configs(ds: Dataset | None = None) -> dict[str, RunConfig]:
    return {
        "tree": RunConfig(model="tree", addends=4, nodes=[16], root_nodes=10, mu=0.5, alpha_branch=0.3,
                          alpha_root=0.1, delta=tree_delta(ds), epochs=40, seed=13),
        "urysohn": RunConfig(model="urysohn", nodes=[16], alpha=0.1, epochs=40, seed=13),
        "linear": RunConfig(model="linear", alpha=0.1, epochs=40, seed=13),
    }


def wh_split(n: int) -> tuple[np.ndarray, np.ndarray]:
    half = n // 2
    return np.arange(half), np.arange(half, n)


def _run_wh(exp: Experiment, ds: Dataset) -> list[Check]:
    train, val = wh_split(len(ds))
    bands = {
        "tree": Band("nrmse", 0.0, 0.025, "0.0150 +/- 0.0016"),
        "urysohn": Band("nrmse", 0.0, 0.025, "0.0152"),
        "linear": Band("nrmse", 0.022, 0.042, "0.032"),
    }
    checks = []
    for kind, cfg in wh_configs(ds).items():
        checks.append(_timed(f"{kind} validation nrmse", bands[kind],
                             lambda cfg=cfg: run_holdout(ds, train, val, cfg)[0].nrmse))
    return checks


# nodes per input after the id column is dropped; quantized columns take their level count
CHURN_NODES = [3, 3, 2, 6, 3, 3, 4, 2, 2, 2]


def churn_config(ds: Dataset | None = None) -> RunConfig:
    return RunConfig(data=str(SOURCES["bank-churn"].path()), output="-1", ignore=["1"],
                     categorical=["3", "4", "9", "10"], pm1=True, model="tree", addends=3,
                     nodes=list(CHURN_NODES), root_nodes=6, mu=0.2, alpha_branch=0.05, alpha_root=0.05,
                     delta=tree_delta(ds), epochs=50, kfold=10, repeats=10, classify=True, seed=17)


def _load_churn() -> Dataset:
    cfg = churn_config()
    path = SOURCES["bank-churn"].path()
    first = next(ln for ln in path.read_text().splitlines() if ln.strip())
    ds = parse_csv(path, header=_is_header(first), output=cfg.output, ignore=cfg.ignore,
                   categorical=cfg.categorical)
    return to_pm1(ds)


def _run_churn(exp: Experiment, ds: Dataset) -> list[Check]:
    cfg = churn_config(ds)
    t0 = time.perf_counter()
    cv = run_cv(ds, cfg)
    return [Check("10-fold accuracy", Band("accuracy", 0.78, 1.0, "81.0% +/- 0.7%"),
                  cv.mean("accuracy"), time.perf_counter() - t0)]


def _load_csv(cfg: Callable[[], RunConfig]) -> Callable[[], Dataset]:
    def load():
        return load_dataset(cfg())
    return load


EXPERIMENTS = {
    e.name: e for e in [
        Experiment("synthetic", (), _run_synthetic, synthetic_dataset,
                   "generated function, 4000 records: tree 10-fold CV plus linear and single baselines"),
        Experiment("reduction", (), _run_reduction, synthetic_dataset,
                   "synthetic data, tree with K in 1, 2, 3, 6, 11 addends"),
        Experiment("airfoil", ("airfoil",), _run_airfoil, _load_csv(airfoil_config),
                   "airfoil self-noise, 60/20/20 select protocol, K=11, 15 nodes"),
        Experiment("mushroom", ("mushroom",), _run_mushroom, _load_csv(mushroom_config),
                   "mushroom, single quantized operator, 10-fold CV x 10"),
        Experiment("wiener-hammerstein", ("wh-input", "wh-output"), _run_wh, wh_dataset,
                   "Wiener-Hammerstein, window 35, half/half split, K=4, 15 segments"),
        Experiment("bank-churn", ("bank-churn",), _run_churn, _load_churn,
                   "bank churn, mixed quantized/continuous, K=3, 10-fold CV x 10"),
    ]
}


def run_experiment(name: str) -> Outcome:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(EXPERIMENTS)}")
    return EXPERIMENTS[name].run()


def save_outcome(outcome: Outcome, results: Path) -> Path:
    results.mkdir(parents=True, exist_ok=True)
    path = results / f"{outcome.name}.json"
    path.write_text(json.dumps(outcome.to_dict(), indent=1, sort_keys=True) + "\n")
    return path


def load_outcomes(results: Path) -> dict[str, dict]:
    found = {}
    for name in EXPERIMENTS:
        path = results / f"{name}.json"
        if path.exists():
            found[name] = json.loads(path.read_text())
    return found


TABLE_FIELDS = ("experiment", "check", "value", "band", "reference", "verdict")


def table_rows(outcomes: dict[str, dict]) -> list[tuple[str, ...]]:
    rows = []
    for name in EXPERIMENTS:
        o = outcomes.get(name)
        if o is None:
            rows.append((name, "-", "-", "-", "-", "not run"))
            continue
        if not o["checks"]:
            rows.append((name, "-", "-", "-", "-", o["status"]))
        for c in o["checks"]:
            band = Band(c["metric"], -np.inf if c["low"] is None else c["low"],
                        np.inf if c["high"] is None else c["high"]).describe()
            value = "none" if c["value"] is None else f"{c['value']:.6g}"
            rows.append((name, c["label"], value, band, c["reference"], PASS if c["passed"] else FAIL))
    return rows


def format_table(rows: list[tuple[str, ...]]) -> str:
    widths = [max(len(r[i]) for r in [TABLE_FIELDS, *rows]) for i in range(len(TABLE_FIELDS))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [TABLE_FIELDS, *rows]]
    return "\n".join(lines) + "\n"


def format_dsv(rows: list[tuple[str, ...]], delimiter: str = ";") -> str:
    return "\n".join(delimiter.join(r) for r in [TABLE_FIELDS, *rows]) + "\n"


def config_summary() -> dict[str, dict]:
    """Pinned settings per experiment, for the README and ``bench list``."""
    pinned = {
        "tree_delta": f"{DELTA_SCALE} x output range of the dataset (None here means automatic)",
        "synthetic": {k: dataclasses.asdict(c) for k, c in synthetic_configs().items()},
        "reduction": {f"K={K}": dataclasses.asdict(reduction_config(K)) for K in REDUCTION_ADDENDS},
        "airfoil": dataclasses.asdict(airfoil_config()),
        "mushroom": dataclasses.asdict(mushroom_config()),
        "wiener-hammerstein": {k: dataclasses.asdict(c) for k, c in wh_configs().items()},
        "bank-churn": dataclasses.asdict(churn_config()),
    }
    return pinned
