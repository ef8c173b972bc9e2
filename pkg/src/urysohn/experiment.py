"""Reproducible training and evaluation runs.

Every run is a pure function of a :class:`RunConfig` and its seed. Seeds
for individual repeats and folds come from :func:`derive_seed`, so any
single (repeat, fold) can be re-run on its own.
"""

from __future__ import annotations

import dataclasses
import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .data import Dataset, load_series, parse_csv, split_fractions, split_kfold, to_pm1, window_siso
from .metrics import EvalReport
from .single import TrainConfig, TrainTrace, fit_urysohn, train_linear
from .store import ModelFile
from .tree import TreeConfig, train_tree

log = logging.getLogger(__name__)

MODEL_KINDS = ("linear", "urysohn", "tree")


@dataclass
class RunConfig:
    # dataset
    data: str | None = None
    delimiter: str = "auto"
    header: bool = False
    output: str = "-1"
    ignore: list[str] = field(default_factory=list)
    categorical: list[str] = field(default_factory=list)
    pm1: bool = False
    series_input: str | None = None
    series_output: str | None = None
    window: int = 1
    # model
    model: str = "tree"
    addends: int | None = None
    nodes: list[int] = field(default_factory=lambda: [10])
    root_nodes: int = 10
    # trainers
    alpha: float = 0.5
    alpha_branch: float = 0.5
    alpha_root: float = 0.5
    mu: float = 0.2
    delta: float | None = None
    epochs: int = 100
    root_init_epochs: int = 5
    init_spread: float = 1.0
    repeats: int = 1
    seed: int = 0
    # evaluation
    kfold: int = 10
    fractions: list[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    classify: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if not self.nodes:
            raise ValueError("nodes must not be empty")
        # build the trainer configs now so bad values fail before any work
        self.single_config(0)
        if self.model == "tree":
            self.tree_config(0)

    @property
    def node_spec(self) -> int | list[int]:
        return self.nodes[0] if len(self.nodes) == 1 else list(self.nodes)

    def single_config(self, seed: int) -> TrainConfig:
        nodes = 2 if self.model == "linear" else self.node_spec
        return TrainConfig(alpha=self.alpha, epochs=self.epochs, nodes_per_input=nodes, seed=seed)

    def tree_config(self, seed: int) -> TreeConfig:
        return TreeConfig(addends=self.addends, branch_nodes=self.node_spec, root_nodes=self.root_nodes,
                          mu=self.mu, delta=self.delta, alpha_branch=self.alpha_branch,
                          alpha_root=self.alpha_root, epochs=self.epochs, seed=seed,
                          init_spread=self.init_spread, root_init_epochs=self.root_init_epochs)

    def echo(self) -> dict:
        """Model-relevant settings, written into saved model files."""
        keys = ("model", "addends", "nodes", "root_nodes", "alpha", "alpha_branch", "alpha_root", "mu",
                "delta", "epochs", "root_init_epochs", "init_spread", "seed", "pm1", "classify")
        return {k: getattr(self, k) for k in keys}


def _coerce(tp, text: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        if text.strip().lower() in ("", "none"):
            return None
        inner = next(a for a in args if a is not type(None))
        return _coerce(inner, text)
    if origin is list:
        (inner,) = args
        return [_coerce(inner, part) for part in text.replace(";", ",").split(",") if part.strip()]
    if tp is bool:
        low = text.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return low in ("1", "true", "yes")
    return tp(text.strip())


def parse_settings(pairs: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Apply ``key=value`` strings onto ``base`` (or the defaults)."""
    hints = typing.get_type_hints(RunConfig)
    values = dataclasses.asdict(base) if base is not None else {}
    for key, text in pairs.items():
        name = key.strip().replace("-", "_")
        if name not in hints:
            raise ValueError(f"unknown setting {key!r}")
        try:
            values[name] = _coerce(hints[name], text)
        except ValueError as exc:
            raise ValueError(f"setting {key}={text!r}: {exc}") from None
    return RunConfig(**values)


def read_config_file(path) -> dict[str, str]:
    pairs = {}
    for no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{no}: expected key=value, got {raw!r}")
        pairs[key.strip()] = value.strip()
    return pairs


def derive_seed(seed: int, *counters: int) -> int:
    """Seed for one sub-run, from the run seed and its (repeat, fold, ...) counters."""
    return int(np.random.SeedSequence([seed, *counters]).generate_state(1)[0])


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.series_input or cfg.series_output:
        if not (cfg.series_input and cfg.series_output):
            raise ValueError("series_input and series_output must be given together")
        return window_siso(load_series(cfg.series_input), load_series(cfg.series_output), cfg.window)
    if not cfg.data:
        raise ValueError("no dataset given (set data=... or series_input/series_output)")
    ds = parse_csv(cfg.data, delimiter=None if cfg.delimiter == "whitespace" else cfg.delimiter,
                   header=cfg.header, output=cfg.output, ignore=cfg.ignore, categorical=cfg.categorical)
    return to_pm1(ds) if cfg.pm1 else ds


def fit(ds: Dataset, rows: np.ndarray, cfg: RunConfig, seed: int):
    """Train the configured model kind on ``rows``; returns (model, trace)."""
    X, y = ds.X[rows], ds.y[rows]
    domains = ds.domains(rows)
    if cfg.model == "linear":
        return train_linear(X, y, cfg.single_config(seed))
    if cfg.model == "urysohn":
        return fit_urysohn(X, y, domains, cfg.single_config(seed))
    return train_tree(X, y, domains, cfg.tree_config(seed))


def model_file(model, ds: Dataset, cfg: RunConfig, seed: int) -> ModelFile:
    return ModelFile(model, list(ds.columns), cfg.echo(), seed)


def report(ds: Dataset, rows: np.ndarray, predictions: np.ndarray, cfg: RunConfig) -> EvalReport:
    return metrics.evaluate(ds.y[rows], predictions, classify=cfg.classify)


@dataclass
class TrainResult:
    model: object
    trace: TrainTrace
    report: EvalReport
    seed: int


def run_train(ds: Dataset, cfg: RunConfig, rows: np.ndarray | None = None) -> TrainResult:
    """Fit on ``rows`` (default all) and report on the same rows."""
    rows = np.arange(len(ds)) if rows is None else rows
    model, trace = fit(ds, rows, cfg, cfg.seed)
    return TrainResult(model, trace, report(ds, rows, model.predict(ds.X[rows]), cfg), cfg.seed)


@dataclass
class CVResult:
    reports: list[EvalReport]        # one per repeat, over pooled out-of-fold predictions
    fold_reports: list[list[EvalReport]]
    predictions: list[np.ndarray]    # out-of-fold prediction per record, per repeat

    def interval(self, metric: str) -> metrics.ConfidenceInterval | float:
        values = [getattr(r, metric) for r in self.reports]
        return metrics.ci95(values) if len(values) >= 2 else float(values[0])

    def mean(self, metric: str) -> float:
        return float(np.mean([getattr(r, metric) for r in self.reports]))


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_cv(ds: Dataset, cfg: RunConfig) -> CVResult:
    """k-fold cross-validation repeated ``cfg.repeats`` times with derived seeds."""
    plans = [split_kfold(len(ds), cfg.kfold, derive_seed(cfg.seed, r)) for r in range(cfg.repeats)]
    for plan in plans:
        for train, val in plan.folds:
            if np.intersect1d(train, val).size:
                raise RuntimeError("validation records leaked into a training fold")

    def one(job):
        r, f = job
        train, val = plans[r].folds[f]
        model, _ = fit(ds, train, cfg, derive_seed(cfg.seed, r, f))
        return model.predict(ds.X[val])

    jobs = [(r, f) for r in range(cfg.repeats) for f in range(cfg.kfold)]
    outputs = dict(zip(jobs, _map(one, jobs, cfg.jobs)))
    reports, fold_reports, predictions = [], [], []
    for r, plan in enumerate(plans):
        pooled = np.empty(len(ds))
        folds = []
        for f, (_, val) in enumerate(plan.folds):
            pooled[val] = outputs[r, f]
            folds.append(report(ds, val, outputs[r, f], cfg))
        reports.append(report(ds, np.arange(len(ds)), pooled, cfg))
        fold_reports.append(folds)
        predictions.append(pooled)
    return CVResult(reports, fold_reports, predictions)


@dataclass
class SelectResult:
    model: object
    seed: int
    selection: EvalReport
    test: EvalReport
    candidates: list[EvalReport]


def _score(rep: EvalReport, classify: bool) -> float:
    if classify:
        return -rep.misclassified
    return -np.inf if rep.pearson is None else rep.pearson


def run_select(ds: Dataset, cfg: RunConfig, execution: int = 0) -> SelectResult:
    """Train ``cfg.repeats`` candidates, keep the best on the selection subset, report on test."""
    train, select, test = split_fractions(len(ds), cfg.fractions, derive_seed(cfg.seed, execution))
    seeds = [derive_seed(cfg.seed, execution, r) for r in range(cfg.repeats)]
    models = _map(lambda s: fit(ds, train, cfg, s)[0], seeds, cfg.jobs)
    candidates = [report(ds, select, m.predict(ds.X[select]), cfg) for m in models]
    best = max(range(len(models)), key=lambda i: _score(candidates[i], cfg.classify))
    chosen = models[best]
    return SelectResult(chosen, seeds[best], candidates[best],
                        report(ds, test, chosen.predict(ds.X[test]), cfg), candidates)


def run_holdout(ds: Dataset, train: np.ndarray, val: np.ndarray, cfg: RunConfig) -> list[EvalReport]:
    """Fixed split, one model per repeat."""
    seeds = [derive_seed(cfg.seed, r) for r in range(cfg.repeats)]
    models = _map(lambda s: fit(ds, train, cfg, s)[0], seeds, cfg.jobs)
    return [report(ds, val, m.predict(ds.X[val]), cfg) for m in models]
