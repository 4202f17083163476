"""Experiment orchestration: training-size sweeps, aggregation and curve files."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datamodel import (
    Dataset,
    SplitSpec,
    Standardizer,
    load_csv,
    pca_fit,
    pca_transform,
    sample_additive,
    sine_model,
    split,
)
from .errors import ConfigurationError, InfoTeacherError, TrainingError
from .mi import ScheduleParams, estimate_mi, residuals, threshold
from .regressors import FAVORABLE, UNFAVORABLE, MLPConfig, fit_mlp
from .teacher import monte_carlo_error_rates, oracle_teacher, zero_student

log = logging.getLogger(__name__)

SCENARIOS = ("synthetic-favorable", "synthetic-unfavorable", "real-ccpp", "mc-theorem2")
METRICS = ("mi", "mse", "rmse", "oracle", "decision")


def log_grid(lo: int, hi: int, points: int = 10) -> tuple:
    """``points`` log-spaced sizes from ``lo`` to ``hi``, rounded to the nearest 10."""
    vals = np.geomspace(lo, hi, points)
    return tuple(int(10 * round(v / 10)) for v in vals)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    n_train_grid: tuple = log_grid(100, 50_000)
    n_val: int = 2000
    seeds: tuple = tuple(range(20))
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    mlp: MLPConfig = FAVORABLE
    data_path: str | None = None
    metric_set: tuple = ("mi", "mse", "oracle", "decision")
    target_columns: tuple = ("PE",)
    pca_components: int = 2
    noise_variance: float = 0.25
    standardize_targets: bool = False
    val_seed: int = 2025
    mc_trials: int = 50
    cache_dir: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        grid = tuple(int(g) for g in self.n_train_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigurationError(f"n_train_grid must be strictly increasing positive counts: {grid}")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        unknown = set(self.metric_set) - set(METRICS)
        if unknown:
            raise ConfigurationError(f"unknown metrics {sorted(unknown)}")
        if self.n_val < 2:
            raise ConfigurationError("n_val must be at least 2")
        object.__setattr__(self, "n_train_grid", grid)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "metric_set", tuple(self.metric_set))
        object.__setattr__(self, "target_columns", tuple(self.target_columns))

    def fingerprint(self) -> str:
        """Hash of everything that affects a single (n_train, seed) cell."""
        d = dataclasses.asdict(self)
        for k in ("n_train_grid", "seeds", "cache_dir", "n_jobs", "metric_set"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def default_config(scenario: str, fast: bool = False) -> ExperimentConfig:
    """Full-scale defaults; ``fast`` keeps 5 seeds and every third grid point."""
    if scenario == "synthetic-favorable":
        cfg = ExperimentConfig(scenario, mlp=FAVORABLE)
    elif scenario == "synthetic-unfavorable":
        cfg = ExperimentConfig(scenario, mlp=UNFAVORABLE)
    elif scenario == "real-ccpp":
        cfg = ExperimentConfig(
            scenario,
            n_train_grid=log_grid(100, 7000),
            mlp=MLPConfig(hidden_layers=(256,), optimizer="adam", max_epochs=300),
            data_path="data/ccpp.csv",
            metric_set=("mi", "rmse", "decision"),
            standardize_targets=True,
        )
    elif scenario == "mc-theorem2":
        cfg = ExperimentConfig(scenario, n_train_grid=(500, 2000, 8000, 20000), seeds=(0,),
                               metric_set=("decision",))
    else:
        raise ConfigurationError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    if fast:
        if scenario == "mc-theorem2":
            cfg = dataclasses.replace(cfg, mc_trials=20)
        else:
            grid = cfg.n_train_grid
            cfg = dataclasses.replace(cfg, seeds=cfg.seeds[:5], n_train_grid=grid[::3] if len(grid) > 4 else grid)
    return cfg


# ---------------------------------------------------------------------------
# flat key = value config files

def _list(value: str, cast=int) -> tuple:
    return tuple(cast(v) for v in value.replace(",", " ").split())


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


_TOP = {
    "n_train_grid": _list, "n_val": int, "seeds": _list, "data_path": str,
    "metric_set": lambda v: _list(v, str), "target_columns": lambda v: _list(v, str),
    "pca_components": int, "noise_variance": float, "standardize_targets": _bool,
    "val_seed": int, "mc_trials": int, "cache_dir": str, "n_jobs": int,
}
_SCHEDULE = {"a_scale": float, "a_exp": float}
_PARTITION = {"ell": float, "lam": float, "lambda": float, "b_scale": float}
_MLP = {
    "hidden_layers": _list, "activation": str, "optimizer": str, "learning_rate": float,
    "batch_size": int, "max_epochs": int, "early_stop_tol": float, "patience": int, "seed": int,
}


def parse_config(text: str, scenario: str | None = None, fast: bool = False) -> ExperimentConfig:
    """Apply ``key = value`` lines on top of the scenario defaults.

    Nested fields use dotted keys: ``schedule.lam``, ``schedule.a_scale``,
    ``mlp.hidden_layers`` and so on.  Lines starting with ``#`` are comments.
    """
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    items = dict(parser.items("experiment"))
    scenario = items.pop("scenario", scenario)
    if scenario is None:
        raise ConfigurationError("config does not name a scenario")
    base = default_config(scenario, fast=fast)
    top, sched, part, mlp = {}, {}, {}, {}
    for key, raw in items.items():
        sub = key.split(".", 1)[-1]
        if key in _TOP:
            target, cast, name = top, _TOP[key], key
        elif key.startswith("schedule.") and sub in _SCHEDULE:
            target, cast, name = sched, _SCHEDULE[sub], sub
        elif key.startswith("schedule.") and sub in _PARTITION:
            target, cast, name = part, _PARTITION[sub], "lam" if sub == "lambda" else sub
        elif key.startswith("mlp.") and sub in _MLP:
            target, cast, name = mlp, _MLP[sub], sub
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
        try:
            target[name] = cast(raw)
        except ValueError:
            raise ConfigurationError(f"bad value for {key!r}: {raw!r}") from None
    schedule = base.schedule
    if part:
        schedule = dataclasses.replace(schedule, partition=dataclasses.replace(schedule.partition, **part))
    if sched:
        schedule = dataclasses.replace(schedule, **sched)
    return dataclasses.replace(base, schedule=schedule, mlp=dataclasses.replace(base.mlp, **mlp), **top)


def load_config(path, scenario: str | None = None, fast: bool = False) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), scenario, fast)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render every field as ``key = value`` (inverse of ``parse_config``)."""
    def fmt(v):
        if isinstance(v, (tuple, list)):
            return ", ".join(str(x) for x in v)
        return str(v)

    lines = [f"scenario = {cfg.scenario}"]
    for key in _TOP:
        v = getattr(cfg, key)
        if v is not None:
            lines.append(f"{key} = {fmt(v)}")
    for key in ("ell", "lam", "b_scale"):
        lines.append(f"schedule.{key} = {getattr(cfg.schedule.partition, key)!r}")
    for key in _SCHEDULE:
        lines.append(f"schedule.{key} = {getattr(cfg.schedule, key)!r}")
    for key in _MLP:
        lines.append(f"mlp.{key} = {fmt(getattr(cfg.mlp, key))}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# curves

@dataclass(frozen=True)
class ExperimentCurve:
    metric: str
    points: tuple  # (n_train, median, q25, q75)

    def __post_init__(self):
        pts = tuple((int(n), float(md), float(lo), float(hi)) for n, md, lo, hi in self.points)
        for _, md, lo, hi in pts:
            if not lo <= md <= hi:
                raise ConfigurationError(f"quartiles out of order in curve {self.metric!r}")
        object.__setattr__(self, "points", pts)

    def at(self, n_train: int) -> tuple:
        for pt in self.points:
            if pt[0] == n_train:
                return pt
        raise KeyError(n_train)


def aggregate(metric: str, values_by_n: dict) -> ExperimentCurve:
    points = []
    for n in sorted(values_by_n):
        vals = np.asarray(values_by_n[n], dtype=float)
        if vals.size == 0:
            continue
        q25, med, q75 = np.percentile(vals, [25, 50, 75])
        points.append((n, float(med), float(min(q25, med)), float(max(q75, med))))
    return ExperimentCurve(metric, tuple(points))


def emit(curves: Sequence[ExperimentCurve], path, fmt: str = "csv") -> Path:
    """Write curves sorted by (metric, n_train) as CSV or JSON rows."""
    path = Path(path)
    rows = sorted(((c.metric, *pt) for c in curves for pt in c.points), key=lambda r: (r[0], r[1]))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "n_train", "median", "q25", "q75"])
        for metric, n, md, lo, hi in rows:
            w.writerow([metric, n, repr(md), repr(lo), repr(hi)])
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([{"metric": metric, "n_train": n, "median": md, "q25": lo, "q75": hi}
                           for metric, n, md, lo, hi in rows], indent=1) + "\n"
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InfoTeacherError(f"cannot write {path}: {exc}") from exc
    return path


def read_curves(path) -> list:
    """Parse a file written by ``emit`` (format picked from the suffix)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        rows = [(r["metric"], r["n_train"], r["median"], r["q25"], r["q75"]) for r in json.loads(text)]
    else:
        rows = [(r["metric"], int(r["n_train"]), float(r["median"]), float(r["q25"]), float(r["q75"]))
                for r in csv.DictReader(io.StringIO(text))]
    by_metric: dict = {}
    for metric, *pt in rows:
        by_metric.setdefault(metric, []).append(tuple(pt))
    return [ExperimentCurve(m, tuple(pts)) for m, pts in by_metric.items()]


# ---------------------------------------------------------------------------
# one (n_train, seed) cell

class _Student:
    """Wraps a trained MLP with the scalers used to train it."""

    def __init__(self, model, x_scaler, y_scaler, pca=None):
        self.model, self.x_scaler, self.y_scaler, self.pca = model, x_scaler, y_scaler, pca

    def features(self, xs):
        z = self.x_scaler.transform(xs)
        return pca_transform(self.pca, z) if self.pca is not None else z

    def __call__(self, xs):
        out = self.model.predict(self.features(xs))
        return self.y_scaler.inverse(out) if self.y_scaler is not None else out


def _train_student(cfg: ExperimentConfig, train: Dataset, val: Dataset, seed: int, use_pca: bool) -> _Student:
    xsc = Standardizer.fit(train.xs)
    ysc = Standardizer.fit(train.ys) if cfg.standardize_targets else None
    pca = None
    if use_pca:
        pca = pca_fit(xsc.transform(train.xs), min(cfg.pca_components, train.p))
    student = _Student(None, xsc, ysc, pca)

    def prep(ds):
        ys = ysc.transform(ds.ys) if ysc is not None else ds.ys
        return Dataset(student.features(ds.xs), ys)

    student.model = fit_mlp(prep(train), prep(val), dataclasses.replace(cfg.mlp, seed=int(seed)))
    return student


_CCPP_CACHE: dict = {}


def _ccpp(cfg: ExperimentConfig) -> Dataset:
    key = (cfg.data_path, cfg.target_columns)
    if key not in _CCPP_CACHE:
        _CCPP_CACHE[key] = load_csv(cfg.data_path, cfg.target_columns)
    return _CCPP_CACHE[key]


def run_cell(cfg: ExperimentConfig, n_train: int, seed: int) -> dict:
    """Train one student and evaluate every metric on the validation set."""
    if cfg.scenario in ("synthetic-favorable", "synthetic-unfavorable"):
        spec = sine_model(cfg.noise_variance)
        val = sample_additive(spec, cfg.n_val, cfg.val_seed)
        train = sample_additive(spec, n_train, np.random.SeedSequence([int(seed), int(n_train)]))
        student = _train_student(cfg, train, val, seed, use_pca=False)
        f_true = spec.f()
    elif cfg.scenario == "real-ccpp":
        train, val = split(_ccpp(cfg), SplitSpec(n_train, cfg.n_val, int(seed)))
        student = _train_student(cfg, train, val, seed, use_pca=cfg.pca_components > 0)
        f_true = None
    else:
        raise ConfigurationError(f"scenario {cfg.scenario!r} has no training cells")

    out = {"epochs": len(student.model.training_log)}
    pred = np.asarray(student(val.xs), dtype=float).reshape(val.ys.shape)
    mse = float(np.mean(np.sum((val.ys - pred) ** 2, axis=1)))
    if "mse" in cfg.metric_set:
        out["mse"] = mse
    if "rmse" in cfg.metric_set:
        out["rmse"] = math.sqrt(mse)
    if "mi" in cfg.metric_set or "decision" in cfg.metric_set:
        est = estimate_mi(residuals(val, lambda _x: pred), cfg.schedule)
        a_m = threshold(val.n, cfg.schedule)
        if "mi" in cfg.metric_set:
            out["mi"] = est.value
            out["threshold"] = a_m
        if "decision" in cfg.metric_set:
            out["decision"] = float(est.value < a_m)
    if "oracle" in cfg.metric_set and f_true is not None:
        out["oracle"] = oracle_teacher(f_true, lambda _x: pred, val.xs).statistic
    return out


def _cache_path(cfg: ExperimentConfig, n_train: int, seed: int) -> Path:
    return Path(cfg.cache_dir) / f"{cfg.scenario}-n{n_train}-s{seed}.json"


def _expected_keys(cfg: ExperimentConfig) -> set:
    keys = set(cfg.metric_set)
    if cfg.scenario == "real-ccpp":
        keys.discard("oracle")
    if "mi" in keys:
        keys.add("threshold")
    return keys


def _cell_job(args):
    cfg, n_train, seed = args
    if cfg.cache_dir:
        path = _cache_path(cfg, n_train, seed)
        if path.is_file():
            rec = json.loads(path.read_text())
            if rec.get("fingerprint") == cfg.fingerprint() and _expected_keys(cfg) <= set(rec["metrics"]):
                return n_train, seed, rec["metrics"], None
    try:
        metrics = run_cell(cfg, n_train, seed)
    except TrainingError as exc:
        return n_train, seed, None, str(exc)
    if cfg.cache_dir:
        path = _cache_path(cfg, n_train, seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"scenario": cfg.scenario, "n_train": n_train, "seed": seed,
                                    "fingerprint": cfg.fingerprint(), "metrics": metrics}, sort_keys=True))
    return n_train, seed, metrics, None


@dataclass
class ExperimentRun:
    curves: list
    failures: list = field(default_factory=list)  # (n_train, seed, message)
    cells: dict = field(default_factory=dict)  # (n_train, seed) -> metrics


def run_experiment_detailed(cfg: ExperimentConfig) -> ExperimentRun:
    if cfg.scenario == "mc-theorem2":
        return _run_mc(cfg)
    if cfg.scenario == "real-ccpp" and not (cfg.data_path and Path(cfg.data_path).is_file()):
        raise ConfigurationError(f"real-ccpp needs a data file; not found: {cfg.data_path}")
    jobs = [(cfg, n, s) for n in cfg.n_train_grid for s in cfg.seeds]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]

    run = ExperimentRun([])
    for n, s, metrics, err in results:
        if err is not None:
            run.failures.append((n, s, err))
        else:
            run.cells[(n, s)] = metrics
    if run.failures:
        log.warning("%d training cell(s) diverged and were excluded", len(run.failures))
    for name in sorted(_expected_keys(cfg)):
        by_n = {n: [] for n in cfg.n_train_grid}
        for (n, _), metrics in run.cells.items():
            if name in metrics:
                by_n[n].append(metrics[name])
        curve = aggregate(name, by_n)
        if curve.points:
            run.curves.append(curve)
    return run


def _run_mc(cfg: ExperimentConfig) -> ExperimentRun:
    spec = sine_model(cfg.noise_variance)
    alpha, beta = {m: [] for m in cfg.n_train_grid}, {m: [] for m in cfg.n_train_grid}
    for s in cfg.seeds:
        curve = monte_carlo_error_rates(spec, None, zero_student, cfg.n_train_grid, cfg.mc_trials,
                                        cfg.schedule, seed=s, n_jobs=cfg.n_jobs)
        for m, a, b in zip(curve.m_grid, curve.alpha_hat, curve.beta_hat):
            alpha[m].append(a)
            beta[m].append(b)
    return ExperimentRun([aggregate("alpha_hat", alpha), aggregate("beta_hat", beta)])


def run_experiment(cfg: ExperimentConfig) -> list:
    """Curves (sorted by metric name) for every requested metric."""
    return run_experiment_detailed(cfg).curves
