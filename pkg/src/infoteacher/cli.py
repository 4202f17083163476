"""Command-line entry point.

Exit status is 0 on success, 1 for bad arguments, configuration or input
files, and 2 when evaluation or training fails at run time.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .datamodel import load_csv, sine_model
from .errors import ConfigurationError, EvaluationError, IngestionError, TrainingError
from .experiments import SCENARIOS, default_config, dump_config, emit, load_config, run_experiment_detailed
from .mi import ScheduleParams, estimate_mi, threshold
from .partition import JointSample
from .regressors import MLPConfig, TrainedModel, fit_knn, fit_linear, fit_mlp
from .teacher import information_teacher, monte_carlo_error_rates, naive_mse_teacher, zero_student

log = logging.getLogger("infoteacher")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _schedule(path) -> ScheduleParams:
    """Schedule parameters from an optional config file (only ``schedule.*`` keys matter)."""
    if path is None:
        return ScheduleParams()
    return load_config(path, scenario="mc-theorem2").schedule


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {out}: {exc}") from exc


def _targets(value: str) -> list:
    return [c.strip() for c in value.split(",") if c.strip()]


# ---------------------------------------------------------------------------
# subcommands

def cmd_fit(args) -> int:
    train = load_csv(args.data, _targets(args.target))
    if args.kind == "linear":
        model = fit_linear(train)
    elif args.kind == "knn":
        model = fit_knn(train, args.k)
    else:
        if args.val_data is None:
            raise ConfigurationError("mlp training needs --val-data for early stopping")
        val = load_csv(args.val_data, _targets(args.target))
        cfg = MLPConfig(hidden_layers=tuple(args.hidden), optimizer=args.optimizer,
                        learning_rate=args.lr, max_epochs=args.epochs, seed=args.seed)
        model = fit_mlp(train, val, cfg)
    _write(model.to_json() + "\n", args.out)
    return 0


def cmd_assess(args) -> int:
    path = Path(args.model)
    if not path.is_file():
        raise ConfigurationError(f"model file not found: {path}")
    try:
        model = TrainedModel.from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(f"{path}: not a model file ({exc})") from None
    val = load_csv(args.data, _targets(args.target))
    verdict = information_teacher(model.predict, val, _schedule(args.config))
    report = {"information": verdict.to_dict()}
    if args.naive_a is not None:
        report["naive"] = naive_mse_teacher(model.predict, val, args.naive_a).to_dict()
    _write(json.dumps(report, indent=1) + "\n", args.out)
    return 0


def cmd_estimate_mi(args) -> int:
    path = Path(args.data)
    if not path.is_file():
        raise IngestionError(f"data file not found: {path}")
    with path.open(encoding="utf-8-sig") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    if len(header) != 2:
        raise IngestionError(f"{path}: expected exactly two columns, found {len(header)}")
    ds = load_csv(path, [header[1]])
    params = _schedule(args.config)
    est = estimate_mi(JointSample(ds.xs, ds.ys), params)
    a_m = threshold(est.m, params)
    report = {"mi": est.value, "m": est.m, "leaf_count": est.leaf_count, "threshold": a_m,
              "decision": int(est.value < a_m), "columns": header}
    _write(json.dumps(report, indent=1) + "\n", args.out)
    return 0


def cmd_experiment(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config, scenario=args.scenario, fast=args.fast)
        if cfg.scenario != args.scenario:
            raise ConfigurationError(f"config is for {cfg.scenario!r}, not {args.scenario!r}")
    else:
        cfg = default_config(args.scenario, fast=args.fast)
    changes = {}
    if args.seed is not None:
        changes["seeds"] = tuple(args.seed + i for i in range(len(cfg.seeds)))
    if args.jobs is not None:
        changes["n_jobs"] = args.jobs
    if args.cache is not None:
        changes["cache_dir"] = args.cache
    if args.data is not None:
        changes["data_path"] = args.data
    cfg = dataclasses.replace(cfg, **changes)
    if args.dump_config:
        sys.stdout.write(dump_config(cfg))
        return 0

    run = run_experiment_detailed(cfg)
    out = Path(args.out or f"{cfg.scenario}.{args.format}")
    emit(run.curves, out, args.format)
    for n, s, msg in run.failures:
        log.warning("n_train=%d seed=%d excluded: %s", n, s, msg)
    print(f"wrote {len(run.curves)} curve(s) to {out}; {len(run.failures)} cell(s) failed")
    # diverged cells are excluded from the curves but still signal a runtime failure
    return 2 if run.failures else 0


def cmd_mc_validate(args) -> int:
    cfg = default_config("mc-theorem2", fast=args.fast)
    if args.config is not None:
        cfg = load_config(args.config, scenario="mc-theorem2", fast=args.fast)
    m_grid = tuple(args.m_grid) if args.m_grid else cfg.n_train_grid
    trials = args.trials if args.trials is not None else cfg.mc_trials
    alt = None if args.no_alternative else zero_student
    curve = monte_carlo_error_rates(sine_model(cfg.noise_variance), None, alt, m_grid, trials,
                                    cfg.schedule, seed=args.seed, n_jobs=args.jobs)
    _write(curve.to_csv(), args.out)
    if args.out is not None:
        print(f"decay slope of log alpha_hat against m^(1/3): {curve.decay_slope():.4g}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="infoteacher", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="train a student on a CSV file and write its JSON")
    f.add_argument("--data", required=True)
    f.add_argument("--target", required=True, help="comma-separated target column names")
    f.add_argument("--kind", choices=("linear", "knn", "mlp"), default="linear")
    f.add_argument("--k", type=int, default=25)
    f.add_argument("--val-data")
    f.add_argument("--hidden", type=int, nargs="+", default=[128, 128])
    f.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    f.add_argument("--lr", type=float, default=1e-4)
    f.add_argument("--epochs", type=int, default=50)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("assess", help="information-teacher verdict for one model on one CSV file")
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--target", required=True)
    a.add_argument("--naive-a", type=float, help="also report the MSE-threshold verdict")
    a.add_argument("--config", help="config file supplying schedule.* keys")
    a.add_argument("--out")
    a.set_defaults(func=cmd_assess)

    e = sub.add_parser("experiment", help="training-size sweep; writes curve files")
    e.add_argument("scenario", choices=SCENARIOS)
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--fast", action="store_true", help="5 seeds and a thinned grid")
    e.add_argument("--seed", type=int, help="first seed; the seed count is kept")
    e.add_argument("--jobs", type=int)
    e.add_argument("--cache", help="directory for per-cell result records")
    e.add_argument("--data", help="data file for real-ccpp")
    e.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    e.set_defaults(func=cmd_experiment)

    m = sub.add_parser("mc-validate", help="Monte-Carlo error rates of the information teacher")
    m.add_argument("--config")
    m.add_argument("--trials", type=int)
    m.add_argument("--m-grid", type=int, nargs="+")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--fast", action="store_true")
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--no-alternative", action="store_true", help="skip the zero-student runs")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mc_validate)

    s = sub.add_parser("estimate-mi", help="MI between the two columns of a CSV file")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_estimate_mi)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (ConfigurationError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EvaluationError, TrainingError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
