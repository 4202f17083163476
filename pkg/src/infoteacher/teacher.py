"""Assessment agents and the Monte-Carlo error-rate harness.

Three teachers judge a trained student ``predict``:

* ``oracle_teacher`` compares against the true regression function;
* ``naive_mse_teacher`` thresholds the validation MSE;
* ``information_teacher`` thresholds the estimated mutual information
  between inputs and residuals, and needs neither ``f`` nor a loss target.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datamodel import AdditiveModelSpec, Dataset, sample_additive
from .errors import ConfigurationError
from .mi import ScheduleParams, estimate_mi, residuals, threshold

Predictor = Callable[[np.ndarray], np.ndarray]

DEFAULT_ORACLE_TOL = 1e-3


@dataclass(frozen=True)
class TeacherVerdict:
    decision: int
    statistic: float
    threshold: float
    m: int
    kind: str

    def recompute(self) -> int:
        """Decision implied by ``statistic`` and ``threshold`` alone."""
        if self.kind == "naive":
            return int(self.statistic <= self.threshold)
        return int(self.statistic < self.threshold)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "decision": self.decision, "statistic": self.statistic,
                "threshold": self.threshold, "m": self.m}


def information_teacher(predict: Predictor, val: Dataset, params: ScheduleParams | None = None) -> TeacherVerdict:
    """Accept (1) when the residual MI estimate lies strictly below ``a_m``."""
    params = params or ScheduleParams()
    if val.n < 2:
        raise ConfigurationError("the information teacher needs at least two validation rows")
    est = estimate_mi(residuals(val, predict), params)
    a_m = threshold(val.n, params)
    return TeacherVerdict(int(est.value < a_m), est.value, a_m, val.n, "information")


def oracle_teacher(f_true: Predictor, predict: Predictor, x_samples, tol: float = DEFAULT_ORACLE_TOL) -> TeacherVerdict:
    x = np.asarray(x_samples, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[0] < 1:
        raise ConfigurationError("oracle teacher needs at least one input row")
    diff = np.asarray(f_true(x), dtype=float) - np.asarray(predict(x), dtype=float)
    stat = float(np.mean(np.sum(diff.reshape(x.shape[0], -1) ** 2, axis=1)))
    return TeacherVerdict(int(stat < tol), stat, float(tol), x.shape[0], "oracle")


def naive_mse_teacher(predict: Predictor, val: Dataset, a: float) -> TeacherVerdict:
    if not a > 0:
        raise ConfigurationError("naive threshold a must be positive")
    pred = np.asarray(predict(val.xs), dtype=float).reshape(val.ys.shape)
    mse = float(np.mean(np.sum((val.ys - pred) ** 2, axis=1)))
    return TeacherVerdict(int(mse <= a), mse, float(a), val.n, "naive")


# ---------------------------------------------------------------------------
# Monte-Carlo validation of the error rates

@dataclass
class ErrorRateCurve:
    """Empirical type I (``alpha_hat``) and type II (``beta_hat``) rates per ``m``.

    ``last_wrong_m[t]`` is the largest grid size at which trial ``t`` wrongly
    rejected the optimal student (0 if it never did), a finite-grid stand-in
    for the last time the teacher errs on the null.
    """

    m_grid: list
    alpha_hat: list
    beta_hat: list
    trials: int
    last_wrong_m: list = field(default_factory=list)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "alpha_hat", "beta_hat", "trials"])
        for m, a, b in zip(self.m_grid, self.alpha_hat, self.beta_hat):
            w.writerow([m, repr(float(a)), repr(float(b)), self.trials])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorRateCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        trials = int(rows[0]["trials"]) if rows else 1
        return cls([int(r["m"]) for r in rows], [float(r["alpha_hat"]) for r in rows],
                   [float(r["beta_hat"]) for r in rows], trials)

    def decay_slope(self) -> float:
        """Least-squares slope of ``log(max(alpha_hat, 1/trials))`` against ``m**(1/3)``."""
        t = np.cbrt(np.asarray(self.m_grid, dtype=float))
        y = np.log(np.maximum(np.asarray(self.alpha_hat, dtype=float), 1.0 / self.trials))
        return float(np.polyfit(t, y, 1)[0])


def trial_seed(seed: int, m: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(m), int(trial)])


def _trial(args):
    spec, student_null, student_alt, m, seed, t, params = args
    val = sample_additive(spec, m, trial_seed(seed, m, t))
    if student_null is None:
        student_null = spec.f()
    wrong_null = information_teacher(student_null, val, params).decision == 0
    wrong_alt = student_alt is not None and information_teacher(student_alt, val, params).decision == 1
    return wrong_null, wrong_alt


def monte_carlo_error_rates(spec: AdditiveModelSpec, student_null: Predictor | None,
                            student_alt: Predictor | None, m_grid: Sequence[int], trials: int,
                            params: ScheduleParams | None = None, seed: int = 0,
                            n_jobs: int = 1) -> ErrorRateCurve:
    """Fresh validation draws per ``(m, trial)``, each seeded from ``(seed, m, trial)``.

    ``student_null`` defaults to the model's own target function.  Results do
    not depend on ``n_jobs``.
    """
    params = params or ScheduleParams()
    m_grid = [int(m) for m in m_grid]
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ConfigurationError("m_grid must be strictly increasing")
    jobs = [(spec, student_null, student_alt, m, seed, t, params) for m in m_grid for t in range(trials)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))
    else:
        results = [_trial(j) for j in jobs]

    alpha, beta = [], []
    last_wrong = [0] * trials
    for i, m in enumerate(m_grid):
        block = results[i * trials:(i + 1) * trials]
        alpha.append(sum(r[0] for r in block) / trials)
        beta.append(sum(r[1] for r in block) / trials)
        for t, r in enumerate(block):
            if r[0]:
                last_wrong[t] = m
    return ErrorRateCurve(m_grid, alpha, beta, trials, last_wrong)


def count_inversions(values: Sequence[float]) -> int:
    """Number of adjacent increases in a sequence that should not increase."""
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


def zero_student(x):
    """The constant-zero predictor (module level so it can be pickled)."""
    return np.zeros_like(np.asarray(x, dtype=float))
