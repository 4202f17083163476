import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoteacher.datamodel import AdditiveModelSpec, Dataset, NoiseSpec, sample_additive, sine_model
from infoteacher.errors import ConfigurationError
from infoteacher.teacher import (
    ErrorRateCurve,
    TeacherVerdict,
    count_inversions,
    information_teacher,
    monte_carlo_error_rates,
    naive_mse_teacher,
    oracle_teacher,
    zero_student,
)

MC_GRID = (500, 2000, 8000, 20_000)


@pytest.fixture(scope="module")
def mc_curve():
    return monte_carlo_error_rates(sine_model(), None, zero_student, MC_GRID, trials=50, seed=0)


class TestInformationTeacher:
    def test_accepts_true_function(self):
        spec = sine_model()
        decisions = [information_teacher(spec.f(), sample_additive(spec, 10_000, s)).decision for s in range(20)]
        assert sum(decisions) >= 18

    def test_rejects_zero_student(self):
        spec = sine_model()
        decisions = [information_teacher(zero_student, sample_additive(spec, 10_000, s)).decision for s in range(20)]
        assert decisions.count(0) >= 18

    def test_two_rows_are_blind(self):
        val = sample_additive(sine_model(), 2, 0)
        v = information_teacher(zero_student, val)
        assert (v.statistic, v.decision) == (0.0, 1)

    def test_needs_two_rows(self):
        with pytest.raises(ConfigurationError):
            information_teacher(zero_student, Dataset([0.5], [0.1]))

    def test_strict_comparison(self):
        assert TeacherVerdict(0, 0.01, 0.01, 10, "information").recompute() == 0
        assert TeacherVerdict(1, 0.01, 0.01, 10, "naive").recompute() == 1

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 3000), offset=st.floats(-1, 1))
    def test_decision_recomputes(self, seed, m, offset):
        spec = sine_model()
        val = sample_additive(spec, m, seed)
        v = information_teacher(lambda x: np.sin(10 * x) * offset, val)
        assert v.recompute() == v.decision
        assert v.to_dict()["decision"] == v.decision


class TestOracleTeacher:
    def test_true_function(self):
        f = sine_model().f()
        v = oracle_teacher(f, f, np.linspace(0, 1, 100))
        assert (v.statistic, v.decision) == (0.0, 1)

    def test_constant_offset(self):
        f = sine_model().f()
        v = oracle_teacher(f, lambda x: f(x) + 0.5, np.random.default_rng(0).uniform(size=1000))
        assert v.statistic == pytest.approx(0.25, abs=1e-12)
        assert v.decision == 0


class TestNaiveTeacher:
    def test_noiseless_exact_fit(self):
        spec = AdditiveModelSpec("sine10", NoiseSpec("none", {}))
        val = sample_additive(spec, 200, 0)
        assert naive_mse_teacher(spec.f(), val, 1e-12).decision == 1

    def test_optimum_rejected_by_low_target(self):
        spec = sine_model(0.25)
        val = sample_additive(spec, 5000, 0)
        v = naive_mse_teacher(spec.f(), val, 0.2)
        assert v.decision == 0
        assert v.statistic == pytest.approx(0.25, abs=0.02)

    def test_huge_target_accepts(self):
        val = sample_additive(sine_model(), 100, 0)
        assert naive_mse_teacher(zero_student, val, 1e9).decision == 1

    def test_equality_accepts(self):
        val = Dataset(np.zeros(4), np.zeros(4))
        assert naive_mse_teacher(lambda x: np.full_like(x, 0.5), val, 0.25).decision == 1

    def test_nonpositive_target(self):
        with pytest.raises(ConfigurationError):
            naive_mse_teacher(zero_student, Dataset([0.0], [0.0]), 0.0)


class TestMonteCarlo:
    def test_alpha_weakly_decreasing(self, mc_curve):
        assert count_inversions(mc_curve.alpha_hat) <= 1, mc_curve.alpha_hat

    def test_beta_small_at_largest_m(self, mc_curve):
        assert mc_curve.beta_hat[-1] <= 0.05

    def test_last_wrong_time(self, mc_curve):
        assert len(mc_curve.last_wrong_m) == 50
        assert set(mc_curve.last_wrong_m) <= {0, *MC_GRID}
        first = np.mean([t >= MC_GRID[0] for t in mc_curve.last_wrong_m])
        assert first >= mc_curve.alpha_hat[0]

    def test_single_trial(self):
        curve = monte_carlo_error_rates(sine_model(), None, zero_student, [100], trials=1)
        assert curve.m_grid == [100]
        assert curve.alpha_hat[0] in (0.0, 1.0) and curve.beta_hat[0] in (0.0, 1.0)

    def test_workers_do_not_change_results(self):
        kw = dict(m_grid=[200, 400], trials=4, seed=3)
        a = monte_carlo_error_rates(sine_model(), None, zero_student, **kw)
        b = monte_carlo_error_rates(sine_model(), None, zero_student, n_jobs=2, **kw)
        assert (a.alpha_hat, a.beta_hat, a.last_wrong_m) == (b.alpha_hat, b.beta_hat, b.last_wrong_m)

    def test_grid_must_increase(self):
        with pytest.raises(ConfigurationError):
            monte_carlo_error_rates(sine_model(), None, None, [100, 100], trials=1)

    def test_csv_round_trip(self):
        curve = ErrorRateCurve([10, 20], [0.5, 0.1], [0.0, 1 / 3], 7)
        back = ErrorRateCurve.from_csv(curve.to_csv())
        assert (back.m_grid, back.alpha_hat, back.beta_hat, back.trials) == ([10, 20], [0.5, 0.1], [0.0, 1 / 3], 7)
        assert curve.to_csv().splitlines()[0] == "m,alpha_hat,beta_hat,trials"

    def test_decay_slope_floor(self):
        # zero rates are floored at 1/trials before taking logs
        curve = ErrorRateCurve([1, 8, 27], [0.5, 0.1, 0.0], [0, 0, 0], 20)
        expected = np.polyfit([1.0, 2.0, 3.0], np.log([0.5, 0.1, 0.05]), 1)[0]
        assert curve.decay_slope() == pytest.approx(expected)

    def test_count_inversions(self):
        assert count_inversions([3, 2, 2, 1]) == 0
        assert count_inversions([3, 4, 2, 5]) == 2
