import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import entropy

from conftest import gaussian_mi, gaussian_pair, uniform_normal_pair
from infoteacher.datamodel import AdditiveModelSpec, Dataset, NoiseSpec, sample_additive, sine_model
from infoteacher.errors import ConfigurationError, EvaluationError
from infoteacher.mi import ScheduleParams, estimate_mi, partition_mi, residuals, threshold
from infoteacher.partition import JointSample, PartitionParams, grow_full_tree
from infoteacher.teacher import count_inversions


class TestResiduals:
    def test_exact_fit_without_noise(self):
        spec = AdditiveModelSpec("sine10", NoiseSpec("none", {}))
        ds = sample_additive(spec, 100, 0)
        np.testing.assert_array_equal(residuals(ds, spec.f()).r, 0.0)

    def test_zero_predictor(self):
        ds = sample_additive(sine_model(), 100, 0)
        np.testing.assert_array_equal(residuals(ds, lambda x: np.zeros_like(x)).r, ds.ys)

    def test_sine_residual_variance(self):
        spec = sine_model(0.25)
        ds = sample_additive(spec, 5000, 2)
        assert residuals(ds, spec.f()).r.var() == pytest.approx(0.25, abs=0.02)

    def test_non_finite_prediction_names_row(self):
        ds = Dataset(np.arange(5.0), np.zeros(5))

        def bad(x):
            out = np.zeros_like(x)
            out[3] = np.nan
            return out

        with pytest.raises(EvaluationError, match="row 3") as info:
            residuals(ds, bad)
        assert info.value.row == 3


class TestThreshold:
    def test_power_law(self):
        params = ScheduleParams(a_scale=1.0, a_exp=0.2)
        assert threshold(1, params) == 1.0
        assert threshold(100_000, params) == pytest.approx(0.1, rel=1e-12)

    def test_strictly_decreasing(self):
        vals = [threshold(m) for m in range(1, 3000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("kw", [{"a_scale": 0.0}, {"a_exp": 0.0}, {"a_exp": 0.5}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            ScheduleParams(**kw)

    def test_bad_m(self):
        with pytest.raises(ConfigurationError):
            threshold(0)


class TestEstimate:
    def test_single_cell_is_zero(self):
        est = estimate_mi(JointSample([1.0, 2.0, 3.0], [0.0, 1.0, 2.0]))
        assert est.leaf_count == 1
        assert est.value == 0.0

    def test_matches_kl_route(self):
        # plug-in sum equals KL(P_m || product of marginals) over the leaves
        s = gaussian_pair(0.7, 3000, 1)
        tree = grow_full_tree(s, PartitionParams())
        leaves = tree.leaves
        pk = np.array([c.count for c in leaves], dtype=float)
        qk = np.array([c.x_count * c.r_count for c in leaves], dtype=float)
        assert qk.sum() == tree.m**2
        assert partition_mi(tree) == pytest.approx(entropy(pk, qk), rel=1e-12)

    def test_strong_dependence(self):
        vals = [estimate_mi(gaussian_pair(0.9, 20_000, s)).value for s in range(10)]
        assert abs(np.median(vals) - gaussian_mi(0.9)) <= 0.15

    def test_independence_below_threshold(self):
        a_m = threshold(20_000)
        hits = sum(estimate_mi(uniform_normal_pair(20_000, s)).value <= a_m for s in range(10))
        assert hits >= 9

    def test_multivariate_blocks(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(4000, 2))
        r = np.column_stack([np.sin(6 * x[:, 0]), x[:, 1]]) + 0.1 * rng.normal(size=(4000, 2))
        assert estimate_mi(JointSample(x, r)).value > 0.5
        assert estimate_mi(JointSample(x, rng.normal(size=(4000, 2)))).value < 0.05

    @settings(max_examples=80, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3000), rho=st.floats(-0.99, 0.99))
    def test_nonnegative(self, seed, m, rho):
        assert estimate_mi(gaussian_pair(rho, m, seed)).value >= 0.0

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 2000))
    def test_permutation_invariance(self, seed, m):
        s = gaussian_pair(0.6, m, seed)
        perm = np.random.default_rng(seed).permutation(m)
        shuffled = JointSample(s.x[perm], s.r[perm])
        assert estimate_mi(shuffled).value == estimate_mi(s).value

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 2000))
    def test_increasing_map_invariance(self, seed, m):
        s = gaussian_pair(0.8, m, seed)
        moved = JointSample(np.arctan(s.x) * 3.0 + 7.0, np.exp(s.r / 4.0))
        full, full_moved = grow_full_tree(s), grow_full_tree(moved)
        np.testing.assert_array_equal(full.assign(s.x, s.r), full_moved.assign(moved.x, moved.r))
        assert partition_mi(full_moved) == partition_mi(full)
        assert estimate_mi(moved).value == estimate_mi(s).value

    @pytest.mark.parametrize("rho", [0.5, 0.9])
    def test_consistency_under_dependence(self, rho):
        grid = (500, 2000, 8000, 20_000)
        medians = [np.median([estimate_mi(gaussian_pair(rho, m, s)).value for s in range(10)]) for m in grid]
        # nondecreasing in m up to one inversion
        decreases = count_inversions([-v for v in medians])
        assert decreases <= 1, f"medians {medians}"
