import json
import math
import warnings
from pathlib import Path

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treeconf.core import CoordinateFrame, TreeError
from treeconf.distributions import f_cdf, f_ppf, f_sf, t_ppf, t_sf
from treeconf.inference import (
    InferenceError,
    confidence_member,
    confidence_statistic,
    confidence_threshold,
    coordinate_intervals,
    coordinate_levene,
    levene_test,
    pca,
    split_support_test,
    summarize,
    summarize_vectors,
)
from treeconf.simulate import GeneratorSpec, sample_trees

from oracles import TAXA5, f2_quantile, textbook_covariance, tree

LEVENE_CASES = json.loads((Path(__file__).parent / "data" / "levene_fixture.json").read_text())["cases"]
mpmath.mp.dps = 40


def quiet(X, frame=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return summarize_vectors(X, frame)


def mp_t_cdf(x, nu):
    x, nu = mpmath.mpf(x), mpmath.mpf(nu)
    tail = mpmath.betainc(nu / 2, mpmath.mpf(1) / 2, 0, nu / (nu + x * x), regularized=True) / 2
    return 1 - tail if x >= 0 else tail


def mp_t_ppf(p, nu):
    return float(mpmath.findroot(lambda x: mp_t_cdf(x, nu) - p, 1.0))


def mp_f_cdf(x, d1, d2):
    x, d1, d2 = mpmath.mpf(x), mpmath.mpf(d1), mpmath.mpf(d2)
    return float(mpmath.betainc(d1 / 2, d2 / 2, 0, d1 * x / (d1 * x + d2), regularized=True))


def ks_uniform(p):
    p = np.sort(np.asarray(p))
    n = len(p)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - p), np.max(p - (i - 1) / n)))


class TestDistributions:
    @pytest.mark.parametrize("x, d1, d2", [(0.3, 1, 5), (1.0, 2, 8), (4.459, 2, 8), (2.5, 7, 30), (40.0, 3, 3)])
    def test_f_cdf(self, x, d1, d2):
        expected = mp_f_cdf(x, d1, d2)
        assert f_cdf(x, d1, d2) == pytest.approx(expected, rel=1e-12)
        assert f_sf(x, d1, d2) == pytest.approx(1 - expected, rel=1e-10)

    @pytest.mark.parametrize("p", [0.5, 0.9, 0.95, 0.99, 0.999])
    @pytest.mark.parametrize("nu", [3, 8, 48])
    def test_f2_quantile(self, p, nu):
        assert f_ppf(p, 2, nu) == pytest.approx(f2_quantile(p, nu), rel=1e-12)

    @pytest.mark.parametrize("p", [0.6, 0.95, 0.975, 0.995])
    @pytest.mark.parametrize("nu", [1, 4, 19, 99])
    def test_t_quantile(self, p, nu):
        assert t_ppf(p, nu) == pytest.approx(mp_t_ppf(p, nu), rel=1e-11)

    def test_t_tail(self):
        assert t_sf(0.0, 7) == 0.5
        assert t_sf(2.0, 10) == pytest.approx(1 - float(mp_t_cdf(2.0, 10)), rel=1e-11)
        assert t_sf(-2.0, 10) == pytest.approx(float(mp_t_cdf(2.0, 10)), rel=1e-11)


class TestSummary:
    def test_two_vectors(self):
        s = quiet([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(s.mean_vec, [2.0, 3.0])
        np.testing.assert_array_equal(s.S, [[2.0, 2.0], [2.0, 2.0]])
        assert s.rank == 1
        assert len(s.retained) == 1
        assert s.reduced

    @pytest.mark.filterwarnings("ignore:covariance is rank deficient")
    def test_identical_trees(self):
        t = tree(TAXA5, {"ab": 1, "abc": 2})
        with pytest.warns(UserWarning, match="zero-variance"):
            s = summarize([t] * 4)
        np.testing.assert_array_equal(s.S, np.zeros((2, 2)))
        assert s.retained == ()
        assert s.fixed == (0, 1)
        report = confidence_member(s, t, 0.05)
        assert report.member and report.p_value == 1.0

    def test_textbook_covariance(self):
        X = np.random.default_rng(3).normal(size=(50, 2)) @ np.array([[1.0, 0.4], [0.0, 0.7]]) + 2.0
        s = quiet(X)
        np.testing.assert_allclose(s.S, textbook_covariance(X), rtol=0, atol=1e-12)
        assert s.rank == 2 and not s.reduced

    def test_invariants(self):
        X = np.random.default_rng(4).normal(size=(30, 4))
        s = quiet(X)
        np.testing.assert_array_equal(s.S, s.S.T)
        assert np.linalg.eigvalsh(s.S).min() >= -1e-10
        np.testing.assert_array_equal(s.mean_vec, X.mean(axis=0))
        np.testing.assert_allclose(s.precision @ s.S, np.eye(4), atol=1e-8)

    def test_errors(self):
        with pytest.raises(InferenceError):
            summarize_vectors([[1.0, 2.0]])
        # Centring caps the rank at n - 1, so a wide sample is reduced rather than rejected.
        s = quiet(np.random.default_rng(0).normal(size=(3, 5)))
        assert len(s.retained) == 2 and s.n - len(s.retained) == 1
        with pytest.raises(InferenceError):
            summarize([tree(TAXA5, {"ab": 1})])

    def test_duplicated_column(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(25, 3))
        X = np.column_stack([X, X[:, 1]])
        with pytest.warns(UserWarning, match="rank deficient"):
            s = summarize_vectors(X)
        assert s.m == 4 and len(s.retained) == 3
        assert len(s.dropped) == 1 and s.dropped[0] in (1, 3)
        assert math.isfinite(confidence_statistic(s, X[0]))
        report = confidence_member(s, X[0], 0.05)
        assert math.isfinite(report.statistic) and math.isfinite(report.p_value)


class TestConfidenceSet:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.X = rng.normal([1.0, 2.0], [0.5, 0.3], size=(40, 2))
        self.s = quiet(self.X)

    def test_mean_is_member(self):
        report = confidence_member(self.s, self.s.mean_vec, 0.5)
        assert report.statistic == 0.0
        assert report.p_value == 1.0
        assert report.member

    def test_threshold_oracle(self):
        s = quiet(np.random.default_rng(1).normal(size=(10, 2)))
        expected = 2 * 9 / (10 * 8) * f2_quantile(0.95, 8)
        assert confidence_threshold(s, 0.05) == pytest.approx(expected, abs=1e-12)
        assert confidence_threshold(s, 0.05) == pytest.approx(1.0032, abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            confidence_member(self.s, self.s.mean_vec, alpha)

    def test_bad_candidate(self):
        with pytest.raises(TreeError):
            confidence_statistic(self.s, [1.0, 2.0, 3.0])
        with pytest.raises(TreeError):
            confidence_statistic(self.s, tree(TAXA5, {"ab": 1}))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_duality_and_monotonicity(self, dx, dy):
        candidate = self.s.mean_vec + 0.2 * np.array([dx, dy])
        reports = [confidence_member(self.s, candidate, a) for a in (0.10, 0.05, 0.01)]
        for r in reports:
            assert r.member == (r.statistic < r.threshold)
            assert r.member == (r.p_value > r.alpha)
        if reports[0].member:
            assert reports[2].member

    def test_p_value_decreasing_in_statistic(self):
        candidates = [self.s.mean_vec + np.array([t, 0.0]) for t in np.linspace(0, 1, 20)]
        pairs = [(confidence_statistic(self.s, c), confidence_member(self.s, c, 0.05).p_value) for c in candidates]
        stats_, ps = zip(*pairs)
        assert all(a < b for a, b in zip(stats_, stats_[1:]))
        assert all(a > b for a, b in zip(ps, ps[1:]))

    def test_reorder_invariance(self):
        perm = np.random.default_rng(2).permutation(len(self.X))
        s2 = quiet(self.X[perm])
        for c in ([1.1, 2.0], [0.7, 2.4]):
            a, b = confidence_member(self.s, c, 0.05), confidence_member(s2, c, 0.05)
            assert a.member == b.member
            assert a.statistic == pytest.approx(b.statistic, rel=1e-12)

    def test_one_dimensional_t_interval(self):
        x = np.random.default_rng(6).normal(3.0, 2.0, size=15)
        s = quiet(x[:, None])
        lo, hi = coordinate_intervals(s, 0.05)[0]
        half = mp_t_ppf(0.975, 14) * x.std(ddof=1) / math.sqrt(15)
        assert lo == pytest.approx(x.mean() - half, abs=1e-9)
        assert hi == pytest.approx(x.mean() + half, abs=1e-9)
        # The statistic is the squared t statistic divided by n.
        t = (x.mean() - 2.0) / (x.std(ddof=1) / math.sqrt(15))
        assert confidence_statistic(s, [2.0]) == pytest.approx(t * t / 15, rel=1e-12)

    def test_fixed_coordinate_mismatch(self):
        X = np.column_stack([self.X[:, 0], np.full(len(self.X), 1.5)])
        s = quiet(X)
        assert s.fixed == (1,)
        report = confidence_member(s, [s.mean_vec[0], 2.0], 0.05)
        assert not report.member
        assert report.p_value == 0.0
        assert report.flags
        assert confidence_member(s, [s.mean_vec[0], 1.5], 0.05).member


class TestSplitSupport:
    def frame_summary(self, values):
        frame = CoordinateFrame(tree(TAXA5, {"ab": 1, "abc": 1}))
        rng = np.random.default_rng(0)
        X = np.column_stack([values, rng.normal(1.0, 0.3, len(values))])
        return quiet(X, frame), frame.order[0]

    def test_zero_mean_gives_half(self):
        s, split = self.frame_summary(np.array([-1.0, 1.0, -2.0, 2.0, 0.5, -0.5]))
        assert split_support_test(s, split).p_value == pytest.approx(0.5, abs=1e-15)

    def test_degenerate(self):
        s, split = self.frame_summary(np.full(10, 0.7))
        r = split_support_test(s, split)
        assert r.p_value == 0.0 and r.degenerate and r.flags

    def test_strong_signal(self):
        values = np.random.default_rng(9).normal(5.0, 1.0, 100)
        s, split = self.frame_summary(values)
        assert split_support_test(s, split).p_value < 1e-6
        assert split_support_test(s, split, mode="joint").p_value < 1e-6

    def test_marginal_matches_t_oracle(self):
        values = np.random.default_rng(10).normal(0.3, 1.0, 20)
        s, split = self.frame_summary(values)
        t = values.mean() / (values.std(ddof=1) / math.sqrt(20))
        r = split_support_test(s, split)
        assert r.statistic == pytest.approx(t, rel=1e-12)
        assert r.p_value == pytest.approx(1 - float(mp_t_cdf(t, 19)), rel=1e-10)

    def test_bonferroni(self):
        values = np.random.default_rng(11).normal(0.4, 1.0, 30)
        s, split = self.frame_summary(values)
        raw = split_support_test(s, split)
        adj = split_support_test(s, split, bonferroni=True)
        assert adj.raw_p_value == raw.p_value
        assert adj.p_value == pytest.approx(min(1.0, 2 * raw.p_value))

    def test_joint_is_dual_to_confidence_set(self):
        values = np.random.default_rng(12).normal(0.35, 1.0, 30)
        s, split = self.frame_summary(values)
        r = split_support_test(s, split, mode="joint")
        # The nearest point of {x_split <= 0} in the S metric.
        j = 0
        point = s.mean_vec - s.S[:, j] * s.mean_vec[j] / s.S[j, j]
        assert point[j] == pytest.approx(0.0, abs=1e-12)
        report = confidence_member(s, point, 0.05)
        assert r.statistic == pytest.approx(report.statistic, rel=1e-10)
        assert r.p_value == pytest.approx(report.p_value, rel=1e-10)

    def test_bad_mode_and_split(self):
        s, split = self.frame_summary(np.arange(5.0))
        with pytest.raises(ValueError):
            split_support_test(s, split, mode="both")
        with pytest.raises(TreeError):
            split_support_test(s, tree(TAXA5, {"ad": 1}).topology().__iter__().__next__())

    def test_null_calibration(self):
        rng = np.random.default_rng(13)
        ps = []
        for _ in range(2000):
            s, split = self.frame_summary(rng.normal(0.0, 1.0, 25))
            ps.append(split_support_test(s, split).p_value)
        assert ks_uniform(ps) < 0.05


class TestPCA:
    def test_identity(self):
        s = quiet(np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]) * math.sqrt(2.5))
        w, _ = pca(s)
        np.testing.assert_allclose(w, [1.0, 1.0, 1.0], atol=1e-14)

    def test_rank_one(self):
        w, V = pca(quiet([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_allclose(w, [4.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(V[:, 0], [1 / math.sqrt(2)] * 2, atol=1e-14)

    def test_reconstruction(self):
        s = quiet(np.random.default_rng(14).normal(size=(40, 5)) @ np.diag([3, 2, 1, 0.5, 0.1]))
        w, V = pca(s)
        assert np.all(np.diff(w) <= 0)
        np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-12)
        assert np.linalg.norm(V @ np.diag(w) @ V.T - s.S) < 1e-10
        assert w.sum() == pytest.approx(np.trace(s.S), abs=1e-10)

    def test_anisotropic_spectrum(self):
        base = tree(TAXA5, {"ab": 3, "abc": 3})
        frame = CoordinateFrame(base)
        spec = GeneratorSpec(frame, np.diag([0.25, 0.01]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = summarize(sample_trees(spec, 400, np.random.default_rng(15)))
        w, V = pca(s)
        assert w[0] == pytest.approx(0.25, rel=0.2)
        assert w[1] == pytest.approx(0.01, rel=0.2)
        assert abs(V[0, 0]) > 0.99


class TestLevene:
    def test_identical_groups(self):
        r = levene_test([[1, 2, 3, 7], [7, 3, 2, 1]])
        assert r.statistic == 0.0 and r.p_value == 1.0

    @pytest.mark.parametrize("case", range(len(LEVENE_CASES)))
    def test_fixture(self, case):
        c = LEVENE_CASES[case]
        r = levene_test(c["groups"])
        assert r.statistic == pytest.approx(c["statistic"], abs=1e-9)
        assert r.p_value == pytest.approx(c["p_value"], abs=1e-9)

    def test_small_example(self):
        # Median deviations are {1,0,1} and {10,0,10}: between 54, within 202/3.
        r = levene_test([[1, 2, 3], [10, 20, 30]])
        assert r.statistic == pytest.approx(648 / 202, abs=1e-12)
        assert r.p_value == pytest.approx(1 - mp_f_cdf(648 / 202, 1, 4), abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            levene_test([[1, 2, 3]])
        with pytest.raises(ValueError):
            levene_test([[1, 2], [3]])

    def test_null_uniform(self):
        rng = np.random.default_rng(16)
        ps = [levene_test([rng.normal(size=15) for _ in range(3)]).p_value for _ in range(2000)]
        assert ks_uniform(ps) < 0.05

    def test_coordinate_pairs(self):
        frame = CoordinateFrame(tree(TAXA5, {"ab": 1, "abc": 1}))
        rng = np.random.default_rng(17)
        s = quiet(np.column_stack([rng.normal(0, 1, 30), rng.normal(0, 1, 30)]), frame)
        out = coordinate_levene(s, frame.order)
        assert list(out) == [(0, 1)]
        expected = levene_test([s.vectors[:, 0], s.vectors[:, 1]])
        assert out[(0, 1)] == expected
