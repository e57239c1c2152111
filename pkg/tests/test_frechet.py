import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treeconf.core import CoordinateFrame, PhyloTree, Split, TaxonSet, TreeError
from treeconf.frechet import MeanConfig, frechet_function, frechet_mean, harmonic_step
from treeconf.geodesic import distance, geodesic, point_on_geodesic
from treeconf.logmap import log_map_matrix
from treeconf.simulate import GeneratorSpec, random_tree, sample_trees

from oracles import TAXA5, tree

TAXA6 = TaxonSet("abcdef")
seeds = st.integers(0, 2 ** 32 - 1)


def mixed_sample(seed, n=20, taxa=TAXA6, sd=0.5):
    rng = np.random.default_rng(seed)
    base = random_tree(taxa, rng, 0.3, 1.5)
    spec = GeneratorSpec.isotropic(base, sd, seed=seed)
    return sample_trees(spec, n, rng)


class TestExamples:
    def test_single_tree(self):
        t = tree(TAXA5, {"ab": 1, "de": 2})
        r = frechet_mean([t])
        assert r.mean == t
        assert r.frechet_value == 0.0
        assert r.converged

    def test_single_orthant_is_arithmetic_mean(self):
        rng = np.random.default_rng(0)
        coords = rng.uniform(0.5, 3, size=(12, 2))
        trees = [tree(TAXA5, {"ab": x, "de": y}) for x, y in coords]
        r = frechet_mean(trees)
        assert r.mean.internal[Split.from_labels(TAXA5, "ab")] == pytest.approx(coords[:, 0].mean(), abs=1e-6)
        assert r.mean.internal[Split.from_labels(TAXA5, "de")] == pytest.approx(coords[:, 1].mean(), abs=1e-6)
        assert r.converged
        assert not r.boundary_flag

    def test_cone_point_mean(self):
        a = tree(TAXA5, {"ab": 3, "abc": 4})
        b = tree(TAXA5, {"ad": 4, "be": 3})
        r = frechet_mean([a, b])
        assert r.mean.internal == {}
        assert r.boundary_flag
        assert r.frechet_value == pytest.approx(25.0)

    def test_frechet_function_examples(self):
        taxa = TaxonSet("abcd")
        t0 = PhyloTree(taxa, {})
        t2 = PhyloTree(taxa, {Split.from_labels(taxa, "ab"): 2.0})
        u = PhyloTree(taxa, {Split.from_labels(taxa, "ab"): 1.0})
        assert frechet_function([t2], t2) == 0.0
        assert frechet_function([t0, t2], u) == 1.0

    def test_errors(self):
        with pytest.raises(TreeError):
            frechet_mean([])
        with pytest.raises(TreeError):
            frechet_mean([tree(TAXA5, {}), PhyloTree(TAXA6, {})])
        with pytest.raises(TreeError):
            frechet_function([tree(TAXA5, {})], PhyloTree(TAXA6, {}))

    @pytest.mark.parametrize(
        "kwargs", [{"max_iterations": 0}, {"tolerance": 0.0}, {"tolerance": -1.0}, {"order": "sorted"}]
    )
    def test_bad_config(self, kwargs):
        with pytest.raises(ValueError):
            MeanConfig(**kwargs)

    def test_bad_schedule(self):
        trees = mixed_sample(1, 5)
        with pytest.raises(ValueError, match="step"):
            frechet_mean(trees, MeanConfig(step_schedule=lambda k: 2.0))

    def test_iteration_cap(self):
        trees = mixed_sample(2, 10)
        r = frechet_mean(trees, MeanConfig(max_iterations=3, polish=False))
        assert r.iterations_used == 3
        assert not r.converged

    def test_harmonic_first_step_lands_on_tree(self):
        assert harmonic_step(0) == 1.0
        assert harmonic_step(3) == 0.25


class TestOptimality:
    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_not_worse_than_sample_trees(self, seed):
        trees = mixed_sample(seed)
        r = frechet_mean(trees)
        for t in trees:
            assert r.frechet_value <= frechet_function(trees, t) + 1e-12

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_local_perturbation(self, seed):
        trees = mixed_sample(seed)
        cfg = MeanConfig()
        r = frechet_mean(trees, cfg)
        delta = 10 * cfg.tolerance
        value = frechet_function(trees, r.mean)
        for s, v in r.mean.internal.items():
            for sign in (-1, 1):
                moved = dict(r.mean.internal)
                moved[s] = max(v + sign * delta, 0.0)
                assert frechet_function(trees, PhyloTree(TAXA6, moved)) >= value - 1e-8

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_seed_and_order_invariance(self, seed):
        trees = mixed_sample(seed)
        cfg = MeanConfig()
        a = frechet_mean(trees, MeanConfig(seed=0)).mean
        b = frechet_mean(trees, MeanConfig(seed=12345)).mean
        c = frechet_mean(trees, MeanConfig(order="cyclic")).mean
        assert distance(a, b) < 10 * cfg.tolerance
        assert distance(a, c) < 10 * cfg.tolerance

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_two_tree_midpoint(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_tree(TAXA6, rng), random_tree(TAXA6, rng)
        r = frechet_mean([a, b])
        mid = point_on_geodesic(geodesic(a, b), 0.5)
        assert distance(r.mean, mid) < 10 * MeanConfig().tolerance

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_balance_identity(self, seed):
        trees = mixed_sample(seed, n=30)
        r = frechet_mean(trees)
        frame = CoordinateFrame(r.mean) if not r.boundary_flag else CoordinateFrame.reduced(r.mean)
        X = log_map_matrix(frame, trees)
        np.testing.assert_allclose(X.mean(axis=0), frame.base_coords, atol=1e-6)


class TestResult:
    def test_deterministic(self):
        trees = mixed_sample(7)
        a = frechet_mean(trees, MeanConfig(seed=5))
        b = frechet_mean(trees, MeanConfig(seed=5))
        assert a.mean == b.mean
        assert a.iterations_used == b.iterations_used

    def test_pendant_lengths_averaged(self):
        a = tree(TAXA5, {"ab": 1, "de": 1}, {lab: 1.0 for lab in "abcde"})
        b = tree(TAXA5, {"ab": 3, "de": 1}, {lab: 3.0 for lab in "abcde"})
        r = frechet_mean([a, b])
        assert r.mean.pendant == {lab: 2.0 for lab in "abcde"}

    def test_boundary_splits_dropped(self):
        a = tree(TAXA5, {"ab": 1, "abc": 1})
        b = tree(TAXA5, {"ab": 1, "abd": 1})
        r = frechet_mean([a, b])
        assert r.boundary_flag
        assert set(r.mean.internal) == {Split.from_labels(TAXA5, "ab")}
        assert r.mean.internal[Split.from_labels(TAXA5, "ab")] == pytest.approx(1.0)
