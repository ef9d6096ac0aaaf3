import numpy as np
import pytest

from ahead import bench, highdim, tree
from ahead.data import SyntheticSpec, gen_synthetic
from ahead.errors import ConfigurationError, InputError
from ahead.grid2d import answer_range_2d, build_tree_2d, compute_params_2d
from ahead.regions import Box, Interval


def box(x0, x1, y0, y1):
    return Box(Interval(x0, x1), Interval(y0, y1))


def fitted(records, params, seed=0):
    root = build_tree_2d(np.asarray(records), params, np.random.default_rng(seed))
    return tree.post_process(root, params)


class TestParams:
    @pytest.mark.parametrize("side,fanout,c", [(256, 4, 8), (1024, 4, 10), (64, 16, 3), (8, 4, 3)])
    def test_group_counts(self, side, fanout, c):
        p = compute_params_2d(1.0, 10**6, side, fanout)
        assert p.groups == c and p.dims == 2 and p.fanout == fanout

    def test_split_per_axis(self):
        assert compute_params_2d(1.0, 10**5, 64, 4).split_per_axis == 2
        assert compute_params_2d(1.0, 10**5, 64, 16).split_per_axis == 4

    def test_non_square_fanout(self):
        with pytest.raises(ConfigurationError):
            compute_params_2d(1.0, 10**5, 64, 8)

    def test_rejects_1d_params(self):
        with pytest.raises(ConfigurationError):
            build_tree_2d(np.zeros((10, 2), int), tree.compute_params(1.0, 10**3, 16),
                          np.random.default_rng(0))


class TestStructure:
    def test_children_cover_parent(self):
        rng = np.random.default_rng(11)
        recs = rng.integers(0, 32, size=(50_000, 2))
        root = fitted(recs, compute_params_2d(2.0, 50_000, 32))
        for node in root.iter_nodes():
            if node.children:
                assert sum(k.region.cells for k in node.children) == node.region.cells
                assert all(node.region.contains(k.region) for k in node.children)
                assert len(node.children) == 4

    def test_point_mass_splits_one_path(self):
        recs = np.tile([[5, 9]], (10**5, 1))
        p = compute_params_2d(50.0, 10**5, 16)
        root = build_tree_2d(recs, p, np.random.default_rng(0))
        split = [n for n in root.iter_nodes() if n.children]
        assert all(n.region.contains(box(5, 5, 9, 9)) for n in split)
        assert len(split) == p.groups

    def test_theta_one_keeps_only_root_split(self):
        rng = np.random.default_rng(12)
        p = compute_params_2d(1.0, 10**5, 16).with_theta(1.0)
        root = build_tree_2d(rng.integers(0, 16, size=(10**5, 2)), p, np.random.default_rng(0))
        assert len(root.children) == 4
        assert all(k.frozen and not k.children for k in root.children)

    def test_frozen_quadrant_spreads_uniformly(self):
        # all mass in [0,3]^2 on an 8x8 grid, so the other quadrants freeze at level 1
        rng = np.random.default_rng(13)
        recs = rng.integers(0, 4, size=(10**5, 2))
        p = compute_params_2d(50.0, 10**5, 8)
        root = fitted(recs, p)
        top = next(k for k in root.children if k.region == box(4, 7, 4, 7))
        assert top.frozen
        quarter = next(n for n in top.children if n.region == box(4, 5, 4, 5))
        assert quarter.fused_value == pytest.approx(top.fused_value / 4)
        # [0,5]^2 = box [0,3]^2 + four side boxes + one quarter of [4,7]^2
        nodes = tree.cover(root, box(0, 5, 0, 5))
        assert len(nodes) == 6
        assert sum(n.region.cells for n in nodes) == 36
        want = sum(n.fused_value for n in nodes)
        assert answer_range_2d(root, box(0, 5, 0, 5)) == pytest.approx(min(1.0, max(0.0, want)))
        assert answer_range_2d(root, box(0, 5, 0, 5)) == pytest.approx(1.0, abs=0.01)


@pytest.fixture(scope="module")
def near_noiseless():
    ds = gen_synthetic(SyntheticSpec("laplacian", n=10**6, domain_side=32, m=2, seed=14))
    p = compute_params_2d(30.0, len(ds), 32)
    return ds, fitted(ds.records, p)


class TestAnswers:
    def test_full_domain_is_one(self, near_noiseless):
        _, root = near_noiseless
        assert answer_range_2d(root, box(0, 31, 0, 31)) == pytest.approx(1.0, abs=1e-6)

    def test_single_cells(self, near_noiseless):
        ds, root = near_noiseless
        hist = np.zeros((32, 32))
        np.add.at(hist, tuple(ds.records.T), 1)
        hist /= len(ds)
        for x, y in [(0, 0), (16, 16), (15, 17), (31, 3)]:
            assert answer_range_2d(root, box(x, x, y, y)) == pytest.approx(hist[x, y], abs=0.005)

    def test_partition_adds_up(self, near_noiseless):
        _, root = near_noiseless
        parts = [box(0, 9, 0, 31), box(10, 31, 0, 20), box(10, 31, 21, 31)]
        assert sum(answer_range_2d(root, b) for b in parts) == pytest.approx(1.0, abs=0.01)

    def test_random_queries_near_truth(self, near_noiseless):
        ds, root = near_noiseless
        qs = bench.gen_queries(32, 2, 100, np.random.default_rng(15))
        truth = bench.exact_answers(ds, qs)
        est = np.array([answer_range_2d(root, bench.to_region(q)) for q in qs])
        np.testing.assert_allclose(est, truth, atol=0.01)

    def test_query_outside_domain(self, near_noiseless):
        _, root = near_noiseless
        with pytest.raises(InputError):
            answer_range_2d(root, box(0, 32, 0, 3))

    @pytest.mark.slow
    def test_error_stable_across_domain_sizes(self):
        errs = []
        for side in (64, 256):
            ds = gen_synthetic(SyntheticSpec("laplacian", n=10**6, domain_side=side, m=2, seed=16))
            cfg = bench.ExperimentConfig("AHEAD-2d", "unused", (1.1,), n_queries=100,
                                         n_repetitions=3, seed=16)
            errs.append(bench.run_experiment(cfg, ds).rows[0].mean_mse)
        assert max(errs) / min(errs) <= 3


class TestDirectEstimation:
    def test_two_attributes_match_grid(self):
        rng = np.random.default_rng(17)
        recs = rng.integers(0, 16, size=(20_000, 2))
        p2 = compute_params_2d(1.0, len(recs), 16)
        pde = highdim.compute_params_de(1.0, len(recs), 16, 2)
        assert p2 == pde
        a = fitted(recs, p2, seed=3)
        b = tree.post_process(highdim.build_de_tree(recs, pde, np.random.default_rng(3)), pde)
        assert tree.tree_to_dict(a) == tree.tree_to_dict(b)
