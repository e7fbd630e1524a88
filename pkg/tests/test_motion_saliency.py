import numpy as np
import pytest

from flowseg.core import PipelineConfig
from flowseg.io import synth_sequence
from flowseg.motion_saliency import (boundary_band_mask, build_flow_mst,
                                     cluster_boundary_flow, flow_dissimilarity,
                                     frame_motion_saliency, min_barrier_distance,
                                     node_initial_saliency, semi_supervised_init,
                                     video_motion_saliency)
from flowseg.superpixel import SuperpixelSegmentation


# ---------------------------------------------------------------------------
# oracles (kept deliberately independent of the implementation)
# ---------------------------------------------------------------------------

def kruskal_oracle_total_weight(flow: np.ndarray) -> float:
    """Brute-force Kruskal over the explicit grid edge list; returns the MST
    total weight (unique even when the tree is not)."""
    h, w = flow.shape[:2]
    edges = []
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                d = np.abs(flow[y, x] - flow[y, x + 1]).max()
                edges.append((d, y * w + x, y * w + x + 1))
            if y + 1 < h:
                d = np.abs(flow[y, x] - flow[y + 1, x]).max()
                edges.append((d, y * w + x, (y + 1) * w + x))
    edges.sort(key=lambda e: e[0])
    parent = list(range(h * w))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    total, used = 0.0, 0
    for d, a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            total += d
            used += 1
            if used == h * w - 1:
                break
    return total


def mbd_dfs_oracle(tree, seeds) -> np.ndarray:
    """Per-seed depth-first traversal over the tree, tracking the running
    max/min edge weight; pointwise minimum over seeds."""
    n = tree.num_pixels
    adjacency = [[] for _ in range(n)]
    for v in range(n):
        p = tree.parent[v]
        if p != v:
            adjacency[v].append((p, tree.parent_weight[v]))
            adjacency[p].append((v, tree.parent_weight[v]))
    best = np.full(n, np.inf)
    for s in seeds:
        best[s] = 0.0
        stack = [(s, -1, -np.inf, np.inf)]
        while stack:
            v, prev, hi, lo = stack.pop()
            for u, w in adjacency[v]:
                if u == prev:
                    continue
                nhi, nlo = max(hi, w), min(lo, w)
                best[u] = min(best[u], nhi - nlo)
                stack.append((u, v, nhi, nlo))
    return best.reshape(tree.height, tree.width)


def assert_spanning(tree):
    n = tree.num_pixels
    roots = np.flatnonzero(tree.parent == np.arange(n))
    assert roots.tolist() == [tree.root]
    # following parents always terminates at the root (acyclic, spanning)
    for v in range(n):
        hops = 0
        while v != tree.root:
            v = tree.parent[v]
            hops += 1
            assert hops <= n


# ---------------------------------------------------------------------------
# boundary flow clustering
# ---------------------------------------------------------------------------

class TestClusterBoundaryFlow:
    def test_degenerate_constant_flow(self):
        flow = np.zeros((12, 12, 2))
        cs = cluster_boundary_flow(flow, band_width=2, k=3,
                                   min_cluster_fraction=1 / 6, seed=0)
        assert len(cs.centers) == 1
        np.testing.assert_allclose(cs.centers[0], [0.0, 0.0])
        np.testing.assert_allclose(cs.fractions, [1.0])

    def build_two_group_flow(self, major, minor, n_minor):
        # 12-pixel boundary band: a 4x4 frame with band 1 covers 12 pixels
        flow = np.zeros((4, 4, 2))
        flow[..., :] = major
        band = boundary_band_mask(4, 4, 1)
        ys, xs = np.nonzero(band)
        for i in range(n_minor):
            flow[ys[i], xs[i]] = minor
        return flow

    def test_two_clear_clusters_retained(self):
        flow = self.build_two_group_flow(major=(0.0, 0.0), minor=(5.0, 0.0), n_minor=4)
        cs = cluster_boundary_flow(flow, band_width=1, k=2,
                                   min_cluster_fraction=1 / 6, seed=0)
        order = np.argsort(cs.centers[:, 0])
        np.testing.assert_allclose(cs.centers[order], [[0.0, 0.0], [5.0, 0.0]])
        np.testing.assert_allclose(cs.fractions[order], [2 / 3, 1 / 3])
        # oracle: the returned centers are a Lloyd fixed point under
        # exhaustive assignment of every boundary vector
        band = boundary_band_mask(4, 4, 1)
        points = flow[band]
        d2 = ((points[:, None, :] - cs.centers[None]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for j in range(len(cs.centers)):
            np.testing.assert_allclose(points[assign == j].mean(axis=0), cs.centers[j])

    def test_small_cluster_dropped(self):
        flow = self.build_two_group_flow(major=(0.0, 0.0), minor=(9.0, 9.0), n_minor=1)
        cs = cluster_boundary_flow(flow, band_width=1, k=2,
                                   min_cluster_fraction=1 / 6, seed=0)
        # 1/12 of the band < 1/6: only the dominant center survives
        assert len(cs.centers) == 1
        np.testing.assert_allclose(cs.centers[0], [0.0, 0.0])

    def test_never_empty(self):
        rng = np.random.default_rng(1)
        for seed in range(10):
            flow = rng.normal(0, 1, (10, 10, 2))
            cs = cluster_boundary_flow(flow, band_width=2, k=3,
                                       min_cluster_fraction=1 / 6, seed=seed)
            assert len(cs.centers) >= 1
            assert cs.fractions.max() >= 1 / 6


class TestFlowDissimilarity:
    def test_zero_at_center(self):
        from flowseg.motion_saliency import ClusterSet
        flow = np.zeros((3, 3, 2))
        flow[..., 0] = 1.0
        cs = ClusterSet(np.array([[1.0, 0.0]]), np.array([1.0]))
        np.testing.assert_array_equal(flow_dissimilarity(flow, cs), 0.0)

    def test_takes_minimum_over_centers(self):
        from flowseg.motion_saliency import ClusterSet
        flow = np.full((1, 1, 2), 0.0)
        flow[0, 0] = [1.0, 0.0]
        cs = ClusterSet(np.array([[0.0, 0.0], [5.0, 0.0]]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(flow_dissimilarity(flow, cs), [[1.0]])

    def test_squared_euclidean(self):
        from flowseg.motion_saliency import ClusterSet
        flow = np.zeros((1, 1, 2))
        flow[0, 0] = [3.0, 4.0]
        cs = ClusterSet(np.array([[0.0, 0.0]]), np.array([1.0]))
        np.testing.assert_allclose(flow_dissimilarity(flow, cs), [[25.0]])


# ---------------------------------------------------------------------------
# spanning tree
# ---------------------------------------------------------------------------

class TestBuildFlowMst:
    def test_constant_flow_zero_weight(self):
        tree = build_flow_mst(np.ones((6, 6, 2)))
        assert_spanning(tree)
        assert tree.parent_weight.sum() == 0.0

    def test_two_pixel_edge_weight(self):
        flow = np.array([[[0.0, 0.0], [3.0, -1.0]]])
        tree = build_flow_mst(flow)
        assert_spanning(tree)
        # single edge with weight max(|3|, |-1|) = 3
        assert tree.parent_weight[tree.parent != np.arange(2)].tolist() == [3.0]

    def test_total_weight_matches_kruskal_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            flow = rng.normal(0, 1, (8, 8, 2))
            tree = build_flow_mst(flow)
            assert_spanning(tree)
            total = tree.parent_weight.sum()
            np.testing.assert_allclose(total, kruskal_oracle_total_weight(flow),
                                       atol=1e-12)

    def test_deterministic(self):
        flow = np.random.default_rng(3).normal(0, 1, (7, 5, 2))
        a = build_flow_mst(flow)
        b = build_flow_mst(flow)
        np.testing.assert_array_equal(a.parent, b.parent)


# ---------------------------------------------------------------------------
# minimum barrier distance
# ---------------------------------------------------------------------------

class TestMinBarrierDistance:
    def test_boundary_pixels_zero(self):
        flow = np.random.default_rng(4).normal(0, 1, (9, 9, 2))
        u1 = min_barrier_distance(build_flow_mst(flow))
        border = boundary_band_mask(9, 9, 1)
        np.testing.assert_array_equal(u1[border], 0.0)

    def test_constant_flow_all_zero(self):
        u1 = min_barrier_distance(build_flow_mst(np.full((8, 10, 2), 2.5)))
        np.testing.assert_array_equal(u1, 0.0)

    def test_matches_dfs_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            h, w = (int(x) for x in rng.integers(5, 17, size=2))
            flow = rng.normal(0, 1, (h, w, 2))
            tree = build_flow_mst(flow)
            got = min_barrier_distance(tree)
            seeds = np.flatnonzero(boundary_band_mask(h, w, 1).ravel())
            want = mbd_dfs_oracle(tree, seeds)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_nonnegative(self):
        flow = np.random.default_rng(6).normal(0, 3, (16, 16, 2))
        u1 = min_barrier_distance(build_flow_mst(flow))
        assert u1.min() >= 0.0

    def test_adding_seeds_never_increases(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            flow = rng.normal(0, 1, (12, 12, 2))
            tree = build_flow_mst(flow)
            narrow = min_barrier_distance(tree, band_width=1)
            wide = min_barrier_distance(tree, band_width=3)
            assert np.all(wide <= narrow + 1e-12)

    def test_approximate_sweep_close_to_exact(self):
        rng = np.random.default_rng(8)
        errors = []
        for _ in range(10):
            flow = rng.normal(0, 1, (16, 16, 2))
            tree = build_flow_mst(flow)
            exact = min_barrier_distance(tree, exact=True)
            approx = min_barrier_distance(tree, exact=False)
            assert np.all(approx >= exact - 1e-12), "sweep may only overestimate"
            inner = exact > 0
            errors.append(((approx[inner] - exact[inner]) / exact[inner]).mean())
        assert np.mean(errors) <= 0.05


# ---------------------------------------------------------------------------
# combined saliency and node reduction
# ---------------------------------------------------------------------------

class TestFrameMotionSaliency:
    def test_constant_flow_all_zero(self):
        u = frame_motion_saliency(np.ones((16, 16, 2)), PipelineConfig())
        np.testing.assert_array_equal(u, 0.0)

    def test_unit_interval(self):
        flow = np.random.default_rng(9).normal(0, 1, (20, 20, 2))
        u = frame_motion_saliency(flow, PipelineConfig())
        assert u.min() >= 0.0 and u.max() <= 1.0

    def test_moving_square_separates(self):
        bundle = synth_sequence(seed=0)
        u = frame_motion_saliency(bundle.forward_flow[0], PipelineConfig())
        gt = bundle.annotations[0]
        assert u[gt].mean() >= 0.5
        assert u[~gt].mean() <= 0.1


class TestNodeInitialSaliency:
    def grid_seg(self, h, w, tile):
        labels = (np.arange(h)[:, None] // tile) * (w // tile) + np.arange(w)[None, :] // tile
        return SuperpixelSegmentation.from_labels(labels.astype(np.int32))

    def test_uniform_field(self):
        seg = self.grid_seg(8, 8, 4)
        v0 = node_initial_saliency([np.full((8, 8), 0.7)], [seg])
        np.testing.assert_allclose(v0, 0.7)

    def test_half_and_half(self):
        seg = SuperpixelSegmentation.from_labels(np.zeros((2, 2), dtype=np.int32))
        u = np.array([[0.0, 0.0], [1.0, 1.0]])
        np.testing.assert_allclose(node_initial_saliency([u], [seg]), [0.5])

    def test_synthetic_ordering(self):
        bundle = synth_sequence(num_frames=4, seed=1)
        cfg = PipelineConfig()
        fields = video_motion_saliency(bundle.forward_flow, bundle.backward_flow, cfg)
        seg = self.grid_seg(64, 64, 8)
        segs = [seg] * 4
        v0 = node_initial_saliency(fields, segs)
        m = seg.num_superpixels
        for i in range(4):
            gt_frac = np.bincount(seg.labels.ravel(),
                                  weights=bundle.annotations[i].ravel().astype(float),
                                  minlength=m) / seg.sizes
            inside = gt_frac == 1.0
            outside = gt_frac == 0.0
            chunk = v0[i * m:(i + 1) * m]
            assert chunk[inside].min() > chunk[outside].max()

    def test_last_frame_uses_backward_flow(self):
        bundle = synth_sequence(num_frames=3, seed=2)
        fields = video_motion_saliency(bundle.forward_flow, bundle.backward_flow,
                                       PipelineConfig())
        assert len(fields) == 3
        gt = bundle.annotations[-1]
        assert fields[-1][gt].mean() > fields[-1][~gt].mean()


class TestSemiSupervisedInit:
    def test_coverage_fractions(self):
        labels = np.array([[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]],
                          dtype=np.int32)
        seg = SuperpixelSegmentation.from_labels(labels)
        gt = np.zeros((4, 4), dtype=bool)
        gt[:2, :2] = True          # superpixel 0 fully inside
        gt[2:, 2] = True           # superpixel 3 half covered
        v0 = np.full(8, 0.25)      # two frames worth of nodes
        out = semi_supervised_init(v0, gt, seg)
        np.testing.assert_allclose(out[:4], [1.0, 0.0, 0.0, 0.5])
        np.testing.assert_allclose(out[4:], 0.25)  # later frames untouched

    def test_dimension_mismatch(self):
        seg = SuperpixelSegmentation.from_labels(np.zeros((2, 2), dtype=np.int32))
        with pytest.raises(ValueError):
            semi_supervised_init(np.zeros(1), np.zeros((3, 3), dtype=bool), seg)
