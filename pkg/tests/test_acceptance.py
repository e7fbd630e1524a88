"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings. Every tolerance is pinned here, not configurable.
"""

import struct
import time

import numpy as np
import pytest

from flowseg.cli import main
from flowseg.core import PipelineConfig, SparseMatrix, sparse_matmul, sparse_matvec
from flowseg.descriptors import KnnIndex
from flowseg.graph import (compose_graph, edge_confidence,
                           flow_consistency_confidence, visual_adjacency)
from flowseg.io import FloFormatError, FloTruncatedError, read_flo, synth_sequence, write_flo
from flowseg.metrics import EvalReport, contour_accuracy, evaluate_sequence, region_jaccard
from flowseg.motion_saliency import boundary_band_mask, build_flow_mst, min_barrier_distance
from flowseg.pipeline import run_segmentation
from flowseg.superpixel import SuperpixelSegmentation


def mbd_dfs_oracle(tree, seeds):
    """Brute force: independent per-seed DFS with running path max/min."""
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
                if nhi - nlo < best[u]:
                    best[u] = nhi - nlo
                stack.append((u, v, nhi, nlo))
    return best.reshape(tree.height, tree.width)


def test_criterion_01_mbd_matches_dfs_oracle():
    """Exact barrier distance == per-seed DFS oracle on 100 random fields."""
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    checked = 0
    for i in range(100):
        if i < 10:
            h = w = 32
        else:
            h, w = (int(x) for x in rng.integers(5, 33, size=2))
        flow = rng.normal(0.0, rng.uniform(0.2, 3.0), (h, w, 2))
        tree = build_flow_mst(flow)
        got = min_barrier_distance(tree, band_width=1, exact=True)
        seeds = np.flatnonzero(boundary_band_mask(h, w, 1).ravel())
        want = mbd_dfs_oracle(tree, seeds)
        np.testing.assert_allclose(got, want, atol=1e-9)
        checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 100
    assert elapsed < 30.0, f"criterion 1 runtime {elapsed:.1f}s exceeds 30s"
    print(f"PASS criterion 1: exact barrier distance == DFS oracle on "
          f"{checked} fields <= 32x32 within 1e-9 ({elapsed:.1f}s)")


def test_criterion_02_stochasticity_and_contraction():
    """Composed G is row-stochastic; 25 diffusion steps contract the range."""
    rng = np.random.default_rng(1)
    for trial in range(50):
        n = int(rng.integers(5, 501))
        factors = []
        for _ in range(3):
            nnz = int(rng.integers(1, 4 * n))
            rows = rng.integers(0, n, size=nnz)
            cols = rng.integers(0, n, size=nnz)
            keys = np.unique(rows * n + cols)
            factors.append(SparseMatrix.from_entries(
                n, n, keys // n, keys % n, rng.random(keys.size)))
        g = compose_graph(*factors, n)
        rows_sum = np.asarray(g.csr.sum(axis=1)).ravel()
        np.testing.assert_allclose(rows_sum, np.ones(n), atol=1e-9)
        v = rng.normal(size=n)
        lo, hi = v.min(), v.max()
        for _ in range(25):
            v = sparse_matvec(g, v)
            assert v.max() <= hi + 1e-12 and v.min() >= lo - 1e-12
            lo, hi = v.min(), v.max()
    print("PASS criterion 2: 50 random factor triples (N <= 500) compose to "
          "row sums within 1e-9 of 1; 25 diffusion steps never widen the range")


def test_criterion_03_sparse_equals_dense():
    """sparse_matvec / sparse_matmul match dense oracles within 1e-12."""
    rng = np.random.default_rng(2)
    for _ in range(100):
        n, k, m = (int(x) for x in rng.integers(1, 65, size=3))
        def rand_sparse(r, c):
            mask = rng.random((r, c)) < 0.35
            rows, cols = np.nonzero(mask)
            return SparseMatrix.from_entries(r, c, rows, cols, rng.random(rows.size))
        a = rand_sparse(n, k)
        b = rand_sparse(k, m)
        v = rng.normal(size=k)
        np.testing.assert_allclose(sparse_matvec(a, v), a.to_dense() @ v, atol=1e-12)
        np.testing.assert_allclose(sparse_matmul(a, b).to_dense(),
                                   a.to_dense() @ b.to_dense(), atol=1e-12)
    print("PASS criterion 3: sparse products == dense oracles within 1e-12 "
          "on 100 random instances N <= 64")


def test_criterion_04_flo_round_trip(tmp_path):
    """1000 bitwise .flo round trips plus corrupt/truncated rejection."""
    rng = np.random.default_rng(3)
    path = tmp_path / "f.flo"
    for _ in range(1000):
        h, w = (int(x) for x in rng.integers(1, 13, size=2))
        field = rng.normal(0, 100, (h, w, 2)).astype(np.float32)
        write_flo(field, path)
        back = read_flo(path)
        assert np.array_equal(back.view(np.uint8), field.view(np.uint8))

    bad = struct.pack("<f", 1.0) + struct.pack("<ii", 1, 1) + b"\0" * 8
    (tmp_path / "bad.flo").write_bytes(bad)
    with pytest.raises(FloFormatError):
        read_flo(tmp_path / "bad.flo")
    write_flo(np.zeros((3, 3, 2), dtype=np.float32), path)
    (tmp_path / "short.flo").write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FloTruncatedError):
        read_flo(tmp_path / "short.flo")
    print("PASS criterion 4: 1000 bitwise .flo round trips; corrupt sentinel "
          "and truncated payloads rejected")


def test_criterion_05_synthetic_end_to_end(tmp_path):
    """Default synth + default segment reaches J >= 0.85, F >= 0.80 in < 60s."""
    start = time.perf_counter()
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data)]) == 0
    out = tmp_path / "out"
    assert main(["segment", str(data), "--out", str(out)]) == 0
    from flowseg.io import read_mask
    preds = [read_mask(p) for p in sorted((out / "masks").glob("*.png"))]
    gts = [read_mask(p) for p in sorted((data / "annotations").glob("*.png"))]
    rep = evaluate_sequence(preds, gts)
    elapsed = time.perf_counter() - start
    assert rep.j_mean >= 0.85, f"mean J {rep.j_mean:.3f} < 0.85"
    assert rep.f_mean >= 0.80, f"mean F {rep.f_mean:.3f} < 0.80"
    assert elapsed < 60.0, f"criterion 5 runtime {elapsed:.1f}s exceeds 60s"
    print(f"PASS criterion 5: synthetic end-to-end J {rep.j_mean:.3f} >= 0.85, "
          f"F {rep.f_mean:.3f} >= 0.80 ({elapsed:.1f}s)")


def test_criterion_06_ablation_directionality():
    """Full-graph diffusion beats thresholded v0 by >= 5 IoU points on a noisy
    sequence with 20% corrupted initialization; each factor alone helps."""
    bundle = synth_sequence(noise_level=0.5, seed=7)

    def corrupt(v0):
        rng = np.random.default_rng(123)
        out = v0.copy()
        pick = rng.random(v0.size) < 0.2
        out[pick] = rng.random(int(pick.sum()))
        return out

    # sigma2 rescaled to the synthetic noise floor: the benchmark flow solvers
    # behind the 2^-6 default are far more self-consistent than sigma=0.5
    # Gaussian noise, under which every round-trip residual saturates exp()
    def j_for(**toggles):
        cfg = PipelineConfig(sigma2=1.0, enable_focused=False, **toggles)
        res = run_segmentation(bundle, cfg, v0_transform=corrupt)
        return evaluate_sequence(res.masks, bundle.annotations).j_mean

    j_none = j_for(enable_temporal=False, enable_spatial=False, enable_longrange=False)
    j_t = j_for(enable_temporal=True, enable_spatial=False, enable_longrange=False)
    j_e = j_for(enable_temporal=False, enable_spatial=True, enable_longrange=False)
    j_v = j_for(enable_temporal=False, enable_spatial=False, enable_longrange=True)
    j_full = j_for(enable_temporal=True, enable_spatial=True, enable_longrange=True)

    assert j_full - j_none >= 0.05, (
        f"full graph {j_full:.3f} vs thresholded v0 {j_none:.3f}: "
        f"improvement below 5 points")
    for name, j_single in (("temporal", j_t), ("spatial", j_e), ("longrange", j_v)):
        assert j_single > j_none, f"{name} alone ({j_single:.3f}) <= none ({j_none:.3f})"
    print(f"PASS criterion 6: noisy ablation J none {j_none:.3f} | T {j_t:.3f} "
          f"E {j_e:.3f} V {j_v:.3f} | full {j_full:.3f} "
          f"(improvement {j_full - j_none:+.3f} >= +0.05, each factor > none)")


def test_criterion_07_knn_recall():
    """Approximate forest recall@40 >= 0.9 vs exact scan on 10k descriptors."""
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10000, 59))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    frame_ids = np.zeros(10000, dtype=np.int64)
    # uniform random 59-d data is the worst case for space partitioning, so
    # the leaf-visit budget is raised well past the structured-data default
    index = KnnIndex(x, frame_ids, n_trees=4, leaf_size=16, checks=2048, seed=0)
    queries = rng.choice(10000, 100, replace=False)
    recalls = []
    for q in queries:
        ids, _ = index.query(int(q), 40, r=1)
        d2 = ((x - x[q]) ** 2).sum(axis=1)
        d2[q] = np.inf
        truth = set(np.argsort(d2, kind="stable")[:40].tolist())
        recalls.append(len(set(ids.tolist()) & truth) / 40.0)
    recall = float(np.mean(recalls))
    assert recall >= 0.9, f"recall@40 {recall:.3f} < 0.9"
    print(f"PASS criterion 7: approximate kNN recall@40 {recall:.3f} >= 0.9 "
          f"on 10k random unit descriptors (100 queries)")


def test_criterion_08_metric_identities():
    """J and F identities on constructed mask pairs."""
    m = np.zeros((20, 40), dtype=bool)
    m[4:14, 4:14] = True
    assert region_jaccard(m, m) == 1.0
    assert contour_accuracy(m, m) == 1.0

    half = np.zeros((20, 40), dtype=bool)
    half[4:14, 9:19] = True  # covers half of m with equal area
    assert region_jaccard(m, half) == pytest.approx(1.0 / 3.0)

    rep = EvalReport("x", np.array([0.8, 0.8, 0.4, 0.4]),
                     np.array([0.8, 0.8, 0.4, 0.4]))
    assert rep.j_decay == pytest.approx(0.4)

    shifted = np.zeros((20, 40), dtype=bool)
    shifted[4:14, 5:15] = True  # 1 px shift
    assert contour_accuracy(m, shifted, tolerance_radius=1.0) == 1.0
    print("PASS criterion 8: J(m,m)=F(m,m)=1; half-overlap J=1/3; "
          "decay(0.8,0.8,0.4,0.4)=0.4; 1px-shift F=1 within tolerance")


def test_criterion_09_analytic_spot_values():
    """Closed-form spot checks of the three graph weight formulas."""
    sigma2 = 2.0 ** -6
    fwd = np.zeros((4, 4, 2))
    bwd = np.zeros((4, 4, 2))
    bwd[..., 0] = np.sqrt(sigma2)  # residual squared norm == sigma2
    conf = flow_consistency_confidence(fwd, bwd, sigma2)
    np.testing.assert_allclose(conf.values, np.exp(-1.0), atol=1e-12)

    seg = SuperpixelSegmentation.from_labels(np.zeros((4, 4), dtype=np.int32))
    a = edge_confidence(seg, np.full((4, 4), 0.05), sigma_w=50.0, epsilon=0.05)
    np.testing.assert_allclose(a, 0.5, atol=1e-12)

    sigma = 0.1
    x = np.zeros((2, 8))
    x[1, 0] = np.sqrt(sigma)  # squared descriptor distance == sigma
    index = KnnIndex(x, np.zeros(2, dtype=np.int64), exact=True)
    v = visual_adjacency(index, sigma=sigma, k=1, r=1, n_nodes=2).to_dense()
    np.testing.assert_allclose(v[0, 1], np.exp(-1.0), atol=1e-12)
    print("PASS criterion 9: confidence e^-1 at residual^2=sigma2; A=0.5 at "
          "uniform epsilon; V entry e^-1 at distance^2=sigma (all within 1e-12)")


def test_criterion_10_benchmark_stretch_goal():
    """Documented, non-gating: real-dataset comparison needs external inputs."""
    print("SKIP criterion 10 (stretch, non-gating): reproducing the published "
          "benchmark mean J ~ 0.776 needs the DAVIS frames plus externally "
          "computed optical flow and trained edge maps; point `flowseg segment` "
          "at such a layout and compare with `flowseg evaluate` (see README)")
    pytest.skip("requires user-supplied DAVIS data, precomputed flow and edge maps")
