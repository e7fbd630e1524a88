"""Initial per-pixel motion saliency and its reduction to superpixel nodes.

Two complementary distances to the frame boundary are computed from optical
flow and averaged after normalization to [0, 1]:

* boundary dissimilarity: squared distance of each pixel's flow vector to the
  closest dominant boundary flow direction (k-means clusters over a boundary
  band, small clusters discarded)
* barrier distance: minimum over boundary seeds of (max edge weight - min
  edge weight) along the unique path in a minimum spanning tree of the pixel
  grid, with edge weight max(|du|, |dv|) between neighboring flow vectors

Pixels moving with the background score near zero on both; pixels whose
motion cannot be reached from the boundary through similar motion score high.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import PipelineConfig, normalize01
from .superpixel import SuperpixelSegmentation


# ---------------------------------------------------------------------------
# boundary-flow clustering
# ---------------------------------------------------------------------------

@dataclass
class ClusterSet:
    """Dominant boundary flow directions with their assignment fractions."""

    centers: np.ndarray    # (C, 2)
    fractions: np.ndarray  # (C,)


def boundary_band_mask(height: int, width: int, band_width: int) -> np.ndarray:
    """Boolean mask of the pixels within band_width of the frame border."""
    if band_width < 1 or band_width >= min(height, width) / 2:
        raise ValueError(f"band width {band_width} invalid for {height}x{width}")
    mask = np.ones((height, width), dtype=bool)
    mask[band_width:height - band_width, band_width:width - band_width] = False
    return mask


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(len(points))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[rng.integers(len(points))]
            continue
        centers[j] = points[rng.choice(len(points), p=d2 / total)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray,
           tol: float = 1e-6, max_iters: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations to convergence; empty clusters are dropped."""
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        counts = np.bincount(assign, minlength=len(centers))
        if (counts == 0).any():
            keep = counts > 0
            centers = centers[keep]
            continue
        new_centers = np.stack(
            [np.bincount(assign, weights=points[:, c], minlength=len(centers)) / counts
             for c in range(points.shape[1])], axis=1)
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift <= tol:
            break
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, d2.argmin(axis=1)


def cluster_boundary_flow(flow: np.ndarray, band_width: int, k: int,
                          min_cluster_fraction: float, seed: int = 0) -> ClusterSet:
    """k-means over the boundary band's flow vectors; keep clusters holding at
    least min_cluster_fraction of the band."""
    h, w = flow.shape[:2]
    band = boundary_band_mask(h, w, band_width)
    points = np.asarray(flow, dtype=np.float64)[band]
    rng = np.random.default_rng(seed)
    k = min(k, len(points))
    centers, assign = _lloyd(points, _kmeans_pp_init(points, k, rng))
    # duplicate centers collapse: keep the unique ones assignment actually uses
    used, assign = np.unique(assign, return_inverse=True)
    centers = centers[used]
    fractions = np.bincount(assign, minlength=len(centers)) / len(points)
    keep = fractions >= min_cluster_fraction
    if not keep.any():
        keep = fractions == fractions.max()
    return ClusterSet(centers[keep], fractions[keep])


def flow_dissimilarity(flow: np.ndarray, clusters: ClusterSet) -> np.ndarray:
    """Per-pixel minimum squared distance from the flow vector to any retained
    boundary cluster center (raw, un-normalized)."""
    if len(clusters.centers) == 0:
        raise ValueError("cluster set is empty")
    flow = np.asarray(flow, dtype=np.float64)
    diff = flow[:, :, None, :] - clusters.centers[None, None, :, :]
    return (diff**2).sum(axis=3).min(axis=2)


# ---------------------------------------------------------------------------
# minimum spanning tree over the pixel grid
# ---------------------------------------------------------------------------

@dataclass
class SpanningTree:
    """Rooted spanning tree over the H*W pixel grid (linear index y*W + x).

    parent[root] == root; parent_weight[root] == 0. bfs_order lists nodes
    parents-first.
    """

    parent: np.ndarray         # (N,) int64
    parent_weight: np.ndarray  # (N,) float64
    root: int
    height: int
    width: int
    bfs_order: np.ndarray = field(repr=False, default=None)

    @property
    def num_pixels(self) -> int:
        return self.height * self.width


@njit(cache=True, nogil=True)
def _kruskal_select(us, vs, n):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    chosen = np.zeros(len(us), dtype=np.bool_)
    accepted = 0
    for i in range(len(us)):
        a, b = us[i], vs[i]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        chosen[i] = True
        accepted += 1
        if accepted == n - 1:
            break
    return chosen


@njit(cache=True, nogil=True)
def _orient_tree(neigh_idx, neigh_w, offsets, root, n):
    parent = np.full(n, -1, dtype=np.int64)
    pweight = np.zeros(n, dtype=np.float64)
    order = np.empty(n, dtype=np.int64)
    parent[root] = root
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        head += 1
        for j in range(offsets[v], offsets[v + 1]):
            u = neigh_idx[j]
            if parent[u] < 0:
                parent[u] = v
                pweight[u] = neigh_w[j]
                order[tail] = u
                tail += 1
    return parent, pweight, order


def _adjacency(us: np.ndarray, vs: np.ndarray, ws: np.ndarray, n: int):
    both = np.concatenate([us, vs])
    other = np.concatenate([vs, us])
    weights = np.concatenate([ws, ws])
    order = np.argsort(both, kind="stable")
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(both, minlength=n), out=offsets[1:])
    return other[order], weights[order], offsets


def build_flow_mst(flow: np.ndarray) -> SpanningTree:
    """Kruskal MST over the 4-connected grid with edge weight max(|du|, |dv|).

    Equal-weight edges are taken in (row, col, right-then-down) order, which
    makes the tree deterministic.
    """
    flow = np.asarray(flow, dtype=np.float64)
    h, w = flow.shape[:2]
    n = h * w
    idx = np.arange(n).reshape(h, w)

    us_parts, vs_parts, ws_parts, key_parts = [], [], [], []
    if w > 1:
        diff = np.abs(flow[:, 1:] - flow[:, :-1]).max(axis=2)
        us_parts.append(idx[:, :-1].ravel())
        vs_parts.append(idx[:, 1:].ravel())
        ws_parts.append(diff.ravel())
        key_parts.append(idx[:, :-1].ravel() * 2)
    if h > 1:
        diff = np.abs(flow[1:, :] - flow[:-1, :]).max(axis=2)
        us_parts.append(idx[:-1, :].ravel())
        vs_parts.append(idx[1:, :].ravel())
        ws_parts.append(diff.ravel())
        key_parts.append(idx[:-1, :].ravel() * 2 + 1)
    if not us_parts:
        return SpanningTree(np.zeros(1, dtype=np.int64), np.zeros(1), 0, h, w,
                            np.zeros(1, dtype=np.int64))

    us = np.concatenate(us_parts)
    vs = np.concatenate(vs_parts)
    ws = np.concatenate(ws_parts)
    canonical = np.argsort(np.concatenate(key_parts), kind="stable")
    us, vs, ws = us[canonical], vs[canonical], ws[canonical]
    by_weight = np.argsort(ws, kind="stable")
    us, vs, ws = us[by_weight], vs[by_weight], ws[by_weight]

    chosen = _kruskal_select(us, vs, n)
    neigh_idx, neigh_w, offsets = _adjacency(us[chosen], vs[chosen], ws[chosen], n)
    parent, pweight, order = _orient_tree(neigh_idx, neigh_w, offsets, 0, n)
    return SpanningTree(parent, pweight, 0, h, w, order)


# ---------------------------------------------------------------------------
# minimum barrier distance on the tree
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _mbd_exact(neigh_idx, neigh_w, offsets, seeds, n):
    inf = np.inf
    d = np.full(n, inf)
    stack_node = np.empty(n, dtype=np.int64)
    stack_prev = np.empty(n, dtype=np.int64)
    stack_hi = np.empty(n, dtype=np.float64)
    stack_lo = np.empty(n, dtype=np.float64)
    for si in range(len(seeds)):
        s = seeds[si]
        if d[s] > 0.0:
            d[s] = 0.0
        top = 0
        stack_node[0] = s
        stack_prev[0] = -1
        stack_hi[0] = -inf
        stack_lo[0] = inf
        while top >= 0:
            v = stack_node[top]
            prev = stack_prev[top]
            hi = stack_hi[top]
            lo = stack_lo[top]
            top -= 1
            for j in range(offsets[v], offsets[v + 1]):
                u = neigh_idx[j]
                if u == prev:
                    continue
                w = neigh_w[j]
                nhi = hi if hi > w else w
                nlo = lo if lo < w else w
                bar = nhi - nlo
                if bar < d[u]:
                    d[u] = bar
                top += 1
                stack_node[top] = u
                stack_prev[top] = v
                stack_hi[top] = nhi
                stack_lo[top] = nlo
    return d


@njit(cache=True, nogil=True)
def _sweep_relax(src, dst, w, d, hi, lo):
    """Extend both candidate path states of src by edge w into dst's slots.

    Slot 0 holds the best barrier seen; slot 1 the best among states with a
    different (max, min) signature, which keeps an alternative alive when the
    greedy choice extends badly later.
    """
    changed = False
    for s in range(2):
        if d[src, s] == np.inf:
            continue
        nhi = hi[src, s] if hi[src, s] > w else w
        nlo = lo[src, s] if lo[src, s] < w else w
        bar = nhi - nlo
        if bar < d[dst, 0]:
            if hi[dst, 0] != nhi or lo[dst, 0] != nlo:
                d[dst, 1] = d[dst, 0]
                hi[dst, 1] = hi[dst, 0]
                lo[dst, 1] = lo[dst, 0]
            d[dst, 0] = bar
            hi[dst, 0] = nhi
            lo[dst, 0] = nlo
            changed = True
        elif bar < d[dst, 1] and (nhi != hi[dst, 0] or nlo != lo[dst, 0]):
            d[dst, 1] = bar
            hi[dst, 1] = nhi
            lo[dst, 1] = nlo
            changed = True
    return changed


@njit(cache=True, nogil=True)
def _mbd_sweep(parent, pweight, order, seed_mask, max_rounds):
    n = len(parent)
    d = np.full((n, 2), np.inf)
    hi = np.full((n, 2), -np.inf)
    lo = np.full((n, 2), np.inf)
    for v in range(n):
        if seed_mask[v]:
            d[v, 0] = 0.0
    for _ in range(max_rounds):
        changed = False
        # leaves to root: relax each parent from its child
        for i in range(n - 1, -1, -1):
            v = order[i]
            if parent[v] != v and _sweep_relax(v, parent[v], pweight[v], d, hi, lo):
                changed = True
        # root to leaves: relax each child from its parent
        for i in range(n):
            v = order[i]
            if parent[v] != v and _sweep_relax(parent[v], v, pweight[v], d, hi, lo):
                changed = True
        if not changed:
            break
    return d[:, 0].copy()


def min_barrier_distance(tree: SpanningTree, band_width: int = 1,
                         exact: bool = True, seeds: np.ndarray | None = None) -> np.ndarray:
    """Minimum over boundary seeds of the path barrier (max - min edge weight).

    Seeds default to the 1-pixel border; they score 0 by the empty-path
    convention. Exact mode traverses the tree once per seed; the approximate
    mode is a converging up/down tree sweep that keeps one candidate path per
    node (cheap, slightly optimistic about path choices).
    """
    h, w = tree.height, tree.width
    n = tree.num_pixels
    if seeds is None:
        seeds = np.flatnonzero(boundary_band_mask(h, w, band_width).ravel())
    seeds = np.asarray(seeds, dtype=np.int64)
    if exact:
        edges = np.flatnonzero(tree.parent != np.arange(n))
        neigh_idx, neigh_w, offsets = _adjacency(
            edges, tree.parent[edges], tree.parent_weight[edges], n)
        d = _mbd_exact(neigh_idx, neigh_w, offsets, seeds, n)
    else:
        seed_mask = np.zeros(n, dtype=bool)
        seed_mask[seeds] = True
        d = _mbd_sweep(tree.parent, tree.parent_weight, tree.bfs_order,
                       seed_mask, 16)
    return d.reshape(h, w)


# ---------------------------------------------------------------------------
# per-frame saliency and node initialization
# ---------------------------------------------------------------------------

def frame_saliency_maps(flow: np.ndarray, config: PipelineConfig,
                        seed: int | None = None
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized boundary-dissimilarity map, normalized barrier-distance map,
    and their average (the frame's motion saliency)."""
    h, w = flow.shape[:2]
    band = min(config.boundary_band_width, max(1, (min(h, w) - 1) // 2))
    clusters = cluster_boundary_flow(
        flow, band, config.boundary_clusters, config.min_cluster_fraction,
        config.seed if seed is None else seed)
    u0 = normalize01(flow_dissimilarity(flow, clusters))
    tree = build_flow_mst(flow)
    u1 = normalize01(min_barrier_distance(tree, band_width=1, exact=config.mbd_exact))
    return u0, u1, (u0 + u1) / 2.0


def frame_motion_saliency(flow: np.ndarray, config: PipelineConfig,
                          seed: int | None = None) -> np.ndarray:
    """Average of the normalized boundary dissimilarity and barrier distance
    maps; lies in [0, 1]."""
    return frame_saliency_maps(flow, config, seed)[2]


def video_motion_saliency(forward_flow: list[np.ndarray],
                          backward_flow: list[np.ndarray],
                          config: PipelineConfig) -> list[np.ndarray]:
    """Per-frame saliency maps for all F frames.

    Frames 0..F-2 use their forward flow; the final frame has none, so its
    negated backward flow stands in (same boundary logic, reversed motion).
    """
    fields = [
        frame_motion_saliency(fwd, config, seed=config.seed + i)
        for i, fwd in enumerate(forward_flow)
    ]
    last = -np.asarray(backward_flow[-1])
    fields.append(frame_motion_saliency(last, config, seed=config.seed + len(forward_flow)))
    return fields


def node_initial_saliency(fields: list[np.ndarray],
                          segs: list[SuperpixelSegmentation]) -> np.ndarray:
    """Average pixel saliency over each superpixel's support; concatenated over
    frames in temporal order to form the global node vector."""
    if len(fields) != len(segs):
        raise ValueError("need one saliency field per segmentation")
    parts = []
    for u, seg in zip(fields, segs):
        if u.shape != seg.shape:
            raise ValueError(f"field {u.shape} vs segmentation {seg.shape}")
        sums = np.bincount(seg.labels.ravel(), weights=np.asarray(u, dtype=np.float64).ravel(),
                           minlength=seg.num_superpixels)
        parts.append(sums / seg.sizes)
    return np.concatenate(parts)


def semi_supervised_init(v0: np.ndarray, gt_mask: np.ndarray,
                         seg0: SuperpixelSegmentation) -> np.ndarray:
    """Replace the first frame's entries with ground-truth coverage fractions."""
    if gt_mask.shape != seg0.shape:
        raise ValueError(f"mask {gt_mask.shape} vs segmentation {seg0.shape}")
    fg = np.bincount(seg0.labels.ravel(), weights=np.asarray(gt_mask, dtype=np.float64).ravel(),
                     minlength=seg0.num_superpixels)
    out = np.asarray(v0, dtype=np.float64).copy()
    out[:seg0.num_superpixels] = fg / seg0.sizes
    return out
