"""Superpixel appearance descriptors and approximate k-nearest-neighbor search.

A descriptor concatenates four blocks (59 dimensions total):

* LAB histogram, 8 bins per channel (24)
* RGB histogram, 8 bins per channel (24)
* HOG: unsigned gradient-orientation histogram, 9 bins, magnitude-weighted (9)
* centroid (x, y) normalized to [0, 1] (2)

Histogram blocks are L2-normalized individually (zero stays zero for empty
blocks), then the full vector is L2-normalized, bounding squared distances by
4 so a similarity bandwidth of 0.1 operates on a known scale.

Neighbor search uses a forest of randomized k-d trees with best-bin-first
backtracking under a leaf-visit budget; exact mode is a vectorized scan.
"""

from __future__ import annotations

import heapq

import numpy as np

from .colorspace import luminance, rgb_to_lab
from .superpixel import SuperpixelSegmentation

N_COLOR_BINS = 8
N_HOG_BINS = 9
DESCRIPTOR_SIZE = 6 * N_COLOR_BINS + N_HOG_BINS + 2

_LAB_LO = np.array([0.0, -128.0, -128.0])
_LAB_HI = np.array([100.0, 128.0, 128.0])


def _pixel_features(frame: np.ndarray):
    """Per-pixel histogram bin indices and HOG (bin, magnitude) pairs."""
    frame = np.asarray(frame, dtype=np.float64)
    lab = rgb_to_lab(frame)
    lab_bins = np.clip(
        ((lab - _LAB_LO) / (_LAB_HI - _LAB_LO) * N_COLOR_BINS).astype(np.int64),
        0, N_COLOR_BINS - 1,
    )
    rgb_bins = np.clip((frame * N_COLOR_BINS).astype(np.int64), 0, N_COLOR_BINS - 1)

    luma = luminance(frame)
    gy, gx = np.gradient(luma)
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi)
    hog_bins = np.clip((orientation / np.pi * N_HOG_BINS).astype(np.int64),
                       0, N_HOG_BINS - 1)
    return lab_bins, rgb_bins, hog_bins, magnitude


def _normalize_blocks(vec: np.ndarray) -> np.ndarray:
    """L2-normalize the three histogram blocks in place, then the whole vector."""
    bounds = (0, 3 * N_COLOR_BINS, 6 * N_COLOR_BINS, 6 * N_COLOR_BINS + N_HOG_BINS)
    for a, b in zip(bounds[:-1], bounds[1:]):
        norm = np.linalg.norm(vec[..., a:b], axis=-1, keepdims=True)
        vec[..., a:b] = np.divide(vec[..., a:b], norm, where=norm > 0)
    total = np.linalg.norm(vec, axis=-1, keepdims=True)
    return np.divide(vec, total, where=total > 0)


def describe_frame(frame: np.ndarray, seg: SuperpixelSegmentation) -> np.ndarray:
    """Descriptors for every superpixel of a frame, shape (M, 59)."""
    h, w = seg.shape
    m = seg.num_superpixels
    lab_bins, rgb_bins, hog_bins, magnitude = _pixel_features(frame)
    labels = seg.labels.ravel()

    vec = np.zeros((m, DESCRIPTOR_SIZE))
    for c in range(3):
        for block, bins in ((0, lab_bins), (3 * N_COLOR_BINS, rgb_bins)):
            offset = block + c * N_COLOR_BINS
            combined = labels * N_COLOR_BINS + bins[..., c].ravel()
            counts = np.bincount(combined, minlength=m * N_COLOR_BINS)
            vec[:, offset:offset + N_COLOR_BINS] = counts.reshape(m, N_COLOR_BINS)
    combined = labels * N_HOG_BINS + hog_bins.ravel()
    hog = np.bincount(combined, weights=magnitude.ravel(), minlength=m * N_HOG_BINS)
    vec[:, 6 * N_COLOR_BINS:6 * N_COLOR_BINS + N_HOG_BINS] = hog.reshape(m, N_HOG_BINS)

    vec[:, -2] = seg.centroids[:, 0] / max(w - 1, 1)
    vec[:, -1] = seg.centroids[:, 1] / max(h - 1, 1)
    return _normalize_blocks(vec)


def describe_superpixel(frame: np.ndarray, seg: SuperpixelSegmentation,
                        local_id: int) -> np.ndarray:
    """Descriptor of a single superpixel (same layout as describe_frame rows)."""
    h, w = seg.shape
    lab_bins, rgb_bins, hog_bins, magnitude = _pixel_features(frame)
    ys, xs = seg.member_coords(local_id)
    if ys.size == 0:
        raise ValueError(f"superpixel {local_id} is empty")

    vec = np.zeros(DESCRIPTOR_SIZE)
    for c in range(3):
        vec[c * N_COLOR_BINS:(c + 1) * N_COLOR_BINS] = np.bincount(
            lab_bins[ys, xs, c], minlength=N_COLOR_BINS)
        off = 3 * N_COLOR_BINS + c * N_COLOR_BINS
        vec[off:off + N_COLOR_BINS] = np.bincount(
            rgb_bins[ys, xs, c], minlength=N_COLOR_BINS)
    vec[6 * N_COLOR_BINS:6 * N_COLOR_BINS + N_HOG_BINS] = np.bincount(
        hog_bins[ys, xs], weights=magnitude[ys, xs], minlength=N_HOG_BINS)
    vec[-2] = xs.mean() / max(w - 1, 1)
    vec[-1] = ys.mean() / max(h - 1, 1)
    return _normalize_blocks(vec)


class KnnIndex:
    """Randomized k-d forest over descriptors with temporal-window filtering.

    Split dimensions are drawn among the highest-variance dimensions of each
    node's subset, split at the median. Queries run best-bin-first across all
    trees under a shared leaf-visit budget (`checks`); with exact=True a
    vectorized linear scan is used instead.
    """

    _TOP_VARIANCE = 5

    def __init__(self, descriptors: np.ndarray, frame_ids: np.ndarray,
                 n_trees: int = 4, leaf_size: int = 16, checks: int = 64,
                 seed: int = 0, exact: bool = False):
        self.points = np.ascontiguousarray(descriptors, dtype=np.float64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise ValueError("descriptors must be a nonempty (N, D) array")
        self.frame_ids = np.asarray(frame_ids, dtype=np.int64)
        if self.frame_ids.shape != (len(self.points),):
            raise ValueError("need one frame id per descriptor")
        self.checks = checks
        self.exact = exact
        self.leaf_size = max(2, leaf_size)
        self.trees = []
        if not exact:
            rng = np.random.default_rng(seed)
            for _ in range(n_trees):
                self.trees.append(self._build_tree(rng))

    def _build_tree(self, rng: np.random.Generator):
        n = len(self.points)
        items = np.arange(n)
        node_dim, node_val = [], []
        node_left, node_right = [], []
        leaf_lo, leaf_hi = [], []
        stack = [(0, n, None, False)]  # (lo, hi, parent, is_right)

        def new_node():
            node_dim.append(-1)
            node_val.append(0.0)
            node_left.append(-1)
            node_right.append(-1)
            leaf_lo.append(-1)
            leaf_hi.append(-1)
            return len(node_dim) - 1

        while stack:
            lo, hi, parent, is_right = stack.pop()
            node = new_node()
            if parent is not None:
                (node_right if is_right else node_left)[parent] = node
            subset = items[lo:hi]
            if hi - lo <= self.leaf_size:
                leaf_lo[node], leaf_hi[node] = lo, hi
                continue
            variances = self.points[subset].var(axis=0)
            top = np.argsort(variances, kind="stable")[-self._TOP_VARIANCE:]
            top = top[variances[top] > 0]
            if top.size == 0:  # all duplicates: nothing to split on
                leaf_lo[node], leaf_hi[node] = lo, hi
                continue
            dim = int(rng.choice(top))
            values = self.points[subset, dim]
            mid = (hi - lo) // 2
            part = np.argpartition(values, mid)
            items[lo:hi] = subset[part]
            node_dim[node] = dim
            node_val[node] = float(values[part[mid]])
            stack.append((lo + mid, hi, node, True))
            stack.append((lo, lo + mid, node, False))

        return {
            "items": items,
            "dim": np.array(node_dim),
            "val": np.array(node_val),
            "left": np.array(node_left),
            "right": np.array(node_right),
            "leaf_lo": np.array(leaf_lo),
            "leaf_hi": np.array(leaf_hi),
        }

    def _allowed(self, query_id: int, r: int) -> np.ndarray:
        window = np.abs(self.frame_ids - self.frame_ids[query_id]) <= r
        window[query_id] = False
        return window

    def _rank(self, q: np.ndarray, ids: np.ndarray, k: int):
        d2 = ((self.points[ids] - q) ** 2).sum(axis=1)
        order = np.lexsort((ids, d2))[:k]
        return ids[order], d2[order]

    def query(self, query_id: int, k: int, r: int) -> tuple[np.ndarray, np.ndarray]:
        """Up to k in-window neighbors of a stored point, nearest first.

        Returns (ids, squared distances), both ascending by distance with id
        as the tie-break. The query point itself is excluded.
        """
        if not (0 <= query_id < len(self.points)):
            raise ValueError(f"invalid query id {query_id}")
        allowed = self._allowed(query_id, r)
        q = self.points[query_id]
        if self.exact:
            return self._rank(q, np.flatnonzero(allowed), k)

        heap = []
        counter = 0
        for t, tree in enumerate(self.trees):
            heapq.heappush(heap, (0.0, counter, t, 0))
            counter += 1
        candidate_chunks = []
        visited_leaves = 0
        while heap and visited_leaves < self.checks:
            bound, _, t, node = heapq.heappop(heap)
            tree = self.trees[t]
            while tree["dim"][node] >= 0:
                dim, val = tree["dim"][node], tree["val"][node]
                diff = q[dim] - val
                near, far = (
                    (tree["left"][node], tree["right"][node])
                    if diff < 0 else (tree["right"][node], tree["left"][node])
                )
                far_bound = max(bound, diff * diff)
                heapq.heappush(heap, (far_bound, counter, t, far))
                counter += 1
                node = near
            lo, hi = tree["leaf_lo"][node], tree["leaf_hi"][node]
            candidate_chunks.append(tree["items"][lo:hi])
            visited_leaves += 1
        if not candidate_chunks:
            return np.array([], dtype=np.int64), np.array([])
        ids = np.unique(np.concatenate(candidate_chunks))
        ids = ids[allowed[ids]]
        return self._rank(q, ids, k)


def build_knn_index(descriptors: np.ndarray, frame_ids: np.ndarray,
                    n_trees: int = 4, leaf_size: int = 16, checks: int = 64,
                    seed: int = 0, exact: bool = False) -> KnnIndex:
    return KnnIndex(descriptors, frame_ids, n_trees=n_trees, leaf_size=leaf_size,
                    checks=checks, seed=seed, exact=exact)


def query_knn(index: KnnIndex, query_id: int, k: int, r: int) -> list[tuple[int, float]]:
    """Neighbor (id, squared distance) pairs, nearest first."""
    ids, d2 = index.query(query_id, k, r)
    return list(zip(ids.tolist(), d2.tolist()))
