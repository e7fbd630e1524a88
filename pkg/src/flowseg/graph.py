"""The three diffusion-graph factors and their row-stochastic composition.

* temporal factor: superpixels of adjacent frames connected by flow vectors,
  weighted by forward/backward flow-consistency confidence
* spatial factor: nearby superpixels within a frame, weighted by how free of
  image edges both are (diffusion should not cross strong contours)
* long-range factor: k-nearest visually similar superpixels within a temporal
  window, weighted by a Gaussian on descriptor distance

Each factor gains a unit self-loop and is row-normalized before the factors
are multiplied, so the composed matrix is row-stochastic by closure. A
disabled factor is simply the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig, SparseMatrix, row_normalize, sparse_matmul
from .descriptors import KnnIndex
from .superpixel import SuperpixelSegmentation


@dataclass
class ConfidenceField:
    """Per-pixel flow round-trip confidence in [0, 1]; out-of-bounds
    reprojections are invalid and score 0."""

    values: np.ndarray  # (H, W)
    valid: np.ndarray   # (H, W) bool


def _bilinear(field: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample an (H, W, C) field at continuous positions (already in bounds)."""
    h, w = field.shape[:2]
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    return (
        field[y0, x0] * (1 - fx) * (1 - fy)
        + field[y0, x1] * fx * (1 - fy)
        + field[y1, x0] * (1 - fx) * fy
        + field[y1, x1] * fx * fy
    )


def flow_consistency_confidence(flow: np.ndarray, reverse_flow: np.ndarray,
                                sigma2: float) -> ConfidenceField:
    """Round-trip consistency of a flow field against the reverse direction.

    Follows each pixel along `flow`, samples `reverse_flow` there (bilinear),
    and scores exp(-|flow + sampled reverse|^2 / sigma2). Perfect inverses
    score 1; reprojections outside the image score 0.
    """
    flow = np.asarray(flow, dtype=np.float64)
    reverse_flow = np.asarray(reverse_flow, dtype=np.float64)
    if flow.shape != reverse_flow.shape:
        raise ValueError(f"flow shapes differ: {flow.shape} vs {reverse_flow.shape}")
    h, w = flow.shape[:2]
    xs = np.arange(w)[None, :] + flow[..., 0]
    ys = np.arange(h)[:, None] + flow[..., 1]
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    sampled = _bilinear(reverse_flow, np.clip(xs, 0, w - 1), np.clip(ys, 0, h - 1))
    residual = ((-flow - sampled) ** 2).sum(axis=2)
    values = np.where(valid, np.exp(-residual / sigma2), 0.0)
    return ConfidenceField(values, valid)


def _displaced_labels(flow: np.ndarray, target_labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Label under each pixel's rounded displaced position, plus validity."""
    h, w = flow.shape[:2]
    xs = np.rint(np.arange(w)[None, :] + flow[..., 0]).astype(int)
    ys = np.rint(np.arange(h)[:, None] + flow[..., 1]).astype(int)
    inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    labels = np.zeros((h, w), dtype=np.int64)
    labels[inside] = target_labels[ys[inside], xs[inside]]
    return labels, inside


def temporal_adjacency(seg_a: SuperpixelSegmentation, seg_b: SuperpixelSegmentation,
                       flow_fwd: np.ndarray, flow_bwd: np.ndarray,
                       conf_fwd: ConfidenceField, conf_bwd: ConfidenceField
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Connection strengths between the superpixels of two adjacent frames.

    For each pair (k, m): confidence mass carried from k into m by the forward
    flow plus mass carried from m into k by the backward flow, divided by the
    total size of the two superpixels. Returns local (rows, cols, values).
    """
    ma, mb = seg_a.num_superpixels, seg_b.num_superpixels
    fwd_labels, fwd_ok = _displaced_labels(np.asarray(flow_fwd, dtype=np.float64), seg_b.labels)
    bwd_labels, bwd_ok = _displaced_labels(np.asarray(flow_bwd, dtype=np.float64), seg_a.labels)

    mass = np.zeros(ma * mb)
    sel = fwd_ok & conf_fwd.valid
    keys = seg_a.labels[sel].astype(np.int64) * mb + fwd_labels[sel]
    np.add.at(mass, keys, conf_fwd.values[sel])
    sel = bwd_ok & conf_bwd.valid
    keys = bwd_labels[sel] * mb + seg_b.labels[sel].astype(np.int64)
    np.add.at(mass, keys, conf_bwd.values[sel])

    nz = np.flatnonzero(mass)
    rows = nz // mb
    cols = nz % mb
    values = mass[nz] / (seg_a.sizes[rows] + seg_b.sizes[cols])
    return rows, cols, values


def edge_confidence(seg: SuperpixelSegmentation, edge_map: np.ndarray,
                    sigma_w: float, epsilon: float) -> np.ndarray:
    """Mean logistic edge-freeness per superpixel; near 1 for superpixels
    free of edge response, near 0 for superpixels full of strong edges."""
    if edge_map.shape != seg.shape:
        raise ValueError(f"edge map {edge_map.shape} vs segmentation {seg.shape}")
    decay = 1.0 / (1.0 + np.exp(sigma_w * (np.asarray(edge_map, dtype=np.float64) - epsilon)))
    sums = np.bincount(seg.labels.ravel(), weights=decay.ravel(),
                       minlength=seg.num_superpixels)
    return sums / seg.sizes


def spatial_adjacency(seg: SuperpixelSegmentation, edge_free: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intra-frame connections between superpixels whose centroids are closer
    than 1.5 * sqrt(mean pair size), weighted by mean edge-freeness."""
    c = seg.centroids
    d2 = ((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    limit = 1.5 * np.sqrt((seg.sizes[:, None] + seg.sizes[None, :]) / 2.0)
    close = d2 < limit**2
    np.fill_diagonal(close, False)
    rows, cols = np.nonzero(close)
    values = 0.5 * (edge_free[rows] + edge_free[cols])
    return rows, cols, values


def visual_adjacency(index: KnnIndex, sigma: float, k: int, r: int,
                     n_nodes: int) -> SparseMatrix:
    """Directed similarity entries from each superpixel to its k nearest
    in-window neighbors: exp(-squared descriptor distance / sigma)."""
    rows, cols, values = [], [], []
    for q in range(n_nodes):
        ids, d2 = index.query(q, k, r)
        if ids.size:
            rows.append(np.full(ids.size, q, dtype=np.int64))
            cols.append(ids)
            values.append(np.exp(-d2 / sigma))
    if not rows:
        return SparseMatrix.from_entries(n_nodes, n_nodes, [], [], [])
    return SparseMatrix.from_entries(
        n_nodes, n_nodes,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(values))


def build_temporal_factor(segs: list[SuperpixelSegmentation],
                          forward_flow: list[np.ndarray],
                          backward_flow: list[np.ndarray],
                          offsets: np.ndarray, n_nodes: int,
                          config: PipelineConfig) -> SparseMatrix:
    """Assemble the symmetric temporal factor over all adjacent frame pairs."""
    rows, cols, values = [], [], []
    for i in range(len(segs) - 1):
        conf_fwd = flow_consistency_confidence(forward_flow[i], backward_flow[i],
                                               config.sigma2)
        conf_bwd = flow_consistency_confidence(backward_flow[i], forward_flow[i],
                                               config.sigma2)
        r, c, v = temporal_adjacency(segs[i], segs[i + 1], forward_flow[i],
                                     backward_flow[i], conf_fwd, conf_bwd)
        rows.extend((r + offsets[i], c + offsets[i + 1]))
        cols.extend((c + offsets[i + 1], r + offsets[i]))
        values.extend((v, v))
    if not rows:
        return SparseMatrix.from_entries(n_nodes, n_nodes, [], [], [])
    return SparseMatrix.from_entries(
        n_nodes, n_nodes,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(values))


def build_spatial_factor(segs: list[SuperpixelSegmentation],
                         edge_maps: list[np.ndarray], offsets: np.ndarray,
                         n_nodes: int, config: PipelineConfig) -> SparseMatrix:
    rows, cols, values = [], [], []
    for i, seg in enumerate(segs):
        a = edge_confidence(seg, edge_maps[i], config.sigma_w, config.epsilon)
        r, c, v = spatial_adjacency(seg, a)
        rows.append(r + offsets[i])
        cols.append(c + offsets[i])
        values.append(v)
    return SparseMatrix.from_entries(
        n_nodes, n_nodes,
        np.concatenate(rows), np.concatenate(cols), np.concatenate(values))


def compose_graph(t: SparseMatrix | None, e: SparseMatrix | None,
                  v: SparseMatrix | None, n_nodes: int) -> SparseMatrix:
    """Row-stochastic diffusion matrix: product of the row-normalized factors,
    each with unit self-loops added. Absent factors are skipped (identity)."""
    g = None
    eye = SparseMatrix.identity(n_nodes)
    for factor in (t, e, v):
        if factor is None:
            continue
        if factor.shape != (n_nodes, n_nodes):
            raise ValueError(f"factor shape {factor.shape} != {(n_nodes, n_nodes)}")
        normalized = row_normalize(factor.add(eye))
        g = normalized if g is None else sparse_matmul(g, normalized)
    return eye if g is None else g
