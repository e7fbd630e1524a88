"""Saliency propagation over the superpixel graph and mask extraction.

Diffusion is repeated multiplication by the row-stochastic graph matrix, so
node values stay inside the initial range (every step is a convex
combination). The focused pass re-runs diffusion on the high-saliency
subgraph found by the first pass and damps everything outside it, sharpening
the foreground before thresholding.
"""

from __future__ import annotations

import numpy as np

from .core import (PipelineConfig, SparseMatrix, normalize01, row_normalize,
                   sparse_matmul, sparse_matvec)
from .superpixel import SuperpixelSegmentation


def diffuse(g: SparseMatrix, v0: np.ndarray, iterations: int,
            callback=None) -> np.ndarray:
    """Apply v <- G v for the given number of iterations.

    callback(iteration, v), when given, observes each intermediate vector
    (snapshot dumps); it must not mutate v.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    v = np.asarray(v0, dtype=np.float64)
    for i in range(iterations):
        v = sparse_matvec(g, v)
        if callback is not None:
            callback(i, v)
    return v


def focused_diffusion(t: SparseMatrix | None, e: SparseMatrix | None,
                      v_factor: SparseMatrix | None, v: np.ndarray,
                      config: PipelineConfig,
                      focus_threshold: float | None = None) -> np.ndarray:
    """Second diffusion round restricted to the likely-foreground region.

    The focus set takes nodes scoring at least mean + focus_alpha * std
    (override with focus_threshold), grown by one ring of spatially adjacent
    superpixels so the object boundary stays inside. Each factor is
    row-normalized on the full graph and then restricted to the focus set, so
    links leaving the focus act as absorption: weakly anchored nodes decay
    while the object core holds its mass, sharpening the estimate. Saliency
    outside the focus is scaled down by focus_gamma. With the focus set equal
    to everything this is exactly more plain diffusion; an empty focus set
    skips the pass.
    """
    v = np.asarray(v, dtype=np.float64)
    tau = focus_threshold
    if tau is None:
        tau = v.mean() + config.focus_alpha * v.std()
    focus = v >= tau
    if not focus.any():
        return v.copy()
    if e is not None:
        adjacent = e.csr[focus].tocoo()
        ring = np.zeros(v.size, dtype=bool)
        ring[adjacent.col[adjacent.data > 0]] = True
        focus = focus | ring

    idx = np.flatnonzero(focus)
    eye = SparseMatrix.identity(v.size)
    sub_g = None
    for factor in (t, e, v_factor):
        if factor is None:
            continue
        normalized = row_normalize(factor.add(eye))
        restricted = SparseMatrix(normalized.csr[idx][:, idx].tocsr())
        sub_g = restricted if sub_g is None else sparse_matmul(sub_g, restricted)
    if sub_g is None:
        sub_g = SparseMatrix.identity(idx.size)
    out = v * config.focus_gamma
    out[idx] = diffuse(sub_g, v[idx], config.focus_iters)
    return out


def binarize(v: np.ndarray, segs: list[SuperpixelSegmentation],
             threshold: float = 0.5) -> list[np.ndarray]:
    """Rescale node saliency to [0, 1] over the whole video, paint each pixel
    with its superpixel's value, and threshold."""
    v = normalize01(np.asarray(v, dtype=np.float64))
    counts = [seg.num_superpixels for seg in segs]
    if sum(counts) != v.size:
        raise ValueError(f"{v.size} node values for {sum(counts)} superpixels")
    masks = []
    offset = 0
    for seg, m in zip(segs, counts):
        masks.append(v[offset + seg.labels] >= threshold)
        offset += m
    return masks
