"""End-to-end orchestration: superpixels -> saliency -> graph -> diffusion -> masks.

Everything here is in-memory; disk layout and flag handling live in the CLI.
Per-frame stages can run on a thread pool; results are collected by frame
index and all per-frame seeds derive from the config seed plus the frame
index, so output is independent of the thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import InputError, PipelineConfig, SparseMatrix
from .descriptors import KnnIndex, describe_frame
from .diffusion import binarize, diffuse, focused_diffusion
from .graph import build_spatial_factor, build_temporal_factor, compose_graph, visual_adjacency
from .io import SequenceBundle, fallback_edge_map
from .motion_saliency import node_initial_saliency, semi_supervised_init, video_motion_saliency
from .superpixel import SuperpixelSegmentation, slic


def _parallel_map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class SegmentationResult:
    masks: list[np.ndarray]
    v0: np.ndarray
    node_saliency: np.ndarray
    segs: list[SuperpixelSegmentation]
    offsets: np.ndarray
    saliency_fields: list[np.ndarray]
    factors: tuple[SparseMatrix | None, SparseMatrix | None, SparseMatrix | None] = (None, None, None)
    timings: dict[str, float] = field(default_factory=dict)


def compute_superpixels(bundle: SequenceBundle, config: PipelineConfig,
                        threads: int = 1) -> list[SuperpixelSegmentation]:
    h, w = bundle.frame_shape
    target = config.superpixels_for(h, w)
    return _parallel_map(
        lambda frame: slic(frame, target, config.slic_compactness, config.seed),
        bundle.frames, threads)


def node_offsets(segs: list[SuperpixelSegmentation]) -> np.ndarray:
    counts = np.array([seg.num_superpixels for seg in segs])
    offsets = np.zeros(len(segs) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets


def compute_saliency(bundle: SequenceBundle, config: PipelineConfig,
                     segs: list[SuperpixelSegmentation] | None = None,
                     threads: int = 1):
    """Per-frame saliency fields, segmentations, and the initial node vector."""
    if segs is None:
        segs = compute_superpixels(bundle, config, threads)
    fields = video_motion_saliency(bundle.forward_flow, bundle.backward_flow, config)
    v0 = node_initial_saliency(fields, segs)
    return fields, segs, v0


def build_factors(bundle: SequenceBundle, segs: list[SuperpixelSegmentation],
                  config: PipelineConfig, threads: int = 1
                  ) -> tuple[SparseMatrix | None, SparseMatrix | None, SparseMatrix | None]:
    """The enabled graph factors (disabled ones come back as None)."""
    offsets = node_offsets(segs)
    n = int(offsets[-1])

    t_factor = None
    if config.enable_temporal:
        t_factor = build_temporal_factor(segs, bundle.forward_flow,
                                         bundle.backward_flow, offsets, n, config)

    e_factor = None
    if config.enable_spatial:
        edge_maps = bundle.edge_maps
        if edge_maps is None:
            edge_maps = _parallel_map(fallback_edge_map, bundle.frames, threads)
        e_factor = build_spatial_factor(segs, edge_maps, offsets, n, config)

    v_factor = None
    if config.enable_longrange:
        descriptors = np.concatenate(
            _parallel_map(lambda args: describe_frame(*args),
                          list(zip(bundle.frames, segs)), threads))
        frame_ids = np.repeat(np.arange(len(segs)),
                              [seg.num_superpixels for seg in segs])
        index = KnnIndex(descriptors, frame_ids, n_trees=config.knn_trees,
                         leaf_size=config.knn_leaf_size, checks=config.knn_checks,
                         seed=config.seed)
        v_factor = visual_adjacency(index, config.sigma, config.k_nn,
                                    config.temporal_window, n)
    return t_factor, e_factor, v_factor


def run_segmentation(bundle: SequenceBundle, config: PipelineConfig,
                     mode: str = "unsupervised",
                     segs: list[SuperpixelSegmentation] | None = None,
                     v0_transform: Callable[[np.ndarray], np.ndarray] | None = None,
                     threads: int = 1,
                     diffusion_callback=None) -> SegmentationResult:
    """Full pipeline on an in-memory bundle.

    mode is "unsupervised" or "semi-supervised" (the latter replaces the first
    frame's initialization with its ground-truth annotation). v0_transform is
    a hook applied to the initial node vector, used by robustness tests to
    corrupt the initialization. diffusion_callback observes each main-pass
    iteration (snapshot dumps).
    """
    if mode not in ("unsupervised", "semi-supervised"):
        raise InputError(f"unknown mode {mode!r}")
    timings: dict[str, float] = {}

    tic = time.perf_counter()
    if segs is None:
        segs = compute_superpixels(bundle, config, threads)
    timings["superpixels"] = time.perf_counter() - tic

    tic = time.perf_counter()
    fields, segs, v0 = compute_saliency(bundle, config, segs, threads)
    if mode == "semi-supervised":
        if not bundle.annotations:
            raise InputError("semi-supervised mode needs a first-frame annotation")
        v0 = semi_supervised_init(v0, bundle.annotations[0], segs[0])
    if v0_transform is not None:
        v0 = np.asarray(v0_transform(v0), dtype=np.float64)
    timings["saliency"] = time.perf_counter() - tic

    tic = time.perf_counter()
    t_factor, e_factor, v_factor = build_factors(bundle, segs, config, threads)
    offsets = node_offsets(segs)
    n = int(offsets[-1])
    g = compose_graph(t_factor, e_factor, v_factor, n)
    timings["graph"] = time.perf_counter() - tic

    tic = time.perf_counter()
    v = diffuse(g, v0, config.diffusion_iters, callback=diffusion_callback)
    if config.enable_focused:
        v = focused_diffusion(t_factor, e_factor, v_factor, v, config)
    timings["diffusion"] = time.perf_counter() - tic

    tic = time.perf_counter()
    masks = binarize(v, segs, config.binarize_threshold)
    timings["binarize"] = time.perf_counter() - tic

    return SegmentationResult(masks, v0, v, segs, offsets, fields,
                              (t_factor, e_factor, v_factor), timings)
