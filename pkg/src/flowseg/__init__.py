"""Unsupervised foreground-background video segmentation.

Motion saliency is estimated per frame from optical flow (boundary-flow
dissimilarity plus minimum barrier distance on a grid MST), averaged over
superpixels, and diffused through a row-stochastic graph built from temporal
flow consistency, intra-frame edge awareness, and long-range visual
similarity. Binary masks and benchmark-style J/F reports come out the end.
"""

from .core import InputError, PipelineConfig, SparseMatrix, normalize01, row_normalize, sparse_matmul, sparse_matvec
from .descriptors import DESCRIPTOR_SIZE, KnnIndex, build_knn_index, describe_frame, describe_superpixel, query_knn
from .diffusion import binarize, diffuse, focused_diffusion
from .graph import (ConfidenceField, compose_graph, edge_confidence,
                    flow_consistency_confidence, spatial_adjacency,
                    temporal_adjacency, visual_adjacency)
from .io import (FloFormatError, FloTruncatedError, SequenceBundle,
                 fallback_edge_map, load_sequence, read_flo, synth_sequence,
                 write_flo, write_sequence)
from .metrics import EvalReport, contour_accuracy, evaluate_sequence, mask_boundary, region_jaccard
from .motion_saliency import (ClusterSet, SpanningTree, build_flow_mst,
                              cluster_boundary_flow, flow_dissimilarity,
                              frame_motion_saliency, frame_saliency_maps,
                              min_barrier_distance, node_initial_saliency,
                              semi_supervised_init, video_motion_saliency)
from .pipeline import SegmentationResult, build_factors, compute_saliency, compute_superpixels, run_segmentation
from .superpixel import SuperpixelSegmentation, slic

__version__ = "0.1.0"

__all__ = [
    "InputError", "PipelineConfig", "SparseMatrix", "normalize01",
    "row_normalize", "sparse_matmul", "sparse_matvec",
    "DESCRIPTOR_SIZE", "KnnIndex", "build_knn_index", "describe_frame",
    "describe_superpixel", "query_knn",
    "binarize", "diffuse", "focused_diffusion",
    "ConfidenceField", "compose_graph", "edge_confidence",
    "flow_consistency_confidence", "spatial_adjacency", "temporal_adjacency",
    "visual_adjacency",
    "FloFormatError", "FloTruncatedError", "SequenceBundle",
    "fallback_edge_map", "load_sequence", "read_flo", "synth_sequence",
    "write_flo", "write_sequence",
    "EvalReport", "contour_accuracy", "evaluate_sequence", "mask_boundary",
    "region_jaccard",
    "ClusterSet", "SpanningTree", "build_flow_mst", "cluster_boundary_flow",
    "flow_dissimilarity", "frame_motion_saliency", "frame_saliency_maps",
    "min_barrier_distance", "node_initial_saliency", "semi_supervised_init",
    "video_motion_saliency",
    "SegmentationResult", "build_factors", "compute_saliency",
    "compute_superpixels", "run_segmentation",
    "SuperpixelSegmentation", "slic",
]
