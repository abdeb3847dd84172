"""Paired-box multi-object tracking toolkit.

A deterministic pipeline around box pairs predicted for adjacent frame
pairs: anchor supervision math with verified gradients, soft-NMS and
attention post-processing, a Kuhn-Munkres chaining tracker with
constant-velocity retention, a synthetic detection simulator, CLEAR-MOT and
IDF1 evaluation, and MOTChallenge-format I/O.
"""

from .anchors import Anchor, AnchorConfig, build_anchor_grid, kmeans_scales
from .chaining import (
    Node,
    TrackerParams,
    Tracklet,
    TrackState,
    chain_node,
    fill_trajectory_gaps,
    km_assign,
    predict_velocity,
    run_tracker,
)
from .geometry import Box, OffsetQuad, decode_offsets, encode_offsets, iom, iou
from .metrics import ClearReport, aggregate, clear_mot, frame_table, idf1, mt_ml
from .postprocess import BoxPair, ScoreGrid, filter_confidence, joint_attention, soft_nms
from .simulator import (
    AugmentTransform,
    NoiseConfig,
    OcclusionEpisode,
    WorldConfig,
    apply_augmentation,
    augment_crop_expand_flip,
    corrupt_to_pairs,
    gen_sequence,
    sample_augmentation,
    sample_training_pair,
)
from .supervision import (
    AnchorLabels,
    AssignmentParams,
    GroundTruthFrame,
    LossWeights,
    Predictions,
    assign_labels,
    focal_loss,
    gradient_check,
    loss_gradients,
    reg_loss,
    smooth_l1,
    total_loss,
)

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "AnchorConfig",
    "AnchorLabels",
    "AssignmentParams",
    "AugmentTransform",
    "Box",
    "BoxPair",
    "ClearReport",
    "GroundTruthFrame",
    "LossWeights",
    "Node",
    "NoiseConfig",
    "OcclusionEpisode",
    "OffsetQuad",
    "Predictions",
    "ScoreGrid",
    "TrackState",
    "TrackerParams",
    "Tracklet",
    "WorldConfig",
    "aggregate",
    "apply_augmentation",
    "assign_labels",
    "augment_crop_expand_flip",
    "build_anchor_grid",
    "chain_node",
    "clear_mot",
    "corrupt_to_pairs",
    "decode_offsets",
    "encode_offsets",
    "fill_trajectory_gaps",
    "filter_confidence",
    "focal_loss",
    "frame_table",
    "gen_sequence",
    "gradient_check",
    "idf1",
    "iom",
    "iou",
    "joint_attention",
    "km_assign",
    "kmeans_scales",
    "loss_gradients",
    "mt_ml",
    "predict_velocity",
    "reg_loss",
    "run_tracker",
    "sample_augmentation",
    "sample_training_pair",
    "smooth_l1",
    "soft_nms",
    "total_loss",
]
