"""Clustering-free point-cloud instance segmentation."""

from protoseg._core import (
    Model,
    PointCloud,
    RunConfig,
    SynthConfig,
    checkpoint_config,
    coverage_metrics,
    fps,
    generate_scene,
    iou,
    knn,
    masks_from_labels,
    prec_rec,
    read_cloud,
    train,
    write_cloud,
)

__all__ = [
    "Model",
    "PointCloud",
    "RunConfig",
    "SynthConfig",
    "checkpoint_config",
    "coverage_metrics",
    "fps",
    "generate_scene",
    "iou",
    "knn",
    "masks_from_labels",
    "prec_rec",
    "read_cloud",
    "train",
    "write_cloud",
]
