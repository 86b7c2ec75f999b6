"""embforge: deterministic construction of 3D embodied instruction-tuning
datasets from raw robot-episode recordings."""

from .model import (
    Aabb3,
    ActionStep,
    CameraModel,
    DepthMap,
    Episode,
    FlowField,
    Frame,
    MaskDetection,
    PointCloud,
    SampleRecord,
    TASK_TYPES,
    WorkspaceBounds,
    validate_episode,
    wrap_angle,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb3",
    "ActionStep",
    "CameraModel",
    "DepthMap",
    "Episode",
    "FlowField",
    "Frame",
    "MaskDetection",
    "PointCloud",
    "SampleRecord",
    "TASK_TYPES",
    "WorkspaceBounds",
    "validate_episode",
    "wrap_angle",
    "__version__",
]
