"""Domain types shared by every stage of the dataset pipeline.

All types are immutable value objects after construction; they carry no
behaviour beyond validation. Geometry operations live in ``embforge.geom3d``,
token codecs in ``embforge.tokens``, file formats in ``embforge.pipeline``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TASK_TYPES = (
    "embodied_qa",
    "task_caption",
    "whatif_qa",
    "dense_caption",
    "localization",
    "verification",
    "goal_generation",
    "action_prediction",
)

_ROT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole intrinsics plus a rigid camera-to-world pose.

    ``rotation`` is 3x3 row-major, ``translation`` a 3-vector in meters.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    def validate(self) -> list[str]:
        errs = []
        if not self.fx > 0:
            errs.append("camera.fx must be > 0")
        if not self.fy > 0:
            errs.append("camera.fy must be > 0")
        if not (0 < self.cx < self.width):
            errs.append("camera.cx outside (0, width)")
        if not (0 < self.cy < self.height):
            errs.append("camera.cy outside (0, height)")
        r = self.rotation
        if np.max(np.abs(r.T @ r - np.eye(3))) >= _ROT_TOL:
            errs.append("camera.rotation not orthonormal")
        elif np.linalg.det(r) < 0:
            errs.append("camera.rotation has determinant -1")
        return errs

    @classmethod
    def identity_pose(cls, fx, fy, cx, cy, width, height) -> "CameraModel":
        return cls(fx, fy, cx, cy, width, height, np.eye(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth in meters with a validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def validate(self) -> list[str]:
        errs = []
        if self.values.shape != self.valid.shape:
            errs.append("depth.values and depth.valid shapes differ")
            return errs
        v = self.values[self.valid]
        if v.size and (not np.all(np.isfinite(v)) or not np.all(v > 0)):
            errs.append("depth has non-finite or non-positive valid values")
        return errs


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel 2D displacement in pixels between consecutive frames."""

    vectors: np.ndarray  # (H, W, 2)

    def __post_init__(self):
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float64))

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=-1)

    def validate(self) -> list[str]:
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 2:
            return ["flow.vectors must have shape (H, W, 2)"]
        if not np.all(np.isfinite(self.vectors)):
            return ["flow has non-finite components"]
        return []


@dataclass(frozen=True, eq=False)
class MaskDetection:
    """One 2D instance mask with its noun label and confidence."""

    label: str
    mask: np.ndarray  # (H, W) bool
    confidence: float

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    def validate(self) -> list[str]:
        errs = []
        if not self.mask.any():
            errs.append(f"detection '{self.label}': empty mask")
        if not (0.0 <= self.confidence <= 1.0):
            errs.append(f"detection '{self.label}': confidence {self.confidence} outside [0, 1]")
        return errs


@dataclass(frozen=True, eq=False)
class PointCloud:
    """World-frame points in meters, optionally with per-point RGB in [0, 1]."""

    points: np.ndarray  # (N, 3)
    colors: Optional[np.ndarray] = None  # (N, 3) or None

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        if self.colors is not None:
            object.__setattr__(self, "colors", np.asarray(self.colors, dtype=np.float64).reshape(-1, 3))

    def __len__(self) -> int:
        return self.points.shape[0]

    def validate(self) -> list[str]:
        errs = []
        if not np.all(np.isfinite(self.points)):
            errs.append("point cloud has non-finite coordinates")
        if self.colors is not None and self.colors.shape[0] != self.points.shape[0]:
            errs.append("point cloud colors length differs from points")
        return errs


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned 3D box in world meters, min and max corners."""

    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "min", tuple(float(v) for v in self.min))
        object.__setattr__(self, "max", tuple(float(v) for v in self.max))

    def validate(self) -> list[str]:
        if any(lo > hi for lo, hi in zip(self.min, self.max)):
            return [f"aabb min {self.min} exceeds max {self.max}"]
        return []

    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in zip(self.min, self.max)]))


@dataclass(frozen=True)
class ActionStep:
    """7-DoF end-effector command: position, roll/pitch/yaw, gripper bit."""

    position: tuple[float, float, float]
    rotation: tuple[float, float, float]  # radians, wrapped to [-pi, pi)
    gripper: int

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))
        object.__setattr__(self, "gripper", int(self.gripper))

    def validate(self) -> list[str]:
        errs = []
        if self.gripper not in (0, 1):
            errs.append(f"gripper {self.gripper} not in {{0,1}}")
        for r in self.rotation:
            if not (-np.pi <= r < np.pi):
                errs.append(f"rotation component {r} outside [-pi, pi)")
                break
        return errs


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians to [-pi, pi)."""
    return float((a + np.pi) % (2 * np.pi) - np.pi)


@dataclass(frozen=True)
class WorkspaceBounds:
    """Per-axis (lo, hi) meter ranges used by the location/action quantizers."""

    x: tuple[float, float]
    y: tuple[float, float]
    z: tuple[float, float]

    def __post_init__(self):
        for name in ("x", "y", "z"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (float(lo), float(hi)))

    def validate(self) -> list[str]:
        errs = []
        for name in ("x", "y", "z"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                errs.append(f"bounds.{name}: lo {lo} >= hi {hi}")
        return errs

    @property
    def axes(self) -> tuple[tuple[float, float], ...]:
        return (self.x, self.y, self.z)

    @classmethod
    def unit(cls) -> "WorkspaceBounds":
        return cls((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


@dataclass(frozen=True, eq=False)
class Frame:
    """One time step of an episode: RGB reference, depth, optional flow, camera."""

    rgb_path: str
    depth: DepthMap
    camera: CameraModel
    timestamp: float
    flow: Optional[FlowField] = None  # flow from this frame to the next
    rgb: Optional[np.ndarray] = None  # (H, W, 3) float in [0,1], lazily loaded
    depth_path: str = ""
    flow_path: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Episode:
    """One recorded manipulation trajectory."""

    id: str
    frames: Sequence[Frame]
    actions: Sequence[ActionStep]
    instruction: str
    detections: Sequence[Sequence[MaskDetection]]  # per frame
    bounds: WorkspaceBounds
    source_tag: str = "unknown"


def validate_episode(e: Episode) -> list[str]:
    """Check every Episode invariant; returns one message per violation.

    Total function: never raises on malformed content.
    """
    errs: list[str] = []
    if len(e.frames) < 2:
        errs.append("frames: need >= 2")
    if len(e.actions) not in (len(e.frames), len(e.frames) - 1):
        errs.append(
            f"actions: length {len(e.actions)} not in {{frames, frames-1}} for {len(e.frames)} frames"
        )
    ts = [f.timestamp for f in e.frames]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        errs.append("frames: timestamps not strictly increasing")
    errs.extend(e.bounds.validate())
    for i, f in enumerate(e.frames):
        for msg in f.camera.validate():
            errs.append(f"frames[{i}].{msg}")
        for msg in f.depth.validate():
            errs.append(f"frames[{i}].{msg}")
        if (f.depth.height, f.depth.width) != (f.camera.height, f.camera.width):
            errs.append(f"frames[{i}]: depth dimensions differ from camera dimensions")
        if f.flow is not None:
            for msg in f.flow.validate():
                errs.append(f"frames[{i}].{msg}")
            if (f.flow.height, f.flow.width) != (f.camera.height, f.camera.width):
                errs.append(f"frames[{i}]: flow dimensions differ from camera dimensions")
    for t, a in enumerate(e.actions):
        if a.gripper not in (0, 1):
            errs.append(f"actions[{t}].gripper ∉ {{0,1}}")
        for r in a.rotation:
            if not (-np.pi <= r < np.pi):
                errs.append(f"actions[{t}].rotation component {r} outside [-pi, pi)")
                break
    if len(e.detections) not in (0, len(e.frames)):
        errs.append("detections: per-frame list length differs from frames")
    for i, dets in enumerate(e.detections):
        for d in dets:
            for msg in d.validate():
                errs.append(f"detections[{i}]: {msg}")
    return errs


@dataclass(frozen=True)
class SampleRecord:
    """One prompt/answer training sample plus its asset references."""

    task_type: str
    prompt: str
    answer: str
    assets: tuple[tuple[str, str], ...]  # (role, path) pairs
    episode_id: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple((str(r), str(p)) for r, p in self.assets))
        if self.task_type not in TASK_TYPES:
            raise ValueError(f"unknown task_type {self.task_type!r}")

    def sample_id(self) -> str:
        return f"{self.episode_id}/{self.provenance.get('builder', 'unknown')}"

    def to_json_obj(self) -> dict:
        return {
            "task_type": self.task_type,
            "prompt": self.prompt,
            "answer": self.answer,
            "assets": [{"role": r, "path": p} for r, p in self.assets],
            "episode_id": self.episode_id,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SampleRecord":
        return cls(
            task_type=obj["task_type"],
            prompt=obj["prompt"],
            answer=obj["answer"],
            assets=tuple((a["role"], a["path"]) for a in obj["assets"]),
            episode_id=obj["episode_id"],
            provenance=obj.get("provenance", {}),
        )
