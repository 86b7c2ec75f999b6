"""3D geometry: unprojection, depth-scale alignment, mask lifting, AABB
extraction, manipulated-object selection, and 3D IoU metrics.

Everything here is a pure function over immutable inputs. Pixel coordinates
use half-pixel centers: pixel (u, v) projects through (u + 0.5, v + 0.5),
which makes project(unproject(.)) exactly invertible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Aabb3, CameraModel, DepthMap, FlowField, MaskDetection, PointCloud

MIN_BACKGROUND_PIXELS = 16


class AlignmentUnreliableError(RuntimeError):
    """Raised when too few usable background pixels exist for scale alignment."""


class EmptyLiftError(RuntimeError):
    """Raised when a mask has no valid depth pixels to lift."""


@dataclass(frozen=True, eq=False)
class BackgroundMask:
    """Pixels static in every consecutive flow field of a segment."""

    is_background: np.ndarray  # (H, W) bool

    @property
    def height(self) -> int:
        return self.is_background.shape[0]

    @property
    def width(self) -> int:
        return self.is_background.shape[1]


@dataclass(frozen=True)
class ScaleCoefficients:
    """Per-frame multiplicative depth coefficients, c[0] == 1."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.values and self.values[0] != 1.0:
            raise ValueError("scale coefficients must have c_0 == 1")
        if any(v <= 0 for v in self.values):
            raise ValueError("scale coefficients must be positive")


def unproject(depth: DepthMap, cam: CameraModel, rgb: Optional[np.ndarray] = None) -> PointCloud:
    """Lift a depth map to a world-frame point cloud.

    Valid pixels only, emitted in row-major scan order. ``rgb`` is an
    optional (H, W, 3) array of colors in [0, 1] copied onto the points.
    """
    if (depth.height, depth.width) != (cam.height, cam.width):
        raise ValueError(
            f"depth dimensions {depth.height}x{depth.width} differ from "
            f"camera {cam.height}x{cam.width}"
        )
    d = depth.values
    u_row = (np.arange(cam.width, dtype=np.float64) + 0.5 - cam.cx) / cam.fx
    v_col = (np.arange(cam.height, dtype=np.float64) + 0.5 - cam.cy) / cam.fy
    valid = depth.valid
    if valid.all():
        dv = d.ravel()
        x = (u_row[None, :] * d).ravel()
        y = (v_col[:, None] * d).ravel()
    else:
        dv = d[valid]
        x = (u_row[None, :] * d)[valid]
        y = (v_col[:, None] * d)[valid]
    pts_cam = np.empty((dv.size, 3))
    pts_cam[:, 0] = x
    pts_cam[:, 1] = y
    pts_cam[:, 2] = dv
    pts_world = pts_cam @ cam.rotation.T + cam.translation
    colors = None
    if rgb is not None:
        rgb = np.asarray(rgb, dtype=np.float64)
        if rgb.shape[:2] != (cam.height, cam.width):
            raise ValueError("rgb dimensions differ from camera dimensions")
        colors = rgb[depth.valid]
    return PointCloud(pts_world, colors)


def project(points_world: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Map world points back to (u+0.5, v+0.5, depth); inverse of unproject."""
    pts = np.asarray(points_world, dtype=np.float64).reshape(-1, 3)
    pts_cam = (pts - cam.translation) @ cam.rotation
    d = pts_cam[:, 2]
    u = pts_cam[:, 0] * cam.fx / d + cam.cx
    v = pts_cam[:, 1] * cam.fy / d + cam.cy
    return np.stack([u, v, d], axis=-1)


def background_mask(flows: Sequence[FlowField], tau_flow: float) -> BackgroundMask:
    """Pixels whose flow magnitude stays below tau_flow in every field."""
    if not flows:
        raise ValueError("background_mask needs at least one flow field")
    if tau_flow <= 0:
        raise ValueError("tau_flow must be > 0")
    shape = (flows[0].height, flows[0].width)
    bg = np.ones(shape, dtype=bool)
    for f in flows:
        if (f.height, f.width) != shape:
            raise ValueError("flow fields have mismatched dimensions")
        bg &= f.magnitude() < tau_flow
    return BackgroundMask(bg)


def align_depth_scales(depths: Sequence[DepthMap], bg: BackgroundMask) -> ScaleCoefficients:
    """Least-squares per-frame depth scale against frame 0 on background pixels.

    c_t = sum(D0 * Dt) / sum(Dt^2) over background pixels valid in both
    frames; c_0 = 1 exactly.
    """
    if len(depths) < 2:
        raise ValueError("align_depth_scales needs >= 2 depth maps")
    d0 = depths[0]
    coeffs = [1.0]
    for t in range(1, len(depths)):
        dt = depths[t]
        usable = bg.is_background & d0.valid & dt.valid
        n = int(usable.sum())
        if n < MIN_BACKGROUND_PIXELS:
            raise AlignmentUnreliableError(
                f"frame {t}: only {n} usable background pixels (< {MIN_BACKGROUND_PIXELS})"
            )
        a = d0.values[usable]
        b = dt.values[usable]
        denom = float(np.dot(b, b))
        if denom <= 0:
            raise AlignmentUnreliableError(f"frame {t}: degenerate background depths")
        c = float(np.dot(a, b)) / denom
        if c <= 0:
            raise AlignmentUnreliableError(f"frame {t}: non-positive scale {c}")
        coeffs.append(c)
    return ScaleCoefficients(tuple(coeffs))


def lift_mask(
    depth: DepthMap,
    cam: CameraModel,
    mask: np.ndarray,
    rgb: Optional[np.ndarray] = None,
) -> PointCloud:
    """Unproject restricted to pixels where mask and depth validity intersect."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (cam.height, cam.width):
        raise ValueError("mask dimensions differ from camera dimensions")
    combined = mask & depth.valid
    if not combined.any():
        raise EmptyLiftError("mask has no valid depth pixels")
    restricted = DepthMap(depth.values, combined)
    return unproject(restricted, cam, rgb)


def aabb_from_points(pc: PointCloud, trim_q: float = 0.0) -> Aabb3:
    """Per-axis quantile box: [trim_q, 1-trim_q] with linear interpolation.

    trim_q = 0 gives the exact min/max box.
    """
    if len(pc) == 0:
        raise ValueError("aabb_from_points needs a non-empty cloud")
    if not (0.0 <= trim_q < 0.5):
        raise ValueError("trim_q must be in [0, 0.5)")
    if trim_q == 0.0:
        lo = pc.points.min(axis=0)
        hi = pc.points.max(axis=0)
    else:
        lo = np.quantile(pc.points, trim_q, axis=0, method="linear")
        hi = np.quantile(pc.points, 1.0 - trim_q, axis=0, method="linear")
    return Aabb3(tuple(lo), tuple(hi))


def select_manipulated(
    detections: Sequence[MaskDetection], flow: FlowField, tau_flow: float
) -> Optional[int]:
    """Index of the manipulated detection, or None.

    Candidates are detections whose mean flow magnitude inside the mask is
    >= tau_flow; the winner has maximal confidence, ties broken by larger
    mask area, then lower index.
    """
    mag = flow.magnitude()
    best = None  # (confidence, area, -index)
    best_idx = None
    for i, det in enumerate(detections):
        if det.mask.shape != mag.shape:
            raise ValueError(f"detection {i}: mask dimensions differ from flow")
        if not det.mask.any():
            continue
        mean_mag = float(mag[det.mask].mean())
        if mean_mag < tau_flow:
            continue
        key = (det.confidence, int(det.mask.sum()), -i)
        if best is None or key > best:
            best = key
            best_idx = i
    return best_idx


def iou3d(a: Aabb3, b: Aabb3) -> float:
    """Intersection-over-union of two AABBs; zero-volume unions give 0."""
    inter = 1.0
    for (alo, blo), (ahi, bhi) in zip(zip(a.min, b.min), zip(a.max, b.max)):
        lo = max(alo, blo)
        hi = min(ahi, bhi)
        if hi <= lo:
            return 0.0
        inter *= hi - lo
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def localization_metrics(pred: Sequence[Aabb3], gt: Sequence[Aabb3]) -> dict:
    """Mean IoU and Acc@25 / Acc@50 over paired predicted and ground-truth boxes."""
    if len(pred) != len(gt):
        raise ValueError(f"pred/gt length mismatch: {len(pred)} vs {len(gt)}")
    if not pred:
        raise ValueError("localization_metrics needs at least one pair")
    ious = np.array([iou3d(p, g) for p, g in zip(pred, gt)])
    return {
        "mean_iou": float(ious.mean()),
        "acc_at_25": float((ious >= 0.25).mean()),
        "acc_at_50": float((ious >= 0.50).mean()),
    }
