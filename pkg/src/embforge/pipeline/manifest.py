"""Episode ingestion from disk via the EpisodeManifest JSON schema.

One manifest file per episode; all referenced paths are resolved relative
to the manifest's directory. Depths are converted to meters at load and a
12-number pose is expanded with the (0, 0, 0, 1) row.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..model import (
    ActionStep,
    CameraModel,
    Episode,
    Frame,
    MaskDetection,
    WorkspaceBounds,
    validate_episode,
    wrap_angle,
)
from .io_formats import decode_rle_mask, read_depth_f32, read_depth_png_mm, read_flow_f32

SCHEMA_VERSIONS = (1,)
DEPTH_UNITS = ("meters_f32", "millimeters_u16")
_POSE_ORTHO_TOL = 1e-6


class EpisodeLoadError(ValueError):
    """Manifest schema violation or unreadable referenced file; names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _require(obj: dict, key: str, field: str):
    if key not in obj:
        raise EpisodeLoadError(f"{field}.{key}", "missing required field")
    return obj[key]


def _resolve(base: Path, rel: str, field: str) -> str:
    path = (base / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
    if not path.exists():
        raise EpisodeLoadError(field, f"referenced file {path} does not exist")
    return str(path)


def _parse_pose(numbers, field: str) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(numbers, dtype=np.float64)
    if arr.size == 12:
        mat = np.vstack([arr.reshape(3, 4), [0.0, 0.0, 0.0, 1.0]])
    elif arr.size == 16:
        mat = arr.reshape(4, 4)
        if not np.allclose(mat[3], [0, 0, 0, 1]):
            raise EpisodeLoadError(field, "pose last row must be (0, 0, 0, 1)")
    else:
        raise EpisodeLoadError(field, f"pose needs 12 or 16 numbers, got {arr.size}")
    r = mat[:3, :3]
    err = float(np.max(np.abs(r.T @ r - np.eye(3))))
    if err >= _POSE_ORTHO_TOL:
        raise EpisodeLoadError(field, f"pose rotation not orthonormal (error {err:.2e})")
    if np.linalg.det(r) < 0:
        raise EpisodeLoadError(field, "pose rotation has determinant -1")
    # Snap to the nearest exact rotation so the camera invariant (1e-9) holds.
    u, _, vt = np.linalg.svd(r)
    r = u @ vt
    return r, mat[:3, 3].copy()


def _load_frame(spec: dict, base: Path, field: str) -> Frame:
    rgb_path = _resolve(base, _require(spec, "rgb_path", field), f"{field}.rgb_path")
    depth_path = _resolve(base, _require(spec, "depth_path", field), f"{field}.depth_path")
    unit = _require(spec, "depth_unit", field)
    if unit not in DEPTH_UNITS:
        raise EpisodeLoadError(f"{field}.depth_unit", f"unknown unit {unit!r}")
    try:
        depth = read_depth_f32(depth_path) if unit == "meters_f32" else read_depth_png_mm(depth_path)
    except (ValueError, OSError) as exc:
        raise EpisodeLoadError(f"{field}.depth_path", str(exc)) from exc

    intr = _require(spec, "intrinsics", field)
    rotation, translation = _parse_pose(_require(spec, "pose", field), f"{field}.pose")
    camera = CameraModel(
        fx=float(_require(intr, "fx", f"{field}.intrinsics")),
        fy=float(_require(intr, "fy", f"{field}.intrinsics")),
        cx=float(_require(intr, "cx", f"{field}.intrinsics")),
        cy=float(_require(intr, "cy", f"{field}.intrinsics")),
        width=int(_require(intr, "width", f"{field}.intrinsics")),
        height=int(_require(intr, "height", f"{field}.intrinsics")),
        rotation=rotation,
        translation=translation,
    )

    flow = None
    flow_path = None
    if spec.get("flow_path"):
        flow_path = _resolve(base, spec["flow_path"], f"{field}.flow_path")
        try:
            flow = read_flow_f32(flow_path)
        except (ValueError, OSError) as exc:
            raise EpisodeLoadError(f"{field}.flow_path", str(exc)) from exc

    return Frame(
        rgb_path=rgb_path,
        depth=depth,
        camera=camera,
        timestamp=float(_require(spec, "timestamp", field)),
        flow=flow,
        depth_path=depth_path,
        flow_path=flow_path,
    )


def _load_detections(path: str, frame_count: int, shape: tuple[int, int]):
    with open(path) as fh:
        raw = json.load(fh)
    per_frame: list[list[MaskDetection]] = [[] for _ in range(frame_count)]
    for i, rec in enumerate(raw):
        field = f"detections[{i}]"
        idx = int(_require(rec, "frame_index", field))
        if not 0 <= idx < frame_count:
            raise EpisodeLoadError(f"{field}.frame_index", f"{idx} outside 0..{frame_count - 1}")
        mask = decode_rle_mask(_require(rec, "rle_mask", field))
        if mask.shape != shape:
            raise EpisodeLoadError(f"{field}.rle_mask", f"mask shape {mask.shape} != frame {shape}")
        per_frame[idx].append(
            MaskDetection(
                label=str(_require(rec, "label", field)),
                mask=mask,
                confidence=float(_require(rec, "confidence", field)),
            )
        )
    return per_frame


def load_episode(manifest_path: str | Path) -> Episode:
    """Load and fully validate one episode from its manifest."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as fh:
            m = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise EpisodeLoadError("manifest", str(exc)) from exc
    base = manifest_path.parent

    version = _require(m, "schema_version", "manifest")
    if version not in SCHEMA_VERSIONS:
        raise EpisodeLoadError("manifest.schema_version", f"unrecognized version {version!r}")

    bounds_raw = _require(m, "bounds", "manifest")
    bounds = WorkspaceBounds(
        tuple(_require(bounds_raw, "x", "manifest.bounds")),
        tuple(_require(bounds_raw, "y", "manifest.bounds")),
        tuple(_require(bounds_raw, "z", "manifest.bounds")),
    )

    frames = [
        _load_frame(spec, base, f"frames[{i}]")
        for i, spec in enumerate(_require(m, "frames", "manifest"))
    ]
    if not frames:
        raise EpisodeLoadError("manifest.frames", "empty frame list")

    actions = []
    for t, row in enumerate(_require(m, "actions", "manifest")):
        if len(row) != 7:
            raise EpisodeLoadError(f"actions[{t}]", f"need 7 numbers, got {len(row)}")
        actions.append(
            ActionStep(
                position=tuple(float(v) for v in row[:3]),
                rotation=tuple(wrap_angle(float(v)) for v in row[3:6]),
                gripper=int(row[6]),
            )
        )

    shape = (frames[0].camera.height, frames[0].camera.width)
    detections: list = []
    if m.get("detections_path"):
        det_path = _resolve(base, m["detections_path"], "manifest.detections_path")
        detections = _load_detections(det_path, len(frames), shape)

    episode = Episode(
        id=str(_require(m, "id", "manifest")),
        frames=frames,
        actions=actions,
        instruction=str(_require(m, "instruction", "manifest")),
        detections=detections,
        bounds=bounds,
        source_tag=str(m.get("source_tag", "unknown")),
    )
    violations = validate_episode(episode)
    if violations:
        raise EpisodeLoadError("episode", "; ".join(violations))
    return episode


def load_qa_records(manifest_path: str | Path) -> list[dict]:
    """External QA records referenced by the manifest's optional qa_path."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        m = json.load(fh)
    if not m.get("qa_path"):
        return []
    qa_path = _resolve(manifest_path.parent, m["qa_path"], "manifest.qa_path")
    with open(qa_path) as fh:
        records = json.load(fh)
    if not isinstance(records, list):
        raise EpisodeLoadError("manifest.qa_path", "QA file must hold a JSON array")
    return records
