"""On-disk formats: raw depth/flow, 16-bit depth PNGs, RLE masks, point clouds.

Raw formats are little-endian throughout:

    depth .f32       magic "DPTH", u32 width, u32 height, then row-major f32 meters
    flow  .f32       magic "FLOW", u32 width, u32 height, then (dx, dy) f32 per pixel
    bin_xyzrgb       16-byte header: magic "PC3D", u32 count, u32 flags, u32 reserved;
                     then 6 f32 per point (x, y, z, r, g, b); flags bit 0 = has colors
    ply              binary_little_endian 1.0; float x/y/z, uchar red/green/blue

Depth PNGs are 16-bit grayscale millimeter images; zero pixels are invalid.
RLE masks are {"size": [h, w], "counts": [...]} with alternating run lengths
over the row-major flattening, starting with a run of zeros.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..model import DepthMap, FlowField, PointCloud

DEPTH_MAGIC = b"DPTH"
FLOW_MAGIC = b"FLOW"
POINTCLOUD_MAGIC = b"PC3D"
FLAG_HAS_COLORS = 1


def write_depth_f32(values: np.ndarray, path: str | Path) -> None:
    values = np.asarray(values, dtype="<f4")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(DEPTH_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(values.tobytes())


def read_depth_f32(path: str | Path) -> DepthMap:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DEPTH_MAGIC:
            raise ValueError(f"{path}: bad depth magic {magic!r}")
        w, h = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(w * h * 4), dtype="<f4")
    if data.size != w * h:
        raise ValueError(f"{path}: truncated depth payload")
    values = data.reshape(h, w).astype(np.float64)
    valid = np.isfinite(values) & (values > 0)
    return DepthMap(values, valid)


def write_depth_png_mm(values_m: np.ndarray, path: str | Path) -> None:
    """16-bit grayscale PNG in millimeters; invalid pixels stored as 0."""
    mm = np.round(np.asarray(values_m, dtype=np.float64) * 1000.0)
    mm = np.where(np.isfinite(mm) & (mm > 0), mm, 0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)


def read_depth_png_mm(path: str | Path) -> DepthMap:
    img = Image.open(path)
    raw = np.asarray(img, dtype=np.uint32)
    values = raw.astype(np.float64) / 1000.0
    valid = raw > 0
    values = np.where(valid, values, 1.0)  # placeholder under invalid pixels
    return DepthMap(values, valid)


def write_flow_f32(vectors: np.ndarray, path: str | Path) -> None:
    vectors = np.asarray(vectors, dtype="<f4")
    h, w, _ = vectors.shape
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(vectors.tobytes())


def read_flow_f32(path: str | Path) -> FlowField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FLOW_MAGIC:
            raise ValueError(f"{path}: bad flow magic {magic!r}")
        w, h = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(w * h * 8), dtype="<f4")
    if data.size != w * h * 2:
        raise ValueError(f"{path}: truncated flow payload")
    return FlowField(data.reshape(h, w, 2).astype(np.float64))


def read_rgb(path: str | Path) -> np.ndarray:
    """RGB image as (H, W, 3) floats in [0, 1]."""
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def write_rgb(values: np.ndarray, path: str | Path) -> None:
    arr = np.clip(np.asarray(values) * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def encode_rle_mask(mask: np.ndarray) -> dict:
    """Alternating run lengths over the row-major flattening, zeros first."""
    mask = np.asarray(mask, dtype=bool)
    flat = mask.ravel()
    counts = []
    current = False
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = v
            run = 1
    counts.append(run)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def decode_rle_mask(rle: dict) -> np.ndarray:
    h, w = rle["size"]
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in rle["counts"]:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    if pos != h * w:
        raise ValueError(f"RLE counts sum to {pos}, expected {h * w}")
    return flat.reshape(h, w)


def write_pointcloud(pc: PointCloud, path: str | Path, fmt: str = "bin_xyzrgb") -> None:
    if len(pc) == 0:
        raise ValueError("refusing to write an empty point cloud")
    if fmt == "bin_xyzrgb":
        _write_pointcloud_bin(pc, path)
    elif fmt == "ply":
        _write_pointcloud_ply(pc, path)
    else:
        raise ValueError(f"unknown point-cloud format {fmt!r}")


def _write_pointcloud_bin(pc: PointCloud, path: str | Path) -> None:
    n = len(pc)
    flags = FLAG_HAS_COLORS if pc.colors is not None else 0
    data = np.zeros((n, 6), dtype="<f4")
    data[:, :3] = pc.points
    if pc.colors is not None:
        data[:, 3:] = pc.colors
    with open(path, "wb") as fh:
        fh.write(POINTCLOUD_MAGIC)
        fh.write(struct.pack("<III", n, flags, 0))
        fh.write(data.tobytes())


def read_pointcloud_bin(path: str | Path) -> PointCloud:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != POINTCLOUD_MAGIC:
            raise ValueError(f"{path}: bad point-cloud magic {magic!r}")
        n, flags, _reserved = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(n * 24), dtype="<f4").reshape(n, 6)
    points = data[:, :3].astype(np.float64)
    colors = data[:, 3:].astype(np.float64) if flags & FLAG_HAS_COLORS else None
    return PointCloud(points, colors)


def _write_pointcloud_ply(pc: PointCloud, path: str | Path) -> None:
    n = len(pc)
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    dtype = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
    rows = np.zeros(n, dtype=dtype)
    rows["xyz"] = pc.points
    if pc.colors is not None:
        rows["rgb"] = np.clip(pc.colors * 255.0, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rows.tobytes())
