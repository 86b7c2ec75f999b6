"""Synthetic episode fixture generator.

Builds small fully-deterministic episodes (static camera, flat background
plane, one moving object, one static distractor) with every input the
pipeline consumes: RGB frames, depth maps with known per-frame scale
factors, flow fields, detections, actions, and external QA records. Used by
the test suite and handy for trying the CLI end to end:

    python -m embforge.fixture OUT_DIR --episodes 10
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .pipeline.io_formats import (
    encode_rle_mask,
    write_depth_f32,
    write_depth_png_mm,
    write_flow_f32,
    write_rgb,
)

WIDTH, HEIGHT = 48, 36
N_FRAMES = 4
BACKGROUND_Z = 2.0
OBJECT_Z = 1.5
DISTRACTOR_Z = 1.7
OBJECT_STEP_PX = 3  # horizontal motion per frame
FRAME_SCALES = (1.0, 1.25, 0.8, 2.0)  # known per-frame depth corruptions

SCENARIOS = (
    ("cup", "pick up the red cup"),
    ("drawer", "open the drawer"),
    ("block", "push the blue block"),
)


def _object_rect(i: int) -> tuple[int, int, int, int]:
    x0 = 6 + (i % 3)
    y0 = 12 + (i % 4)
    return x0, y0, 8, 8  # x, y, w, h


_DISTRACTOR_RECT = (34, 6, 8, 6)


def _rect_mask(x: int, y: int, w: int, h: int) -> np.ndarray:
    mask = np.zeros((HEIGHT, WIDTH), dtype=bool)
    mask[y:y + h, x:x + w] = True
    return mask


def _render_frame(i: int, t: int):
    """True-depth map, RGB image, and object mask for episode i, frame t."""
    x0, y0, w, h = _object_rect(i)
    x = x0 + OBJECT_STEP_PX * t
    obj = _rect_mask(x, y0, w, h)
    dis = _rect_mask(*_DISTRACTOR_RECT)
    depth = np.full((HEIGHT, WIDTH), BACKGROUND_Z)
    depth[dis] = DISTRACTOR_Z
    depth[obj] = OBJECT_Z
    rgb = np.zeros((HEIGHT, WIDTH, 3))
    rgb[..., 1] = 0.3  # greenish background
    rgb[dis] = (0.4, 0.3, 0.2)
    rgb[obj] = (0.9, 0.1, 0.1)
    return depth, rgb, obj, dis


def generate_episode(root: Path, i: int) -> Path:
    ep_dir = root / f"ep_{i:03d}"
    ep_dir.mkdir(parents=True, exist_ok=True)
    label, instruction = SCENARIOS[i % len(SCENARIOS)]
    use_png_depth = i % 2 == 1

    frames = []
    detections = []
    for t in range(N_FRAMES):
        depth, rgb, obj, dis = _render_frame(i, t)
        stored_depth = depth * FRAME_SCALES[t]

        rgb_name = f"rgb_{t:04d}.png"
        write_rgb(rgb, ep_dir / rgb_name)
        if use_png_depth:
            depth_name = f"depth_{t:04d}.png"
            write_depth_png_mm(stored_depth, ep_dir / depth_name)
            depth_unit = "millimeters_u16"
        else:
            depth_name = f"depth_{t:04d}.f32"
            write_depth_f32(stored_depth, ep_dir / depth_name)
            depth_unit = "meters_f32"

        frame = {
            "rgb_path": rgb_name,
            "depth_path": depth_name,
            "depth_unit": depth_unit,
            "intrinsics": {
                "fx": 40.0, "fy": 40.0,
                "cx": WIDTH / 2, "cy": HEIGHT / 2,
                "width": WIDTH, "height": HEIGHT,
            },
            "pose": [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0],
            "timestamp": 0.1 * t,
        }
        if t < N_FRAMES - 1:
            flow = np.zeros((HEIGHT, WIDTH, 2))
            flow[obj] = (OBJECT_STEP_PX, 0.0)
            flow_name = f"flow_{t:04d}.f32"
            write_flow_f32(flow, ep_dir / flow_name)
            frame["flow_path"] = flow_name
        frames.append(frame)

        if t == 0:
            detections.append({
                "frame_index": 0,
                "label": label,
                "confidence": 0.85,
                "rle_mask": encode_rle_mask(obj),
            })
            detections.append({
                "frame_index": 0,
                "label": "table",
                "confidence": 0.95,
                "rle_mask": encode_rle_mask(dis),
            })

    with open(ep_dir / "detections.json", "w") as fh:
        json.dump(detections, fh)

    actions = []
    for t in range(N_FRAMES):
        frac = t / (N_FRAMES - 1)
        actions.append([
            -0.3 + 0.6 * frac,
            0.1 * math.sin(frac * math.pi),
            0.2 + 0.1 * frac,
            0.0, 0.0, -math.pi / 2 + frac * math.pi / 4,
            0 if t < 2 else 1,
        ])

    qa = [
        {"question": f"What is the robot asked to do? Episode {i}.",
         "answer": instruction},
        {"question": "Is there a table in the scene?",
         "answer": "yes"},
    ]
    with open(ep_dir / "qa.json", "w") as fh:
        json.dump(qa, fh)

    manifest = {
        "schema_version": 1,
        "id": f"ep_{i:03d}",
        "instruction": instruction,
        "source_tag": "synthetic",
        "bounds": {"x": [-0.5, 0.5], "y": [-0.5, 0.5], "z": [0.0, 2.0]},
        "frames": frames,
        "actions": actions,
        "detections_path": "detections.json",
        "qa_path": "qa.json",
    }
    manifest_path = ep_dir / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest_path


def generate_fixture(root: str | Path, episodes: int = 10) -> list[Path]:
    """Write ``episodes`` synthetic episodes under root; returns manifest paths."""
    root = Path(root)
    return [generate_episode(root, i) for i in range(episodes)]


if __name__ == "__main__":
    import argparse

    ap = argparse.ArgumentParser(description="Generate the synthetic episode fixture.")
    ap.add_argument("out_dir")
    ap.add_argument("--episodes", type=int, default=10)
    args = ap.parse_args()
    paths = generate_fixture(args.out_dir, args.episodes)
    for p in paths:
        print(p)
