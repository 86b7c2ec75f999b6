"""Per-episode orchestration, parallel execution, export, validation, stats.

Output bytes are a pure function of (input files, config, seed): episodes
are processed by an embarrassingly parallel map, results are sorted by
(episode_id, builder) before the single-writer sharding stage, and the only
timestamp lives in the report's dedicated ``generated_at`` field.
"""

from __future__ import annotations

import json
import random
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .. import geom3d
from ..annotate import (
    HttpClient,
    ReplayClient,
    build_action_prediction_sample,
    build_dense_caption_sample,
    build_goal_generation_sample,
    build_localization_sample,
    build_task_caption_sample,
    build_verification_sample,
    build_whatif_request,
    build_whatif_sample_offline,
    diversify,
    ingest_external_qa,
)
from ..config import Config
from ..model import DepthMap, Episode, SampleRecord, TASK_TYPES
from ..tokens import VOCAB, ParseError, parse
from .io_formats import read_rgb, write_pointcloud
from .manifest import EpisodeLoadError, load_episode, load_qa_records

SHARD_PATTERN = "samples-{k}.jsonl"
REPORT_NAME = "report.json"
VOCAB_NAME = "vocab.json"


@dataclass
class DatasetReport:
    """Counts, skip reasons, alignment summary, and flag counts for one run."""

    task_counts: dict = field(default_factory=dict)
    episode_status: dict = field(default_factory=dict)  # id -> "produced" | reason
    skip_reasons: dict = field(default_factory=dict)  # id -> [reasons]
    alignment: dict = field(default_factory=dict)  # id -> {"coefficients": [...]} or {"skipped": reason}
    clamp_count: int = 0
    flag_counts: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    generated_at: str = ""

    def to_json_obj(self) -> dict:
        return {
            "task_counts": self.task_counts,
            "episode_status": self.episode_status,
            "skip_reasons": self.skip_reasons,
            "alignment": self.alignment,
            "clamp_count": self.clamp_count,
            "flag_counts": self.flag_counts,
            "violations": self.violations,
            "generated_at": self.generated_at,
        }


def _make_diversifier_client(cfg: Config):
    if cfg.diversifier_mode == "replay":
        return ReplayClient(cfg.diversifier_replay_dir)
    if cfg.diversifier_mode == "http":
        return HttpClient(cfg.diversifier_endpoint, cfg.diversifier_timeout)
    return None  # "off" and "offline" run without a client


def _scaled_depth(depth: DepthMap, coeff: float) -> DepthMap:
    if coeff == 1.0:
        return depth
    return DepthMap(depth.values * coeff, depth.valid)


def annotate_episode(
    e: Episode,
    cfg: Config,
    out_dir: str | Path,
    qa_records: Optional[Sequence[dict]] = None,
) -> tuple[list[SampleRecord], dict]:
    """Run the full annotation pipeline on one episode.

    Writes point-cloud assets under out_dir/assets/<episode_id>/ and returns
    (samples, report fragment). Per-stage failures degrade to skip reasons;
    nothing raises for recoverable content problems.
    """
    out_dir = Path(out_dir)
    assets_dir = out_dir / "assets" / e.id
    fragment: dict = {"skips": [], "flags": {}, "alignment": {}}
    enabled = set(cfg.enabled_tasks())
    samples: list[SampleRecord] = []
    if not enabled:
        fragment["skips"].append("no tasks enabled")
        return samples, fragment

    n_frames = len(e.frames)
    last = n_frames - 1

    # Depth-scale alignment over static background; degrade when unreliable.
    flows = [f.flow for f in e.frames[:-1]]
    coeffs = [1.0] * n_frames
    if any(f is None for f in flows):
        fragment["alignment"] = {"skipped": "missing flow fields"}
        fragment["flags"]["alignment_skipped"] = 1
    else:
        try:
            bg = geom3d.background_mask(flows, cfg.tau_flow)
            coeffs = list(geom3d.align_depth_scales([f.depth for f in e.frames], bg).values)
            fragment["alignment"] = {"coefficients": coeffs}
        except (geom3d.AlignmentUnreliableError, ValueError) as exc:
            fragment["alignment"] = {"skipped": str(exc)}
            fragment["flags"]["alignment_skipped"] = 1

    depths = [_scaled_depth(f.depth, c) for f, c in zip(e.frames, coeffs)]

    # Frames whose point clouds become assets.
    needed = {0, last}
    rng_verif = random.Random(f"{cfg.seed}:{e.id}:verification")
    negatives: list[int] = []
    if "verification" in enabled:
        first_half = list(range(max(n_frames // 2, 1)))
        count = min(cfg.verification_negatives, len(first_half))
        negatives = sorted(rng_verif.sample(first_half, count))
        needed.update(negatives)

    assets_dir.mkdir(parents=True, exist_ok=True)
    scene_assets: dict[int, str] = {}
    for t in sorted(needed):
        frame = e.frames[t]
        rgb = read_rgb(frame.rgb_path)
        pc = geom3d.unproject(depths[t], frame.camera, rgb)
        if len(pc) == 0:
            fragment["skips"].append(f"frame {t}: no valid depth pixels")
            continue
        rel = Path("assets") / e.id / f"frame_{t:04d}.pc3d"
        write_pointcloud(pc, out_dir / rel, "bin_xyzrgb")
        scene_assets[t] = rel.as_posix()

    if 0 not in scene_assets:
        fragment["skips"].append("no usable scene point cloud; episode skipped")
        return [], fragment

    # Per-detection 3D boxes on frame 0.
    det0 = list(e.detections[0]) if e.detections else []
    boxes: dict[int, object] = {}
    for i, det in enumerate(det0):
        try:
            lifted = geom3d.lift_mask(depths[0], e.frames[0].camera, det.mask)
            boxes[i] = geom3d.aabb_from_points(lifted, cfg.trim_q)
        except (geom3d.EmptyLiftError, ValueError) as exc:
            fragment["skips"].append(f"detection {i} ('{det.label}'): {exc}")

    manipulated_idx = None
    if det0 and e.frames[0].flow is not None:
        manipulated_idx = geom3d.select_manipulated(det0, e.frames[0].flow, cfg.tau_flow)

    seed = cfg.seed
    scene0 = scene_assets[0]

    if "localization" in enabled:
        if not boxes:
            fragment["skips"].append("localization: no detections with boxes")
        for i in sorted(boxes):
            samples.append(
                build_localization_sample(e, i, boxes[i], scene_asset=scene0, seed=seed)
            )

    if "dense_caption" in enabled:
        if not boxes:
            fragment["skips"].append("dense_caption: no detections with boxes")
        for i in sorted(boxes):
            samples.append(
                build_dense_caption_sample(e, i, boxes[i], scene_asset=scene0, seed=seed)
            )

    if "task_caption" in enabled:
        if last in scene_assets:
            samples.append(
                build_task_caption_sample(
                    e, initial_asset=scene0, final_asset=scene_assets[last], seed=seed
                )
            )
        else:
            fragment["skips"].append("task_caption: final scene asset unavailable")

    if "verification" in enabled:
        for t in [last] + negatives:
            if t not in scene_assets:
                fragment["skips"].append(f"verification: frame {t} asset unavailable")
                continue
            samples.append(
                build_verification_sample(
                    e, t, k=cfg.verification_k,
                    initial_asset=scene0, current_asset=scene_assets[t], seed=seed,
                )
            )

    if "goal_generation" in enabled:
        manipulated_label = det0[manipulated_idx].label if manipulated_idx is not None else None
        manipulated_box = boxes.get(manipulated_idx) if manipulated_idx is not None else None
        goal_frame = e.frames[last]
        image_assets = []
        for role, src in (("goal_image", goal_frame.rgb_path), ("goal_depth", goal_frame.depth_path)):
            if src:
                dst = assets_dir / f"{role}{Path(src).suffix}"
                shutil.copyfile(src, dst)
                image_assets.append((role, (Path("assets") / e.id / dst.name).as_posix()))
        samples.append(
            build_goal_generation_sample(
                e, "image", manipulated_box,
                manipulated_label=manipulated_label,
                initial_asset=scene0, goal_assets=image_assets, seed=seed,
            )
        )
        if last in scene_assets:
            samples.append(
                build_goal_generation_sample(
                    e, "pcd", manipulated_box,
                    manipulated_label=manipulated_label,
                    initial_asset=scene0,
                    goal_assets=[("goal_pcd", scene_assets[last])],
                    seed=seed,
                )
            )
        else:
            fragment["skips"].append("goal_generation: pcd goal asset unavailable")

    if "action_prediction" in enabled:
        if e.actions:
            for mode in ("key", "dense"):
                samples.append(
                    build_action_prediction_sample(
                        e, mode, scene_asset=scene0, keyframe_eps=cfg.keyframe_eps, seed=seed
                    )
                )
        else:
            fragment["skips"].append("action_prediction: episode has no actions")

    client = _make_diversifier_client(cfg)

    if "whatif_qa" in enabled:
        if e.actions:
            rng = random.Random(f"{cfg.seed}:{e.id}:whatif")
            prefix = rng.randint(1, len(e.actions))
            indices = list(range(prefix))
            if client is not None:
                sample = _whatif_via_client(e, indices, client, scene0, seed)
            else:
                sample = build_whatif_sample_offline(
                    e, indices, scene_asset=scene0, seed=seed
                )
            samples.append(sample)
        else:
            fragment["skips"].append("whatif_qa: episode has no actions")

    if "embodied_qa" in enabled and qa_records:
        qa_samples, qa_skips = ingest_external_qa(
            qa_records, episode_id=e.id, default_assets=(("scene", scene0),), seed=seed
        )
        samples.extend(qa_samples)
        fragment["skips"].extend(f"embodied_qa: {s}" for s in qa_skips)

    if cfg.diversifier_mode != "off":
        samples = [
            diversify(s, client, seed)
            if s.provenance.get("template_id") not in ("untemplated",)
            else s
            for s in samples
        ]

    samples = [
        replace(s, provenance={**s.provenance, "source": e.source_tag}) for s in samples
    ]

    for s in samples:
        for flag in s.provenance.get("flags", []):
            fragment["flags"][flag] = fragment["flags"].get(flag, 0) + 1
    return samples, fragment


def _whatif_via_client(e, indices, client, scene_asset, seed) -> SampleRecord:
    request = build_whatif_request(e, indices, seed=seed)
    try:
        reply = client.complete(request)
        return SampleRecord(
            task_type="whatif_qa",
            prompt=reply["prompt"],
            answer=reply["answer"],
            assets=(("scene", scene_asset),),
            episode_id=e.id,
            provenance={"template_id": "diversified", "seed": seed, "builder": "whatif_qa"},
        )
    except Exception:
        return build_whatif_sample_offline(
            e, indices, scene_asset=scene_asset, seed=seed, flagged_fallback=True
        )


def _process_manifest(args) -> tuple[str, Optional[list[SampleRecord]], dict]:
    manifest_path, cfg, out_dir = args
    try:
        episode = load_episode(manifest_path)
        qa = load_qa_records(manifest_path)
    except EpisodeLoadError as exc:
        return str(manifest_path), None, {"error": str(exc)}
    samples, fragment = annotate_episode(episode, cfg, out_dir, qa)
    fragment["episode_id"] = episode.id
    return str(manifest_path), samples, fragment


def run_pipeline(
    manifest_paths: Sequence[str | Path],
    cfg: Config,
    out_dir: str | Path,
) -> DatasetReport:
    """Annotate every manifest and export the dataset to out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), cfg, str(out_dir)) for p in manifest_paths]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_process_manifest, jobs))
    else:
        results = [_process_manifest(j) for j in jobs]

    report = DatasetReport()
    all_samples: list[SampleRecord] = []
    for manifest_path, samples, fragment in results:
        if samples is None:
            report.episode_status[manifest_path] = fragment["error"]
            report.skip_reasons[manifest_path] = [fragment["error"]]
            continue
        eid = fragment["episode_id"]
        report.episode_status[eid] = "produced" if samples else "skipped"
        if fragment["skips"]:
            report.skip_reasons[eid] = fragment["skips"]
        report.alignment[eid] = fragment["alignment"]
        for flag, count in fragment["flags"].items():
            report.flag_counts[flag] = report.flag_counts.get(flag, 0) + count
        all_samples.extend(samples)
    report.clamp_count = report.flag_counts.get("clamped", 0)

    export_samples(all_samples, out_dir, cfg.shard_size, report=report)
    return report


def _sample_sort_key(s: SampleRecord):
    return (s.episode_id, s.provenance.get("builder", ""))


def export_samples(
    records: Sequence[SampleRecord],
    out_dir: str | Path,
    shard_size: int,
    report: Optional[DatasetReport] = None,
) -> DatasetReport:
    """Write sorted JSONL shards, vocab.json, and report.json."""
    if shard_size < 1:
        raise ValueError("shard_size must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=_sample_sort_key)

    seen = set()
    for r in records:
        sid = r.sample_id()
        if sid in seen:
            raise ValueError(f"duplicate sample id {sid!r}")
        seen.add(sid)

    if report is None:
        report = DatasetReport()
    report.task_counts = {t: 0 for t in TASK_TYPES}
    for r in records:
        report.task_counts[r.task_type] += 1

    for old in out_dir.glob("samples-*.jsonl"):
        old.unlink()
    for k in range(0, max((len(records) + shard_size - 1) // shard_size, 0)):
        chunk = records[k * shard_size:(k + 1) * shard_size]
        with open(out_dir / SHARD_PATTERN.format(k=k), "w") as fh:
            for r in chunk:
                fh.write(json.dumps(r.to_json_obj(), sort_keys=True, separators=(",", ":")))
                fh.write("\n")

    VOCAB.write_json(out_dir / VOCAB_NAME)
    report.generated_at = datetime.now(timezone.utc).isoformat()
    with open(out_dir / REPORT_NAME, "w") as fh:
        json.dump(report.to_json_obj(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return report


def _iter_dataset_lines(dataset_dir: Path):
    for shard in sorted(dataset_dir.glob("samples-*.jsonl")):
        with open(shard) as fh:
            for line_no, line in enumerate(fh):
                yield shard.name, line_no, line


def validate_dataset(dataset_dir: str | Path) -> DatasetReport:
    """Re-parse every prompt/answer, check assets, recompute counts."""
    dataset_dir = Path(dataset_dir)
    report = DatasetReport()
    report.task_counts = {t: 0 for t in TASK_TYPES}
    seen_ids = set()
    for shard, line_no, line in _iter_dataset_lines(dataset_dir):
        where = f"{shard}:{line_no}"
        try:
            obj = json.loads(line)
            record = SampleRecord.from_json_obj(obj)
        except (ValueError, KeyError) as exc:
            report.violations.append(f"{where}: malformed record ({exc})")
            continue
        report.task_counts[record.task_type] += 1
        sid = record.sample_id()
        if sid in seen_ids:
            report.violations.append(f"{where}: duplicate sample id {sid!r}")
        seen_ids.add(sid)
        for text, side in ((record.prompt, "prompt"), (record.answer, "answer")):
            try:
                parse(text)
            except ParseError as exc:
                report.violations.append(f"{where}: {side} grammar violation ({exc})")
        for _, path in record.assets:
            if not (dataset_dir / path).exists():
                report.violations.append(f"{where}: missing asset {path}")

    report_path = dataset_dir / REPORT_NAME
    if report_path.exists():
        with open(report_path) as fh:
            recorded = json.load(fh).get("task_counts", {})
        for task, count in report.task_counts.items():
            if recorded.get(task, 0) != count:
                report.violations.append(
                    f"report.json: task {task} count {recorded.get(task, 0)} != actual {count}"
                )
    return report


def stats(dataset_dir: str | Path) -> dict:
    """Sample counts grouped by task type and by source dataset tag."""
    dataset_dir = Path(dataset_dir)
    by_task: dict[str, int] = {}
    by_source: dict[str, dict[str, int]] = {}
    total = 0
    for _, _, line in _iter_dataset_lines(dataset_dir):
        obj = json.loads(line)
        task = obj["task_type"]
        source = obj.get("provenance", {}).get("source", "unknown")
        by_task[task] = by_task.get(task, 0) + 1
        by_source.setdefault(source, {})
        by_source[source][task] = by_source[source].get(task, 0) + 1
        total += 1
    return {"total": total, "by_task": by_task, "by_source": by_source}
