"""Command-line front end.

Exit codes: 0 success, 1 per-item failures (details in the report or on
stderr), 2 usage errors. Diagnostics go to stderr; data goes to files or
stdout only.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config, apply_entries, load_config
from .model import WorkspaceBounds
from .pipeline import load_episode, run_pipeline
from .pipeline import stats as dataset_stats
from .pipeline import validate_dataset
from .pipeline.manifest import EpisodeLoadError
from .pipeline.run import REPORT_NAME, SHARD_PATTERN, export_samples
from .model import SampleRecord
from .tokens import (
    VOCAB,
    TokenParseError,
    decode_action_seq,
    decode_bbox,
    encode_action_seq,
    encode_bbox,
    lex,
)
from .model import ActionStep, Aabb3
from .model import wrap_angle


def _load_cfg(config_path, sets) -> Config:
    overrides = {}
    for item in sets:
        if "=" not in item:
            raise click.UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    try:
        return load_config(config_path, overrides)
    except (OSError, ValueError) as exc:
        raise click.UsageError(str(exc))


def _parse_bounds(spec: str) -> WorkspaceBounds:
    try:
        vals = [float(v) for v in spec.replace(",", " ").split()]
        if len(vals) != 6:
            raise ValueError
        return WorkspaceBounds((vals[0], vals[1]), (vals[2], vals[3]), (vals[4], vals[5]))
    except ValueError:
        raise click.UsageError(f"--bounds expects 6 numbers x0,x1,y0,y1,z0,z1, got {spec!r}")


def _input_text(arg: str | None) -> str:
    return arg if arg is not None else sys.stdin.read()


@click.group()
def main():
    """embforge: build 3D embodied instruction-tuning datasets from robot episodes."""


@main.command()
@click.argument("manifests", nargs=-1, required=True, type=click.Path(exists=True))
def ingest(manifests):
    """Validate episode manifests without producing any output."""
    failures = 0
    for path in manifests:
        try:
            episode = load_episode(path)
            click.echo(f"{path}: ok ({episode.id}, {len(episode.frames)} frames)")
        except EpisodeLoadError as exc:
            failures += 1
            click.echo(f"{path}: {exc}", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.argument("manifests", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "sets", multiple=True, help="Override a config key, KEY=VALUE.")
@click.option("--workers", type=int, default=None)
@click.option("--seed", type=int, default=None)
def annotate(manifests, out_dir, config_path, sets, workers, seed):
    """Run the full annotation pipeline over manifests and export a dataset."""
    cfg = _load_cfg(config_path, sets)
    extra = {}
    if workers is not None:
        extra["workers"] = workers
    if seed is not None:
        extra["seed"] = seed
    if extra:
        cfg = apply_entries(cfg, extra)
    report = run_pipeline(list(manifests), cfg, out_dir)
    failed = [k for k, v in report.episode_status.items() if v not in ("produced",)]
    total = sum(report.task_counts.values())
    click.echo(f"wrote {total} samples to {out_dir}", err=True)
    if failed:
        for k in failed:
            click.echo(f"episode {k}: {report.episode_status[k]}", err=True)
        sys.exit(1)


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--shard-size", type=int, required=True)
def export(dataset_dir, out_dir, shard_size):
    """Re-shard an existing dataset directory into a new one."""
    import shutil

    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    records = []
    for shard in sorted(dataset_dir.glob("samples-*.jsonl")):
        with open(shard) as fh:
            records.extend(SampleRecord.from_json_obj(json.loads(line)) for line in fh)
    out_dir.mkdir(parents=True, exist_ok=True)
    assets_src = dataset_dir / "assets"
    if assets_src.exists():
        shutil.copytree(assets_src, out_dir / "assets", dirs_exist_ok=True)
    export_samples(records, out_dir, shard_size)
    click.echo(f"wrote {len(records)} samples to {out_dir}", err=True)


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
def validate(dataset_dir):
    """Re-parse an exported dataset and check its invariants."""
    report = validate_dataset(dataset_dir)
    click.echo(json.dumps(report.to_json_obj(), indent=1, sort_keys=True))
    if report.violations:
        click.echo(f"{len(report.violations)} violations", err=True)
        sys.exit(1)


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True))
def stats(dataset_dir):
    """Per-task and per-source sample counts of an exported dataset."""
    click.echo(json.dumps(dataset_stats(dataset_dir), indent=1, sort_keys=True))


@main.group()
def tokens():
    """Encode/decode boxes and action sequences for debugging."""


_BOUNDS_OPT = click.option(
    "--bounds", default="0,1,0,1,0,1", show_default=True,
    help="Workspace bounds as x0,x1,y0,y1,z0,z1.",
)


@tokens.command("encode-action")
@click.argument("text", required=False)
@_BOUNDS_OPT
def tokens_encode_action(text, bounds):
    """Encode steps of 7 numbers (x y z roll pitch yaw gripper; ';' separates steps)."""
    b = _parse_bounds(bounds)
    steps = []
    for part in _input_text(text).replace("\n", ";").split(";"):
        nums = [float(v) for v in part.split()]
        if not nums:
            continue
        if len(nums) != 7:
            raise click.UsageError(f"each step needs 7 numbers, got {len(nums)}")
        steps.append(ActionStep(tuple(nums[:3]), tuple(wrap_angle(a) for a in nums[3:6]), int(nums[6])))
    if not steps:
        raise click.UsageError("no action steps given")
    toks, clamped = encode_action_seq(steps, b)
    click.echo("".join(toks))
    if clamped:
        click.echo("warning: values clamped to bounds", err=True)


@tokens.command("decode-action")
@click.argument("text", required=False)
@_BOUNDS_OPT
def tokens_decode_action(text, bounds):
    """Decode an action token sequence back to numbers, one step per line."""
    b = _parse_bounds(bounds)
    try:
        steps = decode_action_seq(lex(_input_text(text)), b)
    except TokenParseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    for s in steps:
        click.echo(" ".join(f"{v:.6f}" for v in s.position + s.rotation) + f" {s.gripper}")


@tokens.command("encode-box")
@click.argument("text", required=False)
@_BOUNDS_OPT
def tokens_encode_box(text, bounds):
    """Encode a box given 6 numbers: min x y z, max x y z."""
    b = _parse_bounds(bounds)
    nums = [float(v) for v in _input_text(text).split()]
    if len(nums) != 6:
        raise click.UsageError(f"a box needs 6 numbers, got {len(nums)}")
    toks, clamped = encode_bbox(Aabb3(tuple(nums[:3]), tuple(nums[3:])), b)
    click.echo("".join(toks))
    if clamped:
        click.echo("warning: values clamped to bounds", err=True)


@tokens.command("decode-box")
@click.argument("text", required=False)
@_BOUNDS_OPT
def tokens_decode_box(text, bounds):
    """Decode 6 loc tokens back to box corners."""
    b = _parse_bounds(bounds)
    try:
        box, swapped = decode_bbox(lex(_input_text(text)), b)
    except TokenParseError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    click.echo(" ".join(f"{v:.6f}" for v in box.min + box.max))
    if swapped:
        click.echo("warning: min/max swapped on some axis", err=True)


@main.command()
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write vocab.json here instead of stdout.")
def vocab(out_path):
    """Emit the interaction-token vocabulary as JSON."""
    if out_path:
        VOCAB.write_json(out_path)
    else:
        click.echo(json.dumps(VOCAB.to_json_obj(), indent=1))


if __name__ == "__main__":
    main()
