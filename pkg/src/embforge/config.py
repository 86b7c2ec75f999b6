"""Pipeline configuration: a JSON file of flat dotted keys, mirrored by CLI flags."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import TASK_TYPES

DIVERSIFIER_MODES = ("off", "offline", "replay", "http")


@dataclass(frozen=True)
class Config:
    tasks: dict = field(default_factory=lambda: {t: True for t in TASK_TYPES})
    tau_flow: float = 1.0
    trim_q: float = 0.01
    verification_k: int = 1
    verification_negatives: int = 1
    keyframe_eps: float = 1e-3
    shard_size: int = 1000
    seed: int = 0
    workers: int = 1
    diversifier_mode: str = "off"
    diversifier_endpoint: str | None = None
    diversifier_replay_dir: str | None = None
    diversifier_timeout: float = 10.0
    diversifier_max_inflight: int = 4

    def validate(self) -> list[str]:
        errs = []
        if self.tau_flow <= 0:
            errs.append("tau_flow must be > 0")
        if not 0 <= self.trim_q < 0.5:
            errs.append("trim_q must be in [0, 0.5)")
        if self.verification_k < 1:
            errs.append("verification_k must be >= 1")
        if self.verification_negatives < 0:
            errs.append("verification_negatives must be >= 0")
        if self.keyframe_eps <= 0:
            errs.append("keyframe_eps must be > 0")
        if self.shard_size < 1:
            errs.append("shard_size must be >= 1")
        if self.workers < 1:
            errs.append("workers must be >= 1")
        if self.diversifier_mode not in DIVERSIFIER_MODES:
            errs.append(f"diversifier.mode must be one of {DIVERSIFIER_MODES}")
        if self.diversifier_mode == "http" and not self.diversifier_endpoint:
            errs.append("diversifier.mode http requires diversifier.endpoint")
        if self.diversifier_mode == "replay" and not self.diversifier_replay_dir:
            errs.append("diversifier.mode replay requires diversifier.replay_dir")
        unknown = set(self.tasks) - set(TASK_TYPES)
        if unknown:
            errs.append(f"unknown task types: {sorted(unknown)}")
        return errs

    def enabled_tasks(self) -> list[str]:
        return [t for t in TASK_TYPES if self.tasks.get(t, False)]


_KEY_MAP = {
    "tau_flow": ("tau_flow", float),
    "trim_q": ("trim_q", float),
    "verification.k": ("verification_k", int),
    "verification.negatives": ("verification_negatives", int),
    "keyframe.eps": ("keyframe_eps", float),
    "shard_size": ("shard_size", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "diversifier.mode": ("diversifier_mode", str),
    "diversifier.endpoint": ("diversifier_endpoint", str),
    "diversifier.replay_dir": ("diversifier_replay_dir", str),
    "diversifier.timeout": ("diversifier_timeout", float),
    "diversifier.max_inflight": ("diversifier_max_inflight", int),
}


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        if v.lower() in ("true", "1", "yes", "on"):
            return True
        if v.lower() in ("false", "0", "no", "off"):
            return False
    raise ValueError(f"cannot interpret {v!r} as a boolean")


def apply_entries(cfg: Config, entries: dict) -> Config:
    """Apply flat dotted-key entries (from a file or CLI overrides)."""
    tasks = dict(cfg.tasks)
    kwargs = {}
    for key, value in entries.items():
        if key.startswith("tasks."):
            task = key[len("tasks."):]
            if task not in TASK_TYPES:
                raise ValueError(f"unknown task type in config key {key!r}")
            tasks[task] = _parse_bool(value)
        elif key in _KEY_MAP:
            attr, cast = _KEY_MAP[key]
            kwargs[attr] = None if value is None else cast(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return replace(cfg, tasks=tasks, **kwargs)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Config from an optional JSON file plus optional override entries."""
    cfg = Config()
    if path is not None:
        with open(path) as fh:
            entries = json.load(fh)
        if not isinstance(entries, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        cfg = apply_entries(cfg, entries)
    if overrides:
        cfg = apply_entries(cfg, overrides)
    errs = cfg.validate()
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    return cfg
