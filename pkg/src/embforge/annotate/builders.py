"""Sample builders: turn an annotated episode into SampleRecords.

Builders are pure given (episode, arguments, seed). Asset paths are passed
in by the caller (the pipeline owns asset layout); builders only reference
them. Every produced prompt/answer parses under the sequence grammar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..model import Aabb3, ActionStep, Episode, SampleRecord, WorkspaceBounds
from ..tokens import (
    GoalSpan,
    ObjSpan,
    Text,
    bins_for_bbox,
    encode_action_seq,
    encode_bbox,
    render_string,
    to_string,
)
from .chunks import extract_noun_chunks
from .templates import MODALITY_NAMES, TEMPLATES

DEFAULT_KEYFRAME_EPS = 1e-3


def _provenance(template_id: str, seed: int, builder: str, flags: Sequence[str] = ()) -> dict:
    prov = {"template_id": template_id, "seed": seed, "builder": builder}
    if flags:
        prov["flags"] = list(flags)
    return prov


def build_localization_sample(
    e: Episode,
    det_index: int,
    box: Aabb3,
    *,
    frame_index: int = 0,
    scene_asset: str,
    seed: int = 0,
) -> SampleRecord:
    """Prompt asks to locate the detection's noun; answer is its 6 loc tokens."""
    det = e.detections[frame_index][det_index]
    tokens, clamped = encode_bbox(box, e.bounds)
    tmpl = TEMPLATES["localization"]
    return SampleRecord(
        task_type="localization",
        prompt=tmpl.fill_prompt(OBJECT=det.label),
        answer=to_string(tokens),
        assets=(("scene", scene_asset),),
        episode_id=e.id,
        provenance=_provenance(
            "localization", seed, f"localization:f{frame_index}:d{det_index}",
            flags=["clamped"] if clamped else (),
        ),
    )


def build_dense_caption_sample(
    e: Episode,
    det_index: int,
    box: Aabb3,
    *,
    frame_index: int = 0,
    scene_asset: str,
    seed: int = 0,
) -> SampleRecord:
    """Mirror of localization: prompt carries the loc tokens, answer the noun."""
    det = e.detections[frame_index][det_index]
    tokens, clamped = encode_bbox(box, e.bounds)
    tmpl = TEMPLATES["dense_caption"]
    return SampleRecord(
        task_type="dense_caption",
        prompt=tmpl.fill_prompt(LOCATION=to_string(tokens)),
        answer=det.label,
        assets=(("scene", scene_asset),),
        episode_id=e.id,
        provenance=_provenance(
            "dense_caption", seed, f"dense_caption:f{frame_index}:d{det_index}",
            flags=["clamped"] if clamped else (),
        ),
    )


def build_task_caption_sample(
    e: Episode,
    *,
    initial_asset: str,
    final_asset: str,
    seed: int = 0,
) -> SampleRecord:
    tmpl = TEMPLATES["task_caption"]
    return SampleRecord(
        task_type="task_caption",
        prompt=tmpl.fill_prompt(),
        answer=e.instruction,
        assets=(("scene", initial_asset), ("scene", final_asset)),
        episode_id=e.id,
        provenance=_provenance("task_caption", seed, "task_caption"),
    )


def build_verification_sample(
    e: Episode,
    t: int,
    *,
    k: int = 1,
    initial_asset: str,
    current_asset: str,
    seed: int = 0,
) -> SampleRecord:
    """Yes/no completion label: yes iff t is within the last k frames."""
    if not 0 <= t < len(e.frames):
        raise ValueError(f"frame index {t} outside episode of {len(e.frames)} frames")
    label = "yes" if t >= len(e.frames) - k else "no"
    tmpl = TEMPLATES["verification"]
    return SampleRecord(
        task_type="verification",
        prompt=tmpl.fill_prompt(INSTRUCTION=e.instruction),
        answer=label,
        assets=(("scene", initial_asset), ("scene", current_asset)),
        episode_id=e.id,
        provenance=_provenance("verification", seed, f"verification:t{t}"),
    )


def _wrap_manipulated(instruction: str, label: str, bins: tuple[int, ...]) -> Optional[list]:
    """Split the instruction around the noun chunk matching ``label``.

    Returns goal-span children with the chunk wrapped in an ObjSpan, or
    None when the label does not ground in the instruction.
    """
    lowered = instruction.lower()
    pos = lowered.find(label.lower())
    if pos >= 0:
        span = (pos, pos + len(label))
    else:
        span = None
        for chunk in extract_noun_chunks(instruction):
            if label.lower() in chunk.text.lower():
                span = chunk.span
                break
        if span is None:
            return None
    before = instruction[: span[0]].strip()
    inside = instruction[span[0]:span[1]]
    after = instruction[span[1]:].strip()
    children = []
    if before:
        children.append(Text(before))
    children.append(ObjSpan(inside, bins))
    if after:
        children.append(Text(after))
    return children


def build_goal_generation_sample(
    e: Episode,
    modality: str,
    box: Optional[Aabb3],
    *,
    manipulated_label: Optional[str],
    initial_asset: str,
    goal_assets: Sequence[tuple[str, str]],
    seed: int = 0,
) -> SampleRecord:
    """Answer is a goal span wrapping the instruction, with the manipulated
    noun grounded by an object span and its loc tokens when available."""
    if modality not in MODALITY_NAMES:
        raise ValueError(f"unknown modality {modality!r}")
    flags = []
    children: Optional[list] = None
    if manipulated_label is not None and box is not None:
        bins, clamped = bins_for_bbox(box, e.bounds)
        if clamped:
            flags.append("clamped")
        children = _wrap_manipulated(e.instruction, manipulated_label, bins)
    if children is None:
        children = [Text(e.instruction)]
        flags.append("no-object")
    span = GoalSpan(modality, tuple(children))
    tmpl = TEMPLATES["goal_generation"]
    return SampleRecord(
        task_type="goal_generation",
        prompt=tmpl.fill_prompt(INSTRUCTION=e.instruction, MODALITY=MODALITY_NAMES[modality]),
        answer=render_string([span]),
        assets=(("scene", initial_asset),) + tuple(goal_assets),
        episode_id=e.id,
        provenance=_provenance("goal_generation", seed, f"goal_generation:{modality}", flags),
    )


def keyframe_select(actions: Sequence[ActionStep], eps: float = DEFAULT_KEYFRAME_EPS) -> list[int]:
    """Sparse keyframe indices: endpoints, gripper toggles, and near-zero
    speed local minima."""
    if not actions:
        raise ValueError("keyframe_select needs at least one action")
    n = len(actions)
    indices = {0, n - 1}
    for t in range(1, n):
        if actions[t].gripper != actions[t - 1].gripper:
            indices.add(t)
    if n >= 3:
        pos = np.array([a.position for a in actions])
        speed = np.linalg.norm(np.diff(pos, axis=0), axis=1)  # speed[t-1] = |pos t - pos t-1|
        for t in range(1, n - 1):
            if (
                speed[t] < eps
                and speed[t] <= speed[t - 1]
                and (t + 1 >= n - 1 or speed[t] <= speed[t + 1])
            ):
                indices.add(t)
    return sorted(indices)


def build_action_prediction_sample(
    e: Episode,
    mode: str,
    *,
    scene_asset: str,
    keyframe_eps: float = DEFAULT_KEYFRAME_EPS,
    seed: int = 0,
) -> SampleRecord:
    if mode not in ("key", "dense"):
        raise ValueError(f"mode must be 'key' or 'dense', got {mode!r}")
    if not e.actions:
        raise ValueError("episode has no actions")
    if mode == "dense":
        steps = list(e.actions)
    else:
        steps = [e.actions[i] for i in keyframe_select(e.actions, keyframe_eps)]
    tokens, clamped = encode_action_seq(steps, e.bounds)
    tmpl = TEMPLATES["action_prediction"]
    return SampleRecord(
        task_type="action_prediction",
        prompt=tmpl.fill_prompt(INSTRUCTION=e.instruction, MODE=mode),
        answer=to_string(tokens),
        assets=(("scene", scene_asset),),
        episode_id=e.id,
        provenance=_provenance(
            "action_prediction", seed, f"action_prediction:{mode}",
            flags=["clamped"] if clamped else (),
        ),
    )


WHATIF_SYSTEM_PROMPT = (
    "You write question/answer pairs about a robot manipulation episode. "
    "You are given the instruction, the objects with their 3D boxes, the "
    "timing, and a sequence of discretized robot actions. Ask what will "
    "happen if the robot executes those actions, and answer with a caption "
    "of the resulting state. Never alter any token enclosed in angle "
    "brackets."
)

WHATIF_DEMONSTRATIONS = (
    (
        "What will happen if the robot executes <aloc10><aloc200><aloc30>"
        "<arot128><arot128><arot128><gripper1>?",
        "The robot will have partially completed the task: pick up the sponge.",
    ),
    (
        "What will happen if the robot executes <aloc88><aloc90><aloc40>"
        "<arot128><arot100><arot128><gripper0> <ACT_SEP> <aloc88><aloc90>"
        "<aloc70><arot128><arot100><arot128><gripper1>?",
        "The robot will have completed the task: put the block in the bin.",
    ),
)


@dataclass(frozen=True)
class DiversifierRequest:
    """Structured request for the external (or offline) rewriting component."""

    system_prompt: str
    demonstrations: tuple[tuple[str, str], ...]
    facts: dict
    task_id: str
    seed: int

    def __post_init__(self):
        if len(self.demonstrations) not in (2, 3):
            raise ValueError("demonstrations count must be 2 or 3")


def build_whatif_request(
    e: Episode,
    action_indices: Sequence[int],
    *,
    seed: int = 0,
    extra_facts: Optional[dict] = None,
) -> DiversifierRequest:
    """Request asking the diversifier to produce a what-if QA pair."""
    if not action_indices:
        raise ValueError("what-if needs a non-empty action subsequence")
    steps = [e.actions[i] for i in action_indices]
    tokens, _ = encode_action_seq(steps, e.bounds)
    facts = {
        "instruction": e.instruction,
        "episode_id": e.id,
        "action_tokens": to_string(tokens),
        "action_indices": list(action_indices),
        "total_actions": len(e.actions),
        "duration_s": e.frames[-1].timestamp - e.frames[0].timestamp,
    }
    if extra_facts:
        facts.update(extra_facts)
    return DiversifierRequest(
        system_prompt=WHATIF_SYSTEM_PROMPT,
        demonstrations=WHATIF_DEMONSTRATIONS,
        facts=facts,
        task_id="whatif_qa",
        seed=seed,
    )


def build_whatif_sample_offline(
    e: Episode,
    action_indices: Sequence[int],
    *,
    scene_asset: str,
    seed: int = 0,
    flagged_fallback: bool = False,
) -> SampleRecord:
    """Deterministic offline form of the what-if QA pair."""
    if not action_indices:
        raise ValueError("what-if needs a non-empty action subsequence")
    steps = [e.actions[i] for i in action_indices]
    tokens, clamped = encode_action_seq(steps, e.bounds)
    complete = max(action_indices) == len(e.actions) - 1
    if complete:
        answer = f"The robot will have completed the task: {e.instruction}."
    else:
        answer = f"The robot will have partially completed the task: {e.instruction}."
    flags = []
    if clamped:
        flags.append("clamped")
    if flagged_fallback:
        flags.append("undiversified")
    return SampleRecord(
        task_type="whatif_qa",
        prompt=f"What will happen if the robot executes {to_string(tokens)}?",
        answer=answer,
        assets=(("scene", scene_asset),),
        episode_id=e.id,
        provenance=_provenance("untemplated", seed, "whatif_qa", flags),
    )


def ingest_external_qa(
    records: Sequence[dict],
    *,
    episode_id: str = "external",
    default_assets: Sequence[tuple[str, str]] = (),
    seed: int = 0,
) -> tuple[list[SampleRecord], list[str]]:
    """Wrap existing question/answer records as embodied-QA samples.

    Malformed records are skipped per record with a reason; nothing raises.
    """
    samples: list[SampleRecord] = []
    skips: list[str] = []
    for i, rec in enumerate(records):
        question = rec.get("question")
        answer = rec.get("answer")
        if not isinstance(question, str) or not question:
            skips.append(f"record {i}: missing question")
            continue
        if not isinstance(answer, str) or not answer:
            skips.append(f"record {i}: missing answer")
            continue
        assets = tuple((a["role"], a["path"]) for a in rec.get("assets", []))
        if not assets:
            assets = tuple(default_assets)
        samples.append(
            SampleRecord(
                task_type="embodied_qa",
                prompt=question,
                answer=answer,
                assets=assets,
                episode_id=rec.get("episode_id", episode_id),
                provenance=_provenance("untemplated", seed, f"embodied_qa:{i}"),
            )
        )
    return samples, skips
