"""Scalar quantizers and the box / action token codecs.

Continuous values map to 256 bins over a per-axis range; out-of-range
values clamp and are flagged rather than erroring, since source datasets
contain occasional excursions. Decoding returns bin centers, so the
roundtrip error is at most half a bin width.
"""

from __future__ import annotations

import math
from typing import Sequence

from ..model import Aabb3, ActionStep, WorkspaceBounds
from .vocab import BIN_COUNT, VOCAB, aloc_token, arot_token, gripper_token, loc_token

ROT_LO = -math.pi
ROT_HI = math.pi


class TokenParseError(ValueError):
    """Malformed token input to a decoder; carries the offending index."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} at index {index}")
        self.index = index


def quantize(x: float, lo: float, hi: float) -> tuple[int, bool]:
    """Map x in [lo, hi] to a bin in 0..255; returns (bin, clamped)."""
    if not lo < hi:
        raise ValueError(f"quantize bounds degenerate: lo={lo}, hi={hi}")
    if not math.isfinite(x):
        raise ValueError(f"quantize got non-finite value {x}")
    raw = math.floor((x - lo) * BIN_COUNT / (hi - lo))
    b = min(max(raw, 0), BIN_COUNT - 1)
    # x == hi lands on raw == 256 and clamps to 255 by design, not a flag.
    clamped = x < lo or x > hi
    return b, clamped


def dequantize(b: int, lo: float, hi: float) -> float:
    """Bin center of bin b over [lo, hi]."""
    if not 0 <= b < BIN_COUNT:
        raise ValueError(f"bin {b} outside 0..{BIN_COUNT - 1}")
    if not lo < hi:
        raise ValueError(f"dequantize bounds degenerate: lo={lo}, hi={hi}")
    return lo + (b + 0.5) * (hi - lo) / BIN_COUNT


def encode_bbox(box: Aabb3, bounds: WorkspaceBounds) -> tuple[list[str], bool]:
    """Six loc tokens: (min.x, min.y, min.z, max.x, max.y, max.z)."""
    tokens = []
    clamped = False
    for corner in (box.min, box.max):
        for value, (lo, hi) in zip(corner, bounds.axes):
            b, c = quantize(value, lo, hi)
            clamped |= c
            tokens.append(loc_token(b))
    return tokens, clamped


def decode_bbox(tokens: Sequence[str], bounds: WorkspaceBounds) -> tuple[Aabb3, bool]:
    """Inverse of encode_bbox; swaps min/max per axis if quantization crossed them.

    Returns (box, swapped).
    """
    if len(tokens) != 6:
        raise TokenParseError(f"loc arity {len(tokens)} ≠ 6", max(len(tokens) - 1, 0))
    for i, tok in enumerate(tokens):
        if VOCAB.family(tok) != "loc":
            raise TokenParseError(f"expected loc token, got {tok!r}", i)
    vals = [
        dequantize(VOCAB.bin_value(tok), lo, hi)
        for tok, (lo, hi) in zip(tokens, bounds.axes + bounds.axes)
    ]
    mins, maxs = vals[:3], vals[3:]
    swapped = False
    for a in range(3):
        if mins[a] > maxs[a]:
            mins[a], maxs[a] = maxs[a], mins[a]
            swapped = True
    return Aabb3(tuple(mins), tuple(maxs)), swapped


def encode_action(step: ActionStep, bounds: WorkspaceBounds) -> tuple[list[str], bool]:
    """Seven tokens: aloc x/y/z, arot roll/pitch/yaw, gripper bit."""
    tokens = []
    clamped = False
    for value, (lo, hi) in zip(step.position, bounds.axes):
        b, c = quantize(value, lo, hi)
        clamped |= c
        tokens.append(aloc_token(b))
    for angle in step.rotation:
        b, c = quantize(angle, ROT_LO, ROT_HI)
        clamped |= c
        tokens.append(arot_token(b))
    if step.gripper not in (0, 1):
        raise ValueError(f"gripper {step.gripper} not in {{0,1}}")
    tokens.append(gripper_token(step.gripper))
    return tokens, clamped


def encode_action_seq(steps: Sequence[ActionStep], bounds: WorkspaceBounds) -> tuple[list[str], bool]:
    """Encoded steps joined by single <ACT_SEP> tokens, no leading/trailing separator."""
    if not steps:
        raise ValueError("encode_action_seq needs at least one step")
    tokens: list[str] = []
    clamped = False
    for i, step in enumerate(steps):
        if i:
            tokens.append("<ACT_SEP>")
        step_tokens, c = encode_action(step, bounds)
        clamped |= c
        tokens.extend(step_tokens)
    return tokens, clamped


_STEP_FAMILIES = ("aloc", "aloc", "aloc", "arot", "arot", "arot", "gripper")


def decode_action_seq(tokens: Sequence[str], bounds: WorkspaceBounds) -> list[ActionStep]:
    """Inverse of encode_action_seq at the bin level."""
    if not tokens:
        raise TokenParseError("empty action sequence", 0)
    steps = []
    i = 0
    n = len(tokens)
    while True:
        bins = []
        for fam in _STEP_FAMILIES:
            if i >= n:
                raise TokenParseError(f"truncated action step, expected {fam} token", n - 1)
            tok = tokens[i]
            if VOCAB.family(tok) != fam:
                raise TokenParseError(f"expected {fam} token, got {tok!r}", i)
            bins.append(VOCAB.bin_value(tok))
            i += 1
        steps.append(step_from_bins(bins, bounds))
        if i >= n:
            return steps
        if tokens[i] != "<ACT_SEP>":
            raise TokenParseError(f"expected <ACT_SEP>, got {tokens[i]!r}", i)
        i += 1


def step_from_bins(bins: Sequence[int], bounds: WorkspaceBounds) -> ActionStep:
    """Build an ActionStep from 7 raw bins (3 aloc, 3 arot, 1 gripper)."""
    if len(bins) != 7:
        raise ValueError(f"action step needs 7 bins, got {len(bins)}")
    pos = tuple(dequantize(b, lo, hi) for b, (lo, hi) in zip(bins[:3], bounds.axes))
    rot = tuple(dequantize(b, ROT_LO, ROT_HI) for b in bins[3:6])
    return ActionStep(pos, rot, bins[6])


def bins_for_step(step: ActionStep, bounds: WorkspaceBounds) -> tuple[tuple[int, ...], bool]:
    """Raw 7-bin form of a step, for AST construction."""
    tokens, clamped = encode_action(step, bounds)
    return tuple(VOCAB.bin_value(t) for t in tokens), clamped


def bins_for_bbox(box: Aabb3, bounds: WorkspaceBounds) -> tuple[tuple[int, ...], bool]:
    """Raw 6-bin form of a box, for AST construction."""
    tokens, clamped = encode_bbox(box, bounds)
    return tuple(VOCAB.bin_value(t) for t in tokens), clamped
