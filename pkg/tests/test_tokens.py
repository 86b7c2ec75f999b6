import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from embforge.model import Aabb3, ActionStep, WorkspaceBounds
from embforge.tokens import (
    ROT_HI,
    ROT_LO,
    VOCAB,
    TokenParseError,
    decode_action_seq,
    decode_bbox,
    dequantize,
    encode_action,
    encode_action_seq,
    encode_bbox,
    quantize,
)

UNIT = WorkspaceBounds.unit()


class TestVocab:
    def test_total_token_count(self):
        assert len(VOCAB) == 9 + 256 + 256 + 256 + 2 == 779

    def test_bijective_mapping(self):
        strings = {t for t, _, _ in VOCAB.entries}
        ids = {i for _, i, _ in VOCAB.entries}
        assert len(strings) == len(ids) == len(VOCAB)
        for t, i, _ in VOCAB.entries:
            assert VOCAB.token_id(t) == i
            assert VOCAB.token_string(i) == t

    def test_families_contiguous_and_disjoint(self):
        by_family = {}
        for _, i, fam in VOCAB.entries:
            by_family.setdefault(fam, []).append(i)
        seen = set()
        for fam, ids in by_family.items():
            assert ids == list(range(min(ids), max(ids) + 1)), fam
            assert not seen & set(ids)
            seen |= set(ids)

    def test_family_sizes(self):
        sizes = {}
        for _, _, fam in VOCAB.entries:
            sizes[fam] = sizes.get(fam, 0) + 1
        assert sizes == {"structural": 9, "loc": 256, "aloc": 256, "arot": 256, "gripper": 2}

    def test_vocab_json(self, tmp_path):
        import json

        VOCAB.write_json(tmp_path / "vocab.json")
        with open(tmp_path / "vocab.json") as fh:
            entries = json.load(fh)
        assert len(entries) == 779
        assert entries[0] == {"token_string": "<obj>", "id": 0, "family": "structural"}


class TestQuantize:
    def test_edges(self):
        assert quantize(0.0, 0.0, 1.0) == (0, False)
        assert quantize(1.0, 0.0, 1.0) == (255, False)  # hi clamps from bin 256
        assert quantize(0.5, 0.0, 1.0) == (128, False)

    def test_out_of_range_clamps_with_flag(self):
        assert quantize(-0.1, 0.0, 1.0) == (0, True)
        assert quantize(1.5, 0.0, 1.0) == (255, True)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            quantize(float("nan"), 0.0, 1.0)

    def test_dequantize_hand_values(self):
        assert dequantize(0, 0.0, 256.0) == 0.5
        assert dequantize(255, 0.0, 1.0) == 0.998046875

    def test_dequantize_range_checks(self):
        with pytest.raises(ValueError):
            dequantize(256, 0.0, 1.0)
        with pytest.raises(ValueError):
            dequantize(-1, 0.0, 1.0)

    @given(st.floats(0.0, 1.0, allow_nan=False))
    def test_roundtrip_within_half_bin(self, x):
        b, _ = quantize(x, 0.0, 1.0)
        assert abs(dequantize(b, 0.0, 1.0) - x) <= 1.0 / 512 + 1e-12

    @given(st.integers(0, 255))
    def test_quantize_of_dequantize_is_identity(self, b):
        assert quantize(dequantize(b, 0.0, 1.0), 0.0, 1.0) == (b, False)

    @given(st.floats(-2.0, 2.0, allow_nan=False), st.floats(-2.0, 2.0, allow_nan=False))
    def test_monotone(self, x, y):
        lo, hi = -3.0, 3.0
        bx, _ = quantize(x, lo, hi)
        by, _ = quantize(y, lo, hi)
        if x <= y:
            assert bx <= by

    @given(
        st.integers(1, 254),
        st.floats(-5.0, 5.0, allow_nan=False),
        st.floats(0.1, 10.0, allow_nan=False),
    )
    def test_affine_rescaling_leaves_bins_unchanged(self, b, shift, scale):
        # Pick x at a bin center (never a bin boundary), then rescale.
        x = dequantize(b, 0.0, 1.0)
        bb, _ = quantize(x * scale + shift, shift, scale + shift)
        assert bb == b


class TestBboxCodec:
    def test_full_workspace_box(self):
        tokens, clamped = encode_bbox(Aabb3((0, 0, 0), (1, 1, 1)), UNIT)
        assert tokens == ["<loc0>"] * 3 + ["<loc255>"] * 3
        assert not clamped

    def test_center_point_box(self):
        tokens, _ = encode_bbox(Aabb3((0.5, 0.5, 0.5), (0.5, 0.5, 0.5)), UNIT)
        assert tokens == ["<loc128>"] * 6

    def test_roundtrip_bound(self):
        box = Aabb3((0.11, 0.22, 0.33), (0.44, 0.55, 0.66))
        tokens, _ = encode_bbox(box, UNIT)
        decoded, swapped = decode_bbox(tokens, UNIT)
        assert not swapped
        for orig, dec in zip(box.min + box.max, decoded.min + decoded.max):
            assert abs(orig - dec) <= 1.0 / 512

    def test_thin_box_swap_flag(self):
        # min/max in adjacent positions within one bin can invert after decode
        decoded, swapped = decode_bbox(
            ["<loc5>", "<loc0>", "<loc0>", "<loc3>", "<loc255>", "<loc255>"], UNIT
        )
        assert swapped
        assert decoded.min[0] <= decoded.max[0]

    def test_wrong_count_rejected(self):
        with pytest.raises(TokenParseError):
            decode_bbox(["<loc0>"] * 5, UNIT)

    def test_wrong_family_rejected(self):
        with pytest.raises(TokenParseError):
            decode_bbox(["<loc0>"] * 5 + ["<aloc0>"], UNIT)


class TestActionCodec:
    def test_corner_step(self):
        step = ActionStep((0.0, 0.0, 0.0), (-math.pi, -math.pi, -math.pi), 0)
        tokens, clamped = encode_action(step, UNIT)
        assert tokens == ["<aloc0>"] * 3 + ["<arot0>"] * 3 + ["<gripper0>"]
        assert not clamped

    def test_zero_angles_are_bin_128(self):
        step = ActionStep((0.5, 0.5, 0.5), (0.0, 0.0, 0.0), 1)
        tokens, _ = encode_action(step, UNIT)
        assert tokens[3:6] == ["<arot128>"] * 3

    def test_seq_arities(self):
        step = ActionStep((0.5, 0.5, 0.5), (0.0, 0.0, 0.0), 1)
        one, _ = encode_action_seq([step], UNIT)
        assert len(one) == 7 and "<ACT_SEP>" not in one
        two, _ = encode_action_seq([step, step], UNIT)
        assert len(two) == 15 and two[7] == "<ACT_SEP>"

    def test_empty_seq_rejected(self):
        with pytest.raises(ValueError):
            encode_action_seq([], UNIT)

    def test_roundtrip_bin_identity(self):
        steps = [
            ActionStep((0.1, 0.2, 0.3), (0.4, -0.5, 0.6), 0),
            ActionStep((0.9, 0.8, 0.7), (-3.0, 3.0, 0.0), 1),
        ]
        tokens, _ = encode_action_seq(steps, UNIT)
        decoded = decode_action_seq(tokens, UNIT)
        retokens, _ = encode_action_seq(decoded, UNIT)
        assert retokens == tokens

    def test_roundtrip_half_bin_bound(self):
        step = ActionStep((0.123, 0.456, 0.789), (1.0, -2.0, 3.0), 1)
        tokens, _ = encode_action_seq([step], UNIT)
        (decoded,) = decode_action_seq(tokens, UNIT)
        for orig, dec in zip(step.position, decoded.position):
            assert abs(orig - dec) <= 1.0 / 512
        for orig, dec in zip(step.rotation, decoded.rotation):
            assert abs(orig - dec) <= (ROT_HI - ROT_LO) / 512
        assert decoded.gripper == step.gripper

    def test_malformed_chunk_names_index(self):
        tokens, _ = encode_action_seq([ActionStep((0.5, 0.5, 0.5), (0, 0, 0), 1)], UNIT)
        bad = tokens[:3] + ["<loc0>"] + tokens[4:]
        with pytest.raises(TokenParseError) as exc:
            decode_action_seq(bad, UNIT)
        assert exc.value.index == 3

    def test_out_of_bounds_position_clamps_flagged(self):
        step = ActionStep((2.0, 0.5, 0.5), (0, 0, 0), 0)
        tokens, clamped = encode_action(step, UNIT)
        assert clamped
        assert tokens[0] == "<aloc255>"
