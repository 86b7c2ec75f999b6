import dataclasses

import numpy as np
import pytest

from embforge.model import ActionStep, SampleRecord, validate_episode, wrap_angle

from conftest import make_episode


def test_well_formed_episode_validates_clean():
    assert validate_episode(make_episode(n_frames=2)) == []


def test_single_frame_episode_rejected():
    errs = validate_episode(make_episode(n_frames=1, n_actions=1))
    assert "frames: need >= 2" in errs


def test_bad_gripper_names_index():
    e = make_episode(n_frames=5)
    actions = list(e.actions)
    actions[3] = dataclasses.replace(actions[3], gripper=2)
    e = dataclasses.replace(e, actions=actions)
    errs = validate_episode(e)
    assert "actions[3].gripper ∉ {0,1}" in errs


def test_non_increasing_timestamps_rejected():
    e = make_episode(n_frames=3)
    frames = list(e.frames)
    frames[2] = dataclasses.replace(frames[2], timestamp=frames[1].timestamp)
    e = dataclasses.replace(e, frames=frames)
    assert any("timestamps" in m for m in validate_episode(e))


def test_action_count_must_match_frames_or_one_less():
    assert validate_episode(make_episode(n_frames=3, n_actions=2)) == []
    errs = validate_episode(make_episode(n_frames=3, n_actions=1))
    assert any(m.startswith("actions:") for m in errs)


def test_out_of_range_rotation_flagged():
    e = make_episode()
    actions = list(e.actions)
    actions[0] = ActionStep((0, 0, 0), (np.pi, 0, 0), 0)
    e = dataclasses.replace(e, actions=actions)
    assert any("rotation" in m for m in validate_episode(e))


def test_wrap_angle():
    assert wrap_angle(np.pi) == pytest.approx(-np.pi)
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert -np.pi <= wrap_angle(123.456) < np.pi


def test_sample_record_json_roundtrip():
    rec = SampleRecord(
        task_type="localization",
        prompt="The scene is <scene></scene>. Locate: cup.",
        answer="<loc0> <loc0> <loc0> <loc255> <loc255> <loc255>",
        assets=(("scene", "assets/ep/frame_0000.pc3d"),),
        episode_id="ep",
        provenance={"template_id": "localization", "seed": 0, "builder": "localization:f0:d0"},
    )
    assert SampleRecord.from_json_obj(rec.to_json_obj()) == rec


def test_sample_record_rejects_unknown_task_type():
    with pytest.raises(ValueError):
        SampleRecord("nonsense", "p", "a", (), "ep")
