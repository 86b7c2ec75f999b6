import numpy as np
import pytest

# Pass/fail lines from the acceptance criteria, echoed after the test run
# (pytest captures stdout even for the real file descriptors).
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from embforge.model import (
    ActionStep,
    CameraModel,
    DepthMap,
    Episode,
    Frame,
    WorkspaceBounds,
)


def make_camera(fx=100.0, fy=100.0, cx=32.0, cy=24.0, width=64, height=48,
                rotation=None, translation=None):
    return CameraModel(
        fx, fy, cx, cy, width, height,
        np.eye(3) if rotation is None else rotation,
        np.zeros(3) if translation is None else translation,
    )


def make_depth(height=48, width=64, value=1.0):
    return DepthMap(np.full((height, width), value), np.ones((height, width), dtype=bool))


def make_episode(n_frames=2, n_actions=None, instruction="pick up the red cup",
                 bounds=None, detections=()):
    bounds = bounds or WorkspaceBounds.unit()
    frames = [
        Frame(
            rgb_path=f"rgb_{t}.png",
            depth=make_depth(),
            camera=make_camera(),
            timestamp=0.1 * t,
        )
        for t in range(n_frames)
    ]
    n_actions = n_frames if n_actions is None else n_actions
    actions = [
        ActionStep((0.1 * t, 0.2, 0.3), (0.0, 0.0, 0.0), t % 2)
        for t in range(n_actions)
    ]
    return Episode(
        id="ep_test",
        frames=frames,
        actions=actions,
        instruction=instruction,
        detections=list(detections),
        bounds=bounds,
    )


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """10-episode synthetic fixture, generated once per session."""
    from embforge.fixture import generate_fixture

    root = tmp_path_factory.mktemp("fixture")
    manifests = generate_fixture(root, episodes=10)
    return manifests
