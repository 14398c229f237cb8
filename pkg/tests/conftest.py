import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from darktrack.synthetic import moving_square, write_sequence  # noqa: E402

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def square_sequence():
    """Default synthetic clip: bright square, 2 px/frame, noise 0.02, 100 frames."""
    return moving_square()


@pytest.fixture(scope="session")
def dim_square_sequence():
    return moving_square(dim=0.1)


@pytest.fixture
def toy_dataset(tmp_path):
    """Two short sequences on disk; the second is dim and flagged IV."""
    root = tmp_path / "data"
    frames, gt = moving_square(n_frames=6)
    write_sequence(root, frames, gt, "bright")
    frames, gt = moving_square(n_frames=6, dim=0.1, seed=3)
    seq = write_sequence(root, frames, gt, "dark")
    (seq / "attributes.txt").write_text("IV LR\n")
    return root


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    measured = dict(report.user_properties).get("measured", "")
    if report.when == "call":
        _ACCEPTANCE[report.nodeid] = (report.outcome, measured)
    elif report.outcome != "passed" and report.nodeid not in _ACCEPTANCE:
        # setup errors and skips also count
        _ACCEPTANCE[report.nodeid] = (report.outcome, measured)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (outcome, measured) in sorted(_ACCEPTANCE.items()):
        name = nodeid.split("::")[-1]
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome)
        line = f"[{tag}] {name}"
        terminalreporter.write_line(f"{line}: {measured}" if measured else line)
