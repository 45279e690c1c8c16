from pathlib import Path

import numpy as np
import pytest

from vqualkit.media import load_image

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"
FAKE_ENCODER = HERE / "fake_encoder.py"
FIXTURE_NAMES = ("astronaut", "coffee", "chelsea")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fixture_images() -> dict[str, np.ndarray]:
    return {name: load_image(FIXTURES / f"{name}.png") for name in FIXTURE_NAMES}


@pytest.fixture(scope="session")
def astronaut(fixture_images) -> np.ndarray:
    return fixture_images["astronaut"]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
