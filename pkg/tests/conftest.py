import numpy as np
import pytest


def frames_to_addresses(frames, block_bits=6):
    """Addresses at the start of each frame, so tests can speak in blocks."""
    return np.asarray(frames, dtype=np.uint64) << np.uint64(block_bits)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one "criterion N: PASS|FAIL ..." line per acceptance check, echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
