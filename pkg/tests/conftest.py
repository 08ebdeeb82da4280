"""Shared fixtures and the acceptance-criteria summary hook."""

import numpy as np
import pytest

from anscale.core import PathEnsemble

# Populated by tests/test_acceptance.py; printed after the run so the
# per-criterion verdicts are visible regardless of output capturing.
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number}: {verdict}  {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def tiny_ensemble() -> PathEnsemble:
    """Three short hand-checkable paths."""
    inc = np.array(
        [
            [1.0, -1.0, 1.0, -1.0],
            [2.0, -3.0, 0.5, 1.5],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )
    return PathEnsemble(increments=inc, descriptor="tiny", master_seed=7)
