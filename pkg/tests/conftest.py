import numpy as np
import pytest

from asidlab.envlab import make_env
from asidlab.policy import Policy


def open_loop(env, actions):
    """Open-loop policy playing ``actions`` (H x n_a, or flat)."""
    return Policy.for_env(env, "open_loop", np.asarray(actions, dtype=float).ravel())


@pytest.fixture
def lin():
    """Noiseless linear1d with horizon 3."""
    return make_env("linear1d", sigma_w=0.0)


@pytest.fixture
def rod():
    return make_env("rod-pivot", sigma_w=0.0)


# PASS/FAIL lines of the acceptance suite, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
