"""Shared fixtures and session timing for the budget check."""

import time

import numpy as np
import pytest

SESSION_T0 = time.monotonic()


def session_elapsed() -> float:
    return time.monotonic() - SESSION_T0


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def pytest_sessionfinish(session, exitstatus):
    print(f"\ntotal suite wall time: {session_elapsed():.1f}s")
