import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from splitdoor.data import PairPeriod

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

D0 = dt.date(2024, 1, 1)


def make_period(x, y_d, y_r=None, focal="f", target="t", k=0):
    x = np.asarray(x, dtype=float)
    y_r = np.zeros_like(x) if y_r is None else np.asarray(y_r, dtype=float)
    return PairPeriod(focal, target, k, D0, x.size, x, y_r, np.asarray(y_d, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
