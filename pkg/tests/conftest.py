from pathlib import Path

import numpy as np
import pytest

from dbcsched.channel import bsc, build_bsc_cascade
from dbcsched.exponents import exponent_table
from dbcsched.scheduling import CodingConfig, build_schedule_table
from dbcsched.stability import Policy

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

REF_POLICY = {(1, 0): 0.25, (0, 3): 0.5, (1, 2): 0.25}


def reference_channel():
    return build_bsc_cascade([0.1, 0.05], [bsc(0.1)], [0.5, 0.5])


@pytest.fixture(scope="session")
def ref_channel():
    return reference_channel()


@pytest.fixture(scope="session")
def ref_coding():
    return CodingConfig(M=(2, 2), p_e=(1e-3, 1e-3), rho=1.0)


@pytest.fixture(scope="session")
def ref_tab(ref_channel):
    return exponent_table(ref_channel, 1.0)


@pytest.fixture(scope="session")
def ref_table(ref_coding, ref_tab):
    return build_schedule_table(3, ref_coding, ref_tab)


@pytest.fixture(scope="session")
def ref_policy():
    return Policy(REF_POLICY)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


class _Record:
    def __init__(self, n: int, title: str):
        self.n, self.title, self.detail = n, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} | {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        ACCEPTANCE[self.n] = (ok, self.title, detail)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as rec:`` records a PASS/FAIL line for the summary."""
    return _Record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")
