import os

import numpy as np
import pytest
from hypothesis import settings

from ripkit.matrix import SparseBinaryMatrix

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    """Store one acceptance line; the test still asserts on its own."""
    def _record(n: int, ok: bool, detail: str = ""):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return _record


def from_supports(supports, m, p=2.0, seed=0):
    S = np.asarray(supports, dtype=np.int64)
    return SparseBinaryMatrix(n=S.shape[0], m=m, d=S.shape[1], p=p, supports=S, seed=seed)
