import contextlib

import numpy as np
import pytest

from uqseg import PhantomSpec, SigmoidPredictor, generate_phantom

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance criterion as PASS/FAIL, even if it raises."""

    @contextlib.contextmanager
    def record(name: str):
        entry = {"detail": ""}
        try:
            yield entry
        except BaseException as exc:
            ACCEPTANCE_RESULTS.append((name, False, entry["detail"] or str(exc)))
            raise
        ACCEPTANCE_RESULTS.append((name, True, entry["detail"]))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def predictor():
    return SigmoidPredictor()


@pytest.fixture
def head_case():
    spec = PhantomSpec(kind="ellipse", semi_major=40.0, semi_minor=28.0,
                       orientation_deg=25.0)
    return generate_phantom(spec, seed=101)


@pytest.fixture
def femur_case():
    spec = PhantomSpec(kind="capsule", length=80.0, radius=9.0,
                       orientation_deg=40.0)
    return generate_phantom(spec, seed=202)
