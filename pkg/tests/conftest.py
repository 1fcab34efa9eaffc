import numpy as np
import pytest
import scipy.sparse as sp


def dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list = []


class AcceptanceLog:
    def record(self, label: str, passed: bool, detail: str, seconds: float) -> None:
        _ACCEPTANCE.append((label, bool(passed), detail, seconds))


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail, seconds in _ACCEPTANCE:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {label:<44} {seconds:7.1f} s  {detail}")
