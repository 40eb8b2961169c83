import pytest

from trimlstat import distributions as D
from trimlstat import weights as W
from trimlstat.lstat import TrimSpec
from trimlstat.montecarlo import ExperimentConfig

POSITIVE_CONTROL = {"n": 2000, "alpha": 0.25, "beta": 0.25, "seed": 42}


def make_experiment(dist=None, weight=None, n=2000, alpha=0.25, beta=0.25, replications=1000,
                    seed=42, **kw):
    return ExperimentConfig(dist or D.uniform(), weight or W.constant(),
                            TrimSpec.from_limits(n, alpha, beta), replications, seed, **kw)


@pytest.fixture
def experiment():
    return make_experiment


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}  {detail}".rstrip())
