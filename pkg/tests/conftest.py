import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[1]
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(name, "PASS")
        _CRITERIA[name] = "PASS" if (report.passed and prev == "PASS") else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(f"{_CRITERIA[name]}  {name}")


import pytest  # noqa: E402

CORRUPTED_TOLERANCES = {
    "negbin_poisson_gamma": 1e-30,
    "multinomial_conditioned_poisson": 1e-30,
    "dirmult_conditioned_negbin": 1e-30,
    "theta_invariance": 1e-30,
    "jacobian_determinant": 1e-30,
    "dirichlet_gamma_construction": 1e-30,
}
QUADRATURE_GROUPS = ("negbin_poisson_gamma", "dirichlet_gamma_construction")


@pytest.fixture(scope="session")
def default_report():
    from countlab.verify.suite import run_theorem_suite
    return run_theorem_suite(seed=0)
