import pytest

from compactonlab.bvp import solve_pattern

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def f0_m2():
    """Converged first pattern for m = 2, n = 1 on the default grid (h = 0.01)."""
    return solve_pattern("+2", 2, 1.0)


@pytest.fixture(scope="session")
def f1_m2():
    return solve_pattern("-2,1,+2", 2, 1.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
