import pytest

from pvtsizing.config import SyntheticSpec

# easy benchmark used by the pilot: n=4, m=3, 20 random corners plus nominal
EASY = SyntheticSpec(seed=0, n_params=4, n_metrics=3, corners=20, corner_seed=0, difficulty=0.5)
PILOT_SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="session")
def easy_benchmark():
    return EASY.build()


@pytest.fixture(scope="session")
def easy_runs(easy_benchmark):
    from pvtsizing.orchestrator import RunConfig, run_robustanalog

    return {s: run_robustanalog(easy_benchmark, RunConfig(seed=s)) for s in PILOT_SEEDS}


# one "criterion N: PASS|FAIL ..." line per acceptance criterion, shown after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
