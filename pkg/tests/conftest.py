from __future__ import annotations

import pytest

from avdse.config import bundled_config_path, load_config
from avdse.design_space import DesignSpace
from avdse.pareto_eval import truth_front
from avdse.scenario import ideal_trajectory
from avdse.vehicle_model import ground_truth


@pytest.fixture(scope="session")
def robotaxi_config():
    return load_config(bundled_config_path())


@pytest.fixture(scope="session")
def scenario(robotaxi_config):
    return robotaxi_config.scenario


@pytest.fixture(scope="session")
def space() -> DesignSpace:
    return DesignSpace()


@pytest.fixture(scope="session")
def ideal(scenario):
    return ideal_trajectory(scenario)


@pytest.fixture(scope="session")
def truth(space, scenario):
    """Exhaustive ground truth (seed 1) and its feasible Pareto front."""
    evals = ground_truth(space, scenario, seed=1)
    return evals, truth_front(evals, scenario.constraints)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, in criterion order."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
