import math

import pytest
from hypothesis import HealthCheck, settings

from planrefine.model import Circle, DynamicsParams, PlanInstance, Polygon, Rectangle, SkeletonStep

# fixtures here are immutable, so sharing them across examples is safe
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

DYN = DynamicsParams(accel_max=10.0, vel_max=10.0, drag=0.05)


@pytest.fixture
def dyn():
    return DYN


@pytest.fixture
def three_step():
    """Three hops between discs; one dwell, no norm bound."""
    steps = (
        SkeletonStep((Circle((20.0, 0.0), 1.0),)),
        SkeletonStep((Circle((20.0, 25.0), 2.0),), 1.0, 1.0),
        SkeletonStep((Circle((-5.0, 30.0), 1.5), Rectangle((-5.0, 30.0), (3.0, 1.0)))),
    )
    return PlanInstance(DYN, (0.0, 0.0), steps, (10.0, 10.0), None, name="three-step")


@pytest.fixture
def one_edge():
    return PlanInstance(DYN, (0.0, 0.0), (SkeletonStep((Circle((12.0, 5.0), 0.5),)),), (10.0, 10.0),
                        name="one-edge")


@pytest.fixture
def sailing_like():
    poly_a = Polygon(((8.0, -3.0), (14.0, -2.0), (13.0, 3.0), (9.0, 2.0)))
    poly_b = Polygon(((30.0, -4.0), (36.0, 0.0), (30.0, 4.0)))
    steps = (SkeletonStep((poly_a,)), SkeletonStep((poly_b,), 2.0, 2.0, 0.0, math.inf))
    return PlanInstance(DYN, (0.0,), steps, (10.0,), name="sail")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for the run summary, then assert."""
    def record(label: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        assert ok, f"{label}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
