import numpy as np
import pytest

from pathtrack.polysys import (CONSTANT, ExponentVector, SupportedSystem, SystemSpec, generate_system,
                               newton_homotopy, random_point, with_constant_term)
from pathtrack.scalar import PrecisionLevel

from acceptance_report import REPORT

PRECISIONS = [PrecisionLevel.D, PrecisionLevel.DD]


@pytest.fixture(params=PRECISIONS, ids=lambda p: p.value)
def precision(request):
    return request.param


def quadratic_homotopy(precision=PrecisionLevel.D):
    """x**2 - (1 + 3t): Newton homotopy of x**2 - 4 from x = 1."""
    f = SupportedSystem(1, [ExponentVector(((0, 2),)), CONSTANT], np.array([[1, -4]], dtype=complex))
    return newton_homotopy(f, [1.0], precision)


def trackable_system(n: int, seed: int) -> SupportedSystem:
    """n shared monomials of total degree 10 plus a random constant term."""
    return with_constant_term(generate_system(SystemSpec(n, n, 10, davg=10, seed=seed)), seed)


def trackable_homotopy(n: int, seed: int, precision=PrecisionLevel.D):
    return newton_homotopy(trackable_system(n, seed), random_point(n, seed + 100), precision)


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for key in sorted(REPORT):
            terminalreporter.write_line(REPORT[key])
