from fractions import Fraction

import pytest

from qrnscale import LinkConfig, NoiseParams, QosRequirement


def exact_distill(f, eta, p2):
    """Distillation map and success probability in exact rational arithmetic."""
    f, eta, p2 = Fraction(f), Fraction(eta), Fraction(p2)
    a = f**2 + ((1 - f) / 3) ** 2
    b = eta**2 + (1 - eta) ** 2
    c = f * ((1 - f) / 3) + ((1 - f) / 3) ** 2
    d = 2 * eta * (1 - eta)
    e = (1 - p2**2) / (8 * p2**2)
    h = f**2 + Fraction(2, 3) * f * (1 - f) + Fraction(5, 9) * (1 - f) ** 2
    den = h * b + 4 * c * d + 4 * e
    return (a * b + c * d + e) / den, p2**2 * den


def exact_swap(f, n, eta, p2):
    f, eta, p2 = Fraction(f), Fraction(eta), Fraction(p2)
    return Fraction(1, 4) + Fraction(3, 4) * (p2 * (4 * eta**2 - 1) / 3) ** (n - 1) * ((4 * f - 1) / 3) ** n


@pytest.fixture
def default_link():
    return LinkConfig(f0=0.99, r0=1e5, l0=0.542)


@pytest.fixture
def default_noise():
    return NoiseParams(0.99, 0.99)


@pytest.fixture
def default_qos():
    return QosRequirement(r_min=1.0, f_min=0.5)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "REPORT", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.REPORT:
        terminalreporter.write_line(line)
