import math

import numpy as np
import pytest

from polarlab import Circle, Interval, Riesz, ShiftedLog, Sphere2, equilibrium_measure

# W_K for Riesz(0.5) on the unit circle: (1/2pi) int_0^{2pi} (2 sin(t/2))^{-1/2} dt
# = 2^{-1/2} Gamma(1/4) / (sqrt(pi) Gamma(3/4)), via the Beta integral of sin^{-1/2}
CIRCLE_W_HALF = 2**-0.5 * math.gamma(0.25) / (math.sqrt(math.pi) * math.gamma(0.75))


@pytest.fixture(scope="session")
def circle():
    return Circle((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def sphere():
    return Sphere2((0.0, 0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def interval():
    return Interval(-1.0, 1.0)


@pytest.fixture(scope="session")
def circle_em(circle):
    return equilibrium_measure(circle, Riesz(0.5))


@pytest.fixture(scope="session")
def sphere_em(sphere):
    return equilibrium_measure(sphere, Riesz(1.0))


@pytest.fixture(scope="session")
def interval_log_em(interval):
    return equilibrium_measure(interval, ShiftedLog(0.25))


def equally_spaced(n, radius=1.0, phase=0.0):
    th = phase + 2 * np.pi * np.arange(n) / n
    return radius * np.c_[np.cos(th), np.sin(th)]
