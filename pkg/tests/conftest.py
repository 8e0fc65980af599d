import math

import numpy as np
import pytest

from hodyn.jet import JetPoint


def central_diff(f, x, h=None):
    h = 1e-6 * max(1.0, abs(x)) if h is None else h
    return (f(x + h) - f(x - h)) / (2 * h)


def rel_close(a, b, rtol, atol=0.0):
    return abs(a - b) <= rtol * max(abs(a), abs(b)) + atol


def cos_jet(t, M, omega=1.0, amp=1.0, phase=0.0):
    """Jet of amp*cos(omega t + phase) with orders 0..M."""
    vals = [amp * omega**n * math.cos(omega * t + phase + n * math.pi / 2) for n in range(M + 1)]
    return JetPoint.scalar(vals, t)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
