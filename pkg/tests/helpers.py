"""Shared oracles for the test suite, kept independent of the library paths
they check."""

import math

import numpy as np
from scipy.integrate import quad

PI = math.pi


def delta_jump_elements(lam, q):
    """Trig propagation with the midpoint derivative jump, done from scratch.

    Returns the full monodromy (h, g, y2_pi, dy2_pi).
    """
    w = math.sqrt(lam)
    half = PI / 2.0
    c, s = math.cos(w * half), math.sin(w * half)
    # principal solution values/derivatives just before the kick
    a1, b1 = c, -w * s
    a2, b2 = s / w, c
    b1 -= q * a1
    b2 -= q * a2
    h = a1 * c + (b1 / w) * s
    g = -a1 * w * s + b1 * c
    y2 = a2 * c + (b2 / w) * s
    dy2 = -a2 * w * s + b2 * c
    return h, g, y2, dy2


def sin2_qhat(t):
    return (2.0 / PI) * np.sin(t) ** 2


def sin4_qhat(t):
    return (8.0 / (3.0 * PI)) * np.sin(t) ** 4


def quad_j1(lam, qhat):
    """J1 = int Qhat cos^2(sqrt(lam) t) dt by direct quadrature."""
    w = math.sqrt(lam)
    val, _ = quad(lambda t: qhat(t) * math.cos(w * t) ** 2, 0.0, PI,
                  epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def simpson(vals, h):
    vals = np.asarray(vals)
    n = len(vals) - 1
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.sum(w * vals) * h / 3.0)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(np.asarray(x, float)),
                            np.log(np.asarray(y, float)), 1)[0])
