"""One-cycle analysis of y'' + [lam + q*Qhat(t)] y = 0 on [0, pi].

Principal solutions start from (y, y') = (1, 0) and (0, 1).  The cycle map
is fixed by h = y1(pi) and g = y1'(pi); midpoint symmetry of the barrier
makes y2'(pi) = h, and the unit Wronskian fixes y2(pi) = (h^2 - 1)/g.

The moment integrals

    I_j = int y0j^2 dt,      J_j = int Qhat y0j^2 dt

ride along as extra state variables so they share the integrator's accuracy,
and a dense sampling of the principal solutions is kept for the downstream
noise quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import AccuracyError, DegenerateBaseError, DomainError
from .model import PERIOD, BarrierShape, HillParams, barrier_eval

# Below this size the zeroth-order elements (or cos(phi)) count as degenerate;
# the paper flags these limits but gives no tolerance.
DEGENERACY_TOL = 1e-6
# Width of the exact L'Hopital window around lambda = (k + 1/2)^2.
LHOPITAL_WINDOW = 1e-12

DEFAULT_DENSE = 2048


@dataclass(frozen=True)
class CycleSolution:
    """Cycle map elements, moment integrals, and dense principal solutions.

    sampled_y0 holds (y01, y01', y02, y02') on the uniform grid t_grid.
    """

    h: float
    g: float
    y2pi: float
    h2: float
    i1: float
    i2: float
    j1: float
    j2: float
    t_grid: np.ndarray
    sampled_y0: np.ndarray

    @property
    def wronskian_residual(self) -> float:
        return abs(self.h * self.h2 - self.g * self.y2pi - 1.0)

    @property
    def symmetry_residual(self) -> float:
        return abs(self.h - self.h2)


@dataclass(frozen=True)
class FirstOrderCoeffs:
    """Cycle-constant sensitivities of (h, g) to the parameter perturbations."""

    X: float
    Y: float
    W: float
    Z: float


def _shape_fn(shape: BarrierShape):
    """Fast scalar evaluator used inside the integrator RHS."""
    if shape.kind == "sin2":
        c = 2.0 / PERIOD
        return lambda t: c * math.sin(t) ** 2
    if shape.kind == "sin4":
        c = 8.0 / (3.0 * PERIOD)
        return lambda t: c * math.sin(t) ** 4
    if shape.kind == "unit":
        return lambda t: 1.0
    if shape.kind == "tabulated":
        tk, vk = shape.node_arrays()
        return lambda t: float(np.interp(t, tk, vk))
    raise DomainError("delta-midpoint barrier cannot be evaluated pointwise")


def _trig_sq_integral(a: float, b: float, omega: float, s: float) -> float:
    """int_0^s (a*cos(w t) + b*sin(w t))^2 dt in closed form."""
    two = 2.0 * omega * s
    return ((a * a + b * b) * s / 2.0
            + (a * a - b * b) * math.sin(two) / (4.0 * omega)
            + a * b * (1.0 - math.cos(two)) / (2.0 * omega))


def _integrate_delta(params: HillParams, n_dense: int) -> CycleSolution:
    """Exact trig propagation with the midpoint jump y' -> y' - q*y.

    The jump preserves the Wronskian, so the map stays unit determinant, and
    the moments J_j reduce to y0j(pi/2)^2.
    """
    lam, q = params.lam, params.q
    w = math.sqrt(lam)
    half = PERIOD / 2.0
    cw, sw = math.cos(w * half), math.sin(w * half)

    # values/derivatives just before the midpoint
    a1, b1 = cw, -w * sw
    a2, b2 = sw / w, cw
    # derivative jump
    b1p = b1 - q * a1
    b2p = b2 - q * a2

    def piece2(a, bp, s):
        y = a * math.cos(w * s) + (bp / w) * math.sin(w * s)
        v = -a * w * math.sin(w * s) + bp * math.cos(w * s)
        return y, v

    h, g = piece2(a1, b1p, half)
    y2pi, h2 = piece2(a2, b2p, half)

    i1 = _trig_sq_integral(1.0, 0.0, w, half) + _trig_sq_integral(a1, b1p / w, w, half)
    i2 = _trig_sq_integral(0.0, 1.0 / w, w, half) + _trig_sq_integral(a2, b2p / w, w, half)
    j1 = a1 * a1
    j2 = a2 * a2

    t_grid = np.linspace(0.0, PERIOD, n_dense + 1)
    first = t_grid < half
    y0 = np.empty((n_dense + 1, 4))
    tf = t_grid[first]
    y0[first, 0] = np.cos(w * tf)
    y0[first, 1] = -w * np.sin(w * tf)
    y0[first, 2] = np.sin(w * tf) / w
    y0[first, 3] = np.cos(w * tf)
    ts = t_grid[~first] - half
    y0[~first, 0] = a1 * np.cos(w * ts) + (b1p / w) * np.sin(w * ts)
    y0[~first, 1] = -a1 * w * np.sin(w * ts) + b1p * np.cos(w * ts)
    y0[~first, 2] = a2 * np.cos(w * ts) + (b2p / w) * np.sin(w * ts)
    y0[~first, 3] = -a2 * w * np.sin(w * ts) + b2p * np.cos(w * ts)

    return CycleSolution(h, g, y2pi, h2, i1, i2, j1, j2, t_grid, y0)


def integrate_cycle(params: HillParams, shape: BarrierShape,
                    tol: float = 1e-10, n_dense: int = DEFAULT_DENSE) -> CycleSolution:
    """Integrate one cycle for both principal initial conditions.

    Uses an adaptive high-order Runge-Kutta pair (DOP853) with dense output;
    the delta-midpoint barrier is propagated analytically instead.
    """
    if not (0.0 < tol <= 1e-3):
        raise DomainError("integrator tolerance must lie in (0, 1e-3]")
    if shape.is_delta:
        return _integrate_delta(params, n_dense)

    lam, q = params.lam, params.q
    qhat = _shape_fn(shape)

    def rhs(t, s):
        qv = qhat(min(max(t, 0.0), PERIOD))
        c = lam + q * qv
        y1, v1, y2, v2 = s[0], s[1], s[2], s[3]
        return (v1, -c * y1, v2, -c * y2,
                y1 * y1, y2 * y2, qv * y1 * y1, qv * y2 * y2)

    sol = solve_ivp(rhs, (0.0, PERIOD), [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                    method="DOP853", rtol=tol, atol=tol * 1e-3, dense_output=True)
    if not sol.success:
        raise AccuracyError(f"cycle integration failed: {sol.message}")

    end = sol.y[:, -1]
    t_grid = np.linspace(0.0, PERIOD, n_dense + 1)
    y0 = sol.sol(t_grid)[:4].T.copy()
    return CycleSolution(h=float(end[0]), g=float(end[1]),
                         y2pi=float(end[2]), h2=float(end[3]),
                         i1=float(end[4]), i2=float(end[5]),
                         j1=float(end[6]), j2=float(end[7]),
                         t_grid=t_grid, sampled_y0=y0)


def first_order_coeffs(base: CycleSolution) -> FirstOrderCoeffs:
    """The cycle-constant coefficients X, Y, W, Z from the moment integrals.

    h = h0 - ell*X - p*Y and g = g0 - ell*W - p*Z to first order in the
    perturbations.  Fails when the zeroth-order elements vanish, where the
    perturbation scheme itself breaks down.
    """
    h0, g0 = base.h, base.g
    if abs(h0) < DEGENERACY_TOL:
        raise DegenerateBaseError(f"|h0| = {abs(h0):.3e} below {DEGENERACY_TOL}")
    if abs(g0) < DEGENERACY_TOL:
        raise DegenerateBaseError(f"|g0| = {abs(g0):.3e} below {DEGENERACY_TOL}")
    hm, hp = h0 * h0 - 1.0, h0 * h0 + 1.0
    g2 = g0 * g0
    return FirstOrderCoeffs(
        X=(hm * base.i1 - g2 * base.i2) / (2.0 * g0),
        Y=(hm * base.j1 - g2 * base.j2) / (2.0 * g0),
        W=(hp * base.i1 - g2 * base.i2) / (2.0 * h0),
        Z=(hp * base.j1 - g2 * base.j2) / (2.0 * h0),
    )


def perturbed_elements(base: CycleSolution, coeffs: FirstOrderCoeffs, ell, p):
    """First-order matrix elements for perturbations (ell, p); O(eps^2) error."""
    h = base.h - ell * coeffs.X - p * coeffs.Y
    g = base.g - ell * coeffs.W - p * coeffs.Z
    return h, g


# -- shape-weighted quadratures ----------------------------------------

def _shape_weighted_integral(shape: BarrierShape, f, oscillation: float = 1.0) -> float:
    """int_0^pi Qhat(t) f(t) dt; delta evaluates f at the midpoint.

    oscillation hints the angular rate of f so tabulated segments get enough
    Gauss nodes.
    """
    if shape.is_delta:
        return float(f(PERIOD / 2.0))
    if shape.kind == "tabulated":
        tk, vk = shape.node_arrays()
        xg, wg = np.polynomial.legendre.leggauss(16)
        total = 0.0
        for i in range(len(tk) - 1):
            a, b = tk[i], tk[i + 1]
            n_sub = max(1, int(math.ceil(oscillation * (b - a) / 3.0)))
            for j in range(n_sub):
                aa = a + (b - a) * j / n_sub
                bb = a + (b - a) * (j + 1) / n_sub
                tt = 0.5 * (bb - aa) * xg + 0.5 * (aa + bb)
                qv = np.interp(tt, tk, vk)
                ft = np.array([f(t) for t in tt])
                total += 0.5 * (bb - aa) * np.sum(wg * qv * ft)
        return float(total)
    qhat = _shape_fn(shape)
    val, _ = quad(lambda t: qhat(t) * f(t), 0.0, PERIOD,
                  epsabs=1e-13, epsrel=1e-12, limit=400)
    return float(val)


def shape_cos_moment(shape: BarrierShape, a: float) -> float:
    """int_0^pi Qhat(t) cos(2 a t) dt, which equals 2*J1 - 1 at a = sqrt(lam)."""
    return _shape_weighted_integral(shape, lambda t: math.cos(2.0 * a * t),
                                    oscillation=2.0 * abs(a))


def two_j1_minus_1(lam: float, shape: BarrierShape) -> float:
    """Quadrature route for 2*J1 - 1 of the zeroth-order (q = 0) solution."""
    if not (lam > 0.0):
        raise DomainError("lambda must be positive")
    return shape_cos_moment(shape, math.sqrt(lam))


def sin2_two_j1_minus_1(lam: float) -> float:
    """Closed form of 2*J1 - 1 for the sin^2 barrier.

    Rewritten through sinc so the removable singularity at lam = 1 needs no
    branch: -sin(2phi)/(2 pi sqrt(lam)(lam - 1)) == -sinc(2(sqrt(lam)-1)) /
    (sqrt(lam)(sqrt(lam)+1)).
    """
    if not (lam > 0.0):
        raise DomainError("lambda must be positive")
    s = math.sqrt(lam)
    return float(-np.sinc(2.0 * (s - 1.0)) / (s * (s + 1.0)))


def zeroth_order_moments(lam: float, shape: BarrierShape):
    """(I1, I2, J1, J2) for the q = 0 trig solutions at oscillation lam."""
    w = math.sqrt(lam)
    phi = w * PERIOD
    s2 = math.sin(2.0 * phi)
    i1 = PERIOD / 2.0 + s2 / (4.0 * w)
    i2 = (PERIOD / 2.0 - s2 / (4.0 * w)) / lam
    c = shape_cos_moment(shape, w)
    j1 = (1.0 + c) / 2.0
    j2 = (1.0 - c) / (2.0 * lam)
    return i1, i2, j1, j2


def _j_lhopital(shape: BarrierShape, k: int) -> float:
    """Limit of (2J1-1)/cos(phi) at lambda = (k + 1/2)^2, sign (+) for k even."""
    m = 2 * k + 1
    val = _shape_weighted_integral(shape, lambda t: t * math.sin(m * t),
                                   oscillation=float(m))
    sign = 1.0 if k % 2 == 0 else -1.0
    return sign * (2.0 / PERIOD) * val


def j_factor(lam: float, shape: BarrierShape) -> float:
    """J = (2*J1 - 1)/cos(phi) with the degenerate points handled.

    Direct formula away from cos(phi) = 0; the L'Hopital limit exactly at
    lambda = (k + 1/2)^2; and a linear bridge in sqrt(lam) across the thin
    annulus in between.
    """
    if not (lam > 0.0):
        raise DomainError("lambda must be positive")
    s = math.sqrt(lam)
    k = int(round(s - 0.5))
    if k >= 0:
        s0 = k + 0.5
        if abs(lam - s0 * s0) <= LHOPITAL_WINDOW:
            return _j_lhopital(shape, k)
    c = math.cos(PERIOD * s)
    if abs(c) >= DEGENERACY_TOL:
        return shape_cos_moment(shape, s) / c
    # thin annulus: interpolate between the limit value and the direct
    # formula at the edge |cos(phi)| = DEGENERACY_TOL on the same side
    s0 = k + 0.5
    d = 1.0 if s >= s0 else -1.0
    sb = s0 + d * math.asin(DEGENERACY_TOL) / PERIOD
    jl = _j_lhopital(shape, k)
    jb = shape_cos_moment(shape, sb) / math.cos(PERIOD * sb)
    return jl + (s - s0) / (sb - s0) * (jb - jl)


# -- small-q expansions (constant lambda, fluctuating q) ----------------

def small_q_h(lam: float, q, shape: BarrierShape, mode: str = "first-order"):
    """Matrix element h alone; total except at cos(phi) = 0 in generalized mode.

    Accepts scalar or array q.
    """
    if not (lam > 0.0):
        raise DomainError("lambda must be positive")
    w = math.sqrt(lam)
    phi = w * PERIOD
    cphi, sphi = math.cos(phi), math.sin(phi)
    q = np.asarray(q, dtype=float)
    if mode == "first-order":
        out = cphi - (q / (2.0 * w)) * sphi
    elif mode == "generalized":
        _, _, j1, j2 = zeroth_order_moments(lam, shape)
        rad = cphi * cphi + q * q * (0.25 * sphi * sphi / lam - j1 * j2)
        if np.any(rad < 0.0):
            raise DomainError("generalized small-q radicand is negative")
        sign = 1.0 if cphi >= 0.0 else -1.0
        out = -(q / (2.0 * w)) * sphi + sign * np.sqrt(rad)
    else:
        raise DomainError(f"unknown small-q mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def small_q_elements(lam: float, q, shape: BarrierShape, mode: str = "first-order"):
    """(h, g) in the small-q expansion; first-order or generalized form.

    The g formula divides by cos(phi); near lambda = (k + 1/2)^2 it raises
    and callers should switch to the L'Hopital branch of j_factor.
    """
    if not (lam > 0.0):
        raise DomainError("lambda must be positive")
    w = math.sqrt(lam)
    phi = w * PERIOD
    cphi, sphi = math.cos(phi), math.sin(phi)
    if abs(cphi) < DEGENERACY_TOL:
        raise DegenerateBaseError(
            "cos(phi) ~ 0 at lambda = (k + 1/2)^2; use j_factor's limit branch")
    _, _, j1, j2 = zeroth_order_moments(lam, shape)
    q = np.asarray(q, dtype=float)
    if mode == "first-order":
        h = cphi - (q / (2.0 * w)) * sphi
        g = -w * sphi + (q / cphi) * (0.5 * sphi * sphi - j1)
    elif mode == "generalized":
        # radicand uses q^2 sin^2(phi)/(4 lam): the exact solution of the
        # truncated coupled system after eliminating g (uses J1 + lam*J2 = 1)
        rad = cphi * cphi + q * q * (0.25 * sphi * sphi / lam - j1 * j2)
        if np.any(rad < 0.0):
            raise DomainError("generalized small-q radicand is negative")
        sign = 1.0 if cphi > 0.0 else -1.0
        root = np.sqrt(rad)
        h = -(q / (2.0 * w)) * sphi + sign * root
        g = (-q * j1 + (q / 2.0) * sphi * sphi - sign * w * sphi * root) / cphi
    else:
        raise DomainError(f"unknown small-q mode {mode!r}")
    if h.ndim == 0:
        return float(h), float(g)
    return h, g
