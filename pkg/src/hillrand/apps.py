"""Application adapters.

Orbits confined to a principal plane of a triaxial 1/r density cusp feel a
perpendicular restoring frequency

    Omega_y^2 = (4/b) / (sqrt(c^2 x^2 + a^2 z^2) + b sqrt(x^2 + z^2)),

which is nearly periodic along the orbit.  Splitting the trace at the outer
turning points turns the motion into per-cycle oscillation parameters and a
shared forcing profile -- a cycle-to-cycle random Hill problem.  The
preheating preset maps a matter-field mode equation with additive noise in
the bracket onto the stochastic machinery with a unit noise coupling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientTraceError
from .model import (PERIOD, BarrierShape, HillParams, NoiseConfig,
                    PerturbationDist, RunConfig)

ZERO_FORCING_TOL = 1e-14


@dataclass(frozen=True)
class AxisRatios:
    """Ellipsoid semi-axes, ordered a >= b >= c > 0."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a >= self.b >= self.c > 0.0):
            raise DomainError("axis ratios must satisfy a >= b >= c > 0")


@dataclass(frozen=True)
class OrbitTrace:
    """In-plane orbit samples: times and (x, z) coordinates."""

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if not (len(self.t) == len(self.x) == len(self.z)):
            raise DomainError("trace columns must have equal length")
        if np.any(np.diff(self.t) <= 0.0):
            raise DomainError("trace times must be strictly increasing")
        if np.any((self.x == 0.0) & (self.z == 0.0)):
            raise DomainError("trace passes through the origin")

    @classmethod
    def from_csv(cls, path) -> "OrbitTrace":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t", "x", "z"]:
                raise DomainError(f"orbit trace {path} must have header t,x,z")
            try:
                rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader if r]
            except (ValueError, IndexError) as exc:
                raise DomainError(f"malformed row in orbit trace {path}: {exc}") from exc
        arr = np.asarray(rows, dtype=float)
        if arr.size == 0:
            raise DomainError(f"orbit trace {path} has no rows")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


def omega_y_sq(axes: AxisRatios, x, z):
    """Squared perpendicular oscillation frequency along the orbit.

    Scale-covariant: scaling (x, z) by s scales the result by 1/s.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.hypot(x, z)
    if np.any(r == 0.0):
        raise DomainError("Omega_y^2 is singular at the origin")
    val = (4.0 / axes.b) / (np.sqrt(axes.c ** 2 * x ** 2 + axes.a ** 2 * z ** 2)
                            + axes.b * r)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ExtractedCycle:
    """One orbit segment: oscillation parameter, forcing strength, shape samples."""

    lam: float
    q: float
    tau: np.ndarray
    qhat: np.ndarray | None
    flagged_zero_forcing: bool

    def barrier(self) -> BarrierShape:
        if self.flagged_zero_forcing:
            raise DomainError("zero-forcing segment has no barrier shape")
        return BarrierShape.tabulated(list(zip(self.tau.tolist(), self.qhat.tolist())))


def _refined_maxima(t: np.ndarray, r: np.ndarray):
    """Interior local maxima of r(t), refined by a parabolic fit."""
    out = []
    for j in range(1, len(r) - 1):
        if r[j] > r[j - 1] and r[j] >= r[j + 1]:
            denom = r[j - 1] - 2.0 * r[j] + r[j + 1]
            if denom < 0.0:
                # vertex of the parabola through the three samples
                d1 = 0.5 * (t[j + 1] - t[j - 1])
                shift = 0.5 * (r[j - 1] - r[j + 1]) / denom * d1
                shift = float(np.clip(shift, t[j - 1] - t[j], t[j + 1] - t[j]))
            else:
                shift = 0.0
            out.append(t[j] + shift)
    return out


def extract_cycles(trace: OrbitTrace, axes: AxisRatios) -> list[ExtractedCycle]:
    """Split the orbit at outer turning points and read off (lam_k, q_k, Qhat).

    Per segment the oscillation parameter is the minimum of Omega_y^2, the
    residual integrates (after rescaling the segment to [0, pi]) to the
    forcing strength q_k, and the residual over q_k gives the shape samples,
    normalized to unit trapezoid integral by construction.
    """
    omega = omega_y_sq(axes, trace.x, trace.z)
    r = np.hypot(trace.x, trace.z)
    peaks = _refined_maxima(trace.t, r)
    if len(peaks) < 2:
        raise InsufficientTraceError(
            f"found {len(peaks)} outer turning points; need at least 2")
    cycles = []
    for ta, tb in zip(peaks[:-1], peaks[1:]):
        inside = (trace.t > ta) & (trace.t < tb)
        om_a = float(np.interp(ta, trace.t, omega))
        om_b = float(np.interp(tb, trace.t, omega))
        tt = np.concatenate(([ta], trace.t[inside], [tb]))
        om = np.concatenate(([om_a], omega[inside], [om_b]))
        tau = PERIOD * (tt - ta) / (tb - ta)
        lam = float(np.min(om))
        resid = om - lam
        q = float(np.trapezoid(resid, tau))
        if q < ZERO_FORCING_TOL:
            cycles.append(ExtractedCycle(lam, q, tau, None, True))
        else:
            cycles.append(ExtractedCycle(lam, q, tau, resid / q, False))
    return cycles


def pooled_barrier(cycles, n_grid: int = 257):
    """Average the per-segment shapes on a common grid.

    The segments are only nearly identical in practice; both the per-segment
    shapes and this pooled average are reported, and downstream analysis
    chooses.
    """
    grid = np.linspace(0.0, PERIOD, n_grid)
    usable = [c for c in cycles if not c.flagged_zero_forcing]
    if not usable:
        raise DomainError("no segments with nonzero forcing to pool")
    acc = np.zeros(n_grid)
    for c in usable:
        acc += np.interp(grid, c.tau, c.qhat)
    return grid, acc / len(usable)


def preheat_preset(omega_ell_sq: float, q: float, shape: BarrierShape,
                   noise: NoiseConfig, n_cycles: int = 100000,
                   master_seed: int = 0) -> RunConfig:
    """Stochastic run for a matter-field mode with frequency Omega_ell^2.

    The mode equation's noise enters the bracket additively, i.e. it
    multiplies the solution through a constant unit profile while the
    periodic forcing uses the chosen barrier; realized as a
    multiplicative-form run with noise_coupling="unit".
    """
    if not (omega_ell_sq > 0.0):
        raise DomainError("mode frequency squared must be positive")
    zero = PerturbationDist("uniform-symmetric", 0.0)
    preset_noise = NoiseConfig(tau_c=noise.tau_c, sigma=noise.sigma,
                               dt=noise.dt, form="multiplicative")
    return RunConfig(params=HillParams(omega_ell_sq, q), barrier=shape,
                     ell_dist=zero, p_dist=zero, n_cycles=n_cycles,
                     master_seed=master_seed, noise=preset_noise,
                     noise_coupling="unit")
