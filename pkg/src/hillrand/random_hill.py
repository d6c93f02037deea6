"""Cycle-to-cycle random Hill pipelines.

Per-cycle parameters (lam + ell_k, q + p_k) are drawn iid; each cycle's map
feeds the matrix-product engine.  Analytic growth rates are available for a
classically stable base: the general small-fluctuation formula in terms of
the first-order coefficients, and the small-q specialization built on the
J factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ensemble
from .cycle import (CycleSolution, FirstOrderCoeffs, first_order_coeffs,
                    integrate_cycle, j_factor, perturbed_elements,
                    small_q_elements)
from .errors import (DegenerateBaseError, DomainError, NotEllipticError,
                     SingularMapError)
from .model import BarrierShape, HillParams, PerturbationDist
from .xfer import GrowthEstimate, TransferMatrix, elliptic_frame, growth_product

MODES = ("exact", "first-order", "small-q-first-order", "small-q-generalized")

DEFAULT_WARMUP = 64


@dataclass(frozen=True)
class RandomHillRun:
    """A random-Hill sampling problem: base cycle plus perturbation draws."""

    lam: float
    q: float
    shape: BarrierShape
    base: CycleSolution
    coeffs: FirstOrderCoeffs | None
    ell_dist: PerturbationDist
    p_dist: PerturbationDist
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode.startswith("small-q") and self.ell_dist.scale != 0.0:
            raise DomainError("small-q modes hold lambda constant; ell_dist must be degenerate")

    @classmethod
    def from_params(cls, lam: float, q: float, shape: BarrierShape,
                    ell_dist: PerturbationDist, p_dist: PerturbationDist,
                    mode: str = "exact", tol: float = 1e-10,
                    n_dense: int = 2048) -> "RandomHillRun":
        base = integrate_cycle(HillParams(lam, q), shape, tol=tol, n_dense=n_dense)
        try:
            coeffs = first_order_coeffs(base)
        except DegenerateBaseError:
            coeffs = None
        return cls(lam, q, shape, base, coeffs, ell_dist, p_dist, mode)


def eta_of_perturbation(base: CycleSolution, coeffs: FirstOrderCoeffs, ell, p):
    """First-order relative length perturbation eta_k of the elliptical form.

    eta = [h0/(1-h0^2)](ell X + p Y) + (1/g0)(ell W + p Z); zero-mean draws
    give <eta> = 0.  Accepts scalars or arrays.
    """
    h0, g0 = base.h, base.g
    if abs(h0) >= 1.0:
        raise NotEllipticError("base is not classically stable (|h0| >= 1)")
    if abs(g0) < 1e-12:
        raise DegenerateBaseError("g0 ~ 0")
    a = h0 / (1.0 - h0 * h0)
    return a * (ell * coeffs.X + p * coeffs.Y) + (ell * coeffs.W + p * coeffs.Z) / g0


def _eta_coefficients(base: CycleSolution, coeffs: FirstOrderCoeffs):
    """(A, B) with eta = A*ell + B*p."""
    h0, g0 = base.h, base.g
    a = h0 / (1.0 - h0 * h0)
    return (a * coeffs.X + coeffs.W / g0, a * coeffs.Y + coeffs.Z / g0)


def growth_t22(base: CycleSolution, coeffs: FirstOrderCoeffs,
               var_ell: float, var_p: float) -> float:
    """Small-fluctuation growth rate of the random product for a stable base.

    gamma = (1/2)(1 - h0^2) [A^2 <ell^2> + B^2 <p^2>]; additive in the two
    variances because the draws are independent.
    """
    if var_ell < 0.0 or var_p < 0.0:
        raise DomainError("variances must be nonnegative")
    if abs(base.h) >= 1.0:
        raise NotEllipticError("base is not classically stable (|h0| >= 1)")
    coef_a, coef_b = _eta_coefficients(base, coeffs)
    return 0.5 * (1.0 - base.h * base.h) * (coef_a ** 2 * var_ell + coef_b ** 2 * var_p)


def growth_t31(lam: float, mean_q_sq: float, shape: BarrierShape) -> float:
    """Small-q growth rate log[1 + <q^2>/(8 lam) J^2] for symmetric q draws."""
    if mean_q_sq < 0.0:
        raise DomainError("mean_q_sq must be nonnegative")
    jf = j_factor(lam, shape)
    return math.log1p(mean_q_sq / (8.0 * lam) * jf * jf)


def _sym_triple(a: np.ndarray):
    return np.array([a[0, 0], 0.5 * (a[0, 1] + a[1, 0]), a[1, 1]])


def control_triple(m0: np.ndarray, frame: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Control-variate coefficients for a linear response matrix d.

    In the frame where the base map R = S^-1 M0 S is a rotation, the
    first-order part of a log increment at direction u is u^T sym(R^T S^-1 d S) u.
    """
    sinv = np.linalg.inv(frame)
    r = sinv @ m0 @ frame
    return _sym_triple(r.T @ (sinv @ d @ frame))


def _element_sensitivities(base: CycleSolution):
    """d(matrix)/dh and d(matrix)/dg for the symmetric (h, g) form."""
    h0, g0 = base.h, base.g
    e_h = np.array([[1.0, 2.0 * h0 / g0], [0.0, 1.0]])
    e_g = np.array([[0.0, -(h0 * h0 - 1.0) / (g0 * g0)], [1.0, 0.0]])
    return e_h, e_g


def _perturbation_controls(base: CycleSolution, coeffs: FirstOrderCoeffs,
                           frame: np.ndarray):
    """Control triples T_ell, T_p for draws entering through Theorem-style (h, g)."""
    m0 = np.array([[base.h, base.y2pi], [base.g, base.h2]])
    e_h, e_g = _element_sensitivities(base)
    d_ell = -coeffs.X * e_h - coeffs.W * e_g
    d_p = -coeffs.Y * e_h - coeffs.Z * e_g
    return control_triple(m0, frame, d_ell), control_triple(m0, frame, d_p)


def _assemble_sym_mats(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    if np.any(np.abs(g) < 1e-12):
        raise SingularMapError("a drawn cycle has |g| < 1e-12")
    mats = np.empty((h.shape[0], 2, 2))
    mats[:, 0, 0] = h
    mats[:, 0, 1] = (h * h - 1.0) / g
    mats[:, 1, 0] = g
    mats[:, 1, 1] = h
    return mats


def growth_direct_random(run: RandomHillRun, n_cycles: int, seed: int,
                         renorm_every: int = 16, *, control: bool = False,
                         n_steps: int = 256, norm: str = "euclidean",
                         warmup: int = DEFAULT_WARMUP,
                         n_batches: int = 32) -> GrowthEstimate:
    """Direct Monte Carlo growth rate: draw, build the cycle map, multiply.

    The per-cycle elements come from the run's mode: full integration of the
    drawn parameters, the first-order coefficients, or the small-q forms.
    For a stable base the product is iterated in the elliptic frame, and
    control=True additionally subtracts the exactly-zero-mean linear part of
    the increments, which tightens the estimate by orders of magnitude at
    small fluctuation amplitudes.
    """
    base, coeffs = run.base, run.coeffs
    frame = None
    if abs(base.h) < 1.0 and abs(base.g) >= 1e-12:
        frame = elliptic_frame(TransferMatrix(base.h, base.y2pi, base.g, base.h2))
    t_ell = t_p = None
    if control:
        if frame is None:
            raise NotEllipticError("control variates need a classically stable base")
        if coeffs is None:
            raise DegenerateBaseError("control variates need first-order coefficients")
        t_ell, t_p = _perturbation_controls(base, coeffs, frame)

    def source(k0, k1, rng):
        n = k1 - k0
        ell = run.ell_dist.sample(rng, n)
        p = run.p_dist.sample(rng, n)
        if run.mode == "exact":
            lams = run.lam + ell
            if np.any(lams <= 0.0):
                bad = int(np.argmax(lams <= 0.0))
                raise DomainError(
                    f"draw {k0 + bad}: lambda + ell = {lams[bad]:.6g} <= 0")
            h, g = ensemble.batch_cycle_elements(lams, run.q + p, run.shape,
                                                 n_steps=n_steps)
        elif run.mode == "first-order":
            if coeffs is None:
                raise DegenerateBaseError("first-order mode needs a nondegenerate base")
            h, g = perturbed_elements(base, coeffs, ell, p)
        else:
            mode = "first-order" if run.mode == "small-q-first-order" else "generalized"
            h, g = small_q_elements(run.lam, run.q + p, run.shape, mode=mode)
            h = np.asarray(h, dtype=float)
            g = np.asarray(g, dtype=float)
        mats = _assemble_sym_mats(np.asarray(h, dtype=float),
                                  np.asarray(g, dtype=float))
        if control:
            ctrl = np.outer(ell, t_ell) + np.outer(p, t_p)
            return mats, ctrl
        return mats

    return growth_product(source, n_cycles, seed=seed, renorm_every=renorm_every,
                          warmup=warmup, norm=norm, frame=frame,
                          n_batches=n_batches)


def growth_eta_sampled(lam: float, shape: BarrierShape, p_dist: PerturbationDist,
                       n_samples: int, seed: int, mode: str = "small-q-first-order",
                       q_base: float = 0.0):
    """Elliptic-rotation growth rate with the length-perturbation moments sampled.

    Draws q_k, forms the small-q matrix elements, converts each cycle to its
    length parameter, and evaluates log[1 + (1/2) <eta^2> <sin^2 theta>].
    Returns (gamma, stderr) with the stderr from the sampled <eta^2> via the
    delta method.  mode picks which element expansion defines the eta_k:
    "small-q-first-order" or "small-q-generalized" (the higher-order variant).
    """
    from .model import stream

    if mode not in ("small-q-first-order", "small-q-generalized"):
        raise DomainError(f"unsupported eta-sampling mode {mode!r}")
    inner = "first-order" if mode == "small-q-first-order" else "generalized"
    rng = stream(seed, 0)
    qk = q_base + p_dist.sample(rng, n_samples)
    h, g = small_q_elements(lam, qk, shape, mode=inner)
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(np.abs(h) >= 1.0):
        raise NotEllipticError("a sampled cycle left the elliptic regime (|h| >= 1)")
    sin2 = 1.0 - h * h
    lk = np.sqrt(sin2) / g
    l0 = -1.0 / math.sqrt(lam)
    eta = lk / l0 - 1.0
    eta2 = float(np.mean(eta ** 2))
    msin2 = float(np.mean(sin2))
    gamma = math.log1p(0.5 * eta2 * msin2)
    dgamma = 0.5 * msin2 / (1.0 + 0.5 * eta2 * msin2)
    stderr = dgamma * float(np.std(eta ** 2, ddof=1)) / math.sqrt(n_samples)
    return gamma, stderr
