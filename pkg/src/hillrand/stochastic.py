"""Colored-noise cycles and the stochastic-to-random equivalence.

The noise is a stationary Ornstein-Uhlenbeck process sampled by its exact
discretization, so the correlation time is a controllable knob and ordinary
calculus applies within a cycle; the white-noise limit is approached only as
tau_c -> 0, where the equivalent parameter perturbations vanish.

Per cycle, the moments

    additive:        Xi_j =  int y0j xi dt
    multiplicative:  Xi_j = -int C y0j^2 xi dt      (C = coupling profile)

map to equivalent cycle-to-cycle parameter perturbations

    ell = (J2 Xi1 - J1 Xi2) / D,   p = (I1 Xi2 - I2 Xi1) / D,
    D = I1 J2 - I2 J1,

which reproduce the stochastic cycle's map elements to first order, so both
problems share a growth rate in that limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ensemble
from .cycle import CycleSolution, first_order_coeffs, integrate_cycle, perturbed_elements
from .errors import (AccuracyError, DegenerateMomentsError, DomainError,
                     GridMismatchError, NotEllipticError, UnsupportedFormError)
from .model import PERIOD, BarrierShape, HillParams, NoiseConfig, stream
from .random_hill import (DEFAULT_WARMUP, _assemble_sym_mats,
                          _eta_coefficients, _perturbation_controls, control_triple)
from .xfer import GrowthEstimate, TransferMatrix, elliptic_frame, growth_product

CHUNK = 8192
DET_TOL = 1e-7


@dataclass(frozen=True)
class NoisePath:
    """One cycle's sampled noise realization on the uniform grid over [0, pi]."""

    samples: np.ndarray
    seed_info: tuple[int, int]

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("noise path contains non-finite samples")


@dataclass(frozen=True)
class XiMoments:
    xi1: float
    xi2: float


def _ou_batch(config: NoiseConfig, master_seed: int, k0: int, k1: int) -> np.ndarray:
    """Stationary OU paths for cycles [k0, k1); one stream per cycle index."""
    m = config.n_intervals
    n = k1 - k0
    out = np.empty((n, m + 1))
    if config.sigma == 0.0:
        out.fill(0.0)
        return out
    dt = PERIOD / m
    decay = math.exp(-dt / config.tau_c)
    scale = config.sigma * math.sqrt(1.0 - decay * decay)
    z = np.empty((n, m + 1))
    for i in range(n):
        z[i] = stream(master_seed, k0 + i).standard_normal(m + 1)
    out[:, 0] = config.sigma * z[:, 0]
    for j in range(1, m + 1):
        out[:, j] = decay * out[:, j - 1] + scale * z[:, j]
    return out


def ou_path(config: NoiseConfig, cycle_seed: tuple[int, int]) -> NoisePath:
    """Exact-discretization stationary OU realization for one cycle.

    cycle_seed is (master_seed, cycle_index); the stream derives from it by
    counter-based splitting, so paths are reproducible and independent.
    """
    master, k = int(cycle_seed[0]), int(cycle_seed[1])
    samples = _ou_batch(config, master, k, k + 1)[0]
    return NoisePath(samples=samples, seed_info=(master, k))


def _coupling_values(shape: BarrierShape, coupling: BarrierShape | None,
                     t_grid: np.ndarray):
    cshape = coupling if coupling is not None else shape
    if cshape.is_delta:
        return None  # midpoint rule
    from .model import barrier_eval

    return barrier_eval(cshape, t_grid)


def _xi_weights(base: CycleSolution, shape: BarrierShape, form: str,
                coupling: BarrierShape | None):
    """Vectors w1, w2 with Xi_j = w_j . xi, or the midpoint rule for delta."""
    m = len(base.t_grid) - 1
    y1 = base.sampled_y0[:, 0]
    y2 = base.sampled_y0[:, 2]
    if form == "additive":
        w = ensemble.simpson_weights(m, PERIOD / m)
        return w * y1, w * y2, None
    if form != "multiplicative":
        raise UnsupportedFormError(f"unknown noise form {form!r}")
    cv = _coupling_values(shape, coupling, base.t_grid)
    if cv is None:
        mid = m // 2
        return None, None, (mid, y1[mid] ** 2, y2[mid] ** 2)
    w = ensemble.simpson_weights(m, PERIOD / m)
    return -w * cv * y1 * y1, -w * cv * y2 * y2, None


def xi_moments(path: NoisePath, base: CycleSolution, shape: BarrierShape,
               form: str, coupling: BarrierShape | None = None) -> XiMoments:
    """Per-cycle noise moments by composite quadrature on the shared grid."""
    if len(path.samples) != len(base.t_grid):
        raise GridMismatchError(
            f"path has {len(path.samples)} samples, dense grid has {len(base.t_grid)}")
    w1, w2, delta_rule = _xi_weights(base, shape, form, coupling)
    xi = path.samples
    if delta_rule is not None:
        mid, y1sq, y2sq = delta_rule
        return XiMoments(float(-xi[mid] * y1sq), float(-xi[mid] * y2sq))
    return XiMoments(float(w1 @ xi), float(w2 @ xi))


def moment_determinant(base: CycleSolution) -> float:
    return base.i1 * base.j2 - base.i2 * base.j1


def equivalent_perturbations(xi: XiMoments, base: CycleSolution):
    """Invert the coupled moment equations ell*I_j + p*J_j = Xi_j."""
    d = moment_determinant(base)
    if abs(d) < 1e-12 * abs(base.i1 * base.j2):
        raise DegenerateMomentsError(
            f"I1*J2 - I2*J1 = {d:.3e} is numerically singular")
    ell = (base.j2 * xi.xi1 - base.j1 * xi.xi2) / d
    p = (base.i1 * xi.xi2 - base.i2 * xi.xi1) / d
    return ell, p


def integrate_stochastic_cycle(params: HillParams, shape: BarrierShape,
                               path: NoisePath, form: str,
                               coupling: BarrierShape | None = None) -> TransferMatrix:
    """Numerical monodromy of one noise-driven cycle (multiplicative form only).

    The additive form is affine and has no transfer matrix; use the
    equivalence route instead.
    """
    if form != "multiplicative":
        raise UnsupportedFormError(
            "additive noise has no per-cycle transfer matrix; use the equivalence route")
    mats = ensemble.batch_monodromy_noise(params.lam, params.q, shape,
                                          path.samples[None, :], coupling)
    resid = ensemble.max_det_residual(mats)
    if resid > DET_TOL:
        raise AccuracyError(f"monodromy determinant drift {resid:.3e} exceeds {DET_TOL}")
    return TransferMatrix.from_array(mats[0])


def linear_monodromy_response(base: CycleSolution, shape: BarrierShape,
                              coupling: BarrierShape | None = None):
    """Kernel triples mapping a path to its first-order monodromy change.

    With N_ij = int C xi y0i y0j dt, the first-order response is
    dM = M0 [[N12, N22], [-N11, -N12]]; returns the Simpson weight vectors
    (k11, k12, k22) with N_ij = k_ij . xi.
    """
    m = len(base.t_grid) - 1
    cv = _coupling_values(shape, coupling, base.t_grid)
    y1 = base.sampled_y0[:, 0]
    y2 = base.sampled_y0[:, 2]
    if cv is None:
        raise DomainError("linear response needs a function-type coupling")
    w = ensemble.simpson_weights(m, PERIOD / m) * cv
    return w * y1 * y1, w * y1 * y2, w * y2 * y2


def _base_and_frame(params, shape, tol, m):
    base = integrate_cycle(params, shape, tol=tol, n_dense=m)
    frame = None
    if abs(base.h) < 1.0 and abs(base.g) >= 1e-12:
        frame = elliptic_frame(TransferMatrix(base.h, base.y2pi, base.g, base.h2))
    return base, frame


def sample_equivalent_perturbations(params: HillParams, shape: BarrierShape,
                                    noise: NoiseConfig, n_cycles: int, seed: int,
                                    coupling: BarrierShape | None = None,
                                    tol: float = 1e-10):
    """Arrays (ell_k, p_k) induced by the noise over n_cycles cycles."""
    m = noise.n_intervals
    base = integrate_cycle(params, shape, tol=tol, n_dense=m)
    w1, w2, delta_rule = _xi_weights(base, shape, noise.form, coupling)
    d = moment_determinant(base)
    if abs(d) < 1e-12 * abs(base.i1 * base.j2):
        raise DegenerateMomentsError("moment system is numerically singular")
    ells = np.empty(n_cycles)
    ps = np.empty(n_cycles)
    for k0 in range(0, n_cycles, CHUNK):
        k1 = min(k0 + CHUNK, n_cycles)
        xi = _ou_batch(noise, seed, k0, k1)
        if delta_rule is not None:
            mid, y1sq, y2sq = delta_rule
            xi1 = -xi[:, mid] * y1sq
            xi2 = -xi[:, mid] * y2sq
        else:
            xi1 = xi @ w1
            xi2 = xi @ w2
        ells[k0:k1] = (base.j2 * xi1 - base.j1 * xi2) / d
        ps[k0:k1] = (base.i1 * xi2 - base.i2 * xi1) / d
    return ells, ps


def growth_stochastic(params: HillParams, shape: BarrierShape, noise: NoiseConfig,
                      n_cycles: int, seed: int, method: str = "equivalence", *,
                      coupling: BarrierShape | None = None,
                      estimator: str = "product", control: bool = False,
                      tol: float = 1e-10, renorm_every: int = 16,
                      warmup: int = DEFAULT_WARMUP,
                      n_batches: int = 32) -> GrowthEstimate:
    """Growth rate of the stochastic Hill's equation.

    method="direct" integrates each noise-driven cycle into its monodromy
    matrix (multiplicative form only).  method="equivalence" maps each
    cycle's noise moments to equivalent parameter perturbations and either
    multiplies the induced first-order maps (estimator="product") or plugs
    the sampled second moments, including the ell-p covariance, into the
    closed-form rate (estimator="moment").  Both methods draw the same
    per-cycle paths for a given seed, so their comparison isolates the
    equivalence error from shared sampling noise.
    """
    m = noise.n_intervals
    base, frame = _base_and_frame(params, shape, tol, m)

    if method == "direct":
        if noise.form != "multiplicative":
            raise UnsupportedFormError(
                "direct integration needs the multiplicative form; "
                "use method='equivalence' for additive noise")
        ctrl_triples = None
        if control:
            if frame is None:
                raise NotEllipticError("control variates need a stable base")
            k11, k12, k22 = linear_monodromy_response(base, shape, coupling)
            m0 = np.array([[base.h, base.y2pi], [base.g, base.h2]])
            # dM = M0 [[N12, N22], [-N11, -N12]] decomposed per kernel
            d11 = m0 @ np.array([[0.0, 0.0], [-1.0, 0.0]])
            d12 = m0 @ np.array([[1.0, 0.0], [0.0, -1.0]])
            d22 = m0 @ np.array([[0.0, 1.0], [0.0, 0.0]])
            t11 = control_triple(m0, frame, d11)
            t12 = control_triple(m0, frame, d12)
            t22 = control_triple(m0, frame, d22)
            ctrl_triples = (k11, k12, k22, t11, t12, t22)

        def source(k0, k1, rng):
            xi = _ou_batch(noise, seed, k0, k1)
            mats = ensemble.batch_monodromy_noise(params.lam, params.q, shape,
                                                  xi, coupling)
            resid = ensemble.max_det_residual(mats)
            if resid > DET_TOL:
                raise AccuracyError(
                    f"monodromy determinant drift {resid:.3e} exceeds {DET_TOL}")
            if ctrl_triples is None:
                return mats
            k11, k12, k22, t11, t12, t22 = ctrl_triples
            n11 = xi @ k11
            n12 = xi @ k12
            n22 = xi @ k22
            ctrl = (np.outer(n11, t11) + np.outer(n12, t12) + np.outer(n22, t22))
            return mats, ctrl

        return growth_product(source, n_cycles, seed=seed, renorm_every=renorm_every,
                              warmup=warmup, frame=frame, n_batches=n_batches)

    if method != "equivalence":
        raise DomainError("method must be 'direct' or 'equivalence'")
    if frame is None:
        raise NotEllipticError("the equivalence route needs a classically stable base")
    coeffs = first_order_coeffs(base)

    if estimator == "moment":
        ells, ps = sample_equivalent_perturbations(params, shape, noise, n_cycles,
                                                   seed, coupling, tol=tol)
        coef_a, coef_b = _eta_coefficients(base, coeffs)
        w = 0.5 * (1.0 - base.h ** 2) * (coef_a * ells + coef_b * ps) ** 2
        gamma = float(np.mean(w))
        stderr = float(np.std(w, ddof=1) / math.sqrt(n_cycles))
        return GrowthEstimate(gamma=gamma, stderr=stderr, n_cycles=n_cycles)
    if estimator != "product":
        raise DomainError("estimator must be 'product' or 'moment'")

    w1, w2, delta_rule = _xi_weights(base, shape, noise.form, coupling)
    d = moment_determinant(base)
    if abs(d) < 1e-12 * abs(base.i1 * base.j2):
        raise DegenerateMomentsError("moment system is numerically singular")
    t_ell = t_p = None
    if control:
        t_ell, t_p = _perturbation_controls(base, coeffs, frame)

    def source(k0, k1, rng):
        xi = _ou_batch(noise, seed, k0, k1)
        if delta_rule is not None:
            mid, y1sq, y2sq = delta_rule
            xi1 = -xi[:, mid] * y1sq
            xi2 = -xi[:, mid] * y2sq
        else:
            xi1 = xi @ w1
            xi2 = xi @ w2
        ells = (base.j2 * xi1 - base.j1 * xi2) / d
        ps = (base.i1 * xi2 - base.i2 * xi1) / d
        h, g = perturbed_elements(base, coeffs, ells, ps)
        mats = _assemble_sym_mats(h, g)
        if control:
            return mats, np.outer(ells, t_ell) + np.outer(ps, t_p)
        return mats

    return growth_product(source, n_cycles, seed=seed, renorm_every=renorm_every,
                          warmup=warmup, frame=frame, n_batches=n_batches)
