"""Transfer-matrix algebra and the matrix-product growth-rate engine.

The growth rate is the Lyapunov exponent of the infinite product of per-cycle
maps, estimated by iterating a vector and accumulating log norms (O(N), no
overflow, and independent of the norm choice).  Error bars come from batch
means.  Two optional refinements serve the small-fluctuation regime, where
the raw estimator converges very slowly:

* an elliptic *frame*: iterate S^-1 M S for the diagonal S that turns the
  unperturbed map into a pure rotation.  This is a norm choice, so the limit
  is unchanged, but the bounded oscillation of the increments drops from O(1)
  to O(eps), which removes an O(1/N) bias floor and shrinks the batch noise;

* per-cycle *control variates*: sources may supply coefficients of the exact
  first-order (linear-in-noise) part of each log increment.  That part has
  exactly zero mean, so subtracting it is bias-free and leaves O(eps^2)
  fluctuations around the O(eps^2) signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError, NotEllipticError, SingularMapError
from .model import stream

try:
    import numba

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

CHUNK = 65536
MIN_G = 1e-12


@dataclass(frozen=True)
class TransferMatrix:
    """Unit-determinant 2x2 cycle map.

    Maps built from (h, g) take the symmetric form [[h, (h^2-1)/g], [g, h]];
    general unit-determinant matrices (intra-cycle noise breaks the midpoint
    symmetry) are admitted too.
    """

    m11: float
    m12: float
    m21: float
    m22: float

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @classmethod
    def from_array(cls, a) -> "TransferMatrix":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))


@dataclass(frozen=True)
class EllipticalForm:
    """Rotation angle theta in (0, pi) and signed length parameter L."""

    theta: float
    L: float


@dataclass(frozen=True)
class GrowthEstimate:
    """Growth rate per cycle (nats), batch-means standard error, cycles used."""

    gamma: float
    stderr: float
    n_cycles: int


def matrix_from_elements(h: float, g: float) -> TransferMatrix:
    """Symmetric-form cycle map [[h, (h^2-1)/g], [g, h]]."""
    if abs(g) < MIN_G:
        raise SingularMapError(f"|g| = {abs(g):.3e} below {MIN_G}; map is singular")
    return TransferMatrix(h, (h * h - 1.0) / g, g, h)


def elliptical_decompose(m: TransferMatrix) -> EllipticalForm:
    """Angle/length parametrization of a classically stable symmetric map.

    theta = arccos(h) on the principal branch, sin(theta) >= 0; all sign
    information lives in L = sin(theta)/g.
    """
    h, g = m.m11, m.m21
    if abs(h) >= 1.0:
        raise NotEllipticError(f"|h| = {abs(h):.6g} >= 1: hyperbolic/parabolic regime")
    if abs(g) < MIN_G:
        raise SingularMapError("g ~ 0 in elliptical decomposition")
    theta = math.acos(h)
    return EllipticalForm(theta=theta, L=math.sin(theta) / g)


def elliptic_frame(m: TransferMatrix) -> np.ndarray:
    """Diagonal similarity S = diag(sqrt|L|, 1/sqrt|L|) that rotates the map."""
    form = elliptical_decompose(m)
    s = math.sqrt(abs(form.L))
    return np.array([[s, 0.0], [0.0, 1.0 / s]])


def growth_from_eta(mean_eta_sq: float, mean_sin2theta: float) -> float:
    """Growth rate log[1 + (1/2) <eta^2> <sin^2 theta>] of elliptic products."""
    if mean_eta_sq < 0.0 or mean_sin2theta < 0.0:
        raise DomainError("moments must be nonnegative")
    if mean_sin2theta > 1.0 + 1e-12:
        raise DomainError("<sin^2 theta> cannot exceed 1")
    return math.log1p(0.5 * mean_eta_sq * mean_sin2theta)


# -- product engine -----------------------------------------------------

def _kernel_impl(m11, m12, m21, m22, c11, c12, c22, has_ctrl,
                 u1, u2, k0, warmup, renorm_every, batch_len, use_max,
                 log_b, ctrl_b):
    n = m11.shape[0]
    status = 0
    for i in range(n):
        k = k0 + i
        if has_ctrl and k >= warmup:
            r2 = u1 * u1 + u2 * u2
            b = (k - warmup) // batch_len
            ctrl_b[b] += (c11[i] * u1 * u1 + 2.0 * c12[i] * u1 * u2
                          + c22[i] * u2 * u2) / r2
        v1 = m11[i] * u1 + m12[i] * u2
        v2 = m21[i] * u1 + m22[i] * u2
        u1 = v1
        u2 = v2
        if k < warmup:
            if (k + 1) % renorm_every == 0 or (k + 1) == warmup or i == n - 1:
                if use_max:
                    r = max(abs(u1), abs(u2))
                else:
                    r = math.sqrt(u1 * u1 + u2 * u2)
                if not (r > 0.0 and math.isfinite(r)):
                    return u1, u2, 1
                u1 /= r
                u2 /= r
        else:
            idx = k - warmup
            if ((idx + 1) % renorm_every == 0 or (idx + 1) % batch_len == 0
                    or i == n - 1):
                if use_max:
                    r = max(abs(u1), abs(u2))
                else:
                    r = math.sqrt(u1 * u1 + u2 * u2)
                if not (r > 0.0 and math.isfinite(r)):
                    return u1, u2, 1
                log_b[idx // batch_len] += math.log(r)
                u1 /= r
                u2 /= r
    return u1, u2, status


if HAVE_NUMBA:
    _kernel = numba.njit(cache=True)(_kernel_impl)
else:
    _kernel = _kernel_impl


def _normalize_source(matrix_source):
    """Wrap the accepted source forms into fetch(k0, k1, rng) -> (mats, ctrl)."""
    if isinstance(matrix_source, TransferMatrix):
        arr = matrix_source.as_array()

        def fetch(k0, k1, rng):
            return np.broadcast_to(arr, (k1 - k0, 2, 2)), None

        return fetch
    if isinstance(matrix_source, np.ndarray):
        if matrix_source.shape == (2, 2):
            arr = matrix_source

            def fetch(k0, k1, rng):
                return np.broadcast_to(arr, (k1 - k0, 2, 2)), None

            return fetch
        arr = matrix_source

        def fetch(k0, k1, rng):
            if k1 > arr.shape[0]:
                raise DomainError("matrix array shorter than requested cycle count")
            return arr[k0:k1], None

        return fetch
    if callable(matrix_source):
        def fetch(k0, k1, rng):
            out = matrix_source(k0, k1, rng)
            if isinstance(out, tuple):
                return out
            return out, None

        return fetch
    raise DomainError("matrix_source must be a TransferMatrix, array, or callable")


def growth_product(matrix_source, n_cycles: int, seed: int = 0,
                   renorm_every: int = 16, *, warmup: int = 0,
                   norm: str = "euclidean", frame: np.ndarray | None = None,
                   n_batches: int = 32) -> GrowthEstimate:
    """Lyapunov growth rate of the matrix product by renormalized iteration.

    matrix_source is a TransferMatrix (constant map), an (N, 2, 2) array, or
    a callable(k0, k1, rng) returning the per-cycle maps for that index range
    (optionally with control-variate coefficients as a second item).  Each
    chunk's rng derives from (seed, chunk index), so results are
    deterministic and chunks could be generated in parallel.

    warmup cycles are iterated but not counted; they absorb the transient of
    the initial direction.  frame applies a similarity transform (a norm
    choice) before iterating; control coefficients must live in that frame.
    """
    if renorm_every < 1:
        raise DomainError("renorm_every must be >= 1")
    if n_cycles < renorm_every:
        raise DomainError("need n_cycles >= renorm_every")
    if norm not in ("euclidean", "max"):
        raise DomainError("norm must be 'euclidean' or 'max'")
    fetch = _normalize_source(matrix_source)

    if frame is not None:
        frame = np.asarray(frame, dtype=float)
        frame_inv = np.linalg.inv(frame)
    nb = int(min(n_batches, n_cycles))
    batch_len = -(-n_cycles // nb)  # ceil
    nb = -(-n_cycles // batch_len)
    log_b = np.zeros(nb)
    ctrl_b = np.zeros(nb)
    counts = np.array([min(batch_len, n_cycles - b * batch_len) for b in range(nb)],
                      dtype=float)

    total = warmup + n_cycles
    u1, u2 = 1.0, 0.0
    use_max = norm == "max"
    empty = np.zeros(1)
    for ci, k0 in enumerate(range(0, total, CHUNK)):
        k1 = min(k0 + CHUNK, total)
        mats, ctrl = fetch(k0, k1, stream(seed, ci))
        mats = np.ascontiguousarray(mats, dtype=float)
        if frame is not None:
            mats = np.einsum("ab,nbc,cd->nad", frame_inv, mats, frame)
            mats = np.ascontiguousarray(mats)
        m11 = mats[:, 0, 0].copy()
        m12 = mats[:, 0, 1].copy()
        m21 = mats[:, 1, 0].copy()
        m22 = mats[:, 1, 1].copy()
        if ctrl is not None:
            ctrl = np.ascontiguousarray(ctrl, dtype=float)
            c11, c12, c22 = ctrl[:, 0].copy(), ctrl[:, 1].copy(), ctrl[:, 2].copy()
            has_ctrl = True
        else:
            c11 = c12 = c22 = empty
            has_ctrl = False
        u1, u2, status = _kernel(m11, m12, m21, m22, c11, c12, c22, has_ctrl,
                                 u1, u2, k0, warmup, renorm_every, batch_len,
                                 use_max, log_b, ctrl_b)
        if status != 0:
            raise AccuracyError("vector norm overflowed or vanished despite "
                                "renormalization; reduce renorm_every")

    contrib = log_b - ctrl_b
    gamma = float(np.sum(contrib) / n_cycles)
    if nb >= 2:
        batch_gammas = contrib / counts
        stderr = float(np.std(batch_gammas, ddof=1) / math.sqrt(nb))
    else:
        stderr = 0.0
    return GrowthEstimate(gamma=gamma, stderr=stderr, n_cycles=n_cycles)


# -- determinant-drift diagnostic ---------------------------------------

def _det_chunk_impl(m11, m12, m21, m22, p, logdet):
    # iterate both basis vectors with QR reorthonormalization so the second
    # direction survives the Lyapunov growth of the first; the product of the
    # R diagonals tracks log|det|
    n = m11.shape[0]
    q11, q21, q12, q22 = p[0], p[1], p[2], p[3]
    for i in range(n):
        a1 = m11[i] * q11 + m12[i] * q21
        a2 = m21[i] * q11 + m22[i] * q21
        b1 = m11[i] * q12 + m12[i] * q22
        b2 = m21[i] * q12 + m22[i] * q22
        r11 = math.sqrt(a1 * a1 + a2 * a2)
        q11 = a1 / r11
        q21 = a2 / r11
        r12 = q11 * b1 + q21 * b2
        u1 = b1 - r12 * q11
        u2 = b2 - r12 * q21
        r22 = math.sqrt(u1 * u1 + u2 * u2)
        q12 = u1 / r22
        q22 = u2 / r22
        logdet += math.log(r11) + math.log(r22)
    p[0], p[1], p[2], p[3] = q11, q21, q12, q22
    return logdet


if HAVE_NUMBA:
    _det_chunk = numba.njit(cache=True)(_det_chunk_impl)
else:
    _det_chunk = _det_chunk_impl


def product_det_drift(matrix_source, n_cycles: int, seed: int = 0) -> float:
    """|log |det|| of the iterated product via the two renormalized basis vectors."""
    fetch = _normalize_source(matrix_source)
    p = np.array([1.0, 0.0, 0.0, 1.0])
    logdet = 0.0
    for ci, k0 in enumerate(range(0, n_cycles, CHUNK)):
        k1 = min(k0 + CHUNK, n_cycles)
        mats, _ = fetch(k0, k1, stream(seed, ci))
        mats = np.ascontiguousarray(mats, dtype=float)
        logdet = _det_chunk(mats[:, 0, 0].copy(), mats[:, 0, 1].copy(),
                            mats[:, 1, 0].copy(), mats[:, 1, 1].copy(),
                            p, logdet)
    return abs(logdet)
