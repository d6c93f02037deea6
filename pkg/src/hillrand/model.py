"""Domain types: barrier shapes, Hill parameters, perturbation distributions,
noise configuration, and the JSON run-configuration document.

The forcing profile ("barrier shape") lives on one cycle [0, pi], integrates
to one, and is symmetric about the midpoint.  The catalog holds the three
shapes used throughout: (2/pi) sin^2 t, (8/3pi) sin^4 t, and a unit delta
impulse at t = pi/2.  Tabulated shapes are piecewise linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

PERIOD = math.pi

# Shapes the paper-style analysis treats as the standard catalog.
CATALOG_KINDS = ("sin2", "sin4", "delta-midpoint")
_ALL_KINDS = CATALOG_KINDS + ("tabulated", "unit")

NORMALIZATION_TOL = 1e-8
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class BarrierShape:
    """Normalized periodic forcing profile on [0, pi].

    kind is one of "sin2", "sin4", "delta-midpoint", "tabulated", or "unit".
    "unit" is the constant-1 coupling profile used when noise multiplies the
    solution directly instead of through the barrier; it is not a member of
    the barrier catalog and does not integrate to one.
    """

    kind: str
    samples: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in _ALL_KINDS:
            raise ConfigError(f"unknown barrier kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.samples is None or len(self.samples) < 2:
                raise ConfigError("tabulated barrier needs at least two (t, value) samples")
            t = np.asarray([s[0] for s in self.samples], dtype=float)
            if t[0] < -1e-12 or t[-1] > PERIOD + 1e-12:
                raise ConfigError("tabulated barrier samples must lie in [0, pi]")
            if np.any(np.diff(t) <= 0):
                raise ConfigError("tabulated barrier sample times must be strictly increasing")
        elif self.samples is not None:
            raise ConfigError(f"samples are only valid for tabulated barriers, not {self.kind!r}")

    # -- constructors -------------------------------------------------

    @classmethod
    def sin2(cls) -> "BarrierShape":
        return cls("sin2")

    @classmethod
    def sin4(cls) -> "BarrierShape":
        return cls("sin4")

    @classmethod
    def delta(cls) -> "BarrierShape":
        """Unit impulse at the cycle midpoint, handled analytically everywhere."""
        return cls("delta-midpoint")

    @classmethod
    def unit(cls) -> "BarrierShape":
        return cls("unit")

    @classmethod
    def tabulated(cls, samples, renormalize: bool = False) -> "BarrierShape":
        """Piecewise-linear shape from (t, value) pairs.

        With renormalize=True the values are scaled so the trapezoid integral
        is exactly one; loaders use this because user data rarely arrives
        normalized.  Direct construction keeps the raw values so validation
        can report the true residual.
        """
        pts = [(float(t), float(v)) for t, v in samples]
        if renormalize:
            t = np.array([p[0] for p in pts])
            v = np.array([p[1] for p in pts])
            total = np.trapezoid(v, t)
            if abs(total) < 1e-300:
                raise ConfigError("cannot renormalize a barrier with zero integral")
            pts = list(zip(t.tolist(), (v / total).tolist()))
        return cls("tabulated", tuple(pts))

    # -- helpers ------------------------------------------------------

    @property
    def is_delta(self) -> bool:
        return self.kind == "delta-midpoint"

    def node_arrays(self):
        t = np.asarray([s[0] for s in self.samples], dtype=float)
        v = np.asarray([s[1] for s in self.samples], dtype=float)
        return t, v


def barrier_eval(shape: BarrierShape, t):
    """Pointwise value of the shape; accepts scalars or arrays.

    The delta shape has no pointwise value; callers integrate it through the
    midpoint jump rule instead.
    """
    if shape.is_delta:
        raise DomainError("delta-midpoint barrier has no pointwise value")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < -1e-12) or np.any(arr > PERIOD + 1e-12):
        raise DomainError("barrier evaluated outside [0, pi]")
    if shape.kind == "sin2":
        out = (2.0 / PERIOD) * np.sin(arr) ** 2
    elif shape.kind == "sin4":
        out = (8.0 / (3.0 * PERIOD)) * np.sin(arr) ** 4
    elif shape.kind == "unit":
        out = np.ones_like(arr)
    else:
        tk, vk = shape.node_arrays()
        out = np.interp(arr, tk, vk)
    return float(out) if np.isscalar(t) else out


def barrier_integral(shape: BarrierShape) -> float:
    """Integral of the shape over one cycle, by quadrature matched to the kind."""
    if shape.is_delta:
        return 1.0
    if shape.kind == "tabulated":
        t, v = shape.node_arrays()
        total = float(np.trapezoid(v, t))
        # account for implicit zero extension when samples do not span [0, pi]
        return total
    from scipy.integrate import quad

    val, _ = quad(lambda x: barrier_eval(shape, x), 0.0, PERIOD,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


@dataclass(frozen=True)
class BarrierReport:
    ok: bool
    violations: tuple[tuple[str, float], ...]

    @property
    def first(self):
        return self.violations[0] if self.violations else None


def barrier_validate(shape: BarrierShape, n_check: int = 1001) -> BarrierReport:
    """Check normalization, midpoint symmetry, and nonnegativity.

    Violations are reported with their measured residuals, never raised.
    The delta shape satisfies all three by definition.
    """
    if shape.is_delta:
        return BarrierReport(True, ())
    violations = []
    resid = abs(barrier_integral(shape) - 1.0)
    if resid > NORMALIZATION_TOL:
        violations.append(("normalization", float(resid)))
    tt = np.linspace(0.0, PERIOD, n_check)
    vals = barrier_eval(shape, tt)
    mirror = barrier_eval(shape, PERIOD - tt)
    sym = float(np.max(np.abs(vals - mirror)))
    if sym > SYMMETRY_TOL:
        violations.append(("symmetry", sym))
    neg = float(np.min(vals))
    if neg < -1e-12:
        violations.append(("nonnegativity", -neg))
    return BarrierReport(not violations, tuple(violations))


@dataclass(frozen=True)
class HillParams:
    """Oscillation parameter lambda > 0 and forcing strength q."""

    lam: float
    q: float

    def __post_init__(self):
        if not (self.lam > 0.0):
            raise DomainError(f"lambda must be positive, got {self.lam}")


_DIST_KINDS = ("uniform-symmetric", "gaussian", "two-point")


@dataclass(frozen=True)
class PerturbationDist:
    """Zero-mean perturbation distribution for the cycle-to-cycle parameters.

    scale means: half-width A for uniform on [-A, A], standard deviation for
    gaussian, and the two-point values +/-A.
    """

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in _DIST_KINDS:
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if self.scale < 0.0:
            raise ConfigError("distribution scale must be >= 0")

    @property
    def second_moment(self) -> float:
        if self.kind == "uniform-symmetric":
            return self.scale ** 2 / 3.0
        if self.kind == "gaussian":
            return self.scale ** 2
        return self.scale ** 2  # two-point at +/-A

    def sample(self, rng: np.random.Generator, size: int):
        if self.scale == 0.0:
            return np.zeros(size)
        if self.kind == "uniform-symmetric":
            return rng.uniform(-self.scale, self.scale, size)
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(size)
        return self.scale * (2.0 * rng.integers(0, 2, size) - 1.0)


_NOISE_FORMS = ("additive", "multiplicative")


@dataclass(frozen=True)
class NoiseConfig:
    """Colored-noise parameters: correlation time, stationary std, grid step, form."""

    tau_c: float
    sigma: float
    dt: float
    form: str

    def __post_init__(self):
        if not (self.tau_c > 0.0):
            raise ConfigError("tau_c must be positive")
        if self.sigma < 0.0:
            raise ConfigError("sigma must be >= 0")
        if not (self.dt > 0.0):
            raise ConfigError("dt must be positive")
        if self.dt > self.tau_c / 4.0 + 1e-15:
            raise ConfigError("dt must satisfy dt <= tau_c/4")
        if self.dt > PERIOD / 256.0 + 1e-15:
            raise ConfigError("dt must satisfy dt <= pi/256")
        if self.form not in _NOISE_FORMS:
            raise ConfigError(f"noise form must be one of {_NOISE_FORMS}, got {self.form!r}")

    @property
    def n_intervals(self) -> int:
        """Uniform grid intervals per cycle: dt snapped to divide pi, kept even
        so the Simpson weights and the midpoint sample are exact."""
        m = max(256, int(round(PERIOD / self.dt)))
        return m + (m % 2)


@dataclass(frozen=True)
class RunConfig:
    """Complete description of a reproducible run."""

    params: HillParams
    barrier: BarrierShape
    ell_dist: PerturbationDist
    p_dist: PerturbationDist
    n_cycles: int
    master_seed: int
    integrator_tol: float = 1e-10
    renorm_every: int = 16
    noise: NoiseConfig | None = None
    # Coupling profile for the multiplicative noise term: "barrier" reproduces
    # the q-coupled form, "unit" couples the noise straight to the solution
    # (the preheating preset).  Not part of the external JSON schema.
    noise_coupling: str = "barrier"

    def __post_init__(self):
        if self.n_cycles < 1:
            raise ConfigError("n_cycles must be >= 1")
        if not (0.0 < self.integrator_tol <= 1e-3):
            raise ConfigError("integrator_tol must lie in (0, 1e-3]")
        if self.renorm_every < 1:
            raise ConfigError("renorm_every must be >= 1")
        if self.noise_coupling not in ("barrier", "unit"):
            raise ConfigError("noise_coupling must be 'barrier' or 'unit'")


def stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for (master_seed, index...) via seed-sequence splitting.

    Serial and parallel runs agree because every consumer derives its stream
    from its own counter rather than from a shared mutable generator.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, indices)]))


# -- JSON run-configuration document ----------------------------------

def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"missing required field {key!r} in {where}")
    return doc[key]


def _barrier_from_doc(doc) -> BarrierShape:
    if not isinstance(doc, dict):
        raise ConfigError("barrier must be an object with a 'kind' field")
    kind = _require(doc, "kind", "barrier")
    if kind == "tabulated":
        samples = _require(doc, "samples", "barrier")
        return BarrierShape.tabulated(samples, renormalize=True)
    if kind in CATALOG_KINDS:
        return BarrierShape(kind)
    raise ConfigError(f"unknown barrier kind {kind!r}")


def _dist_from_doc(doc, name: str) -> PerturbationDist:
    if not isinstance(doc, dict):
        raise ConfigError(f"{name} must be an object with 'kind' and 'scale'")
    kind = _require(doc, "kind", name)
    scale = _require(doc, "scale", name)
    return PerturbationDist(kind, float(scale))


def config_from_dict(doc: dict) -> RunConfig:
    """Build a RunConfig from the JSON document schema.

    All fields are required except renorm_every (default 16) and
    integrator_tol (default 1e-10); the optional noise block carries
    {tau_c, sigma, dt, form}.
    """
    params_doc = _require(doc, "params", "run config")
    try:
        params = HillParams(float(_require(params_doc, "lambda", "params")),
                            float(_require(params_doc, "q", "params")))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    barrier = _barrier_from_doc(_require(doc, "barrier", "run config"))
    ell = _dist_from_doc(_require(doc, "ell_dist", "run config"), "ell_dist")
    p = _dist_from_doc(_require(doc, "p_dist", "run config"), "p_dist")
    n_cycles = int(_require(doc, "n_cycles", "run config"))
    master_seed = int(_require(doc, "master_seed", "run config"))
    tol = float(doc.get("integrator_tol", 1e-10))
    renorm = int(doc.get("renorm_every", 16))
    noise = None
    if doc.get("noise") is not None:
        nd = doc["noise"]
        noise = NoiseConfig(float(_require(nd, "tau_c", "noise")),
                            float(_require(nd, "sigma", "noise")),
                            float(_require(nd, "dt", "noise")),
                            str(_require(nd, "form", "noise")))
    coupling = str(doc.get("noise_coupling", "barrier"))
    return RunConfig(params, barrier, ell, p, n_cycles, master_seed,
                     integrator_tol=tol, renorm_every=renorm, noise=noise,
                     noise_coupling=coupling)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    barrier: dict = {"kind": cfg.barrier.kind}
    if cfg.barrier.kind == "tabulated":
        barrier["samples"] = [list(s) for s in cfg.barrier.samples]
    doc = {
        "params": {"lambda": cfg.params.lam, "q": cfg.params.q},
        "barrier": barrier,
        "ell_dist": {"kind": cfg.ell_dist.kind, "scale": cfg.ell_dist.scale},
        "p_dist": {"kind": cfg.p_dist.kind, "scale": cfg.p_dist.scale},
        "n_cycles": cfg.n_cycles,
        "master_seed": cfg.master_seed,
        "integrator_tol": cfg.integrator_tol,
        "renorm_every": cfg.renorm_every,
    }
    if cfg.noise is not None:
        doc["noise"] = {"tau_c": cfg.noise.tau_c, "sigma": cfg.noise.sigma,
                        "dt": cfg.noise.dt, "form": cfg.noise.form}
    if cfg.noise_coupling != "barrier":
        doc["noise_coupling"] = cfg.noise_coupling
    return doc
