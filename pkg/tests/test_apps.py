import math

import numpy as np
import pytest

import hillrand as hr
from hillrand.apps import AxisRatios, ExtractedCycle, OrbitTrace
from hillrand.errors import DomainError, InsufficientTraceError

PI = math.pi


def test_omega_spherical_values():
    axes = AxisRatios(1.0, 1.0, 1.0)
    assert hr.omega_y_sq(axes, 3.0, 4.0) == pytest.approx(0.4, abs=1e-14)
    assert hr.omega_y_sq(axes, 0.0, 2.0) == pytest.approx(1.0, abs=1e-14)


def test_omega_origin_singularity():
    with pytest.raises(DomainError):
        hr.omega_y_sq(AxisRatios(1.0, 1.0, 1.0), 0.0, 0.0)


def test_omega_scale_covariance():
    axes = AxisRatios(2.0, 1.5, 0.5)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x, z = rng.uniform(-3, 3, 2)
        if x == 0 and z == 0:
            continue
        s = float(rng.uniform(0.1, 10))
        assert hr.omega_y_sq(axes, s * x, s * z) == pytest.approx(
            hr.omega_y_sq(axes, x, z) / s, rel=1e-13)


def test_axis_ordering_enforced():
    with pytest.raises(DomainError):
        AxisRatios(1.0, 2.0, 0.5)
    with pytest.raises(DomainError):
        AxisRatios(1.0, 0.5, 0.0)
    AxisRatios(1.0, 1.0, 1.0)  # spherical degenerate case is admitted


def test_trace_validation():
    with pytest.raises(DomainError):
        OrbitTrace(np.array([0.0, 0.0, 1.0]), np.ones(3), np.ones(3))
    with pytest.raises(DomainError):
        OrbitTrace(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.array([0.0, 0.0]))


def _sin2_trace(lam_s, q_s, n_cycles=3, n_per=2500):
    tt = np.linspace(0.0, n_cycles * PI, n_cycles * n_per)
    tau = np.mod(tt, PI)
    om = lam_s + q_s * (2 / PI) * np.sin(tau) ** 2
    r = 2.0 / om
    x = r * np.cos(0.37 * tt)
    z = r * np.sin(0.37 * tt)
    return OrbitTrace(tt, x, z)


def test_extract_cycles_round_trip():
    lam_s, q_s = 0.7, 0.3
    trace = _sin2_trace(lam_s, q_s)
    cycles = hr.extract_cycles(trace, AxisRatios(1.0, 1.0, 1.0))
    assert len(cycles) >= 1
    for cy in cycles:
        assert cy.lam == pytest.approx(lam_s, rel=0.01)
        assert cy.q == pytest.approx(q_s, rel=0.01)
        target = (2 / PI) * np.sin(cy.tau) ** 2
        assert np.max(np.abs(cy.qhat - target)) < 0.02 * np.max(target)


def test_extract_cycles_normalization_by_construction():
    trace = _sin2_trace(0.9, 0.4)
    cycles = hr.extract_cycles(trace, AxisRatios(1.0, 1.0, 1.0))
    for cy in cycles:
        assert np.trapezoid(cy.qhat, cy.tau) == pytest.approx(1.0, abs=1e-6)
        report = hr.barrier_validate(cy.barrier())
        assert not any(n == "normalization" for n, _ in report.violations)


def test_extract_constant_omega_zero_forcing():
    # non-spherical axes make r vary while Omega_y^2 stays exactly constant
    axes = AxisRatios(2.0, 1.0, 0.5)
    om0 = 0.7
    alpha = np.linspace(0.0, 5 * PI, 15000)
    rr = (4.0 / om0) / (np.sqrt(0.25 * np.cos(alpha) ** 2 + 4.0 * np.sin(alpha) ** 2)
                        + 1.0 * 1.0)
    x = rr * np.cos(alpha)
    z = rr * np.sin(alpha)
    cycles = hr.extract_cycles(OrbitTrace(alpha, x, z), axes)
    assert len(cycles) >= 2
    for cy in cycles:
        assert cy.flagged_zero_forcing
        assert cy.lam == pytest.approx(om0, abs=1e-10)
        with pytest.raises(DomainError):
            cy.barrier()


def test_extract_near_circular_orbit():
    # a circle has no turning points; a slightly eccentric orbit recovers
    # lam = 2/r with tiny forcing
    ecc = 1e-6
    tt = np.linspace(0.0, 6 * PI, 12000)
    r = 2.0 * (1.0 + ecc * np.cos(tt))
    x = r * np.cos(tt)
    z = r * np.sin(tt)
    cycles = hr.extract_cycles(OrbitTrace(tt, x, z), AxisRatios(1.0, 1.0, 1.0))
    for cy in cycles:
        assert cy.lam == pytest.approx(1.0, abs=1e-4)
        assert cy.q < 1e-5


def test_extract_insufficient_trace():
    tt = np.linspace(0.0, 1.0, 100)
    with pytest.raises(InsufficientTraceError):
        hr.extract_cycles(OrbitTrace(tt, 1.0 + tt, np.ones_like(tt)),
                          AxisRatios(1.0, 1.0, 1.0))


def test_pooled_barrier():
    trace = _sin2_trace(0.7, 0.3, n_cycles=4)
    cycles = hr.extract_cycles(trace, AxisRatios(1.0, 1.0, 1.0))
    grid, pooled = hr.pooled_barrier(cycles)
    target = (2 / PI) * np.sin(grid) ** 2
    assert np.max(np.abs(pooled - target)) < 0.02 * np.max(target)


def test_preheat_preset_shape():
    noise = hr.NoiseConfig(tau_c=0.2, sigma=0.02, dt=PI / 512, form="additive")
    cfg = hr.preheat_preset(0.5, 0.1, hr.BarrierShape.sin2(), noise)
    assert cfg.params.lam == 0.5
    assert cfg.noise.form == "multiplicative"
    assert cfg.noise_coupling == "unit"
    assert cfg.ell_dist.second_moment == 0.0
    with pytest.raises(DomainError):
        hr.preheat_preset(-1.0, 0.1, hr.BarrierShape.sin2(), noise)


def test_preheat_preset_zero_noise_is_classical():
    noise = hr.NoiseConfig(tau_c=0.2, sigma=0.0, dt=PI / 512, form="multiplicative")
    cfg = hr.preheat_preset(0.5, 0.1, hr.BarrierShape.sin2(), noise, n_cycles=5000)
    coupling = hr.BarrierShape.unit()
    est = hr.growth_stochastic(cfg.params, cfg.barrier, cfg.noise, cfg.n_cycles,
                               cfg.master_seed, method="direct", coupling=coupling)
    assert abs(est.gamma) <= max(3 * est.stderr, 1e-9)


def test_preheat_preset_stochastic_run_smoke():
    noise = hr.NoiseConfig(tau_c=0.2, sigma=0.02, dt=PI / 512, form="additive")
    cfg = hr.preheat_preset(0.5, 0.1, hr.BarrierShape.sin2(), noise, n_cycles=5000)
    coupling = hr.BarrierShape.unit()
    gd = hr.growth_stochastic(cfg.params, cfg.barrier, cfg.noise, cfg.n_cycles,
                              7, method="direct", coupling=coupling)
    ge = hr.growth_stochastic(cfg.params, cfg.barrier, cfg.noise, cfg.n_cycles,
                              7, method="equivalence", coupling=coupling)
    assert abs(gd.gamma - ge.gamma) < 3 * math.hypot(gd.stderr, ge.stderr) + 1e-6
