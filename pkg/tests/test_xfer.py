import math

import numpy as np
import pytest

import hillrand as hr
from hillrand.errors import (AccuracyError, DomainError, NotEllipticError,
                             SingularMapError)
from hillrand.random_hill import control_triple
from hillrand.xfer import TransferMatrix, elliptic_frame, growth_product


def test_matrix_from_elements_quarter_rotation():
    m = hr.matrix_from_elements(0.0, 1.0)
    assert (m.m11, m.m12, m.m21, m.m22) == (0.0, -1.0, 1.0, 0.0)


def test_matrix_from_elements_hyperbolic():
    m = hr.matrix_from_elements(2.0, 1.0)
    assert (m.m11, m.m12, m.m21, m.m22) == (2.0, 3.0, 1.0, 2.0)
    assert m.det == pytest.approx(1.0, abs=1e-15)


def test_matrix_from_elements_singular():
    with pytest.raises(SingularMapError):
        hr.matrix_from_elements(0.5, 0.0)


def test_decompose_quarter_rotation():
    form = hr.elliptical_decompose(hr.matrix_from_elements(0.0, 1.0))
    assert form.theta == pytest.approx(math.pi / 2)
    assert form.L == pytest.approx(1.0)


def test_decompose_free_oscillator_base():
    lam = 0.5
    phi = math.pi * math.sqrt(lam)
    m = hr.matrix_from_elements(math.cos(phi), -math.sqrt(lam) * math.sin(phi))
    form = hr.elliptical_decompose(m)
    assert form.theta == pytest.approx(phi, abs=1e-12)
    assert form.L == pytest.approx(-1.0 / math.sqrt(lam), abs=1e-12)
    assert form.L == pytest.approx(-1.41421, abs=1e-5)


def test_decompose_rejects_hyperbolic():
    with pytest.raises(NotEllipticError):
        hr.elliptical_decompose(hr.matrix_from_elements(1.2, 1.0))


def test_decompose_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        h = float(rng.uniform(-1 + 1e-9, 1 - 1e-9))
        g = float(rng.uniform(0.1, 3.0)) * (1 if rng.random() < 0.5 else -1)
        form = hr.elliptical_decompose(hr.matrix_from_elements(h, g))
        assert math.cos(form.theta) == pytest.approx(h, abs=1e-12)
        assert math.sin(form.theta) / form.L == pytest.approx(g, abs=1e-12)


def test_growth_identity_is_zero():
    est = growth_product(np.eye(2), 1000, renorm_every=16)
    assert est.gamma == 0.0
    assert est.stderr == 0.0


def test_growth_constant_hyperbolic_calibration():
    est = growth_product(np.array([[2.0, 3.0], [1.0, 2.0]]), 100_000, warmup=64)
    assert est.gamma == pytest.approx(math.log(2.0 + math.sqrt(3.0)), abs=1e-6)


def test_growth_constant_elliptic_is_bounded():
    m = hr.matrix_from_elements(0.3, 1.1).as_array()
    est = growth_product(m, 100_000, warmup=64)
    assert abs(est.gamma) <= 3 * est.stderr


def _elliptic_eta_source(theta, l0, eta_scale, with_ctrl):
    """Rotations with length parameter L0*(1+eta_k), eta_k gaussian."""
    m0 = np.array([[math.cos(theta), -l0 * math.sin(theta)],
                   [math.sin(theta) / l0, math.cos(theta)]])
    frame = elliptic_frame(TransferMatrix.from_array(m0))
    d_eta = np.array([[0.0, -l0 * math.sin(theta)],
                      [-math.sin(theta) / l0, 0.0]])
    triple = control_triple(m0, frame, d_eta)

    def source(k0, k1, rng):
        eta = eta_scale * rng.standard_normal(k1 - k0)
        lk = l0 * (1.0 + eta)
        mats = np.empty((k1 - k0, 2, 2))
        mats[:, 0, 0] = math.cos(theta)
        mats[:, 0, 1] = -lk * math.sin(theta)
        mats[:, 1, 0] = math.sin(theta) / lk
        mats[:, 1, 1] = math.cos(theta)
        if with_ctrl:
            return mats, np.outer(eta, triple)
        return mats

    return source, frame


def test_growth_matches_eta_formula_on_synthetic_rotations():
    theta, l0, scale = math.pi / 3, -1.2, 0.01
    source, frame = _elliptic_eta_source(theta, l0, scale, with_ctrl=True)
    est = growth_product(source, 200_000, seed=11, frame=frame, warmup=64)
    predicted = hr.growth_from_eta(scale ** 2, math.sin(theta) ** 2)
    assert 0.9 <= est.gamma / predicted <= 1.1


def test_growth_norm_and_renorm_invariance():
    theta, l0, scale = 1.1, 0.8, 0.05
    source, frame = _elliptic_eta_source(theta, l0, scale, with_ctrl=False)
    base = growth_product(source, 100_000, seed=5, frame=frame, renorm_every=16)
    for norm in ("euclidean", "max"):
        for renorm in (1, 16, 256):
            est = growth_product(source, 100_000, seed=5, frame=frame,
                                 renorm_every=renorm, norm=norm)
            tol = 2 * (base.stderr + est.stderr) + 1e-12
            assert abs(est.gamma - base.gamma) <= tol


def test_growth_deterministic_given_seed():
    source, frame = _elliptic_eta_source(1.1, 0.8, 0.05, with_ctrl=False)
    a = growth_product(source, 50_000, seed=9, frame=frame)
    b = growth_product(source, 50_000, seed=9, frame=frame)
    assert (a.gamma, a.stderr) == (b.gamma, b.stderr)


def test_growth_overflow_error():
    with pytest.raises(AccuracyError, match="renorm_every"):
        growth_product(np.array([[2.0, 3.0], [1.0, 2.0]]), 2000,
                       renorm_every=2000, n_batches=1)


def test_growth_argument_validation():
    with pytest.raises(DomainError):
        growth_product(np.eye(2), 8, renorm_every=16)
    with pytest.raises(DomainError):
        growth_product(np.eye(2), 100, norm="manhattan")
    with pytest.raises(DomainError):
        growth_product("nonsense", 100)


def test_growth_from_eta_values():
    assert hr.growth_from_eta(0.0, 0.77) == 0.0
    assert hr.growth_from_eta(0.02, 0.5) == pytest.approx(math.log(1.005), abs=1e-12)
    assert hr.growth_from_eta(0.02, 0.5) == pytest.approx(0.0049875, abs=1e-7)
    with pytest.raises(DomainError):
        hr.growth_from_eta(-0.1, 0.5)
    with pytest.raises(DomainError):
        hr.growth_from_eta(0.1, 1.5)


def test_det_drift_over_many_cycles():
    source, _ = _elliptic_eta_source(1.1, 0.8, 0.05, with_ctrl=False)
    drift = hr.product_det_drift(source, 1_000_000, seed=2)
    assert drift < 1e-6
