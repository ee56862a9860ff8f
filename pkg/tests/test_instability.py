import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from redatum.instability import (HadamardConfig, asymptotic_start, evaluate_family, fit_growth, harmonic_residual,
                                 interior_norm_quadrature, log_boundary_norm, log_interior_norm,
                                 log_radial_integral, monotone_from, phi, polar_laplacian)


def test_config_validation():
    for kw in ({"eps": 0.0}, {"eps": 1.0}, {"theta1": 0.6}, {"theta0": 1.6, "theta1": 0.2}, {"n_max": 2},
               {"k": 0}):
        with pytest.raises(ValueError):
            HadamardConfig(**kw)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_family_is_harmonic(n):
    for r, th in [(0.95, 0.1), (0.9, -0.2)]:
        assert harmonic_residual(n, r, th) < 1e-6


def test_stencil_detects_non_harmonic():
    f = lambda r, th: r**2 + 0 * th
    assert abs(polar_laplacian(f, 0.9, 0.1) - 4.0) < 1e-6


@given(st.integers(1, 200), st.floats(-np.pi, np.pi))
def test_unit_modulus_on_circle(n, th):
    assert abs(phi(n, 1.0, th)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 20])
def test_radial_integral_closed_form(n):
    q = 0.9
    assert np.exp(log_radial_integral(n, q)) == pytest.approx(quad(lambda r: r ** (1 - 2 * n), q, 1)[0], rel=1e-10)


@pytest.mark.parametrize("n", [2, 10, 25])
def test_interior_norm_against_2d_quadrature(n):
    cfg = HadamardConfig()
    assert np.exp(log_interior_norm(cfg, n)) == pytest.approx(interior_norm_quadrature(cfg, n), rel=1e-6)


def test_interior_norm_matches_asymptotic_form():
    cfg = HadamardConfig()
    q = cfg.q
    ratios = [np.exp(2 * log_interior_norm(cfg, n)) / (q ** (-2 * (n - 1)) / (n - 1))
              for n in range(10, cfg.n_max + 1)]
    assert max(ratios) / min(ratios) < 1.2


def test_norms_finite_up_to_200():
    cfg = HadamardConfig(n_max=200)
    for n in (50, 120, 200):
        assert np.isfinite(log_interior_norm(cfg, n)) and np.isfinite(log_boundary_norm(cfg, n))
        assert log_interior_norm(cfg, n) > 0
    fit = fit_growth(cfg)
    assert np.all(np.isfinite(fit.log_interior))


def test_evaluate_family_range():
    cfg = HadamardConfig(n_max=10)
    a, b = evaluate_family(cfg, 5)
    assert a > 0 and b > 0
    with pytest.raises(ValueError):
        evaluate_family(cfg, 11)


def test_growth_slopes():
    cfg = HadamardConfig(eps=0.1, n_max=60, k=1)
    fit = fit_growth(cfg)
    expected = -np.log(1 - 0.1)
    assert fit.slope_interior == pytest.approx(expected, rel=0.05)
    assert fit.slope_boundary_log <= cfg.k + 1.5
    assert fit.n[0] == asymptotic_start(cfg) == 23


@pytest.mark.parametrize("k", [1, 2, 3])
def test_boundary_growth_polynomial(k):
    fit = fit_growth(HadamardConfig(k=k))
    assert fit.slope_boundary_log == pytest.approx(k, abs=0.5)


def test_ratio_monotone_for_thick_annulus():
    fit = fit_growth(HadamardConfig(eps=0.5, k=1), n_min=5)
    assert np.all(np.diff(fit.log_ratio) > 0)
    assert monotone_from(fit) == 5


def test_ratio_monotone_beyond_threshold_for_thin_annulus():
    fit = fit_growth(HadamardConfig(eps=0.1, k=1), n_min=2)
    n0 = monotone_from(fit)
    assert n0 is not None and n0 < 30
    d = np.diff(fit.log_ratio)
    assert np.all(d[fit.n[:-1] >= n0] > 0)


def test_degenerate_fit_rejected():
    with pytest.raises(ValueError):
        fit_growth(HadamardConfig(n_max=5), n_min=4)
