import numpy as np
import pytest
from hypothesis import given, strategies as st

from redatum.signals import BoundarySignal, InteriorSource
from redatum.domain import DomainSpec
from redatum.time_ops import (SignalWindow, delay, filter_extended, restrict, time_filter, time_reverse,
                              window_project, zero_extend)

DT = 0.0125
XS = np.linspace(-1, 1, 5)


def sig(fn, tau):
    t = np.round(np.arange(0, tau + DT / 2, DT), 12)
    return BoundarySignal(t, XS, fn(t)[:, None] * np.ones(XS.size))


def rand_sig(seed, tau=1.0):
    rng = np.random.default_rng(seed)
    t = np.round(np.arange(0, tau + DT / 2, DT), 12)
    return BoundarySignal(t, XS, rng.standard_normal((t.size, XS.size)))


@given(st.integers(0, 2**31 - 1))
def test_reverse_involution_and_isometry(seed):
    f = rand_sig(seed)
    assert np.array_equal(time_reverse(time_reverse(f)).values, f.values)
    assert time_reverse(f).norm() == pytest.approx(f.norm(), rel=1e-13)


def test_reverse_linear_ramp():
    f = sig(lambda t: t, 1.0)
    assert np.allclose(time_reverse(f).values[:, 0], 1.0 - f.times, atol=1e-14)


@pytest.mark.parametrize("tau", [0.5, 1.0])
def test_filter_closed_forms(tau):
    t = np.round(np.arange(0, tau + DT / 2, DT), 12)
    # trapezoid is exact for affine integrands
    assert np.allclose(time_filter(sig(lambda s: s, 2 * tau), tau).values[:, 0], tau * (tau - t), atol=1e-13)
    assert np.allclose(time_filter(sig(np.ones_like, 2 * tau), tau).values[:, 0], tau - t, atol=1e-13)
    # smooth integrand: O(dt^2) quadrature error
    exact = 0.5 * (np.cos(t) - np.cos(2 * tau - t))
    assert np.allclose(time_filter(sig(np.sin, 2 * tau), tau).values[:, 0], exact, atol=DT**2)


def test_filter_needs_double_span():
    with pytest.raises(ValueError):
        time_filter(sig(np.sin, 1.0), 1.0)


@given(st.integers(0, 2**31 - 1))
def test_filter_extended_is_J_of_zero_extension(seed):
    f = rand_sig(seed)
    a = filter_extended(f).values
    b = time_filter(zero_extend(f), 1.0).values
    # the fused form keeps the jump at tau out of the quadrature: they differ only at the last step
    assert np.allclose(a[:-1] - b[:-1], a[-2] - b[-2], atol=1e-12)
    assert not a[-1].any()


def test_filter_extended_closed_form():
    f = sig(np.cos, 1.0)
    exact = 0.5 * (np.sin(1.0) - np.sin(f.times))
    assert np.allclose(filter_extended(f).values[:, 0], exact, atol=DT**2)


@given(st.integers(0, 2**31 - 1))
def test_restrict_after_zero_extend_is_identity(seed):
    f = rand_sig(seed)
    g = zero_extend(f)
    assert g.times[-1] == pytest.approx(2.0)
    assert not g.values[f.times.size:].any()
    assert np.array_equal(restrict(g, 1.0).values, f.values)


def test_restrict_rejects_longer_span():
    with pytest.raises(ValueError):
        restrict(rand_sig(0, 1.0), 1.5)


def test_delay_zero_and_shift():
    f = rand_sig(3)
    assert np.array_equal(delay(f, 0.0).values, f.values)
    g = delay(f, 4 * DT)
    assert np.array_equal(g.values[4:], f.values[:-4])
    assert not g.values[:4].any()
    assert np.array_equal(g.times, f.times)


def test_delay_rejects_off_grid_and_negative():
    f = rand_sig(1)
    with pytest.raises(ValueError):
        delay(f, 0.5 * DT)
    with pytest.raises(ValueError):
        delay(f, -DT)


@given(st.integers(0, 2**31 - 1))
def test_window_projection_idempotent_self_adjoint(seed):
    f, g = rand_sig(seed), rand_sig(seed + 1)
    w = SignalWindow.last(0.5, 1.0)
    Pf = window_project(f, w)
    assert np.array_equal(window_project(Pf, w).values, Pf.values)
    assert Pf.inner(g) == pytest.approx(f.inner(window_project(g, w)), rel=1e-12, abs=1e-12)


def test_window_validation():
    with pytest.raises(ValueError):
        SignalWindow(0.6, 0.4, 1.0)
    with pytest.raises(ValueError):
        window_project(rand_sig(0), SignalWindow(0.3 + DT / 3, 0.8, 1.0))
    assert SignalWindow.last(2.0, 1.0).tau_start == 0.0


def test_operators_act_on_interior_sources():
    spec = DomainSpec.from_spacing(0.1, x_half=4.0, gamma_half_width=1.5)
    F = InteriorSource.gaussian(spec, t_c=0.4, x_c=0.0, depth_c=0.3, a=100.0, dt=DT, t_end=1.0)
    R = time_reverse(F)
    assert np.allclose(R.at(0.2), F.at(0.8))
    D = delay(F, 8 * DT)
    assert np.allclose(D.at(0.5), F.at(0.4))
    with pytest.raises(TypeError):
        time_reverse(np.zeros(4))
