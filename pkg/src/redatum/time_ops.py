"""Time operators on sampled signals: R, J, Theta, rho, P and Z.

Every operator acts on the time axis only and is applied samplewise. A
signal is either a :class:`BoundarySignal` (time on axis 0) or an
:class:`InteriorSource` (time on the last axis of its temporal factors);
plain arrays are treated as time-major.

All signals start at ``t = 0``. Delays and windows must fall on the sample
grid; nothing here interpolates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .signals import BoundarySignal, InteriorSource, time_axis, uniform_step


@dataclass(frozen=True)
class SignalWindow:
    """Time window ``[tau_start, tau_end]`` inside ``[0, tau]``."""

    tau_start: float
    tau_end: float
    tau: float

    def __post_init__(self):
        if not 0 <= self.tau_start < self.tau_end <= self.tau + 1e-12:
            raise ValueError("window must satisfy 0 <= start < end <= tau")

    @classmethod
    def last(cls, r: float, tau: float) -> "SignalWindow":
        """The window ``[tau - r, tau]`` selected by ``P_r``."""
        return cls(max(tau - r, 0.0), tau, tau)


def _parts(f):
    """Return (time axis, samples with time on axis 0, rebuild)."""
    if isinstance(f, BoundarySignal):
        return f.times, f.values, lambda v, t: BoundarySignal(t, f.xs, v)
    if isinstance(f, InteriorSource):
        return f.times, f.temporal.T, lambda v, t: InteriorSource(f.spec, t, np.ascontiguousarray(v.T), f.spatial)
    raise TypeError(f"unsupported signal type {type(f).__name__}")


def _steps(t: float, dt: float, what: str) -> int:
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what} {t} is not a multiple of the sample interval {dt}")
    return n


def _check_span(times, tau: float, what: str = "signal"):
    if abs(times[0]) > 1e-12:
        raise ValueError(f"{what} must start at t = 0")
    dt = uniform_step(times)
    n = _steps(tau, dt, "tau")
    if abs(times[-1] - tau) > 1e-9 * max(1.0, tau):
        raise ValueError(f"{what} must be sampled on [0, {tau}] (ends at {times[-1]})")
    return dt, n


def time_reverse(f, tau: float | None = None):
    """``(R f)(t) = f(tau - t)``."""
    times, v, rebuild = _parts(f)
    tau = times[-1] if tau is None else tau
    _check_span(times, tau)
    return rebuild(v[::-1].copy(), times)


def _cumulative(v: np.ndarray, dt: float) -> np.ndarray:
    return cumulative_trapezoid(v, dx=dt, axis=0, initial=0.0)


def time_filter(f, tau: float):
    """``(J f)(t) = 1/2 int_t^{2 tau - t} f(s) ds`` for ``t`` in ``[0, tau]``.

    Input on ``[0, 2 tau]``, output on ``[0, tau]``; trapezoid rule on the
    sample grid.
    """
    times, v, rebuild = _parts(f)
    if times[-1] < 2 * tau - 1e-9:
        raise ValueError(f"time_filter needs samples up to 2*tau = {2 * tau}, got {times[-1]}")
    dt, n = _check_span(times[: _steps(2 * tau, uniform_step(times), "2*tau") + 1], 2 * tau)
    n //= 2
    C = _cumulative(v[: 2 * n + 1], dt)
    out = 0.5 * (C[2 * n - np.arange(n + 1)] - C[: n + 1])
    return rebuild(out, times[: n + 1])


def filter_extended(f, tau: float | None = None):
    """``J Theta f``: ``(J Theta f)(t) = 1/2 int_t^tau f(s) ds`` for ``f`` on ``[0, tau]``.

    Fusing the two operators keeps the jump of ``Theta f`` at ``tau`` out of
    the quadrature.
    """
    times, v, rebuild = _parts(f)
    tau = times[-1] if tau is None else tau
    dt, n = _check_span(times, tau)
    C = _cumulative(v, dt)
    return rebuild(0.5 * (C[-1] - C), times)


def zero_extend(f, tau: float | None = None):
    """``Theta f``: extend by zero from ``[0, tau]`` to ``[0, 2 tau]``."""
    times, v, rebuild = _parts(f)
    tau = times[-1] if tau is None else tau
    dt, n = _check_span(times, tau)
    out = np.concatenate([v, np.zeros((n,) + v.shape[1:])])
    return rebuild(out, time_axis(2 * tau, dt))


def restrict(f, tau: float):
    """``rho f = f|[0, tau]``."""
    times, v, rebuild = _parts(f)
    dt = uniform_step(times)
    n = _steps(tau, dt, "tau")
    if n >= times.size:
        raise ValueError(f"cannot restrict a signal on [0, {times[-1]}] to [0, {tau}]")
    return rebuild(v[: n + 1].copy(), times[: n + 1])


def window_mask(times: np.ndarray, w: SignalWindow) -> np.ndarray:
    dt = uniform_step(times)
    _steps(w.tau_start, dt, "window start")
    _steps(w.tau_end, dt, "window end")
    tol = 1e-9 * dt
    return (times >= w.tau_start - tol) & (times <= w.tau_end + tol)


def window_project(f, w: SignalWindow):
    """Zero every sample outside ``[w.tau_start, w.tau_end]``."""
    times, v, rebuild = _parts(f)
    keep = window_mask(times, w)
    out = v * keep.reshape((-1,) + (1,) * (v.ndim - 1))
    return rebuild(out, times)


def delay(f, s: float):
    """``(Z_s f)(t) = f(t - s)``, zero for ``t < s``; the time axis is unchanged."""
    times, v, rebuild = _parts(f)
    dt = uniform_step(times)
    k = _steps(s, dt, "delay")
    if k < 0:
        raise ValueError("delay must be non-negative")
    out = np.zeros_like(v)
    if k < v.shape[0]:
        out[k:] = v[: v.shape[0] - k]
    return rebuild(out, times)
