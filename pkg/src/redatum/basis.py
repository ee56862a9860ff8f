"""Separable Gaussian pulse basis on ``[0, tau] x Gamma``.

    phi_{i,j}(t, x) = g_i(t) h_j(x),   g_i ~ exp(-a_t (t - t_i)^2),   h_j ~ exp(-a_x (x - x_j)^2)

Each factor is normalised by trapezoid quadrature on the receiver grid, the
temporal one over ``[0, tau]`` (so pulses cut by ``t = 0`` or ``t = tau`` still
have unit norm). The Gram matrix is therefore ``kron(G_t, G_x)``. Flat
indices are time-major, ``k = i * N_x + j``, so a delay by one source
interval is a shift by ``N_x``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erf

from .domain import trapezoid_weights_1d
from .signals import BoundarySignal, GaussianSource, time_axis


@dataclass(frozen=True)
class PulseGrid:
    t_centers: tuple
    x_centers: tuple
    a_t: float
    a_x: float
    dt_r: float
    dx_r: float
    gamma_half_width: float
    T: float
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "t_centers", tuple(float(t) for t in self.t_centers))
        object.__setattr__(self, "x_centers", tuple(float(x) for x in self.x_centers))
        if not all(0 < t < self.T for t in self.t_centers):
            raise ValueError("pulse center times must lie in (0, T)")
        if not all(abs(x) < self.gamma_half_width for x in self.x_centers):
            raise ValueError("pulse center positions must lie inside Gamma")
        if self.a_t <= 0 or self.a_x <= 0:
            raise ValueError("sharpness must be positive")
        time_axis(self.T, self.dt_r)
        n = self.gamma_half_width / self.dx_r
        if abs(n - round(n)) > 1e-9:
            raise ValueError("Gamma must be a whole number of receiver intervals")

    # presets -------------------------------------------------------------

    @classmethod
    def uniform(cls, *, dt_s: float, dx_s: float, a_t: float, a_x: float, dt_r: float,
                dx_r: float, T: float = 2.0, gamma_half_width: float = 3.1,
                x_margin: float = 0.0, t_offset: float = 0.0, t_min: float = 0.0,
                name: str = "custom") -> "PulseGrid":
        """Centers ``t_i = t_offset + i dt_s`` in ``(t_min, T)`` and ``x_j = j dx_s`` with ``|x_j| < l - x_margin``."""
        t = t_offset + dt_s * np.arange(0, int(np.ceil(T / dt_s)) + 1)
        t = t[(t > max(t_min, 1e-9)) & (t < T - 1e-9)]
        nx = int(np.floor((gamma_half_width - x_margin) / dx_s - 1e-9))
        x = dx_s * np.arange(-nx, nx + 1)
        return cls(tuple(t), tuple(x), a_t, a_x, dt_r, dx_r, gamma_half_width, T, name)

    @classmethod
    def desk(cls) -> "PulseGrid":
        # Spacing 0.0625 with a*spacing^2 equal to the published basis (1382 * 0.025^2).
        # Centers sit a quarter interval after the multiples of the spacing, so the
        # first pulse of every window starts right after tau - r. Pulses closer than
        # two standard deviations to t = 0 start with a jump and are left out.
        d = 0.0625
        a = 1382.0 * 0.025**2 / d**2
        std = 1 / np.sqrt(2 * a)
        return cls.uniform(dt_s=d, dx_s=d, a_t=a, a_x=a, dt_r=0.0125, dx_r=0.025,
                           x_margin=5 * std, t_offset=d / 4, t_min=2 * std, name="desk")

    @classmethod
    def paper(cls) -> "PulseGrid":
        d = 0.025
        return cls.uniform(dt_s=d, dx_s=d, a_t=1382.0, a_x=1382.0, dt_r=0.1 * d, dx_r=0.5 * d,
                           x_margin=0.1 - 1e-9, name="paper")

    @classmethod
    def from_name(cls, name: str) -> "PulseGrid":
        if name == "desk":
            return cls.desk()
        if name == "paper":
            return cls.paper()
        path = Path(name)
        if not path.exists():
            raise ValueError(f"unknown basis {name!r} (use desk, paper or a JSON file)")
        return cls.from_json(path)

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=1))
        return path

    @classmethod
    def from_json(cls, path) -> "PulseGrid":
        return cls(**json.loads(Path(path).read_text()))

    # geometry ------------------------------------------------------------

    @property
    def dt_s(self) -> float:
        return float(np.diff(self.t_centers).mean()) if len(self.t_centers) > 1 else self.T

    @property
    def dx_s(self) -> float:
        return float(np.diff(self.x_centers).mean()) if len(self.x_centers) > 1 else 1.0

    @property
    def n_x(self) -> int:
        return len(self.x_centers)

    def n_t(self, tau: float) -> int:
        """Number of center times inside ``(0, tau)``."""
        return int(np.sum(np.asarray(self.t_centers) < tau - 1e-9))

    def size(self, tau: float) -> int:
        return self.n_t(tau) * self.n_x

    def receiver_times(self, tau: float) -> np.ndarray:
        return time_axis(tau, self.dt_r)

    def receiver_xs(self) -> np.ndarray:
        n = int(round(self.gamma_half_width / self.dx_r))
        return self.dx_r * np.arange(-n, n + 1)

    def index(self, i: int, j: int, tau: float) -> int:
        if not (0 <= i < self.n_t(tau) and 0 <= j < self.n_x):
            raise IndexError(f"pulse ({i}, {j}) out of range for tau={tau}")
        return i * self.n_x + j

    def window(self, t0: float, t1: float, tau: float) -> np.ndarray:
        """Flat indices of pulses with ``t0 < t_i < t1`` (within ``S^tau``)."""
        t = np.asarray(self.t_centers[: self.n_t(tau)])
        rows = np.nonzero((t > t0 + 1e-9) & (t < t1 - 1e-9))[0]
        return (rows[:, None] * self.n_x + np.arange(self.n_x)[None, :]).ravel()

    def window_rows(self, t0: float, t1: float, tau: float) -> np.ndarray:
        t = np.asarray(self.t_centers[: self.n_t(tau)])
        return np.nonzero((t > t0 + 1e-9) & (t < t1 - 1e-9))[0]

    # factors ---------------------------------------------------------------

    def _raw_t(self, tau: float, times: np.ndarray) -> np.ndarray:
        tc = np.asarray(self.t_centers[: self.n_t(tau)])
        return np.exp(-self.a_t * (times[None, :] - tc[:, None]) ** 2)

    def temporal_norms(self, tau: float) -> np.ndarray:
        """``C`` for the time factors: inverse trapezoid norms on ``[0, tau]``."""
        times = self.receiver_times(tau)
        w = trapezoid_weights_1d(times.size, self.dt_r)
        raw = self._raw_t(tau, times)
        return 1.0 / np.sqrt(raw**2 @ w)

    def spatial_norms(self) -> np.ndarray:
        xs = self.receiver_xs()
        w = trapezoid_weights_1d(xs.size, self.dx_r)
        raw = np.exp(-self.a_x * (xs[None, :] - np.asarray(self.x_centers)[:, None]) ** 2)
        return 1.0 / np.sqrt(raw**2 @ w)

    def temporal_factors(self, tau: float, times: np.ndarray | None = None) -> np.ndarray:
        """``g_i(t)`` on ``[0, tau]`` (zero beyond tau): shape ``(n_t, len(times))``."""
        times = self.receiver_times(tau) if times is None else np.asarray(times, dtype=float)
        out = self.temporal_norms(tau)[:, None] * self._raw_t(tau, times)
        out[:, times > tau + 1e-9] = 0.0
        return out

    def spatial_factors(self, xs: np.ndarray | None = None) -> np.ndarray:
        xs = self.receiver_xs() if xs is None else np.asarray(xs, dtype=float)
        raw = np.exp(-self.a_x * (xs[None, :] - np.asarray(self.x_centers)[:, None]) ** 2)
        raw[:, np.abs(xs) > self.gamma_half_width + 1e-9] = 0.0
        return self.spatial_norms()[:, None] * raw

    def temporal_antiderivative(self, tau: float, times: np.ndarray) -> np.ndarray:
        """``int_0^t g_i(s) ds`` in closed form (``t`` clipped to ``[0, tau]``)."""
        tc = np.asarray(self.t_centers[: self.n_t(tau)])[:, None]
        t = np.clip(np.asarray(times, dtype=float), 0.0, tau)[None, :]
        ra = np.sqrt(self.a_t)
        scale = 0.5 * np.sqrt(np.pi) / ra
        return self.temporal_norms(tau)[:, None] * scale * (erf(ra * (t - tc)) - erf(-ra * tc))

    def source(self, i: int, j: int, tau: float) -> GaussianSource:
        """Analytic Neumann source for ``Theta phi_{i,j}`` (switched off after ``tau``)."""
        self.index(i, j, tau)
        amp = self.temporal_norms(tau)[i] * self.spatial_norms()[j]
        return GaussianSource(self.t_centers[i], self.x_centers[j], self.a_t, self.a_x,
                              amplitude=float(amp), cut=tau)

    def to_dict(self) -> dict:
        return asdict(self)


def build_pulse(i: int, j: int, grid: PulseGrid, tau: float | None = None) -> BoundarySignal:
    """``phi_{i,j}`` sampled on the receiver grid of ``[0, tau] x Gamma``."""
    tau = grid.T if tau is None else tau
    grid.index(i, j, tau)
    g = grid.temporal_factors(tau)[i]
    h = grid.spatial_factors()[j]
    return BoundarySignal(grid.receiver_times(tau), grid.receiver_xs(), np.outer(g, h))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``G = kron(G_t, G_x)`` with Cholesky factors of both blocks."""

    G_t: np.ndarray
    G_x: np.ndarray
    tau: float
    _cho_t: tuple = field(repr=False, default=None)
    _cho_x: tuple = field(repr=False, default=None)

    def __post_init__(self):
        try:
            object.__setattr__(self, "_cho_t", cho_factor(self.G_t, lower=True))
            object.__setattr__(self, "_cho_x", cho_factor(self.G_x, lower=True))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("Gram matrix is not positive definite; the basis is degenerate") from exc

    @property
    def shape(self) -> tuple[int, int]:
        n = self.G_t.shape[0] * self.G_x.shape[0]
        return (n, n)

    def dense(self) -> np.ndarray:
        return np.kron(self.G_t, self.G_x)

    def _as_blocks(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(self.G_t.shape[0], self.G_x.shape[0], *v.shape[1:])

    def matvec(self, v: np.ndarray) -> np.ndarray:
        V = self._as_blocks(np.asarray(v, dtype=float))
        out = np.tensordot(self.G_t, V, axes=(1, 0))
        out = np.moveaxis(np.tensordot(self.G_x, out, axes=(1, 1)), 0, 1)
        return out.reshape(v.shape)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """``G^{-1} v`` for a vector or a matrix of column vectors."""
        v = np.asarray(v, dtype=float)
        V = self._as_blocks(v)
        nt, nx = self.G_t.shape[0], self.G_x.shape[0]
        out = cho_solve(self._cho_t, V.reshape(nt, -1)).reshape(V.shape)
        out = np.moveaxis(out, 1, 0)
        out = cho_solve(self._cho_x, out.reshape(nx, -1)).reshape(out.shape)
        return np.moveaxis(out, 0, 1).reshape(v.shape)

    def window(self, rows: np.ndarray) -> "GramMatrix":
        """Gram matrix of the sub-basis with time rows ``rows`` (all positions)."""
        return GramMatrix(self.G_t[np.ix_(rows, rows)], self.G_x, self.tau)


def gram_matrix(grid: PulseGrid, tau: float | None = None) -> GramMatrix:
    tau = grid.T if tau is None else tau
    times = grid.receiver_times(tau)
    wt = trapezoid_weights_1d(times.size, grid.dt_r)
    g = grid.temporal_factors(tau, times)
    xs = grid.receiver_xs()
    wx = trapezoid_weights_1d(xs.size, grid.dx_r)
    h = grid.spatial_factors(xs)
    return GramMatrix((g * wt) @ g.T, (h * wx) @ h.T, tau)


@dataclass(frozen=True, eq=False)
class BasisCoefficients:
    values: np.ndarray
    grid: PulseGrid
    tau: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size(self.tau),):
            raise ValueError(f"expected {self.grid.size(self.tau)} coefficients, got {values.shape}")
        object.__setattr__(self, "values", values)

    def blocks(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_t(self.tau), self.grid.n_x)

    def reconstruct(self, times: np.ndarray | None = None, xs: np.ndarray | None = None) -> BoundarySignal:
        times = self.grid.receiver_times(self.tau) if times is None else times
        xs = self.grid.receiver_xs() if xs is None else xs
        g = self.grid.temporal_factors(self.tau, times)
        h = self.grid.spatial_factors(xs)
        return BoundarySignal(times, xs, g.T @ self.blocks() @ h)

    def source(self) -> "ExpansionSource":
        return ExpansionSource(self)


@dataclass(frozen=True, eq=False)
class ExpansionSource:
    """Neumann source ``Theta sum_k c_k phi_k``, evaluated exactly at any ``(t, x)``."""

    coefficients: BasisCoefficients

    def sample(self, t, x) -> np.ndarray:
        c = self.coefficients
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g = c.grid.temporal_factors(c.tau, t)
        # Half value at the cut keeps the solver consistent with trapezoid sums.
        g[:, np.isclose(t, c.tau, rtol=0, atol=1e-9)] *= 0.5
        g[:, t < -1e-12] = 0.0
        h = c.grid.spatial_factors(np.atleast_1d(np.asarray(x, dtype=float)))
        return g.T @ c.blocks() @ h

    def support_interval(self) -> tuple[float, float]:
        c = self.coefficients
        rows = np.nonzero(np.any(c.blocks() != 0, axis=1))[0]
        if rows.size == 0:
            return (0.0, 0.0)
        tc = np.asarray(c.grid.t_centers)
        half = 6.0 / np.sqrt(2 * c.grid.a_t)
        return max(0.0, tc[rows[0]] - half), min(c.tau, tc[rows[-1]] + half)


def inner_products(signal: BoundarySignal, grid: PulseGrid, tau: float) -> np.ndarray:
    """``<phi_k, signal>`` for every pulse (trapezoid on the receiver grid)."""
    times = grid.receiver_times(tau)
    xs = grid.receiver_xs()
    if signal.values.shape != (times.size, xs.size) or not np.allclose(signal.times, times) \
            or not np.allclose(signal.xs, xs):
        raise ValueError("signal is not sampled on the basis receiver grid")
    wt = trapezoid_weights_1d(times.size, grid.dt_r)
    wx = trapezoid_weights_1d(xs.size, grid.dx_r)
    g = grid.temporal_factors(tau, times) * wt
    h = grid.spatial_factors(xs) * wx
    return (g @ signal.values @ h.T).ravel()


def project(signal: BoundarySignal, G: GramMatrix, grid: PulseGrid) -> BasisCoefficients:
    """Orthogonal projection onto ``S^tau``: ``G^{-1} <phi_k, signal>``."""
    return BasisCoefficients(G.solve(inner_products(signal, grid, G.tau)), grid, G.tau)


def delay_coefficients(c: BasisCoefficients, steps: int) -> BasisCoefficients:
    """Shift by ``steps`` source intervals: coefficient of ``phi_{i,j}`` moves to ``phi_{i+steps,j}``.

    Coefficients pushed past the last center time are dropped.
    """
    B = c.blocks()
    out = np.zeros_like(B)
    if steps >= 0:
        if steps < B.shape[0]:
            out[steps:] = B[: B.shape[0] - steps]
    else:
        out[: B.shape[0] + steps] = B[-steps:]
    return BasisCoefficients(out.ravel(), c.grid, c.tau)
