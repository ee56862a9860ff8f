"""Boundary signals, interior sources and wavefield snapshots.

Anything the wave solver accepts as Neumann data implements
``sample(t, x) -> array (len(t), len(x))``. Sampled data (:class:`BoundarySignal`)
does so by bilinear interpolation; analytic sources evaluate exactly, which
matters because the solver grid is finer than any receiver grid.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .domain import DomainSpec, RegionMask, trapezoid_weights_1d
from .fileio import read_blob, write_blob


def uniform_step(axis: np.ndarray, what: str = "time axis") -> float:
    axis = np.asarray(axis, dtype=float)
    if axis.size < 2:
        raise ValueError(f"{what} needs at least two samples")
    d = np.diff(axis)
    step = float(d.mean())
    if not np.allclose(d, step, rtol=1e-9, atol=1e-12):
        raise ValueError(f"{what} is not uniformly sampled")
    return step


def time_axis(t_end: float, dt: float, t_start: float = 0.0) -> np.ndarray:
    n = int(round((t_end - t_start) / dt))
    if abs(t_start + n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError(f"t_end={t_end} is not on the dt={dt} grid")
    return t_start + dt * np.arange(n + 1)


@dataclass(frozen=True, eq=False)
class BoundarySignal:
    """Samples of a function on ``[0, tau] x Gamma``; ``values[l, k] = f(t_l, x_k)``."""

    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        xs = np.asarray(self.xs, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (times.size, xs.size):
            raise ValueError(f"values shape {values.shape} does not match axes ({times.size}, {xs.size})")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return uniform_step(self.times)

    @property
    def dx(self) -> float:
        return uniform_step(self.xs, "receiver axis")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def with_values(self, values, times=None) -> "BoundarySignal":
        return replace(self, values=values, times=self.times if times is None else times)

    def weights(self, surface_speed=None) -> np.ndarray:
        """Trapezoid weights for ``dt x dS`` (``dS = c^-1 dx``)."""
        wt = trapezoid_weights_1d(self.times.size, self.dt)
        wx = trapezoid_weights_1d(self.xs.size, self.dx)
        if surface_speed is not None:
            wx = wx / np.asarray(surface_speed, dtype=float)
        return np.outer(wt, wx)

    def inner(self, other: "BoundarySignal", surface_speed=None) -> float:
        if other.values.shape != self.values.shape:
            raise ValueError("signals are sampled differently")
        return float(np.sum(self.weights(surface_speed) * self.values * other.values))

    def norm(self, surface_speed=None) -> float:
        return float(np.sqrt(max(self.inner(self, surface_speed), 0.0)))

    def sample(self, t, x) -> np.ndarray:
        """Bilinear interpolation; zero outside the sampled rectangle."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        wt = _interp_matrix(self.times, t)
        wx = _interp_matrix(self.xs, x)
        return wt @ self.values @ wx.T

    def support_interval(self) -> tuple[float, float]:
        nz = np.nonzero(np.any(self.values != 0, axis=1))[0]
        if nz.size == 0:
            return (0.0, 0.0)
        return float(self.times[max(nz[0] - 1, 0)]), float(self.times[nz[-1]])


def _interp_matrix(axis: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Dense linear-interpolation matrix from samples on ``axis`` to ``points``."""
    n = axis.size
    out = np.zeros((points.size, n))
    h = uniform_step(axis, "axis")
    s = (points - axis[0]) / h
    inside = (s >= -1e-9) & (s <= n - 1 + 1e-9)
    s = np.clip(s, 0, n - 1)
    i0 = np.minimum(np.floor(s).astype(int), n - 2)
    frac = s - i0
    rows = np.nonzero(inside)[0]
    out[rows, i0[rows]] = 1.0 - frac[rows]
    out[rows, i0[rows] + 1] += frac[rows]
    return out


def _cut_factor(t: np.ndarray, cut: float | None) -> np.ndarray:
    """Indicator of ``t <= cut`` with the trapezoid half-value at ``t == cut``."""
    if cut is None:
        return np.ones_like(t)
    fac = (t < cut).astype(float)
    fac[np.isclose(t, cut, rtol=0, atol=1e-9)] = 0.5
    return fac


@dataclass(frozen=True)
class GaussianSource:
    """``amplitude * exp(-a_t (t - t_c)^2 - a_x (x - x_c)^2)`` on the surface.

    With ``a_t = a_x = 1/sigma^2`` this is the moving-receivers test source.
    ``cut`` switches the source off after that time.
    """

    t_c: float
    x_c: float
    a_t: float
    a_x: float
    amplitude: float = 1.0
    cut: float | None = None

    @classmethod
    def from_sigma(cls, t_c: float, x_c: float, sigma: float, **kw) -> "GaussianSource":
        return cls(t_c, x_c, 1.0 / sigma**2, 1.0 / sigma**2, **kw)

    def sample(self, t, x) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        gt = np.exp(-self.a_t * (t - self.t_c) ** 2) * _cut_factor(t, self.cut)
        gx = np.exp(-self.a_x * (x - self.x_c) ** 2)
        return self.amplitude * np.outer(gt, gx)

    def delayed(self, s: float) -> "GaussianSource":
        cut = None if self.cut is None else self.cut + s
        return replace(self, t_c=self.t_c + s, cut=cut)

    def support_interval(self, n_std: float = 6.0) -> tuple[float, float]:
        half = n_std / np.sqrt(2 * self.a_t)
        end = self.t_c + half if self.cut is None else min(self.cut, self.t_c + half)
        return max(0.0, self.t_c - half), end


@dataclass(frozen=True)
class SumSource:
    """Linear combination of Neumann sources."""

    parts: tuple
    weights: tuple

    def sample(self, t, x) -> np.ndarray:
        out = None
        for w, p in zip(self.weights, self.parts):
            term = w * p.sample(t, x)
            out = term if out is None else out + term
        return out

    def support_interval(self) -> tuple[float, float]:
        spans = [p.support_interval() for p in self.parts if hasattr(p, "support_interval")]
        if len(spans) != len(self.parts):
            return (0.0, np.inf)
        return min(s[0] for s in spans), max(s[1] for s in spans)


@dataclass(frozen=True, eq=False)
class InteriorSource:
    """Space-time forcing ``F(t, x) = sum_m temporal[m](t) * spatial[m](x)``.

    Temporal factors are sampled on a uniform axis starting at ``times[0]``;
    values between samples are linearly interpolated and values outside the
    axis are zero.
    """

    spec: DomainSpec
    times: np.ndarray
    temporal: np.ndarray
    spatial: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        temporal = np.atleast_2d(np.asarray(self.temporal, dtype=float))
        spatial = np.asarray(self.spatial, dtype=float)
        if spatial.ndim == 2:
            spatial = spatial[None]
        if temporal.shape != (spatial.shape[0], times.size):
            raise ValueError("temporal factors must have shape (terms, len(times))")
        if spatial.shape[1:] != self.spec.shape:
            raise ValueError(f"spatial factors must live on the {self.spec.shape} grid")
        uniform_step(times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "temporal", temporal)
        object.__setattr__(self, "spatial", spatial)

    @classmethod
    def gaussian(cls, spec: DomainSpec, *, t_c: float, x_c: float, depth_c: float,
                 a: float, dt: float, t_end: float, amplitude: float = 1.0) -> "InteriorSource":
        """``exp(-a((t - t_c)^2 + (x - x_c)^2 + (y + depth_c)^2))`` sampled on ``[0, t_end]``."""
        times = time_axis(t_end, dt)
        X, Y = np.meshgrid(spec.x, spec.y)
        spatial = np.exp(-a * ((X - x_c) ** 2 + (Y + depth_c) ** 2))
        spatial[spatial < 1e-300] = 0.0
        temporal = amplitude * np.exp(-a * (times - t_c) ** 2)
        return cls(spec, times, temporal[None], spatial[None])

    @property
    def dt(self) -> float:
        return uniform_step(self.times)

    @property
    def n_terms(self) -> int:
        return self.spatial.shape[0]

    def temporal_at(self, t) -> np.ndarray:
        """Temporal factors at times ``t``: shape ``(terms, len(t))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.temporal @ _interp_matrix(self.times, t).T

    def at(self, t: float) -> np.ndarray:
        coef = self.temporal_at([t])[:, 0]
        return np.tensordot(coef, self.spatial, axes=1)

    def map_temporal(self, fn, times=None) -> "InteriorSource":
        """New source with ``fn`` applied to every temporal factor (axis -1)."""
        new = np.asarray(fn(self.temporal), dtype=float)
        return InteriorSource(self.spec, self.times if times is None else times, new, self.spatial)

    def scaled(self, s: float) -> "InteriorSource":
        return InteriorSource(self.spec, self.times, s * self.temporal, self.spatial)

    def __add__(self, other: "InteriorSource") -> "InteriorSource":
        if not np.array_equal(self.times, other.times):
            raise ValueError("sources must share a time axis")
        return InteriorSource(self.spec, self.times,
                              np.vstack([self.temporal, other.temporal]),
                              np.concatenate([self.spatial, other.spatial]))

    def spatial_bbox(self) -> tuple[slice, slice]:
        nz = np.any(self.spatial != 0, axis=0)
        if not nz.any():
            return slice(0, 0), slice(0, 0)
        rows = np.nonzero(nz.any(axis=1))[0]
        cols = np.nonzero(nz.any(axis=0))[0]
        return slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)

    def support_interval(self) -> tuple[float, float]:
        nz = np.nonzero(np.any(self.temporal != 0, axis=0))[0]
        if nz.size == 0:
            return (0.0, 0.0)
        return float(self.times[max(nz[0] - 1, 0)]), float(self.times[min(nz[-1] + 1, self.times.size - 1)])


def mask_id(mask: np.ndarray | None) -> str:
    if mask is None:
        return "full"
    return hashlib.sha256(np.packbits(np.asarray(mask, dtype=bool)).tobytes()).hexdigest()[:12]


def _mask_runs(mask: np.ndarray) -> list[list[int]]:
    runs = []
    for k, row in enumerate(mask):
        padded = np.concatenate([[False], row, [False]]).astype(np.int8)
        d = np.diff(padded)
        for s, e in zip(np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]):
            runs.append([int(k), int(s), int(e)])
    return runs


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Wavefield at one instant; values outside ``mask`` are zero."""

    spec: DomainSpec
    time: float
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ValueError(f"snapshot must have grid shape {self.spec.shape}")
        mask = self.mask
        if isinstance(mask, RegionMask):
            mask = mask.mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            values = np.where(mask, values, 0.0)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def mask_id(self) -> str:
        return mask_id(self.mask)

    def masked_values(self) -> np.ndarray:
        return self.values if self.mask is None else self.values[self.mask]

    def save(self, path):
        header = {"kind": "snapshot", "grid": self.spec.to_dict(), "time": self.time,
                  "mask_id": self.mask_id,
                  "mask_runs": None if self.mask is None else _mask_runs(self.mask)}
        return write_blob(path, header, self.masked_values())

    @classmethod
    def load(cls, path) -> "Snapshot":
        header, data = read_blob(path)
        spec = DomainSpec(**header["grid"])
        if header["mask_runs"] is None:
            return cls(spec, header["time"], data.reshape(spec.shape))
        mask = np.zeros(spec.shape, dtype=bool)
        for k, s, e in header["mask_runs"]:
            mask[k, s:e] = True
        values = np.zeros(spec.shape)
        values[mask] = data
        return cls(spec, header["time"], values, mask)


def save_trace(path, signal: BoundarySignal, extra: dict | None = None):
    header = {"kind": "trace", "times": [float(signal.times[0]), signal.dt, int(signal.times.size)],
              "xs": signal.xs.tolist()}
    if extra:
        header.update(extra)
    return write_blob(path, header, signal.values)


def load_trace(path) -> tuple[BoundarySignal, dict]:
    header, data = read_blob(path)
    t0, dt, n = header["times"]
    times = t0 + dt * np.arange(int(n))
    return BoundarySignal(times, np.asarray(header["xs"]), data), header
