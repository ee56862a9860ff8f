"""Computational strip, wavespeed models and the known region M(Gamma, r).

The strip is ``[x_min, x_max] x [-depth, 0]`` sampled on a uniform node grid.
Row 0 of every grid array is the surface ``y = 0`` (where the accessible patch
Gamma lives) and rows go downwards, so ``y[k] = -k * hy``.

The medium is conformally Euclidean, ``g = c^-2 dx^2``. In 2D the volume
measure is ``dV = c^-2 dx dy`` and the boundary measure is ``dS = c^-1 dl``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .fileio import read_blob, write_blob


@dataclass(frozen=True)
class DomainSpec:
    x_min: float
    x_max: float
    depth: float
    nx: int
    ny: int
    gamma_half_width: float
    known_radius: float
    T: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("nx and ny must be at least 3")
        if self.depth <= 0:
            raise ValueError("depth must be positive")
        if not self.x_max - self.x_min > 2 * self.gamma_half_width:
            raise ValueError("lateral extent must strictly contain Gamma = [-l, l]")
        if self.x_min >= -self.gamma_half_width or self.x_max <= self.gamma_half_width:
            raise ValueError("Gamma = [-l, l] must lie inside [x_min, x_max]")
        if self.known_radius < 0:
            raise ValueError("known_radius must be non-negative")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not self.known_radius < self.T / 2:
            raise ValueError("known_radius must be smaller than T/2")

    @classmethod
    def from_spacing(cls, h: float, *, x_half: float = 8.0, depth: float = 1.0,
                     gamma_half_width: float = 3.1, known_radius: float = 0.5,
                     T: float = 2.0, hy: float | None = None) -> "DomainSpec":
        """Symmetric strip ``[-x_half, x_half] x [-depth, 0]`` with node spacing ``h``."""
        hy = h if hy is None else hy
        nx = int(round(2 * x_half / h)) + 1
        ny = int(round(depth / hy)) + 1
        return cls(-x_half, x_half, depth, nx, ny, gamma_half_width, known_radius, T)

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.depth / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return -self.hy * np.arange(self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def x_index(self, x, tol: float = 1e-9) -> np.ndarray:
        """Node indices of positions that must sit on grid columns."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.rint((x - self.x_min) / self.hx).astype(int)
        if np.any(np.abs(self.x_min + idx * self.hx - x) > tol * max(1.0, self.hx)):
            raise ValueError("positions are not aligned with the grid columns")
        if np.any((idx < 0) | (idx >= self.nx)):
            raise ValueError("positions outside the strip")
        return idx

    def y_index(self, depth, tol: float = 1e-9) -> np.ndarray:
        """Row indices for non-negative depths below the surface."""
        depth = np.atleast_1d(np.asarray(depth, dtype=float))
        idx = np.rint(depth / self.hy).astype(int)
        if np.any(np.abs(idx * self.hy - depth) > tol * max(1.0, self.hy)):
            raise ValueError("depths are not aligned with the grid rows")
        if np.any((idx < 0) | (idx >= self.ny)):
            raise ValueError("depths outside the strip")
        return idx

    @property
    def gamma_columns(self) -> np.ndarray:
        """Column indices of surface nodes inside Gamma (endpoints included)."""
        x = self.x
        tol = 1e-9 * self.hx
        return np.nonzero(np.abs(x) <= self.gamma_half_width + tol)[0]

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min, "x_max": self.x_max, "depth": self.depth,
            "nx": self.nx, "ny": self.ny, "gamma_half_width": self.gamma_half_width,
            "known_radius": self.known_radius, "T": self.T,
        }


def _linear_depth(x, y):
    return 1.0 - y


def _constant(x, y):
    return np.ones(np.broadcast(x, y).shape)


MODELS: dict[str, Callable] = {
    "linear-depth": _linear_depth,
    "constant": _constant,
}


@dataclass(frozen=True, eq=False)
class WavespeedField:
    spec: DomainSpec
    values: np.ndarray
    analytic_tag: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ValueError(f"wavespeed grid has shape {values.shape}, expected {self.spec.shape}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("wavespeed must be finite and strictly positive")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def max_speed(self) -> float:
        return float(self.values.max())

    @property
    def surface(self) -> np.ndarray:
        return self.values[0]

    def is_laterally_invariant(self) -> bool:
        return bool(np.all(self.values == self.values[:, :1]))

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(repr(sorted(self.spec.to_dict().items())).encode())
        h.update(self.values.tobytes())
        return h.hexdigest()[:16]


def build_wavespeed(spec: DomainSpec, model: str | Path) -> WavespeedField:
    """Sample a registered analytic model, or load a ``.wsgrid`` file."""
    if isinstance(model, str) and model in MODELS:
        X, Y = np.meshgrid(spec.x, spec.y)
        return WavespeedField(spec, MODELS[model](X, Y), analytic_tag=model)
    path = Path(model)
    if path.suffix == ".wsgrid" and path.exists():
        return load_wavespeed(path, spec)
    raise ValueError(f"unknown wavespeed model {model!r}; registered: {sorted(MODELS)}")


def save_wavespeed(field_: WavespeedField, path) -> Path:
    s = field_.spec
    header = {"nx": s.nx, "ny": s.ny, "x_min": s.x_min, "x_max": s.x_max, "depth": s.depth}
    return write_blob(path, header, field_.values)


def load_wavespeed(path, spec: DomainSpec) -> WavespeedField:
    header, values = read_blob(path)
    for key in ("nx", "ny"):
        if header[key] != getattr(spec, key):
            raise ValueError(f"{path}: {key}={header[key]} does not match the domain ({getattr(spec, key)})")
    for key in ("x_min", "x_max", "depth"):
        if not np.isclose(header[key], getattr(spec, key)):
            raise ValueError(f"{path}: {key} does not match the domain")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: wavespeed values must be finite and positive")
    return WavespeedField(spec, values.reshape(spec.shape))


def travel_time_depth(c: WavespeedField, r: float, x: float) -> tuple[float, bool]:
    """Depth reached by a vertical ray after travel time ``r``.

    Integrates ``dy / c`` down the grid column nearest to ``x`` (trapezoid
    rule) and inverts by linear interpolation. Returns ``(depth, clamped)``;
    ``clamped`` is True when ``r`` exceeds the travel time to the bottom.
    """
    if r < 0:
        raise ValueError("travel-time radius must be non-negative")
    spec = c.spec
    j = int(np.clip(np.rint((x - spec.x_min) / spec.hx), 0, spec.nx - 1))
    slowness = 1.0 / c.values[:, j]
    tt = np.concatenate([[0.0], np.cumsum(0.5 * (slowness[1:] + slowness[:-1]) * spec.hy)])
    depths = spec.hy * np.arange(spec.ny)
    if r > tt[-1]:
        return float(spec.depth), True
    return float(np.interp(r, tt, depths)), False


@dataclass(frozen=True, eq=False)
class RegionMask:
    mask: np.ndarray
    distance: np.ndarray
    boundary_depth_profile: np.ndarray
    radius: float

    def points(self, spec: DomainSpec) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(spec.x, spec.y)
        return X[self.mask], Y[self.mask]


def travel_time_to_gamma(spec: DomainSpec, c: WavespeedField) -> np.ndarray:
    """Grid travel-time distance to Gamma (Dijkstra on the 8-neighbour graph)."""
    ny, nx = spec.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    slow = 1.0 / c.values
    rows, cols, weights = [], [], []
    for dk, di in ((0, 1), (1, 0), (1, 1), (1, -1)):
        k0, k1 = 0, ny - dk
        i0, i1 = max(0, -di), nx - max(0, di)
        a = idx[k0:k1, i0:i1]
        b = idx[k0 + dk:k1 + dk, i0 + di:i1 + di]
        length = np.hypot(dk * spec.hy, di * spec.hx)
        w = length * 0.5 * (slow[k0:k1, i0:i1] + slow[k0 + dk:k1 + dk, i0 + di:i1 + di])
        rows.append(a.ravel())
        cols.append(b.ravel())
        weights.append(w.ravel())
    graph = sparse.csr_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ny * nx, ny * nx),
    )
    sources = idx[0, spec.gamma_columns]
    dist = dijkstra(graph, directed=False, indices=sources, min_only=True)
    return dist.reshape(ny, nx)


def known_region_mask(spec: DomainSpec, c: WavespeedField, r: float | None = None) -> RegionMask:
    """Nodes within travel-time distance ``r`` (default: ``spec.known_radius``) of Gamma."""
    r = spec.known_radius if r is None else r
    dist = travel_time_to_gamma(spec, c)
    # Dijkstra path sums carry rounding noise of a few ulps.
    mask = dist <= r + 1e-12 * max(1.0, r)
    rows = np.arange(spec.ny)[:, None] * np.ones((1, spec.nx))
    deepest = np.where(mask, rows, -1).max(axis=0)
    profile = np.where(deepest >= 0, deepest * spec.hy, np.nan)
    mask.setflags(write=False)
    return RegionMask(mask=mask, distance=dist, boundary_depth_profile=profile, radius=r)


def trapezoid_weights_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quadrature_weights(spec: DomainSpec, c: WavespeedField | None = None) -> np.ndarray:
    """Tensor trapezoid weights on the node grid, times ``c^-2`` when ``c`` is given."""
    w = np.outer(trapezoid_weights_1d(spec.ny, spec.hy), trapezoid_weights_1d(spec.nx, spec.hx))
    if c is not None:
        w = w / c.values**2
    return w


def inner_product_interior(u, v, c: WavespeedField, mask: RegionMask | np.ndarray | None = None) -> float:
    """``<u, v>`` in ``L^2(dV)``, ``dV = c^-2 dx dy``, restricted to ``mask``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != c.spec.shape or v.shape != c.spec.shape:
        raise ValueError(f"fields must have grid shape {c.spec.shape}")
    w = quadrature_weights(c.spec, c)
    if mask is not None:
        m = mask.mask if isinstance(mask, RegionMask) else np.asarray(mask, dtype=bool)
        w = np.where(m, w, 0.0)
    return float(np.sum(w * u * v))


def extend_known(c: WavespeedField, mask: RegionMask) -> WavespeedField:
    """Wavespeed that agrees with ``c`` on the mask and ignores it elsewhere.

    Each column is continued below its deepest known node with that node's
    value; columns without known nodes copy the nearest column that has one.
    """
    m = mask.mask
    if not m.any():
        raise ValueError("mask is empty")
    spec = c.spec
    vals = np.array(c.values, dtype=float)
    has = m.any(axis=0)
    deepest = np.where(has, spec.ny - 1 - np.argmax(m[::-1], axis=0), -1)
    for j in np.nonzero(has)[0]:
        vals[deepest[j] + 1:, j] = vals[deepest[j], j]
        vals[: deepest[j] + 1, j] = np.where(m[: deepest[j] + 1, j], vals[: deepest[j] + 1, j],
                                            vals[deepest[j], j])
    known_cols = np.nonzero(has)[0]
    for j in np.nonzero(~has)[0]:
        src = known_cols[np.argmin(np.abs(known_cols - j))]
        vals[:, j] = vals[:, src]
    return WavespeedField(spec, vals)
