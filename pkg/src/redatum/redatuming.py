"""Moving receivers and moving sources.

Moving receivers: for a boundary source ``f`` and a time ``t``, the control
``h`` on the window ``(T - r, T)`` that best reproduces the delayed source
``Z_{T-t} f`` satisfies ``u^h(T) ~ u^f(t)`` on ``M(Gamma, r)``. Only ``K``
and the known part of the medium are used.

Moving sources: the same control problem at ``T/2`` with the right-hand
side ``(W^{T/2})^* w^F(T/2)`` assembled by transposition from ``L``, the map
``f -> u^{h(f)}(T)`` restricted to the known region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .basis import (BasisCoefficients, ExpansionSource, GramMatrix, PulseGrid, gram_matrix,
                    inner_products)
from .connecting import ConnectingMatrix, reference_index
from .control import ControlProblem, solve_control
from .domain import (DomainSpec, RegionMask, WavespeedField, inner_product_interior,
                     quadrature_weights, trapezoid_weights_1d)
from .fileio import read_blob, write_blob
from .signals import BoundarySignal, GaussianSource, InteriorSource, Snapshot, uniform_step
from .wave_sim import OutputRequest, WaveSolver, choose_dt


def _on_grid(t: float, step: float, what: str) -> int:
    k = int(round(t / step))
    if abs(k * step - t) > 1e-9:
        raise ValueError(f"{what} {t} is not on the source-time grid (step {step})")
    return k


def delayed_samples(f, s: float, grid: PulseGrid, tau: float) -> BoundarySignal:
    """``Z_s f`` sampled on the receiver grid of ``[0, tau]``.

    ``f`` is any Neumann source with ``sample(t, x)``; sources with a
    ``delayed`` method are shifted exactly, sampled signals by whole samples.
    """
    times = grid.receiver_times(tau)
    xs = grid.receiver_xs()
    if isinstance(f, BoundarySignal):
        k = _on_grid(s, f.dt, "delay")
        vals = f.sample(times, xs)
        out = np.zeros_like(vals)
        if k < times.size:
            out[k:] = vals[: times.size - k]
        return BoundarySignal(times, xs, out)
    if hasattr(f, "delayed"):
        return BoundarySignal(times, xs, f.delayed(s).sample(times, xs))
    vals = f.sample(times - s, xs)
    vals[times < s - 1e-12] = 0.0
    return BoundarySignal(times, xs, vals)


@dataclass
class ReceiverSetup:
    """Everything moving receivers needs besides the source: ``K^T`` and the known medium."""

    K: ConnectingMatrix
    c_known: WavespeedField
    mask: RegionMask
    alpha: float = 5e-5
    formulation: str = "gram"
    solver: str | None = None
    tol: float = 1e-8
    max_iter: int = 2000
    dt: float | None = None
    G: GramMatrix | None = None
    _solver: WaveSolver | None = field(default=None, repr=False)
    _factor: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        grid = self.K.grid
        if self.G is None:
            self.G = gram_matrix(grid, self.K.tau)
        dt = self.dt or choose_dt(self.c_known.spec, self.c_known, grid.dt_r)
        self._solver = WaveSolver(self.c_known, dt)

    @property
    def grid(self) -> PulseGrid:
        return self.K.grid

    @property
    def window(self) -> np.ndarray:
        tau = self.K.tau
        return self.grid.window(tau - self.mask.radius, tau, tau)

    def control(self, z: np.ndarray, alpha: float | None = None):
        p = ControlProblem.for_target(self.K, self.window, alpha or self.alpha, z,
                                      formulation=self.formulation, G=self.G)
        return solve_control(p, self.solver, tol=self.tol, max_iter=self.max_iter)

    def control_rhs(self, b: np.ndarray, alpha: float | None = None):
        """Control for a right-hand side given as inner products ``<phi_k, W* target>``."""
        rhs = b if self.formulation == "gram" else self.G.solve(b)
        p = ControlProblem(self.K, self.window, alpha or self.alpha, rhs,
                           formulation=self.formulation, G=self.G)
        return solve_control(p, self.solver, tol=self.tol, max_iter=self.max_iter)

    def controls_direct(self, zs: np.ndarray, alpha: float | None = None) -> np.ndarray:
        """Many targets at once through one LU factor of the window matrix.

        ``zs`` has one target per row; used for the large batches of ``build_discrete_L``.
        """
        alpha = alpha or self.alpha
        key = (alpha, self.formulation)
        if self._factor is None or self._factor[0] != key:
            p = ControlProblem(self.K, self.window, alpha, np.zeros(self.K.size),
                               formulation=self.formulation, G=self.G)
            A = p.window_matrix()
            self._factor = (key, lu_factor(A))
        fac = self._factor[1]
        M = self.K.form if self.formulation == "gram" else self.K.matrix
        rhs = (np.atleast_2d(zs) @ M.T)[:, self.window]
        x = lu_solve(fac, rhs.T)
        out = np.zeros((rhs.shape[0], self.K.size))
        out[:, self.window] = x.T
        return out

    def simulate(self, controls: list[np.ndarray], snapshot_time: float | None = None):
        """Snapshots of ``u^h`` at ``tau`` on the known region for a batch of controls."""
        tau = self.K.tau
        srcs = [ExpansionSource(BasisCoefficients(h, self.grid, tau)) for h in controls]
        start = min(s.support_interval()[0] for s in srcs)
        recs = self._solver.run(tau, neumann=srcs, t_start=start,
                                outputs=OutputRequest(snapshot_times=(tau,), mask=self.mask))
        return [r.snapshot(tau) for r in recs]


@dataclass
class ReceiverResult:
    t: float
    snapshot: Snapshot
    control: np.ndarray
    residual: float
    iterations: int


def project_delayed(f, t: float, setup: ReceiverSetup) -> np.ndarray:
    """Coefficients of ``Z_{T-t} f`` projected onto ``S^T``."""
    grid, T = setup.grid, setup.K.tau
    if not -1e-12 <= t <= T + 1e-12:
        raise ValueError(f"output time {t} outside [0, {T}]")
    _on_grid(T - t, grid.dt_s, "T - t")
    sig = delayed_samples(f, T - t, grid, T)
    return setup.G.solve(inner_products(sig, grid, T))


def move_receivers(f, times, setup: ReceiverSetup, alpha: float | None = None) -> list[ReceiverResult]:
    """Approximate ``u^f(t)|M(Gamma, r)`` for every ``t`` in ``times``."""
    times = [float(t) for t in np.atleast_1d(times)]
    zs = [project_delayed(f, t, setup) for t in times]
    sols = [setup.control(z, alpha) for z in zs]
    snaps = setup.simulate([s.coefficients for s in sols])
    out = []
    for t, sol, snap in zip(times, sols, snaps):
        snap = Snapshot(snap.spec, t, snap.values, snap.mask)
        out.append(ReceiverResult(t, snap, sol.coefficients, sol.residual, sol.iterations))
    return out


def relative_error(approx: np.ndarray, truth: np.ndarray, c: WavespeedField, mask) -> float:
    """Relative ``L^2(dV)`` error on ``mask``."""
    d = approx - truth
    num = inner_product_interior(d, d, c, mask)
    den = inner_product_interior(truth, truth, c, mask)
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


# -- moving sources ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Interior points ``p_k``: a uniform lattice on ``[-l, l] x [0, depth]`` (depth positive downwards).

    Flat order is depth-major, ``k = m * len(xs) + n``.
    """

    spec: DomainSpec
    xs: np.ndarray
    depths: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        depths = np.asarray(self.depths, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "cols", self.spec.x_index(xs, tol=1e-6))
        object.__setattr__(self, "rows", self.spec.y_index(depths, tol=1e-6))
        uniform_step(xs, "sample x axis")
        uniform_step(depths, "sample depth axis")

    @classmethod
    def uniform(cls, spec: DomainSpec, spacing: float, half_width: float | None = None,
                depth: float | None = None) -> "SampleGrid":
        half_width = spec.gamma_half_width if half_width is None else half_width
        depth = spec.known_radius if depth is None else depth
        nx = int(np.floor(half_width / spacing + 1e-9))
        nd = int(np.floor(depth / spacing + 1e-9))
        return cls(spec, spacing * np.arange(-nx, nx + 1), spacing * np.arange(nd + 1))

    @property
    def n_points(self) -> int:
        return self.xs.size * self.depths.size

    def sample(self, field_: np.ndarray) -> np.ndarray:
        """Values of grid arrays ``(..., ny, nx)`` at the points: ``(..., n_points)``."""
        a = np.asarray(field_)
        return a[..., self.rows[:, None], self.cols[None, :]].reshape(a.shape[:-2] + (-1,))

    def weights(self, c: WavespeedField) -> np.ndarray:
        """Tensor trapezoid weights times ``c^-2``."""
        wd = trapezoid_weights_1d(self.depths.size, uniform_step(self.depths))
        wx = trapezoid_weights_1d(self.xs.size, uniform_step(self.xs))
        return np.outer(wd, wx).ravel() / self.sample(c.values) ** 2

    def covers(self, F: InteriorSource, rel: float = 1e-4) -> bool:
        """True when the spatial mass of ``F`` outside the sampled box is below ``rel``."""
        w = quadrature_weights(self.spec)
        inside = np.zeros(self.spec.shape, dtype=bool)
        inside[self.rows[0]:self.rows[-1] + 1, self.cols[0]:self.cols[-1] + 1] = True
        tot = np.sqrt(np.sum(w * F.spatial**2, axis=(1, 2)))
        out = np.sqrt(np.sum(np.where(inside, 0.0, w * F.spatial**2), axis=(1, 2)))
        return bool(np.all(out <= rel * np.maximum(tot, 1e-300)))


@dataclass(eq=False)
class DiscreteL:
    """Moving-receiver images ``L phi_{i,j}(t_l, p_k)`` of the first pulse rows.

    ``values[j, l, k]`` holds ``u^{h_{jl}}(T, p_k)``, the reconstruction of
    ``u^{phi}(t_l)`` for the reference pulse row at position ``j``; ``t_l = l dt_s``.
    Later rows are scaled time shifts of the reference. Rows before it are
    cut off by ``t = 0`` and are not shifts of anything, so ``head[i]`` stores
    them directly.
    """

    grid: PulseGrid
    samples: SampleGrid
    times: np.ndarray
    values: np.ndarray
    head: np.ndarray
    ref_index: int
    alpha: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.head.shape != (self.ref_index,) + self.values.shape:
            raise ValueError("one head row is needed for every pulse row before the reference")

    @property
    def n_records(self) -> int:
        return self.values.size

    def shift(self, i: int) -> int:
        """Offset of pulse row ``i`` from the reference, in sample intervals."""
        return _on_grid(self.grid.t_centers[i] - self.grid.t_centers[self.ref_index],
                        self.grid.dt_s, "pulse offset")

    def _scale(self, i: int, tau: float) -> float:
        base = self.grid.temporal_norms(self.grid.T)[min(i, self.ref_index)]
        return float(self.grid.temporal_norms(tau)[i] / base)

    def pulse(self, i: int, tau: float | None = None) -> np.ndarray:
        """``L phi_{i,j}(t_l, p_k)`` for every ``j``: shape ``(n_x, n_l, n_p)``.

        ``phi_{i,j}`` is the pulse of ``S^tau`` without its cut at ``tau``;
        the cut does not change the wave before ``tau``.
        """
        tau = self.grid.T if tau is None else tau
        if i < self.ref_index:
            return self._scale(i, tau) * self.head[i]
        m = self.shift(i)
        out = np.zeros_like(self.values)
        out[:, m:] = self.values[:, : self.times.size - m]
        return self._scale(i, tau) * out

    def pair(self, H: np.ndarray, tau: float | None = None) -> np.ndarray:
        """``<L phi_{i,j}, H>`` over ``[0, T] x M`` for every pulse of ``S^tau`` (flat order).

        ``H`` holds samples ``H(t_l, p_k)``; quadrature is trapezoid in time
        and in space with the metric factor.
        """
        tau = self.grid.T if tau is None else tau
        H = np.asarray(H, dtype=float)
        if H.shape != self.values.shape[1:]:
            raise ValueError(f"expected samples of shape {self.values.shape[1:]}")
        wt = trapezoid_weights_1d(self.times.size, uniform_step(self.times))
        HW = H * self.weights
        n = self.times.size
        nt = self.grid.n_t(tau)
        out = np.zeros((nt, self.grid.n_x))
        for i in range(min(nt, self.ref_index)):
            out[i] = self._scale(i, tau) * np.einsum("jlp,lp,l->j", self.head[i], HW, wt)
        if nt > self.ref_index:
            # M[j, a, b] = <L phi_ref,j(t_a), H(t_b)>_space
            M = np.einsum("jap,bp->jab", self.values, HW)
            for i in range(self.ref_index, nt):
                m = self.shift(i)
                b = np.arange(m, n)
                out[i] = self._scale(i, tau) * (M[:, b - m, b] @ wt[b])
        return out.ravel()

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        write_blob(path / "values.bin", {"kind": "discrete-L-values"}, self.values)
        write_blob(path / "head.bin", {"kind": "discrete-L-head"}, self.head)
        write_blob(path / "weights.bin", {"kind": "discrete-L-weights"}, self.weights)
        meta = {"kind": "discrete-L", "grid": self.grid.to_dict(), "domain": self.samples.spec.to_dict(),
                "xs": self.samples.xs.tolist(), "depths": self.samples.depths.tolist(),
                "times": self.times.tolist(), "ref_index": self.ref_index, "alpha": self.alpha}
        (path / "manifest.json").write_text(json.dumps(meta, indent=1))
        return path

    @classmethod
    def load(cls, path) -> "DiscreteL":
        path = Path(path)
        meta = json.loads((path / "manifest.json").read_text())
        grid = PulseGrid(**meta["grid"])
        spec = DomainSpec(**meta["domain"])
        samples = SampleGrid(spec, np.array(meta["xs"]), np.array(meta["depths"]))
        return cls(grid, samples, np.array(meta["times"]), read_blob(path / "values.bin")[1],
                   read_blob(path / "head.bin")[1], meta["ref_index"], meta["alpha"],
                   read_blob(path / "weights.bin")[1])


def _reference_source(grid: PulseGrid, i: int, j: int) -> GaussianSource:
    """``phi_{i,j}`` of ``S^T`` without any cut (``t < 0`` is dropped by the solver)."""
    amp = grid.temporal_norms(grid.T)[i] * grid.spatial_norms()[j]
    return GaussianSource(grid.t_centers[i], grid.x_centers[j], grid.a_t, grid.a_x, amplitude=float(amp))


def response_bank(setup: ReceiverSetup, samples: SampleGrid) -> np.ndarray:
    """``u^{phi_k}(tau, p)`` for every window pulse ``k``: shape ``(n_points, len(window))``.

    The known-region wave of any windowed control ``h`` at the sample points
    is then ``bank @ h[window]``, identical to simulating ``h`` itself.
    """
    grid = setup.grid
    W = setup.window
    n = setup.K.size
    out = np.zeros((samples.n_points, W.size))
    for row in np.unique(W // grid.n_x):
        cols = np.nonzero(W // grid.n_x == row)[0]
        units = []
        for k in W[cols]:
            e = np.zeros(n)
            e[k] = 1.0
            units.append(e)
        snaps = setup.simulate(units)
        out[:, cols] = np.array([samples.sample(s.values) for s in snaps]).T
    return out


def build_discrete_L(setup: ReceiverSetup, samples: SampleGrid | None = None,
                     alpha: float = 1e-4, progress=None) -> DiscreteL:
    """Move receivers for ``f = phi_{i,j}``, every ``t_l`` and the first pulse rows.

    ``setup`` must carry ``K^T``. All controls share one factorisation of the
    window matrix, and their waves at the sample points come from
    :func:`response_bank` by linearity.
    """
    grid = setup.grid
    T = setup.K.tau
    if abs(T - grid.T) > 1e-12:
        raise ValueError("build_discrete_L needs the connecting matrix for tau = T")
    samples = samples or SampleGrid.uniform(setup.c_known.spec, grid.dx_s)
    if not np.all(setup.mask.mask[samples.rows[:, None], samples.cols[None, :]]):
        raise ValueError("sample points must lie in the known region")
    i_ref = reference_index(grid)
    n_l = int(round(T / grid.dt_s)) + 1
    times = grid.dt_s * np.arange(n_l)
    if abs(times[-1] - T) > 1e-9:
        raise ValueError("T must be a whole number of source intervals")
    bank = response_bank(setup, samples)
    W = setup.window
    rows = np.zeros((i_ref + 1, grid.n_x, n_l, samples.n_points))
    for i in range(i_ref + 1):
        for j in range(grid.n_x):
            f = _reference_source(grid, i, j)
            zs = np.array([project_delayed(f, t, setup) for t in times])
            hs = setup.controls_direct(zs, alpha)
            rows[i, j] = hs[:, W] @ bank.T
        if progress is not None:
            progress(i + 1, i_ref + 1)
    return DiscreteL(grid, samples, times, rows[i_ref], rows[:i_ref], i_ref, alpha,
                     samples.weights(setup.c_known))


def delay_interior(F: InteriorSource, s: float, cut: float | None = None) -> InteriorSource:
    """``Z_s F``: the same forcing started ``s`` later, optionally dropped after ``cut``."""
    if s < -1e-12:
        raise ValueError("delay must be non-negative")
    k = int(round(s / F.dt))
    if abs(k * F.dt - s) > 1e-9:
        raise ValueError(f"delay {s} is not a multiple of the source sampling {F.dt}")
    times = F.times[0] + F.dt * np.arange(F.times.size + k)
    temporal = np.concatenate([np.zeros((F.n_terms, k)), F.temporal], axis=1)
    if cut is not None:
        keep = times <= cut + 1e-9
        times, temporal = times[keep], temporal[:, keep]
    return InteriorSource(F.spec, times, temporal, F.spatial)


def effective_end(F: InteriorSource, rel: float = 1e-10) -> float:
    """Last sample time where some temporal factor exceeds ``rel`` of its peak."""
    a = np.abs(F.temporal)
    peak = a.max(axis=1, keepdims=True)
    big = np.nonzero(np.any(a > rel * np.maximum(peak, 1e-300), axis=0))[0]
    return float(F.times[big[-1]]) if big.size else float(F.times[0])


def _interior_samples(F: InteriorSource, times: np.ndarray, samples: SampleGrid) -> np.ndarray:
    """``F(t, p_k)``: shape ``(len(times), n_points)``."""
    return F.temporal_at(times).T @ samples.sample(F.spatial)


def _time_integral(F: InteriorSource) -> InteriorSource:
    """``int_0^t F`` by cumulative trapezoid on the source's own axis."""
    if abs(F.times[0]) > 1e-12:
        raise ValueError("source axis must start at t = 0")
    from scipy.integrate import cumulative_trapezoid
    return F.map_temporal(lambda a: cumulative_trapezoid(a, dx=F.dt, axis=-1, initial=0.0))


def _check_source(F: InteriorSource, discL: DiscreteL, t_end: float):
    if F.spec != discL.samples.spec:
        raise ValueError("source and L samples live on different grids")
    if not discL.samples.covers(F):
        raise ValueError("source is not supported in the sampled region of L")
    if effective_end(F) > t_end + 1e-9:
        raise ValueError(f"source is not supported in [0, {t_end}]")


def wf_trace(F: InteriorSource, discL: DiscreteL, G: GramMatrix) -> BoundarySignal:
    """``w^F`` on ``[0, T] x Gamma`` projected onto ``S^T``, by transposition.

    ``<phi_i, R w^F> = <L phi_i, R F>``; the projection of ``R w^F`` is
    reconstructed on the receiver grid and reversed in time.
    """
    grid, T = discL.grid, discL.grid.T
    if abs(G.tau - T) > 1e-12:
        raise ValueError("wf_trace needs the Gram matrix of S^T")
    _check_source(F, discL, T)
    RF = _interior_samples(F, T - discL.times, discL.samples)
    coef = BasisCoefficients(G.solve(discL.pair(RF)), grid, T)
    trace = coef.reconstruct()
    return trace.with_values(trace.values[::-1].copy())


def _jt_samples(values: np.ndarray, times: np.ndarray, T: float) -> np.ndarray:
    """``(J^T g)(s) = 1/2 int_0^{min(s, T - s)} g``, the transpose of ``J^{T/2}``, on a uniform axis.

    ``values`` holds ``g`` on ``times`` (which must reach ``T/2``).
    """
    from scipy.integrate import cumulative_trapezoid
    dt = uniform_step(times)
    Q = cumulative_trapezoid(values, dx=dt, axis=0, initial=0.0)
    idx = np.rint(np.minimum(times, T - times) / dt).astype(int)
    return 0.5 * Q[np.clip(idx, 0, None)]


def kstar_inner(F: InteriorSource, discL: DiscreteL) -> np.ndarray:
    """``<phi_i, (W^{T/2})* w^F(T/2)>`` for every pulse of ``S^{T/2}``.

    Duhamel's formula on ``I(t, s) = <w^F(t), u^{phi_i}(s)>``, with
    ``(d_t^2 - d_s^2) I = <F(t), u(s)> - <w^F(t), phi_i(s)>_Gamma``, gives

        <L phi_i, J^T F> - <phi_i, J^T (w^F|Gamma)>

    where ``J^T g(s) = 1/2 int_0^{min(s, T-s)} g`` acts on ``s in [0, T]``. The
    boundary trace comes from :func:`wf_trace`; the interior term from ``L``.
    """
    grid, T = discL.grid, discL.grid.T
    half = 0.5 * T
    _check_source(F, discL, half)
    G_T = gram_matrix(grid, T)
    w = wf_trace(F, discL, G_T)
    jw = w.with_values(_jt_samples(w.values, w.times, T))
    nt = grid.n_t(half)
    # Pulses of S^{T/2} without the cut at T/2 are rows of S^T up to normalisation.
    scale = grid.temporal_norms(half)[:nt] / grid.temporal_norms(T)[:nt]
    first = (inner_products(jw, grid, T).reshape(-1, grid.n_x)[:nt] * scale[:, None]).ravel()
    JF = _time_integral(F)
    # The integral stays constant after the end of the source axis.
    samples_t = np.minimum(np.minimum(discL.times, T - discL.times), JF.times[-1])
    second = discL.pair(0.5 * _interior_samples(JF, samples_t, discL.samples), half)
    return second - first


def kstar_apply(F: InteriorSource, discL: DiscreteL, G: GramMatrix | None = None) -> BasisCoefficients:
    """Coefficients of the projection of ``(W^{T/2})* w^F(T/2)`` onto ``S^{T/2}``."""
    half = 0.5 * discL.grid.T
    G = G or gram_matrix(discL.grid, half)
    if abs(G.tau - half) > 1e-12:
        raise ValueError("kstar_apply needs the Gram matrix of S^{T/2}")
    return BasisCoefficients(G.solve(kstar_inner(F, discL)), discL.grid, half)


@dataclass
class SourceResult:
    t: float
    snapshot: Snapshot
    control: np.ndarray
    residual: float
    iterations: int


def move_sources(F: InteriorSource, times, setup: ReceiverSetup, discL: DiscreteL,
                 alpha: float | None = None) -> list[SourceResult]:
    """Approximate ``w^F(t)|M(Gamma, r)`` for every ``t`` in ``times``.

    ``setup`` carries ``K^{T/2}``; the right-hand side for time ``t`` is
    ``(W^{T/2})* w^{Z_{T/2 - t} F}(T/2)`` evaluated by transposition.
    """
    half = 0.5 * discL.grid.T
    if abs(setup.K.tau - half) > 1e-12:
        raise ValueError("move_sources needs the connecting matrix for tau = T/2")
    times = [float(t) for t in np.atleast_1d(times)]
    sols = []
    for t in times:
        if not -1e-12 <= t <= half + 1e-12:
            raise ValueError(f"output time {t} outside [0, {half}]")
        _on_grid(half - t, discL.grid.dt_s, "T/2 - t")
        # w^F(t) only sees F on [0, t], so the delayed source may stop at T/2.
        b = kstar_inner(delay_interior(F, half - t, cut=half), discL)
        sols.append(setup.control_rhs(b, alpha))
    snaps = setup.simulate([s.coefficients for s in sols])
    return [SourceResult(t, Snapshot(sn.spec, t, sn.values, sn.mask), s.coefficients, s.residual, s.iterations)
            for t, s, sn in zip(times, sols, snaps)]
