"""Neumann-to-Dirichlet data and the connecting matrix.

The dataset stores Dirichlet traces of a few distinct pulse *shapes*. A pulse
``phi_{i,j}`` of ``S^tau`` is ``exp(-a_t (t - t_i)^2)`` switched off after
``tau``; as long as neither the start ``t = 0`` nor the cut at ``tau`` bites
(both tails below ``NEGLIGIBLE``) its trace is an exact time shift of the
reference shape. Only the head-truncated and tail-cut pulses need their own
simulation.

For a laterally invariant medium the trace of a pulse at ``x_j`` is the
reference trace (pulse at ``x = 0``) moved by ``x_j`` along the surface, so
one simulation per shape covers every position. Otherwise each position is
simulated separately.

The connecting matrix follows

    K = J Lambda^{2 tau} Theta - R Lambda^tau R J Theta

discretised on ``S^tau`` as ``[A] = G^{-1} B_A`` with
``B_A[k, j] = <phi_k, A phi_j>``. The Gram-weighted form ``G [K]`` is what
pairs coefficients, ``<K f, h> = h' G [K] f``, and the symmetric object.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import GramMatrix, PulseGrid, gram_matrix
from .domain import DomainSpec, WavespeedField, trapezoid_weights_1d
from .fileio import read_blob, write_blob
from .signals import BoundarySignal, GaussianSource, load_trace, save_trace, time_axis
from .wave_sim import OutputRequest, WaveSolver, choose_dt

NEGLIGIBLE = 1e-10


@dataclass(frozen=True)
class PulseShape:
    """Unnormalised temporal profile ``exp(-a_t (t - t_c)^2)`` on ``[0, cut]``."""

    t_c: float
    cut: float | None

    @property
    def key(self) -> str:
        return f"t{self.t_c:.6f}" + ("" if self.cut is None else f"_cut{self.cut:.6f}")


def _tail(grid: PulseGrid) -> float:
    return float(np.sqrt(np.log(1.0 / NEGLIGIBLE) / grid.a_t))


def reference_index(grid: PulseGrid) -> int:
    """First center time whose head (before ``t = 0``) is negligible."""
    t = np.asarray(grid.t_centers)
    ok = np.nonzero(t >= _tail(grid))[0]
    if ok.size == 0:
        raise ValueError("no pulse center is far enough from t = 0 to serve as reference")
    return int(ok[0])


def pulse_shape(grid: PulseGrid, i: int, tau: float) -> tuple[PulseShape, int]:
    """Shape simulated for ``phi_{i,.}`` in ``S^tau`` and its delay in source intervals."""
    t = np.asarray(grid.t_centers)
    i_ref = reference_index(grid)
    cut_matters = t[i] + _tail(grid) > tau
    if i >= i_ref and not cut_matters:
        steps = i - i_ref
        shift = t[i] - t[i_ref]
        if abs(shift - steps * grid.dt_s) > 1e-9:
            raise ValueError("pulse center times must be uniformly spaced")
        return PulseShape(float(t[i_ref]), None), steps
    return PulseShape(float(t[i]), tau if cut_matters else None), 0


def required_shapes(grid: PulseGrid, taus) -> dict[str, PulseShape]:
    shapes = {}
    for tau in taus:
        for i in range(grid.n_t(tau)):
            s, _ = pulse_shape(grid, i, tau)
            shapes[s.key] = s
    return shapes


@dataclass(eq=False)
class NtDDataset:
    """Dirichlet traces ``Lambda phi`` on the receiver grid over ``[0, 2T]``."""

    grid: PulseGrid
    spec: DomainSpec
    medium_id: str
    dt_solver: float
    shapes: dict
    mode: str
    store: dict = field(repr=False)
    surface_x: np.ndarray | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return time_axis(2 * self.grid.T, self.grid.dt_r)

    @property
    def receiver_xs(self) -> np.ndarray:
        return self.grid.receiver_xs()

    @property
    def dataset_id(self) -> str:
        h = hashlib.sha256(json.dumps(
            [self.grid.to_dict(), self.spec.to_dict(), self.medium_id, self.dt_solver,
             sorted(self.shapes), self.mode], sort_keys=True).encode())
        return h.hexdigest()[:16]

    def shape_trace(self, key: str, j: int) -> np.ndarray:
        """Trace of shape ``key`` at position ``j``: ``(len(times), n_receivers)``."""
        if self.mode == "lateral-shift":
            rows = self.store[key]
            cols = self.spec.x_index(self.receiver_xs - self.grid.x_centers[j], tol=1e-6)
            return rows[:, cols] * self.grid.spatial_norms()[j]
        return self.store[key][j]

    def pulse_trace(self, i: int, j: int, tau: float) -> BoundarySignal:
        """``Lambda^{2 tau} Theta phi_{i,j}`` on ``[0, 2 tau]``."""
        self.grid.index(i, j, tau)
        shape, steps = pulse_shape(self.grid, i, tau)
        raw = self.shape_trace(shape.key, j)
        k = steps * int(round(self.grid.dt_s / self.grid.dt_r))
        out = np.zeros_like(raw)
        out[k:] = raw[: raw.shape[0] - k]
        n = int(round(2 * tau / self.grid.dt_r)) + 1
        amp = self.grid.temporal_norms(tau)[i]
        return BoundarySignal(self.times[:n], self.receiver_xs, amp * out[:n])

    def manifest(self) -> dict:
        return {"kind": "ntd-dataset", "grid": self.grid.to_dict(), "domain": self.spec.to_dict(),
                "medium_id": self.medium_id, "dt_solver": self.dt_solver, "mode": self.mode,
                "shapes": {k: [s.t_c, s.cut] for k, s in self.shapes.items()},
                "dataset_id": self.dataset_id}

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        times = self.times
        for key in self.shapes:
            if self.mode == "lateral-shift":
                name = f"{key}_ref.trace"
                save_trace(directory / name, BoundarySignal(times, self.surface_x, self.store[key]),
                           {"shape": key, "x_source": 0.0})
                files.append(name)
            else:
                for j, xj in enumerate(self.grid.x_centers):
                    name = f"{key}_x{j:04d}.trace"
                    save_trace(directory / name, BoundarySignal(times, self.receiver_xs, self.store[key][j]),
                               {"shape": key, "x_source": xj})
                    files.append(name)
        man = self.manifest()
        man["files"] = files
        (directory / "manifest.json").write_text(json.dumps(man, indent=1))
        return directory

    @classmethod
    def load(cls, directory) -> "NtDDataset":
        directory = Path(directory)
        man = json.loads((directory / "manifest.json").read_text())
        grid = PulseGrid(**man["grid"])
        spec = DomainSpec(**man["domain"])
        shapes = {k: PulseShape(v[0], v[1]) for k, v in man["shapes"].items()}
        store, surface_x = {}, None
        if man["mode"] == "lateral-shift":
            for key in shapes:
                sig, _ = load_trace(directory / f"{key}_ref.trace")
                store[key] = sig.values
                surface_x = sig.xs
        else:
            for key in shapes:
                store[key] = np.stack([load_trace(directory / f"{key}_x{j:04d}.trace")[0].values
                                       for j in range(grid.n_x)])
        ds = cls(grid, spec, man["medium_id"], man["dt_solver"], shapes, man["mode"], store, surface_x)
        if ds.dataset_id != man["dataset_id"]:
            raise ValueError(f"{directory}: manifest does not match its contents")
        return ds


def lateral_shift_ok(grid: PulseGrid, c: WavespeedField) -> bool:
    """Whether one reference simulation per shape reproduces every position."""
    spec = c.spec
    if not c.is_laterally_invariant():
        return False
    try:
        spec.x_index(np.asarray(grid.x_centers), tol=1e-6)
        spec.x_index(0.0, tol=1e-6)
        spec.x_index(grid.receiver_xs(), tol=1e-6)
    except ValueError:
        return False
    # Shifted receiver spreads must stay on the grid, and side walls must stay
    # out of reach of every receiver during [0, 2T].
    reach = max(abs(x) for x in grid.x_centers) + grid.gamma_half_width
    wall = min(-spec.x_min, spec.x_max)
    if reach > wall:
        return False
    return wall - grid.gamma_half_width >= grid.T * c.max_speed - 1e-9


def simulate_ntd(grid: PulseGrid, c: WavespeedField, *, taus=None, mode: str = "auto",
                 dt: float | None = None, batch: int = 8, progress=None) -> NtDDataset:
    """Simulate the traces needed for ``S^tau`` at every ``tau`` in ``taus`` (default ``T`` and ``T/2``)."""
    spec = c.spec
    taus = (grid.T, grid.T / 2) if taus is None else tuple(taus)
    if abs(grid.T - spec.T) > 1e-12:
        raise ValueError("basis and domain disagree on T")
    dt = choose_dt(spec, c, grid.dt_r) if dt is None else dt
    solver = WaveSolver(c, dt)
    shapes = required_shapes(grid, taus)
    if mode == "auto":
        mode = "lateral-shift" if lateral_shift_ok(grid, c) else "per-position"
    if mode == "lateral-shift" and not lateral_shift_ok(grid, c):
        raise ValueError("lateral-shift mode needs a laterally invariant medium and grid-aligned pulses")
    times_end = 2 * grid.T
    n_times = int(round(times_end / grid.dt_r)) + 1
    store = {}
    surface_x = None
    keys = list(shapes)
    if mode == "lateral-shift":
        surface_x = spec.x
        for start in range(0, len(keys), batch):
            chunk = keys[start:start + batch]
            srcs = [GaussianSource(shapes[k].t_c, 0.0, grid.a_t, grid.a_x, cut=shapes[k].cut) for k in chunk]
            t_end = max(2 * (shapes[k].cut or grid.T) for k in chunk)
            recs = solver.run(t_end, neumann=srcs, outputs=OutputRequest(surface_x, grid.dt_r))
            for k, rec in zip(chunk, recs):
                vals = np.zeros((n_times, surface_x.size))
                vals[: rec.trace.values.shape[0]] = rec.trace.values
                store[k] = vals
                if progress:
                    progress(k)
    elif mode == "per-position":
        xs = grid.receiver_xs()
        norms = grid.spatial_norms()
        jobs = [(k, j) for k in keys for j in range(grid.n_x)]
        for k in keys:
            store[k] = np.zeros((grid.n_x, n_times, xs.size))
        for start in range(0, len(jobs), batch):
            chunk = jobs[start:start + batch]
            srcs = [GaussianSource(shapes[k].t_c, grid.x_centers[j], grid.a_t, grid.a_x,
                                   amplitude=float(norms[j]), cut=shapes[k].cut) for k, j in chunk]
            t_end = max(2 * (shapes[k].cut or grid.T) for k, _ in chunk)
            recs = solver.run(t_end, neumann=srcs, outputs=OutputRequest(xs, grid.dt_r))
            for (k, j), rec in zip(chunk, recs):
                store[k][j, : rec.trace.values.shape[0]] = rec.trace.values
                if progress:
                    progress((k, j))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return NtDDataset(grid, spec, c.fingerprint(), dt, shapes, mode, store, surface_x)


# --------------------------------------------------------------------------
# operator matrices

def _receiver_weights(grid: PulseGrid, tau: float):
    times = grid.receiver_times(tau)
    wt = trapezoid_weights_1d(times.size, grid.dt_r)
    xs = grid.receiver_xs()
    wx = trapezoid_weights_1d(xs.size, grid.dx_r)
    return wt, wx


def _jfilter_rows(e: np.ndarray, n: int, dt: float) -> np.ndarray:
    """Samplewise J on axis 1 of ``e`` (samples on [0, 2 tau], ``2n+1`` of them)."""
    C = np.concatenate([np.zeros_like(e[:, :1]),
                        np.cumsum(0.5 * dt * (e[:, 1:2 * n + 1] + e[:, :2 * n]), axis=1)], axis=1)
    return 0.5 * (C[:, 2 * n - np.arange(n + 1)] - C[:, : n + 1])


def data_gram_blocks(data: NtDDataset, tau: float, tests: dict | None = None) -> dict[str, np.ndarray]:
    """``B_A[k, l] = <phi_k, A phi_l>`` for the two data-dependent operators.

    ``tests`` maps extra names to temporal test functions ``(n_t, n + 1)`` on
    ``[0, tau]``; for each the matrix ``<test_p h_q, Lambda^tau phi_l>`` is
    returned as well.
    """
    grid = data.grid
    if 2 * tau > 2 * grid.T + 1e-9:
        raise ValueError(f"tau={tau} exceeds the data window [0, {2 * grid.T}]")
    nt, nx = grid.n_t(tau), grid.n_x
    n = int(round(tau / grid.dt_r))
    wt, wx = _receiver_weights(grid, tau)
    g = grid.temporal_factors(tau)                 # (nt, n+1)
    gw = g * wt
    gw_rev = g[:, ::-1] * wt
    hw = (grid.spatial_factors() * wx).T           # (n_rec, nx)
    amps = grid.temporal_norms(tau)
    per = int(round(grid.dt_s / grid.dt_r))
    plan = [pulse_shape(grid, i, tau) for i in range(nt)]
    B_J = np.zeros((nt, nx, nt, nx))
    B_R = np.zeros((nt, nx, nt, nx))
    tests = {name: np.asarray(v) * wt for name, v in (tests or {}).items()}
    extra = {name: np.zeros((v.shape[0], nx, nt, nx)) for name, v in tests.items()}
    for j in range(nx):
        E = {}
        for shape, _ in plan:
            if shape.key not in E:
                E[shape.key] = data.shape_trace(shape.key, j)[: 2 * n + 1] @ hw   # (2n+1, nx)
        e = np.zeros((nt, 2 * n + 1, nx))
        for i, (shape, steps) in enumerate(plan):
            k = steps * per
            src = E[shape.key]
            e[i, k:] = amps[i] * src[: 2 * n + 1 - k]
        Je = _jfilter_rows(e, n, grid.dt_r)                         # (nt, n+1, nx)
        B_J[:, :, :, j] = np.einsum("ps,isq->pqi", gw, Je)
        B_R[:, :, :, j] = np.einsum("ps,isq->pqi", gw_rev, e[:, : n + 1])
        for name, v in tests.items():
            extra[name][:, :, :, j] = np.einsum("ps,isq->pqi", v, e[:, : n + 1])
    N = nt * nx
    out = {"JLambda": B_J.reshape(N, N), "RLambda": B_R.reshape(N, N)}
    for name, M in extra.items():
        out[name] = M.reshape(-1, N)
    return out


def _jtheta_temporal(grid: PulseGrid, tau: float) -> np.ndarray:
    """``J Theta g_i`` on ``[0, tau]`` in closed form: ``1/2 int_t^tau g_i``."""
    A = grid.temporal_antiderivative(tau, grid.receiver_times(tau))
    return 0.5 * (A[:, -1:] - A)


def rj_temporal(grid: PulseGrid, tau: float) -> np.ndarray:
    """``<g_k, R J Theta g_i>`` on ``[0, tau]``."""
    wt, _ = _receiver_weights(grid, tau)
    rjt = _jtheta_temporal(grid, tau)[:, ::-1]
    g = grid.temporal_factors(tau)
    return (g * wt) @ rjt.T


OP_TAGS = ("JLambda", "RLambda", "RJ", "RLambdaRJ")


def operator_blocks(data: NtDDataset, tau: float) -> dict[str, np.ndarray]:
    """Gram blocks ``B_A`` of every data-dependent operator on ``S^tau``.

    ``RLambdaRJ`` is the composite ``R Lambda^tau R J Theta`` applied to each
    pulse without projecting the intermediate signal onto the basis. By
    reciprocity of the data, ``(Lambda^tau)^* = R Lambda^tau R``, so
    ``<phi_k, R Lambda R J Theta phi_l> = <Lambda phi_k, J Theta phi_l>``.
    """
    b = data_gram_blocks(data, tau, tests={"jtheta": _jtheta_temporal(data.grid, tau)})
    return {"JLambda": b["JLambda"], "RLambda": b["RLambda"], "RLambdaRJ": b["jtheta"].T}


def assemble_operator_matrix(op_tag: str, data: NtDDataset | None, G: GramMatrix,
                             grid: PulseGrid | None = None, blocks: dict | None = None) -> np.ndarray:
    """``[A] = G^{-1} B_A`` on ``S^tau`` for ``A`` in :data:`OP_TAGS`."""
    tau = G.tau
    if op_tag == "RJ":
        grid = grid or data.grid
        Bt = rj_temporal(grid, tau)
        return np.kron(np.linalg.solve(G.G_t, Bt), np.eye(grid.n_x))
    if op_tag not in OP_TAGS:
        raise ValueError(f"unknown operator {op_tag!r}; expected one of {OP_TAGS}")
    blocks = blocks or operator_blocks(data, tau)
    return G.solve(blocks[op_tag])


@dataclass(eq=False)
class ConnectingMatrix:
    """``[K^tau]`` in coefficient form plus its Gram-weighted form ``G [K]``."""

    tau: float
    matrix: np.ndarray
    form: np.ndarray
    grid: PulseGrid
    provenance: dict
    diagnostics: dict
    symmetrized: bool = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def pair(self, f: np.ndarray, h: np.ndarray) -> float:
        """``<K f, h>`` for coefficient vectors."""
        return float(h @ (self.form @ f))

    def gram(self) -> GramMatrix:
        return gram_matrix(self.grid, self.tau)

    def save(self, path) -> Path:
        header = {"kind": "connecting-matrix", "tau": self.tau, "grid": self.grid.to_dict(),
                  "provenance": self.provenance, "diagnostics": self.diagnostics,
                  "symmetrized": self.symmetrized}
        return write_blob(path, header, np.stack([self.matrix, self.form]))

    @classmethod
    def load(cls, path) -> "ConnectingMatrix":
        header, arr = read_blob(path)
        return cls(header["tau"], arr[0], arr[1], PulseGrid(**header["grid"]), header["provenance"],
                   header["diagnostics"], header.get("symmetrized", False))


def structure_diagnostics(form: np.ndarray) -> dict:
    fro = np.linalg.norm(form)
    if fro == 0:
        return {"symmetry_defect": 0.0, "min_eig": 0.0, "max_eig": 0.0, "psd_defect": 0.0}
    sym = np.linalg.norm(form - form.T) / fro
    ev = np.linalg.eigvalsh(0.5 * (form + form.T))
    psd = max(0.0, -ev[0]) / ev[-1] if ev[-1] > 0 else np.inf
    return {"symmetry_defect": float(sym), "min_eig": float(ev[0]), "max_eig": float(ev[-1]),
            "psd_defect": float(psd)}


K_FORMS = ("direct", "factored")


def assemble_K(tau: float, data: NtDDataset, G: GramMatrix | None = None, *,
               form: str = "direct", symmetrize: bool = False, sym_budget: float = 0.05,
               psd_budget: float = 0.01, diagnostics: bool = True) -> ConnectingMatrix:
    """Connecting matrix on ``S^tau`` from boundary data alone.

    ``form="factored"`` is the product ``[J Lambda] - [R Lambda][R J]``, whose
    middle projection onto ``S^tau`` leaves an error that grid refinement
    cannot remove. ``form="direct"`` (default) uses
    ``[J Lambda] - [R Lambda R J]`` with the composite evaluated pulse by pulse.
    """
    grid = data.grid
    G = gram_matrix(grid, tau) if G is None else G
    if abs(G.tau - tau) > 1e-12:
        raise ValueError("Gram matrix belongs to a different tau")
    if form not in K_FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {K_FORMS}")
    blocks = operator_blocks(data, tau)
    if form == "factored":
        RJ = assemble_operator_matrix("RJ", None, G, grid=grid)
        kform = blocks["JLambda"] - blocks["RLambda"] @ RJ
    else:
        kform = blocks["JLambda"] - blocks["RLambdaRJ"]
    diag = structure_diagnostics(kform) if diagnostics else {}
    if diag:
        if diag["symmetry_defect"] > sym_budget:
            warnings.warn(f"connecting matrix symmetry defect {diag['symmetry_defect']:.3g} exceeds {sym_budget}")
        if diag["psd_defect"] > psd_budget:
            warnings.warn(f"connecting matrix min eigenvalue ratio {-diag['psd_defect']:.3g} below -{psd_budget}")
    if symmetrize:
        kform = 0.5 * (kform + kform.T)
    prov = {"dataset_id": data.dataset_id, "gram_id": gram_id(G), "grid": grid.name, "form": form}
    return ConnectingMatrix(tau, G.solve(kform), kform, grid, prov, diag, symmetrize)


def gram_id(G: GramMatrix) -> str:
    h = hashlib.sha256(G.G_t.tobytes() + G.G_x.tobytes() + repr(G.tau).encode())
    return h.hexdigest()[:16]
