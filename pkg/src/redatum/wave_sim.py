"""Explicit leapfrog solver for ``u_tt = c^2 Lap u`` on the strip.

Second-order central differences in space and time. All walls are mirror
(homogeneous Neumann) walls; the surface row additionally carries Neumann
data ``d_nu u = c d_y u = f`` on Gamma through a ghost row,
``u[-1] = u[1] + 2 hy f / c``. Interior forcing enters as
``w_tt = c^2 Lap w + F``.

With trapezoid weights ``W`` the mirrored 5-point Laplacian ``L`` satisfies
``W L = -A`` with ``A`` symmetric, so the scheme conserves

    E^{n+1/2} = 1/2 |(u^{n+1} - u^n)/dt|_M^2 + 1/2 (u^{n+1})' A u^n,   M = W c^-2

exactly (up to rounding) while no source is active.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .domain import DomainSpec, RegionMask, WavespeedField, quadrature_weights
from .signals import BoundarySignal, InteriorSource, Snapshot

CFL_LIMIT = 0.5


@numba.njit(cache=True)
def _leapfrog(u, uold, c2dt2, ihx2, ihy2):
    """Overwrite ``uold`` with the next time level (mirror walls on all sides)."""
    B, ny, nx = u.shape
    for b in range(B):
        for k in range(ny):
            km = k - 1 if k > 0 else 1
            kp = k + 1 if k < ny - 1 else ny - 2
            for i in range(nx):
                im = i - 1 if i > 0 else 1
                ip = i + 1 if i < nx - 1 else nx - 2
                uc = u[b, k, i]
                lap = (u[b, k, ip] - 2.0 * uc + u[b, k, im]) * ihx2 \
                    + (u[b, kp, i] - 2.0 * uc + u[b, km, i]) * ihy2
                uold[b, k, i] = 2.0 * uc - uold[b, k, i] + c2dt2[k, i] * lap


def laplacian(u: np.ndarray, spec: DomainSpec) -> np.ndarray:
    """Mirrored 5-point Laplacian (numpy reference, used for energies)."""
    p = np.pad(u, 1, mode="reflect")
    return ((p[1:-1, 2:] - 2 * u + p[1:-1, :-2]) / spec.hx**2
            + (p[2:, 1:-1] - 2 * u + p[:-2, 1:-1]) / spec.hy**2)


def discrete_energy(u_new: np.ndarray, u_old: np.ndarray, c: WavespeedField, dt: float) -> float:
    """The conserved leapfrog energy between two consecutive time levels."""
    W = quadrature_weights(c.spec)
    vel = (u_new - u_old) / dt
    kinetic = 0.5 * np.sum(W / c.values**2 * vel**2)
    potential = -0.5 * np.sum(W * u_new * laplacian(u_old, c.spec))
    return float(kinetic + potential)


def stable_dt(spec: DomainSpec, c: WavespeedField, cfl: float = CFL_LIMIT) -> float:
    return cfl * min(spec.hx, spec.hy) / c.max_speed


def choose_dt(spec: DomainSpec, c: WavespeedField, dt_r: float, cfl: float = CFL_LIMIT) -> float:
    """Largest integer divisor of the receiver interval that satisfies the CFL bound."""
    n = int(np.ceil(dt_r / stable_dt(spec, c, cfl) - 1e-9))
    return dt_r / max(n, 1)


@dataclass
class OutputRequest:
    """What to record. Receiver positions and snapshot times must lie on the grids."""

    receiver_xs: np.ndarray | None = None
    receiver_dt: float | None = None
    snapshot_times: tuple = ()
    mask: RegionMask | np.ndarray | None = None


@dataclass
class WavefieldRecord:
    trace: BoundarySignal | None = None
    snapshots: dict = field(default_factory=dict)

    def snapshot(self, t: float) -> Snapshot:
        for key, snap in self.snapshots.items():
            if abs(key - t) < 1e-9:
                return snap
        raise KeyError(f"no snapshot recorded at t={t}")


class WaveSolver:
    """Batched leapfrog integrator over a fixed medium.

    ``run`` advances several independent sources in lockstep; they share the
    medium arrays and the numba kernel, which amortises the per-step overhead.
    """

    def __init__(self, c: WavespeedField, dt: float | None = None, cfl: float = CFL_LIMIT):
        self.c = c
        self.spec = c.spec
        limit = stable_dt(self.spec, c, cfl)
        self.dt = limit if dt is None else float(dt)
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt:g} violates the CFL bound {limit:g} (cfl={cfl})")
        self.c2dt2 = np.ascontiguousarray(c.values**2 * self.dt**2)
        spec = self.spec
        self._gcols = spec.gamma_columns
        # Half weights at the ends of Gamma reproduce trapezoid quadrature on the patch.
        half = np.ones(self._gcols.size)
        x_g = spec.x[self._gcols]
        half[np.isclose(np.abs(x_g), spec.gamma_half_width, atol=1e-9 * spec.hx)] = 0.5
        self._src_coef = 2.0 * c.values[0, self._gcols] * self.dt**2 / spec.hy * half
        self._x_gamma = x_g

    def step_index(self, t: float, what: str = "time") -> int:
        n = int(round(t / self.dt))
        if abs(n * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"{what} {t} is not a multiple of dt={self.dt}")
        return n

    def run(self, t_end: float, *, neumann=None, interior=None,
            outputs: OutputRequest | None = None, t_start: float | None = None,
            chunk: int = 256) -> list[WavefieldRecord]:
        """Solve for each source in the batch up to ``t_end``.

        ``neumann`` is a list of objects with ``sample(t, x)``; ``interior`` a
        list of :class:`InteriorSource` (or None entries). ``t_start`` lets the
        integration begin at a later step when every source vanishes before it;
        zero state there is exact in that case.
        """
        neumann = list(neumann) if neumann is not None else []
        interior = list(interior) if interior is not None else []
        B = max(len(neumann), len(interior))
        if B == 0:
            raise ValueError("no sources given")
        if neumann and len(neumann) != B or interior and len(interior) != B:
            raise ValueError("neumann and interior batches must have equal length")
        outputs = outputs or OutputRequest()
        spec = self.spec
        n_end = self.step_index(t_end, "t_end")
        n0 = 0 if t_start is None else min(self.step_index(
            np.floor(t_start / self.dt + 1e-9) * self.dt), n_end)

        every = None
        if outputs.receiver_xs is not None:
            rcols = spec.x_index(outputs.receiver_xs)
            dt_r = outputs.receiver_dt or self.dt
            every = self.step_index(dt_r, "receiver interval")
            if n_end % every:
                raise ValueError("t_end must be a multiple of the receiver interval")
            traces = np.zeros((B, n_end // every + 1, rcols.size))
        snap_steps = {}
        for ts in outputs.snapshot_times:
            n = self.step_index(ts, "snapshot time")
            if n < 0 or n > n_end:
                raise ValueError(f"snapshot time {ts} outside [0, {t_end}]")
            snap_steps.setdefault(n, []).append(ts)
        snaps: list[dict] = [dict() for _ in range(B)]
        mask = outputs.mask

        def take(n, u):
            if every is not None and n % every == 0:
                traces[:, n // every] = u[:, 0, rcols]
            for ts in snap_steps.get(n, ()):
                for b in range(B):
                    snaps[b][ts] = Snapshot(spec, ts, u[b].copy(), mask)

        u = np.zeros((B,) + spec.shape)
        uold = np.zeros_like(u)
        for n in range(0, n0 + 1):
            take(n, u)

        inter = [(b, F) for b, F in enumerate(interior) if F is not None]
        boxes = {b: F.spatial_bbox() for b, F in inter}
        n = n0
        while n < n_end:
            m = min(chunk, n_end - n)
            t_chunk = (n + np.arange(m)) * self.dt
            src = None
            if neumann:
                src = np.stack([np.asarray(f.sample(t_chunk, self._x_gamma)) if f is not None
                                else np.zeros((m, self._x_gamma.size)) for f in neumann], axis=1)
            temporal = {b: F.temporal_at(t_chunk) for b, F in inter}
            if n == 0:
                # Sources vanish for t < 0: the first step sees half of the jump.
                if src is not None:
                    src[0] *= 0.5
                for b in temporal:
                    temporal[b][:, 0] *= 0.5
            for s in range(m):
                _leapfrog(u, uold, self.c2dt2, 1.0 / spec.hx**2, 1.0 / spec.hy**2)
                if src is not None:
                    uold[:, 0, self._gcols] += self._src_coef * src[s]
                for b, F in inter:
                    rs, cs = boxes[b]
                    coef = temporal[b][:, s] * self.dt**2
                    uold[b, rs, cs] += np.tensordot(coef, F.spatial[:, rs, cs], axes=1)
                u, uold = uold, u
                take(n + s + 1, u)
            n += m

        self.last_state = (u, uold)
        records = []
        for b in range(B):
            trace = None
            if every is not None:
                times = every * self.dt * np.arange(traces.shape[1])
                trace = BoundarySignal(times, np.asarray(outputs.receiver_xs, dtype=float), traces[b])
            records.append(WavefieldRecord(trace=trace, snapshots=snaps[b]))
        return records


def _start_time(sources) -> float | None:
    starts = []
    for s in sources:
        if s is None:
            continue
        if not hasattr(s, "support_interval"):
            return None
        starts.append(s.support_interval()[0])
    return min(starts) if starts else None


def solve_neumann(f, c: WavespeedField, t_end: float, outputs: OutputRequest | None = None,
                  dt: float | None = None) -> WavefieldRecord:
    """Wavefield ``u^f`` for Neumann data ``f`` on Gamma and zero initial state."""
    solver = WaveSolver(c, dt)
    return solver.run(t_end, neumann=[f], outputs=outputs, t_start=_start_time([f]))[0]


def solve_interior(F: InteriorSource, c: WavespeedField, t_end: float,
                   outputs: OutputRequest | None = None, dt: float | None = None) -> WavefieldRecord:
    """Wavefield ``w^F`` with homogeneous Neumann walls and forcing ``F``."""
    if F.spec != c.spec:
        raise ValueError("source and medium live on different grids")
    if F.times[0] < -1e-12:
        raise ValueError("interior source starts before t = 0")
    solver = WaveSolver(c, dt)
    return solver.run(t_end, interior=[F], outputs=outputs, t_start=_start_time([F]))[0]


def reverse_interior(F: InteriorSource, T: float) -> InteriorSource:
    """``(R F)(t) = F(T - t)`` on ``[0, T]``; ``F`` must be sampled on ``[0, T]``."""
    if abs(F.times[0]) > 1e-12 or abs(F.times[-1] - T) > 1e-9:
        raise ValueError("time reversal needs F sampled on exactly [0, T]")
    return F.map_temporal(lambda a: a[:, ::-1].copy())


def solve_final_value(H: InteriorSource, c: WavespeedField, T: float,
                      outputs: OutputRequest | None = None, dt: float | None = None) -> WavefieldRecord:
    """``v^H`` with ``v(T) = v_t(T) = 0``, computed as ``R w^{R H}``.

    Snapshot times in ``outputs`` refer to the time of ``v``; the record's
    trace (if requested) is returned on ``[0, T]`` in ``v``-time.
    """
    outputs = outputs or OutputRequest()
    flipped = OutputRequest(outputs.receiver_xs, outputs.receiver_dt,
                            tuple(T - t for t in outputs.snapshot_times), outputs.mask)
    rec = solve_interior(reverse_interior(H, T), c, T, flipped, dt)
    snaps = {t: Snapshot(c.spec, t, rec.snapshot(T - t).values, outputs.mask)
             for t in outputs.snapshot_times}
    trace = None
    if rec.trace is not None:
        trace = rec.trace.with_values(rec.trace.values[::-1].copy())
    return WavefieldRecord(trace=trace, snapshots=snaps)
