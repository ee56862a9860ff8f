"""Independent full-domain oracles shared by the redatuming and acceptance tests.

Everything here uses the true medium on the whole strip and never touches
``K`` or ``L``.
"""

import numpy as np

from redatum.basis import BasisCoefficients, ExpansionSource
from redatum.domain import inner_product_interior, quadrature_weights, trapezoid_weights_1d
from redatum.signals import BoundarySignal, InteriorSource
from redatum.wave_sim import OutputRequest, choose_dt, solve_final_value, solve_interior, solve_neumann


def solver_dt(ws):
    return choose_dt(ws.spec, ws.c, ws.grid.dt_r)


def neumann_snapshots(ws, sources, t):
    """``u^f(t)`` on the whole strip for each source (one batched run)."""
    from redatum.wave_sim import WaveSolver

    recs = WaveSolver(ws.c, solver_dt(ws)).run(t, neumann=list(sources),
                                               outputs=OutputRequest(snapshot_times=(t,)))
    return [r.snapshot(t).values for r in recs]


def expansion(h, ws, tau):
    return ExpansionSource(BasisCoefficients(np.asarray(h, dtype=float), ws.grid, tau))


def random_interior_source(ws, rng, t_end, t_range=(0.2, 0.6), depth_range=(0.1, 0.35)):
    """Gaussian interior forcing inside the sampled part of the known region, negligible at t = 0."""
    return InteriorSource.gaussian(ws.spec, t_c=rng.uniform(*t_range), x_c=rng.uniform(-1.5, 1.5),
                                   depth_c=rng.uniform(*depth_range), a=ws.grid.a_t, dt=solver_dt(ws),
                                   t_end=t_end)


def transposition_pair(ws, F, h_src):
    """Both sides of ``<F, u^h> = <v^F, h>`` over ``[0, T]``.

    Left: space-time quadrature of ``F`` against snapshots of ``u^h`` every
    receiver interval. Right: the trace of the final-value solution ``v^F``
    on Gamma paired with ``h`` sampled on the receiver grid.
    """
    T, dt_r = ws.cfg.T, ws.grid.dt_r
    dt = F.dt
    times = tuple(np.round(np.arange(0, T + 1e-9, dt_r), 10))
    rows, cols = F.spatial_bbox()
    W = quadrature_weights(ws.spec, ws.c)[rows, cols]
    rec = solve_neumann(h_src, ws.c, T, OutputRequest(snapshot_times=times), dt=dt)
    vals = np.array([np.sum(W * rec.snapshot(t).values[rows, cols] * F.at(t)[rows, cols]) for t in times])
    lhs = float(np.sum(trapezoid_weights_1d(len(times), dt_r) * vals))
    xs = ws.grid.receiver_xs()
    v = solve_final_value(F, ws.c, T, OutputRequest(receiver_xs=xs, receiver_dt=dt_r), dt=dt)
    rhs = v.trace.inner(BoundarySignal(v.trace.times, xs, h_src.sample(v.trace.times, xs)))
    return lhs, rhs


def interior_boundary_pairing(ws, F, h, tau):
    """``<w^F(tau), u^h(tau)>`` in ``L^2(dV)`` over the whole strip; ``h`` in ``S^tau``."""
    wF = solve_interior(F, ws.c, tau, OutputRequest(snapshot_times=(tau,)), dt=F.dt).snapshot(tau).values
    uh = solve_neumann(expansion(h, ws, tau), ws.c, tau, OutputRequest(snapshot_times=(tau,)),
                       dt=F.dt).snapshot(tau).values
    return inner_product_interior(wF, uh, ws.c), np.sqrt(inner_product_interior(wF, wF, ws.c)
                                                         * inner_product_interior(uh, uh, ws.c))
