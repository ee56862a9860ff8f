"""Desk-scale acceptance suite: one test per criterion, one PASS/FAIL line each.

Heavy objects (NtD data, K, L, pipeline outputs) come from the shared cache;
set REDATUM_TEST_CACHE to keep them between sessions.  Runtime bounds are
asserted only for stages actually computed in this session.
"""

import dataclasses
import time

import numpy as np
import pytest
from scipy.integrate import quad

from desk_oracles import (expansion, interior_boundary_pairing, neumann_snapshots, random_interior_source,
                          transposition_pair)
from redatum.basis import BasisCoefficients, delay_coefficients, gram_matrix
from redatum.config import ExperimentConfig, Workspace
from redatum.connecting import assemble_operator_matrix, rj_temporal
from redatum.control import ControlProblem, regularization_sweep, solve_control
from redatum.domain import DomainSpec, build_wavespeed, inner_product_interior, travel_time_to_gamma
from redatum.instability import HadamardConfig, fit_growth
from redatum.pipeline import run_experiment
from redatum.redatuming import kstar_apply
from redatum.signals import BoundarySignal, GaussianSource
from redatum.time_ops import (SignalWindow, filter_extended, restrict, time_filter, time_reverse,
                              window_project, zero_extend)
from redatum.wave_sim import OutputRequest, choose_dt, discrete_energy, solve_neumann

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(RESULTS[-1])


@pytest.fixture(scope="module")
def pipeline(desk, cache_root, tmp_path_factory):
    """Both redatuming pipelines at desk scale with full-domain oracles."""
    cfg = ExperimentConfig(stages=["move-receivers", "build-L", "move-sources"],
                           output_dir=str(tmp_path_factory.mktemp("desk")), render=False)
    return run_experiment(cfg, cache=cache_root, log=lambda m: None)


def test_criterion_1_blagoveshchenskii(desk, rng):
    T = desk.cfg.T
    K = desk.K(T)
    t0 = time.perf_counter()
    pairs = rng.standard_normal((10, 2, K.size))
    snaps = neumann_snapshots(desk, [expansion(v, desk, T) for p in pairs for v in p], T)
    worst = 0.0
    for k, (f, h) in enumerate(pairs):
        uf, uh = snaps[2 * k], snaps[2 * k + 1]
        truth = inner_product_interior(uf, uh, desk.c)
        scale = np.sqrt(inner_product_interior(uf, uf, desk.c) * inner_product_interior(uh, uh, desk.c))
        worst = max(worst, abs(K.pair(f, h) - truth) / scale)
    wall = time.perf_counter() - t0
    ok = worst <= 0.03 and wall < 120
    record(1, ok, f"max |<Kf,h> - <u^f,u^h>| / norms = {worst:.4f} (<= 0.03), oracle {wall:.0f} s")
    assert ok


def _half_resolution(desk, cache_root) -> Workspace:
    g = desk.grid
    half = dataclasses.replace(g, dt_r=g.dt_r / 2, dx_r=g.dx_r / 2, name=f"{g.name}-half")
    path = half.to_json(cache_root / "desk_half_basis.json")
    return Workspace(ExperimentConfig(h=desk.cfg.h / 2, basis=str(path), stages=[]), cache=cache_root)


def test_criterion_2_k_structure(desk, cache_root):
    T = desk.cfg.T
    coarse = desk.K(T).diagnostics
    fine = _half_resolution(desk, cache_root).K(T).diagnostics
    sym, sym2 = coarse["symmetry_defect"], fine["symmetry_defect"]
    neg, neg2 = (max(0.0, -d["min_eig"]) / d["max_eig"] for d in (coarse, fine))
    ok = sym < 0.05 and neg <= 0.01 and sym2 <= sym / 2 and neg2 <= neg / 2
    record(2, ok, f"symmetry {sym:.2e} -> {sym2:.2e}, negative eig ratio {neg:.2e} -> {neg2:.2e} at h/2")
    assert ok


def test_criterion_3_moving_receivers(pipeline):
    rec = pipeline["stages"]["move-receivers"]
    errs = {r["t"]: r["relative_error"] for r in rec["times"]}
    lag = {r["t"]: r["depth_lag"] for r in rec["times"]}[1.5]
    computed = not pipeline["cache_hits"].get("receivers", True)
    wall = pipeline["timing"]["move-receivers"]
    ok = set(errs) == {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0} and max(errs.values()) <= 0.15 and lag == 0
    ok = ok and (not computed or wall < 600)
    record(3, ok, f"max relative error {max(errs.values()):.3f} (<= 0.15), lag at t = 1.5: {lag}, "
                  f"{'computed' if computed else 'cached'} {wall:.0f} s")
    assert ok


def test_criterion_4_moving_sources(pipeline):
    src = pipeline["stages"]["move-sources"]
    errs = {r["t"]: r["relative_error"] for r in src["times"]}
    computed = not (pipeline["cache_hits"].get("sources", True) and pipeline["cache_hits"].get("L", True))
    wall = pipeline["timing"]["move-sources"] + pipeline["timing"]["build-L"]
    ok = set(errs) == {0.25, 0.5, 0.75, 1.0} and max(errs.values()) <= 0.2 and (not computed or wall < 1200)
    detail = ", ".join(f"{e:.3f}" for e in errs.values())
    record(4, ok, f"relative errors {detail} (<= 0.2), {'computed' if computed else 'cached'} {wall:.0f} s")
    assert ok


def test_criterion_5_transposition(desk, rng):
    T = desk.cfg.T
    worst = 0.0
    for _ in range(5):
        F = random_interior_source(desk, rng, T)
        h = rng.standard_normal(desk.grid.size(T))
        lhs, rhs = transposition_pair(desk, F, expansion(h, desk, T))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    half = T / 2
    L = desk.discrete_L()
    G = gram_matrix(desk.grid, half)
    F = desk.cfg.interior_signal(desk.c, desk.grid)
    coef = kstar_apply(F, L)
    kworst = 0.0
    for _ in range(3):
        h = rng.standard_normal(desk.grid.size(half))
        rhs, _ = interior_boundary_pairing(desk, F, h, half)
        kworst = max(kworst, abs(float(h @ G.matvec(coef.values)) - rhs) / abs(rhs))
    ok = worst <= 0.03 and kworst <= 0.05
    record(5, ok, f"<F,u^h> vs <v^F,h> {worst:.4f} (<= 0.03), K* identity {kworst:.4f} (<= 0.05)")
    assert ok


def test_criterion_6_operator_algebra(desk, rng):
    dt = desk.grid.dt_r
    xs = np.linspace(-1, 1, 7)
    t1 = np.round(np.arange(0, 1 + dt / 2, dt), 12)
    f = BoundarySignal(t1, xs, rng.standard_normal((t1.size, xs.size)))
    g = BoundarySignal(t1, xs, rng.standard_normal((t1.size, xs.size)))
    exact = {}
    # R is an involution and an isometry
    exact["R R = I"] = np.abs(time_reverse(time_reverse(f)).values - f.values).max() / np.abs(f.values).max()
    exact["|R f| = |f|"] = abs(time_reverse(f).norm() - f.norm()) / f.norm()
    # restriction undoes zero extension; J of the extension equals the fused J Theta up to its jump term
    exact["rho Theta = I"] = np.abs(restrict(zero_extend(f), 1.0).values - f.values).max()
    a, b = filter_extended(f).values, time_filter(zero_extend(f), 1.0).values
    exact["J Theta"] = np.abs((a[:-1] - b[:-1]) - (a[-2] - b[-2])).max() / np.abs(a).max()
    # windowing is an orthogonal projection
    W = SignalWindow(0.3, 0.8, 1.0)
    Pf = window_project(f, W)
    exact["P P = P"] = np.abs(window_project(Pf, W).values - Pf.values).max()
    exact["<Pf,g> = <f,Pg>"] = abs(Pf.inner(g) - f.inner(window_project(g, W))) / (f.norm() * g.norm())
    # Z on coefficients is an exact index shift
    grid, T = desk.grid, desk.cfg.T
    c = BasisCoefficients(rng.standard_normal(grid.size(T)), grid, T)
    z = delay_coefficients(c, 2).blocks()
    exact["Z shift"] = float(np.abs(z[2:] - c.blocks()[:-2]).max() + np.abs(z[:2]).max())
    # R J in the pulse basis: erf closed form against adaptive quadrature of 1/2 int_t^tau g_i
    tau = T / 2
    times = grid.receiver_times(tau)
    tc, norms = np.asarray(grid.t_centers[: grid.n_t(tau)]), grid.temporal_norms(tau)
    jt = np.array([[0.5 * norms[i] * quad(lambda s: np.exp(-grid.a_t * (s - tc[i]) ** 2), t, tau,
                                          epsabs=1e-15, epsrel=1e-13)[0] for t in times] for i in range(tc.size)])
    wt = np.full(times.size, grid.dt_r)
    wt[[0, -1]] *= 0.5
    oracle = (grid.temporal_factors(tau) * wt) @ jt[:, ::-1].T
    Bt = rj_temporal(grid, tau)
    quadrature = np.abs(Bt - oracle).max() / np.abs(oracle).max()
    closed = np.linalg.solve(gram_matrix(grid, tau).G_t, Bt)
    full = assemble_operator_matrix("RJ", None, gram_matrix(grid, tau), grid=grid)
    exact["RJ kron"] = np.abs(full - np.kron(closed, np.eye(grid.n_x))).max()
    bad = {k: v for k, v in exact.items() if not v <= 1e-12}
    ok = not bad and quadrature <= 1e-8
    record(6, ok, f"exact identities max {max(exact.values()):.1e} (<= 1e-12), RJ vs adaptive quadrature "
                  f"{quadrature:.1e} (<= 1e-8)" + (f", failing {sorted(bad)}" if bad else ""))
    assert ok


def test_criterion_7_control_solver(desk, rng):
    T = desk.cfg.T
    K = desk.K(T)
    W = desk.grid.window(T - 0.25, T, T)
    p = ControlProblem.for_target(K, W, desk.cfg.receiver_alpha, rng.standard_normal(K.size))
    it = solve_control(p, "cg", tol=1e-12, max_iter=20000)
    ref = solve_control(p, "direct").coefficients
    err = np.linalg.norm(it.coefficients - ref) / np.linalg.norm(ref)
    alphas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    norms = [e.h_norm for e in regularization_sweep(p, alphas, solver="direct")]
    mono = all(b >= a * (1 - 1e-9) for a, b in zip(norms, norms[1:]))
    ok = W.size <= 400 and it.converged and err <= 1e-6 and mono
    record(7, ok, f"window {W.size}, CG vs LU {err:.1e} (<= 1e-6), |h_alpha| monotone over 6 alphas: {mono}")
    assert ok


def test_criterion_8_instability():
    t0 = time.perf_counter()
    cfg = HadamardConfig(eps=0.1, n_max=60, k=1)
    fit = fit_growth(cfg)
    wall = time.perf_counter() - t0
    target = -np.log(1 - cfg.eps)
    ok = abs(fit.slope_interior - target) <= 0.05 * target and fit.slope_boundary_log <= cfg.k + 1.5 and wall < 10
    record(8, ok, f"interior slope {fit.slope_interior:.5f} vs {target:.5f}, boundary log-log slope "
                  f"{fit.slope_boundary_log:.3f} (<= {cfg.k + 1.5}), {wall:.2f} s")
    assert ok


def test_criterion_9_solver_verification():
    spec = DomainSpec.from_spacing(0.025, x_half=4.0, gamma_half_width=1.5, known_radius=0.5)
    c = build_wavespeed(spec, "linear-depth")
    dt = choose_dt(spec, c, 0.0125)
    # energy after the source is cut at 0.6 and before the front reaches the bottom and back
    f = GaussianSource.from_sigma(0.3, 0.0, 0.1, cut=0.6)
    times = [round(k * dt, 12) for k in range(int(round(0.8 / dt)), int(round(1.8 / dt)) + 1, 40)]
    both = sorted(set(times) | {round(t + dt, 12) for t in times})
    rec = solve_neumann(f, c, both[-1], OutputRequest(snapshot_times=tuple(both)), dt=dt)
    E = np.array([discrete_energy(rec.snapshot(t + dt).values, rec.snapshot(t).values, c, dt) for t in times])
    drift = np.abs(E - E[0]).max() / E[0]
    # second order on a received trace
    traces = []
    for h in (0.05, 0.025, 0.0125):
        sp = DomainSpec.from_spacing(h, x_half=2.0, gamma_half_width=1.0, known_radius=0.3, T=1.0)
        cc = build_wavespeed(sp, "linear-depth")
        r = solve_neumann(GaussianSource.from_sigma(0.25, 0.0, 0.1), cc, 0.8,
                          OutputRequest(receiver_xs=np.array([0.0, 0.5]), receiver_dt=0.025), dt=h / 4)
        traces.append(r.trace.values)
    order = np.log2(np.abs(traces[0] - traces[1]).max() / np.abs(traces[1] - traces[2]).max())
    # nothing beyond the travel-time front
    snap_t = (0.3, 0.6, 0.9)
    rec = solve_neumann(GaussianSource.from_sigma(0.3, 0.0, 0.1), c, 0.9, OutputRequest(snapshot_times=snap_t),
                        dt=dt)
    d = travel_time_to_gamma(spec, c)
    top = max(np.abs(rec.snapshot(t).values).max() for t in snap_t)
    leak = max(np.abs(rec.snapshot(t).values[d > t]).max() for t in snap_t) / top
    ok = drift < 1e-4 and 1.6 <= order <= 2.4 and leak < 1e-3
    record(9, ok, f"energy drift {drift:.1e} (< 1e-4), convergence order {order:.2f}, "
                  f"outside-cone amplitude {leak:.1e} (< 1e-3)")
    assert ok
