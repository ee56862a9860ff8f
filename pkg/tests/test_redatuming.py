import numpy as np
import pytest

from desk_oracles import expansion, interior_boundary_pairing, random_interior_source, solver_dt
from redatum.basis import gram_matrix
from redatum.redatuming import (SampleGrid, delay_interior, kstar_apply, kstar_inner, move_receivers,
                                move_sources, project_delayed, relative_error, wf_trace, _reference_source)
from redatum.signals import GaussianSource, InteriorSource
from redatum.wave_sim import OutputRequest, solve_interior, solve_neumann


@pytest.fixture(scope="module")
def rsetup(desk):
    return desk.receiver_setup(desk.cfg.T, desk.cfg.receiver_alpha)


@pytest.fixture(scope="module")
def L(desk):
    return desk.discrete_L()


@pytest.fixture(scope="module")
def F(desk):
    return desk.cfg.interior_signal(desk.c, desk.grid)


def test_zero_source_zero_snapshot(desk, rsetup):
    zero = GaussianSource(0.25, 0.0, 50.0, 50.0, amplitude=0.0)
    res = move_receivers(zero, [1.0], rsetup)[0]
    assert not res.snapshot.values.any() and not res.control.any()


def test_output_time_validation(rsetup):
    f = GaussianSource.from_sigma(0.25, 0.0, 0.1)
    with pytest.raises(ValueError):
        move_receivers(f, [2.5], rsetup)
    with pytest.raises(ValueError):
        move_receivers(f, [1.01], rsetup)


def test_time_translation_consistency(desk, rsetup):
    f = desk.cfg.boundary_signal()
    s = desk.grid.dt_s
    a = move_receivers(f, [1.0], rsetup)[0].snapshot.values
    b = move_receivers(f.delayed(s), [1.0 + s], rsetup)[0].snapshot.values
    assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(a)


def test_restricted_domain_equivalence(desk, rsetup, rng):
    """Known-medium simulation of a windowed control equals the true-medium wave on the mask."""
    grid, T = desk.grid, desk.cfg.T
    std = 1 / np.sqrt(2 * grid.a_t)
    W = grid.window(T - desk.mask.radius + 4 * std, T, T)
    h = np.zeros(grid.size(T))
    h[W] = rng.standard_normal(W.size)
    approx = rsetup.simulate([h])[0].values
    truth = solve_neumann(expansion(h, desk, T), desk.c, T, OutputRequest(snapshot_times=(T,)),
                          dt=solver_dt(desk)).snapshot(T).values
    assert relative_error(approx, truth, desk.c, desk.mask) <= 1e-3


def test_relative_error_basics(desk):
    u = np.ones(desk.spec.shape)
    assert relative_error(u, u, desk.c, desk.mask) == 0.0
    assert relative_error(2 * u, u, desk.c, desk.mask) == pytest.approx(1.0)


def test_discrete_L_bookkeeping(desk, L):
    grid = desk.grid
    n_l = int(round(grid.T / grid.dt_s)) + 1
    assert L.values.shape == (grid.n_x, n_l, L.samples.n_points)
    assert L.n_records == grid.n_x * n_l * L.samples.n_points
    # sample spacing equals the source spacing in both directions
    assert np.allclose(np.diff(L.samples.xs), grid.dx_s) and np.allclose(np.diff(L.samples.depths), grid.dx_s)
    assert np.all(desk.mask.mask[L.samples.rows[:, None], L.samples.cols[None, :]])


def test_discrete_L_causal_at_start(L):
    assert np.abs(L.values[:, 0]).max() < 1e-2 * np.abs(L.values).max()


def test_discrete_L_shift_matches_direct(desk, L):
    """Row ``ref + 1`` rebuilt from scratch agrees with the index-shifted reference row."""
    grid, cfg = desk.grid, desk.cfg
    setup = desk.receiver_setup(cfg.T, cfg.L_alpha, solver="direct")
    i, j = L.ref_index + 1, grid.n_x // 2
    ls = [3, 10, 20]
    zs = np.array([project_delayed(_reference_source(grid, i, j), L.times[l], setup) for l in ls])
    hs = setup.controls_direct(zs, cfg.L_alpha)
    direct = np.array([L.samples.sample(s.values) for s in setup.simulate(list(hs))])
    shifted = L.pulse(i)[j, ls]
    assert np.linalg.norm(shifted - direct) <= 1e-6 * np.linalg.norm(direct)


def test_discrete_L_roundtrip(tmp_path, L):
    from redatum.redatuming import DiscreteL

    back = DiscreteL.load(L.save(tmp_path / "L"))
    assert np.array_equal(back.values, L.values) and np.array_equal(back.head, L.head)
    assert back.ref_index == L.ref_index and back.alpha == L.alpha


def test_sample_grid_rejects_off_grid(desk):
    with pytest.raises(ValueError):
        SampleGrid(desk.spec, np.array([0.0, 0.0101]), np.array([0.0]))


def _zero_like(F):
    return InteriorSource(F.spec, F.times, np.zeros_like(F.temporal), F.spatial)


def test_zero_interior_source(desk, L, F):
    G = gram_matrix(desk.grid, desk.cfg.T)
    assert not wf_trace(_zero_like(F), L, G).values.any()
    assert not kstar_inner(_zero_like(F), L).any()


def test_wf_trace_against_full_domain(desk, L, F):
    G = gram_matrix(desk.grid, desk.cfg.T)
    approx = wf_trace(F, L, G)
    xs = desk.grid.receiver_xs()
    truth = solve_interior(F, desk.c, desk.cfg.T, OutputRequest(receiver_xs=xs, receiver_dt=desk.grid.dt_r),
                           dt=F.dt).trace
    err = approx.with_values(approx.values - truth.values).norm() / truth.norm()
    assert err <= 0.15


def test_source_outside_samples_rejected(desk, L):
    far = InteriorSource.gaussian(desk.spec, t_c=0.3, x_c=0.0, depth_c=0.9, a=desk.grid.a_t,
                                  dt=solver_dt(desk), t_end=1.0)
    with pytest.raises(ValueError):
        kstar_inner(far, L)


def test_kstar_linear(desk, L, rng):
    F1 = random_interior_source(desk, rng, 1.0)
    F2 = random_interior_source(desk, rng, 1.0)
    a, b = rng.standard_normal(2)
    lhs = kstar_inner(F1.scaled(a) + F2.scaled(b), L)
    rhs = a * kstar_inner(F1, L) + b * kstar_inner(F2, L)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max() * 10


def test_kstar_defining_identity(desk, L, F, rng):
    half = 0.5 * desk.cfg.T
    h = rng.standard_normal(desk.grid.size(half))
    coef = kstar_apply(F, L)
    G = gram_matrix(desk.grid, half)
    lhs = float(h @ G.matvec(coef.values))
    rhs, scale = interior_boundary_pairing(desk, F, h, half)
    assert abs(lhs - rhs) <= 0.05 * abs(rhs)


def test_delay_interior(F):
    s = 8 * F.dt
    D = delay_interior(F, s)
    assert np.allclose(D.at(0.3 + s), F.at(0.3))
    assert delay_interior(F, s, cut=0.5).times[-1] <= 0.5 + 1e-9
    with pytest.raises(ValueError):
        delay_interior(F, 0.3 * F.dt)


def test_move_sources_zero_and_validation(desk, L, F):
    setup = desk.receiver_setup(0.5 * desk.cfg.T, desk.cfg.source_alpha)
    res = move_sources(_zero_like(F), [0.5], setup, L)[0]
    assert not res.snapshot.values.any()
    with pytest.raises(ValueError):
        move_sources(F, [1.5], setup, L)
    with pytest.raises(ValueError):
        move_sources(F, [0.5], desk.receiver_setup(desk.cfg.T, 1e-4), L)


def _small_run(tmp_path, spacing):
    from redatum.basis import PulseGrid
    from redatum.config import ExperimentConfig
    from redatum.pipeline import run_experiment

    a = 1382.0 * 0.025**2 / spacing**2
    g = PulseGrid.uniform(dt_s=spacing, dx_s=spacing, a_t=a, a_x=a, dt_r=0.0125, dx_r=0.03125, T=1.0,
                          gamma_half_width=1.5, x_margin=0.24, t_offset=spacing / 4, t_min=np.sqrt(2 / a),
                          name=f"small-{spacing}")
    cfg = ExperimentConfig.from_dict({
        "h": 0.03125, "x_half": 4.0, "gamma_half_width": 1.5, "known_radius": 0.3, "T": 1.0,
        "basis": str(g.to_json(tmp_path / f"basis_{spacing}.json")), "receiver_times": [1.0],
        "source_times": [0.25, 0.5],
        "interior_source": {"t_c": 0.15, "x_c": 0.0, "depth_c": 0.12, "a": 800.0},
        "stages": ["move-sources"], "render": False, "output_dir": str(tmp_path / f"run_{spacing}")})
    rep = run_experiment(cfg, cache=tmp_path / "cache", log=lambda m: None)
    return [r["relative_error"] for r in rep["stages"]["move-sources"]["times"]]


def test_move_sources_error_shrinks_under_basis_refinement(tmp_path):
    coarse = _small_run(tmp_path, 0.125)
    fine = _small_run(tmp_path, 0.0625)
    assert all(f <= c for f, c in zip(fine, coarse))
