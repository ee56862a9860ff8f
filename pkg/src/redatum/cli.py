"""Command line entry point: ``redatum <verb> ...``.

Every verb except ``run`` and ``instability`` works on one medium/basis pair
given by ``--h/--model/--basis`` and goes through the same cache as ``run``
(location from ``REDATUM_CACHE_DIR``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from .config import (ConfigError, ExperimentConfig, Workspace, boundary_source_from_dict,
                     interior_source_from_dict)
from .pipeline import _save_result, run_experiment, run_instability
from .redatuming import move_receivers, move_sources, relative_error
from .signals import Snapshot
from .wave_sim import OutputRequest, choose_dt, solve_interior, solve_neumann


def _tau(text: str, T: float) -> float:
    t = text.strip().upper()
    if t == "T":
        return T
    if t == "T/2":
        return T / 2
    return float(text)


def _times(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError([f"{path}: {e}"]) from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="experiment JSON supplying strip, medium and basis")
    p.add_argument("--h", type=float, default=None, help="grid spacing (default 0.0125)")
    p.add_argument("--model", default=None, help="registered model or .wsgrid file")
    p.add_argument("--basis", default=None, help="desk, paper or a basis JSON file")
    p.add_argument("--out", default=None, help="output location")


def _workspace(args, **extra) -> Workspace:
    base = _read_json(args.config) if args.config else {}
    for name in ("h", "model", "basis"):
        if getattr(args, name) is not None:
            base[name] = getattr(args, name)
    cfg = ExperimentConfig.from_dict({**base, **extra, "stages": []})
    return Workspace(cfg, log=lambda m: print(m, file=sys.stderr))


def _cmd_simulate_ntd(args) -> int:
    ws = _workspace(args)
    data = ws.ntd()
    if args.out:
        data.save(args.out)
    print(json.dumps({"dataset_id": data.dataset_id, "mode": data.mode, "cached": ws.hits["ntd"]}))
    return 0


def _cmd_assemble_k(args) -> int:
    ws = _workspace(args, symmetrize=args.symmetrize)
    K = ws.K(_tau(args.tau, ws.cfg.T))
    if args.out:
        K.save(args.out)
    print(json.dumps({"tau": K.tau, "size": K.size, **K.diagnostics}))
    return 0


def _cmd_build_L(args) -> int:
    ws = _workspace(args, L_alpha=args.alpha)
    L = ws.discrete_L()
    if args.out:
        L.save(args.out)
    print(json.dumps({"records": L.n_records, "samples": L.samples.n_points, "cached": ws.hits["L"]}))
    return 0


def _oracle_rows(res, oracle, ws, out: Path, prefix: str, render: bool) -> list[dict]:
    rows = []
    crop = ws.cfg.gamma_half_width + 2 * ws.cfg.known_radius
    for r in res:
        orc = None
        row = {"t": r.t, "residual": r.residual, "iterations": r.iterations}
        if oracle is not None:
            orc = Snapshot(ws.spec, r.t, oracle.snapshot(r.t).values, ws.mask.mask)
            row["relative_error"] = relative_error(r.snapshot.values, orc.values, ws.c, ws.mask)
        _save_result(out, f"{prefix}_t{r.t:.4f}", r.snapshot, orc, render, crop)
        rows.append(row)
    return rows


def _cmd_move_receivers(args) -> int:
    ws = _workspace(args, receiver_alpha=args.alpha, solver=args.solver, tol=args.tol,
                    max_iter=args.max_iter, symmetrize=args.symmetrize)
    f = boundary_source_from_dict(_read_json(args.source))
    times = _times(args.times)
    res = move_receivers(f, times, ws.receiver_setup(ws.cfg.T, args.alpha))
    oracle = None
    if args.with_oracle:
        oracle = solve_neumann(f, ws.c, ws.cfg.T, OutputRequest(snapshot_times=tuple(times)),
                               dt=choose_dt(ws.spec, ws.c, ws.grid.dt_r))
    out = Path(args.out or "receivers")
    out.mkdir(parents=True, exist_ok=True)
    rows = _oracle_rows(res, oracle, ws, out, "receivers", not args.no_render)
    (out / "report.json").write_text(json.dumps({"times": rows}, indent=1))
    print(json.dumps(rows))
    return 0


def _cmd_move_sources(args) -> int:
    ws = _workspace(args, source_alpha=args.alpha, L_alpha=args.L_alpha, solver=args.solver,
                    tol=args.tol, max_iter=args.max_iter, symmetrize=args.symmetrize)
    half = ws.cfg.T / 2
    F = interior_source_from_dict(_read_json(args.source), ws.c, ws.grid, t_end=half)
    times = _times(args.times)
    res = move_sources(F, times, ws.receiver_setup(half, args.alpha), ws.discrete_L())
    oracle = None
    if args.with_oracle:
        oracle = solve_interior(F, ws.c, half, OutputRequest(snapshot_times=tuple(times)), dt=F.dt)
    out = Path(args.out or "sources")
    out.mkdir(parents=True, exist_ok=True)
    rows = _oracle_rows(res, oracle, ws, out, "sources", not args.no_render)
    (out / "report.json").write_text(json.dumps({"times": rows}, indent=1))
    print(json.dumps(rows))
    return 0


def _cmd_instability(args) -> int:
    out = Path(args.out or "instability")
    out.mkdir(parents=True, exist_ok=True)
    slopes = run_instability({"eps": args.eps, "n_max": args.n_max, "k": args.k}, out)
    print(json.dumps(slopes))
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output_dir = args.out
    report = run_experiment(cfg, log=lambda m: print(m, file=sys.stderr))
    if not cfg.stages:
        print(json.dumps(cfg.to_dict(), indent=1))
    else:
        print(f"report: {Path(cfg.output_dir) / 'report.json'} ({report['status']})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="redatum", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate-ntd", help="simulate (or load from cache) the NtD dataset")
    _common(p)
    p.set_defaults(fn=_cmd_simulate_ntd)

    p = sub.add_parser("assemble-k", help="connecting matrix for tau = T or T/2")
    _common(p)
    p.add_argument("--tau", default="T", help="T, T/2 or a number")
    p.add_argument("--symmetrize", action="store_true", help="average K with its transpose")
    p.set_defaults(fn=_cmd_assemble_k)

    p = sub.add_parser("build-L", help="discrete final-value operator for moving sources")
    _common(p)
    p.add_argument("--alpha", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_build_L)

    for verb, fn, alpha, times, text in (
            ("move-receivers", _cmd_move_receivers, 5e-5, "0.5,1.0,1.5,2.0", "snapshots of a boundary source"),
            ("move-sources", _cmd_move_sources, 1e-4, "0.25,0.5,0.75,1.0", "snapshots of an interior source")):
        p = sub.add_parser(verb, help=text)
        _common(p)
        p.add_argument("--source", required=True, help="source JSON file")
        p.add_argument("--times", default=times, help="comma separated output times")
        p.add_argument("--alpha", type=float, default=alpha)
        p.add_argument("--solver", choices=["cg", "gmres", "direct"], default=None)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=2000)
        p.add_argument("--with-oracle", action="store_true", help="also run the full-domain simulation")
        p.add_argument("--symmetrize", action="store_true", help="average K with its transpose")
        p.add_argument("--no-render", action="store_true")
        if verb == "move-sources":
            p.add_argument("--L-alpha", type=float, default=1e-4)
        p.set_defaults(fn=fn)

    p = sub.add_parser("instability", help="harmonic-family growth rates")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--n-max", type=int, default=60)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_instability)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="override output_dir")
    p.set_defaults(fn=_cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
