"""Experiment configuration and the content-addressed cache for expensive stages."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .basis import PulseGrid
from .domain import (MODELS, DomainSpec, build_wavespeed, extend_known, known_region_mask,
                     travel_time_depth)
from .signals import GaussianSource, InteriorSource
from .wave_sim import choose_dt

STAGES = ("simulate-ntd", "assemble-k", "move-receivers", "build-L", "move-sources", "instability")
CACHE_TAG = f"redatum-{__version__}-1"


class ConfigError(ValueError):
    """Raised with one ``field: message`` line per problem."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def _default_receiver_times():
    return [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]


@dataclass
class ExperimentConfig:
    # domain and medium
    h: float = 0.0125
    x_half: float = 8.0
    depth: float = 1.0
    gamma_half_width: float = 3.1
    known_radius: float = 0.5
    T: float = 2.0
    model: str = "linear-depth"
    # basis: preset name or JSON file
    basis: str = "desk"
    stages: list = field(default_factory=lambda: list(STAGES))
    # controls
    receiver_alpha: float = 5e-5
    source_alpha: float = 1e-4
    L_alpha: float = 1e-4
    formulation: str = "gram"
    symmetrize: bool = False
    solver: str | None = None
    tol: float = 1e-8
    max_iter: int = 2000
    # test signals
    receiver_times: list = field(default_factory=_default_receiver_times)
    source_times: list = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    boundary_source: dict = field(default_factory=lambda: {"t_c": 0.25, "x_c": 0.0, "sigma": 0.1})
    interior_source: dict = field(default_factory=lambda: {"t_c": 0.1, "x_c": 0.0,
                                                           "travel_time_depth": 0.25})
    instability: dict = field(default_factory=lambda: {"eps": 0.1, "n_max": 60, "k": 1})
    oracle: bool = True
    render: bool = True
    seed: int = 0
    output_dir: str = "runs/desk"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError([f"{k}: unknown field" for k in unknown])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError([f"<file>: not valid JSON ({e})"]) from None
        if not isinstance(d, dict):
            raise ConfigError(["<file>: top level must be an object"])
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        p = []
        if not self.h > 0:
            p.append("h: must be positive")
        if self.model not in MODELS and not Path(self.model).exists():
            p.append(f"model: unknown model {self.model!r}")
        if not 0 < self.known_radius < self.T / 2:
            p.append("known_radius: must lie in (0, T/2)")
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            p.append(f"stages: unknown stage(s) {bad}; expected a subset of {list(STAGES)}")
        for name in ("receiver_alpha", "source_alpha", "L_alpha", "tol"):
            if not getattr(self, name) > 0:
                p.append(f"{name}: must be positive")
        if self.formulation not in ("gram", "coefficient"):
            p.append("formulation: must be 'gram' or 'coefficient'")
        if self.solver not in (None, "cg", "gmres", "direct"):
            p.append("solver: must be null, 'cg', 'gmres' or 'direct'")
        if int(self.max_iter) < 1:
            p.append("max_iter: must be at least 1")
        spec = None
        if self.h > 0:
            try:
                spec = self.domain()
            except ValueError as e:
                p.append(f"domain: {e}")
        try:
            grid = self.grid()
        except (ValueError, TypeError, OSError) as e:
            p.append(f"basis: {e}")
            grid = None
        if grid is not None:
            if abs(grid.T - self.T) > 1e-12:
                p.append(f"basis: basis horizon {grid.T} differs from T = {self.T}")
            if abs(grid.gamma_half_width - self.gamma_half_width) > 1e-12:
                p.append("basis: basis Gamma differs from gamma_half_width")
            step = grid.dt_s
            for t in self.receiver_times:
                if not 0 <= t <= self.T + 1e-12 or not _on(self.T - t, step):
                    p.append(f"receiver_times: {t} must lie in [0, T] with T - t on the source-time grid")
            for t in self.source_times:
                if not 0 <= t <= self.T / 2 + 1e-12 or not _on(self.T / 2 - t, step):
                    p.append(f"source_times: {t} must lie in [0, T/2] with T/2 - t on the source-time grid")
            if spec is not None:
                try:
                    spec.x_index(grid.receiver_xs())
                except ValueError:
                    p.append("basis: receiver positions are not on the solver grid")
        bs = self.boundary_source
        if not isinstance(bs, dict) or not {"t_c", "x_c"} <= set(bs) or not ({"sigma"} & set(bs) or {"a_t", "a_x"} <= set(bs)):
            p.append("boundary_source: needs t_c, x_c and sigma (or a_t and a_x)")
        fs = self.interior_source
        if not isinstance(fs, dict) or not {"t_c", "x_c"} <= set(fs) or not ({"depth_c", "travel_time_depth"} & set(fs)):
            p.append("interior_source: needs t_c, x_c and depth_c or travel_time_depth")
        try:
            from .instability import HadamardConfig
            HadamardConfig(**self.instability)
        except (TypeError, ValueError) as e:
            p.append(f"instability: {e}")
        if p:
            raise ConfigError(p)

    # -- derived objects ----------------------------------------------------------

    def domain(self) -> DomainSpec:
        return DomainSpec.from_spacing(self.h, x_half=self.x_half, depth=self.depth,
                                       gamma_half_width=self.gamma_half_width,
                                       known_radius=self.known_radius, T=self.T)

    def grid(self) -> PulseGrid:
        return PulseGrid.from_name(self.basis)

    def boundary_signal(self) -> GaussianSource:
        return boundary_source_from_dict(self.boundary_source)

    def interior_signal(self, c, grid: PulseGrid) -> InteriorSource:
        return interior_source_from_dict(self.interior_source, c, grid, t_end=0.5 * self.T)


def boundary_source_from_dict(d: dict) -> GaussianSource:
    """``{t_c, x_c, sigma}`` or ``{t_c, x_c, a_t, a_x}``, optional ``amplitude``."""
    d = dict(d)
    amp = float(d.get("amplitude", 1.0))
    try:
        if "sigma" in d:
            return GaussianSource.from_sigma(float(d["t_c"]), float(d["x_c"]), float(d["sigma"]),
                                             amplitude=amp)
        return GaussianSource(float(d["t_c"]), float(d["x_c"]), float(d["a_t"]), float(d["a_x"]),
                              amplitude=amp)
    except KeyError as e:
        raise ConfigError([f"boundary source: missing field {e.args[0]}"]) from None


def interior_source_from_dict(d: dict, c, grid: PulseGrid, t_end: float) -> InteriorSource:
    """``{t_c, x_c, depth_c | travel_time_depth, a}``; ``a`` defaults to the basis sharpness."""
    d = dict(d)
    try:
        t_c, x_c = float(d["t_c"]), float(d["x_c"])
    except KeyError as e:
        raise ConfigError([f"interior source: missing field {e.args[0]}"]) from None
    if "depth_c" in d:
        depth = float(d["depth_c"])
    elif "travel_time_depth" in d:
        depth, clamped = travel_time_depth(c, float(d["travel_time_depth"]), x_c)
        if clamped:
            raise ConfigError(["interior source: travel-time depth lies below the strip"])
    else:
        raise ConfigError(["interior source: needs depth_c or travel_time_depth"])
    spec = c.spec
    dt = choose_dt(spec, c, grid.dt_r)
    return InteriorSource.gaussian(spec, t_c=t_c, x_c=x_c, depth_c=depth,
                                   a=float(d.get("a", grid.a_t)), dt=dt, t_end=t_end,
                                   amplitude=float(d.get("amplitude", 1.0)))


def _on(t: float, step: float) -> bool:
    k = round(t / step)
    return abs(k * step - t) <= 1e-9


# -- cache -----------------------------------------------------------------------


def cache_dir() -> Path:
    root = os.environ.get("REDATUM_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "redatum"
    path.mkdir(parents=True, exist_ok=True)
    return path


def cache_key(stage: str, payload: dict) -> str:
    blob = json.dumps({"stage": stage, "tag": CACHE_TAG, "payload": payload}, sort_keys=True,
                      default=_jsonable)
    return f"{stage}-{hashlib.sha256(blob.encode()).hexdigest()[:20]}"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot hash {type(o)}")


class Workspace:
    """Lazily built shared objects of one configuration, with cached heavy stages."""

    def __init__(self, cfg: ExperimentConfig, cache: Path | None = None, log=None):
        self.cfg = cfg
        self.cache = Path(cache) if cache else cache_dir()
        self.log = log or (lambda msg: None)
        self.spec = cfg.domain()
        self.c = build_wavespeed(self.spec, cfg.model)
        self.mask = known_region_mask(self.spec, self.c)
        self.c_known = extend_known(self.c, self.mask)
        self.grid = cfg.grid()
        self.hits: dict[str, bool] = {}
        self._ntd = None
        self._K = {}
        self._L = None

    def _base(self) -> dict:
        return {"domain": self.spec.to_dict(), "medium": self.c.fingerprint(),
                "grid": self.grid.to_dict()}

    def ntd(self):
        from .connecting import NtDDataset, simulate_ntd

        if self._ntd is None:
            key = cache_key("ntd", self._base())
            path = self.cache / key
            if (path / "manifest.json").exists():
                self._ntd = NtDDataset.load(path)
                self.hits["ntd"] = True
            else:
                self.log("simulating NtD data")
                self._ntd = simulate_ntd(self.grid, self.c)
                self._ntd.save(path)
                self.hits["ntd"] = False
        return self._ntd

    def K(self, tau: float):
        from .connecting import ConnectingMatrix, assemble_K

        tau = float(tau)
        if tau not in self._K:
            key = cache_key("kmat", {**self._base(), "tau": tau, "symmetrize": self.cfg.symmetrize})
            path = self.cache / f"{key}.kmat"
            if path.exists():
                self._K[tau] = ConnectingMatrix.load(path)
                self.hits[f"K{tau:g}"] = True
            else:
                data = self.ntd()
                self.log(f"assembling K for tau = {tau:g}")
                self._K[tau] = assemble_K(tau, data, symmetrize=self.cfg.symmetrize)
                self._K[tau].save(path)
                self.hits[f"K{tau:g}"] = False
        return self._K[tau]

    def receiver_setup(self, tau: float, alpha: float, solver: str | None = None):
        from .redatuming import ReceiverSetup

        cfg = self.cfg
        return ReceiverSetup(self.K(tau), self.c_known, self.mask, alpha=alpha,
                             formulation=cfg.formulation, solver=solver or cfg.solver,
                             tol=cfg.tol, max_iter=cfg.max_iter)

    def discrete_L(self):
        from .redatuming import DiscreteL, build_discrete_L

        if self._L is None:
            key = cache_key("discL", {**self._base(), "alpha": self.cfg.L_alpha,
                                       "formulation": self.cfg.formulation,
                                       "symmetrize": self.cfg.symmetrize})
            path = self.cache / key
            if (path / "manifest.json").exists():
                self._L = DiscreteL.load(path)
                self.hits["L"] = True
            else:
                self.log("building discrete L")
                setup = self.receiver_setup(self.cfg.T, self.cfg.L_alpha, solver="direct")
                self._L = build_discrete_L(setup, alpha=self.cfg.L_alpha)
                self._L.save(path)
                self.hits["L"] = False
        return self._L

    def cached_arrays(self, stage: str, payload: dict, compute):
        """``compute() -> dict[str, ndarray]`` memoised as one ``.npz`` file."""
        key = cache_key(stage, {**self._base(), **payload})
        path = self.cache / f"{key}.npz"
        if path.exists():
            self.hits[stage] = True
            with np.load(path) as z:
                return {k: z[k] for k in z.files}
        out = compute()
        np.savez(path, **out)
        self.hits[stage] = False
        return out
