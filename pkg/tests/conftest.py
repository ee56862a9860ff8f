import os
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from redatum.config import ExperimentConfig, Workspace
from redatum.domain import DomainSpec, build_wavespeed, known_region_mask

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small():
    """A coarse strip for quick solver tests."""
    spec = DomainSpec.from_spacing(0.05, x_half=4.0, depth=1.0, gamma_half_width=1.5,
                                   known_radius=0.5, T=2.0)
    c = build_wavespeed(spec, "linear-depth")
    return SimpleNamespace(spec=spec, c=c, mask=known_region_mask(spec, c))


@pytest.fixture(scope="session")
def cache_root(tmp_path_factory) -> Path:
    env = os.environ.get("REDATUM_TEST_CACHE")
    if env:
        p = Path(env)
        p.mkdir(parents=True, exist_ok=True)
        return p
    return tmp_path_factory.mktemp("redatum-cache")


@pytest.fixture(scope="session")
def desk(cache_root):
    """Desk-scale workspace; heavy objects (NtD, K, L) are built lazily and cached."""
    cfg = ExperimentConfig(stages=[])
    return Workspace(cfg, cache=cache_root)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
