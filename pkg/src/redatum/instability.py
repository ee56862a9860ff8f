"""Exponential-versus-polynomial growth of the harmonic family ``phi_n = r^-n e^{i n theta}``.

On the annular sector ``Omega = (q, 1) x (-theta_1, theta_1)``, ``q = 1 - eps``,
the interior norm grows like ``q^-(n-1) / sqrt(n - 1)`` while the Cauchy data
on the arc ``|theta| < theta_0`` of the unit circle grow like ``n^k``. No
Lipschitz bound can relate the two. Everything is evaluated in log space.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp


@dataclass(frozen=True)
class HadamardConfig:
    n_max: int = 60
    theta0: float = 0.5
    theta1: float = 0.25
    eps: float = 0.1
    k: int = 1

    def __post_init__(self):
        if not 0 < self.theta1 <= self.theta0 < np.pi / 2:
            raise ValueError("need 0 < theta1 <= theta0 < pi/2")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.n_max < 3:
            raise ValueError("n_max must be at least 3")
        if self.k < 1:
            raise ValueError("Sobolev order k must be at least 1")

    @property
    def q(self) -> float:
        return 1.0 - self.eps

    def to_dict(self) -> dict:
        return asdict(self)


def phi(n: int, r, theta) -> np.ndarray:
    return np.asarray(r, dtype=float) ** (-n) * np.exp(1j * n * np.asarray(theta, dtype=float))


def polar_laplacian(f, r: float, theta: float, h: float = 1e-3) -> complex:
    """``(d_r^2 + r^-1 d_r + r^-2 d_theta^2) f`` by central differences."""
    frr = (f(r + h, theta) - 2 * f(r, theta) + f(r - h, theta)) / h**2
    fr = (f(r + h, theta) - f(r - h, theta)) / (2 * h)
    ftt = (f(r, theta + h) - 2 * f(r, theta) + f(r, theta - h)) / h**2
    return complex(frr + fr / r + ftt / r**2)


def harmonic_residual(n: int, r: float, theta: float, h: float = 1e-4) -> float:
    """``|Laplacian phi_n|`` relative to the size of its three terms."""
    f = lambda rr, th: phi(n, rr, th)
    frr = (f(r + h, theta) - 2 * f(r, theta) + f(r - h, theta)) / h**2
    fr = (f(r + h, theta) - f(r - h, theta)) / (2 * h)
    ftt = (f(r, theta + h) - 2 * f(r, theta) + f(r, theta - h)) / h**2
    scale = abs(frr) + abs(fr / r) + abs(ftt / r**2)
    return float(abs(polar_laplacian(f, r, theta, h)) / scale)


def log_radial_integral(n: int, q: float) -> float:
    """``log int_q^1 r^(1 - 2n) dr``."""
    if n == 1:
        return float(np.log(-np.log(q)))
    m = 2 * n - 2
    # (q^-m - 1) / m = q^-m (1 - q^m) / m
    return float(-m * np.log(q) + np.log1p(-(q**m)) - np.log(m))


def _theta_rule(half_width: float, m: int = 201) -> tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(-half_width, half_width, m)
    w = np.full(m, theta[1] - theta[0])
    w[0] = w[-1] = 0.5 * w[0]
    return theta, w


def log_interior_norm(cfg: HadamardConfig, n: int) -> float:
    """``log |phi_n|_{L^2(Omega)}``: radial integral in closed form, angle by trapezoid."""
    theta, w = _theta_rule(cfg.theta1)
    angular = np.sum(w * np.abs(np.exp(1j * n * theta)) ** 2)
    return 0.5 * (log_radial_integral(n, cfg.q) + np.log(angular))


def interior_norm_quadrature(cfg: HadamardConfig, n: int, nodes: int = 64) -> float:
    """Same norm by 2-D Gauss-Legendre quadrature (check for moderate ``n``)."""
    x, wx = np.polynomial.legendre.leggauss(nodes)
    r = cfg.q + 0.5 * (1 - cfg.q) * (x + 1)
    wr = 0.5 * (1 - cfg.q) * wx
    th = cfg.theta1 * x
    wt = cfg.theta1 * wx
    vals = np.abs(phi(n, r[:, None], th[None, :])) ** 2 * r[:, None]
    return float(np.sqrt(wr @ vals @ wt))


def log_sobolev_arc(n: int, order: int, half_width: float) -> float:
    """``log |e^{i n theta}|_{H^order}`` on ``|theta| < half_width``.

    ``d_theta^m e^{i n theta} = (i n)^m e^{i n theta}``, so every term is exact.
    """
    theta, w = _theta_rule(half_width)
    length = np.log(np.sum(w))
    terms = [2 * m * np.log(n) + length for m in range(order + 1)]
    return 0.5 * float(logsumexp(terms))


def log_boundary_norm(cfg: HadamardConfig, n: int) -> float:
    """``log(|phi_n|_{H^k} + n |phi_n|_{H^{k-1}})`` on the arc: trace plus normal derivative."""
    a = log_sobolev_arc(n, cfg.k, cfg.theta0)
    b = np.log(n) + log_sobolev_arc(n, cfg.k - 1, cfg.theta0)
    return float(np.logaddexp(a, b))


def evaluate_family(cfg: HadamardConfig, n: int) -> tuple[float, float]:
    """``(interior_norm, boundary_norm)``; may overflow to inf for huge ``n``, use the log forms then."""
    if not 1 <= n <= cfg.n_max:
        raise ValueError(f"n must lie in [1, {cfg.n_max}]")
    return float(np.exp(log_interior_norm(cfg, n))), float(np.exp(log_boundary_norm(cfg, n)))


@dataclass
class GrowthFit:
    slope_interior: float
    slope_boundary_log: float
    residual_interior: float
    residual_boundary: float
    n: np.ndarray
    log_interior: np.ndarray
    log_boundary: np.ndarray

    @property
    def log_ratio(self) -> np.ndarray:
        return self.log_interior - self.log_boundary

    def table(self) -> list[dict]:
        return [{"n": int(n), "log_interior_norm": float(a), "log_boundary_norm": float(b),
                 "log_ratio": float(a - b)}
                for n, a, b in zip(self.n, self.log_interior, self.log_boundary)]


def _lstsq(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise ValueError("degenerate fit: design matrix is rank deficient")
    res = y - A @ coef
    return coef, float(np.sqrt(np.mean(res**2)))


def asymptotic_start(cfg: HadamardConfig, transient: float = 1e-2) -> int:
    """Smallest ``n`` with ``q^(2(n-1)) <= transient``, kept at least four below ``n_max``."""
    n = 1 + int(np.ceil(np.log(transient) / (2 * np.log(cfg.q))))
    return int(np.clip(n, 2, max(2, cfg.n_max - 3)))


def fit_growth(cfg: HadamardConfig, n_min: int | None = None) -> GrowthFit:
    """Growth rates over ``n = n_min .. n_max``.

    The interior slope is the coefficient of ``n`` in a fit of the log norm
    against ``[n, log(n - 1), 1]``, which absorbs the ``(n-1)^-1/2`` factor;
    the boundary slope is the plain log-log slope. By default the fit starts
    where the ``log(1 - q^(2(n-1)))`` transient is below 1%.
    """
    n_min = asymptotic_start(cfg) if n_min is None else n_min
    if n_min < 2:
        raise ValueError("n_min must be at least 2 (log(n - 1) enters the fit)")
    n = np.arange(n_min, cfg.n_max + 1)
    if n.size < 4:
        raise ValueError("degenerate fit: need at least four values of n")
    li = np.array([log_interior_norm(cfg, int(m)) for m in n])
    lb = np.array([log_boundary_norm(cfg, int(m)) for m in n])
    ci, ri = _lstsq(np.column_stack([n, np.log(n - 1), np.ones(n.size)]), li)
    cb, rb = _lstsq(np.column_stack([np.log(n), np.ones(n.size)]), lb)
    if not np.all(np.isfinite(li)) or not np.all(np.isfinite(lb)):
        warnings.warn("non-finite norms in growth fit")
    return GrowthFit(float(ci[0]), float(cb[0]), ri, rb, n, li, lb)


def monotone_from(fit: GrowthFit) -> int | None:
    """First ``n`` from which the log ratio increases strictly up to ``n_max``."""
    d = np.diff(fit.log_ratio)
    bad = np.nonzero(d <= 0)[0]
    if bad.size == 0:
        return int(fit.n[0])
    if bad[-1] + 1 >= fit.n.size - 1:
        return None
    return int(fit.n[bad[-1] + 1])
