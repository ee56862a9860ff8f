"""Tikhonov-regularised control solves on a window of the pulse basis.

Two discretisations of ``(P K P + alpha) h = P K z`` are available:

``gram``
    ``(G[K]_WW + alpha G_WW) h_W = (G[K] z)_W``, the normal equations of
    ``min |W h - W z|^2 + alpha |h|^2`` over the window span. Symmetric
    positive definite once ``G[K]`` is symmetrised, so CG applies.
``coefficient``
    ``([K]_WW + alpha I) h_W = ([K] z)_W``, the coefficient-matrix system
    read literally; non-symmetric, solved with restarted GMRES.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, cg, gmres

from .basis import GramMatrix
from .connecting import ConnectingMatrix

FORMULATIONS = ("gram", "coefficient")
SOLVERS = ("cg", "gmres", "direct")


@dataclass(eq=False)
class ControlProblem:
    """``K``, the window (flat pulse indices), ``alpha`` and the right-hand side.

    ``rhs`` is a full-length vector already in the space of the chosen
    formulation (``G[K] z`` or ``[K] z``); ``target`` keeps ``z`` when known
    so that sweep objectives can be evaluated.
    """

    K: ConnectingMatrix
    window: np.ndarray
    alpha: float
    rhs: np.ndarray
    formulation: str = "gram"
    G: GramMatrix | None = None
    symmetrize: bool = True
    target: np.ndarray | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        self.window = np.asarray(self.window, dtype=int)
        if self.window.size == 0:
            raise ValueError("control window is empty")
        if self.rhs.shape != (self.K.size,):
            raise ValueError("right-hand side does not match the basis size")
        if self.formulation == "gram" and self.G is None:
            self.G = self.K.gram()

    @classmethod
    def for_target(cls, K: ConnectingMatrix, window, alpha: float, z: np.ndarray,
                   formulation: str = "gram", **kw) -> "ControlProblem":
        """Problem with right-hand side ``P K z`` for target coefficients ``z``."""
        z = np.asarray(z, dtype=float)
        rhs = K.form @ z if formulation == "gram" else K.matrix @ z
        return cls(K, window, alpha, rhs, formulation, target=z, **kw)

    def window_matrix(self, alpha: float | None = None) -> np.ndarray:
        alpha = self.alpha if alpha is None else alpha
        W = self.window
        if self.formulation == "gram":
            A = self.K.form[np.ix_(W, W)]
            if self.symmetrize:
                A = 0.5 * (A + A.T)
            return A + alpha * _gram_block(self.G, W)
        A = self.K.matrix[np.ix_(W, W)]
        return A + alpha * np.eye(W.size)


def _gram_block(G: GramMatrix, W: np.ndarray) -> np.ndarray:
    nx = G.G_x.shape[0]
    it, jx = W // nx, W % nx
    return G.G_t[np.ix_(it, it)] * G.G_x[np.ix_(jx, jx)]


def _window_gram(G: GramMatrix, W: np.ndarray) -> GramMatrix | None:
    nx = G.G_x.shape[0]
    if W.size % nx or np.any(W.reshape(-1, nx) != (W[::nx] // nx)[:, None] * nx + np.arange(nx)):
        return None
    return G.window(W[::nx] // nx)


@dataclass
class ControlSolution:
    coefficients: np.ndarray
    residual: float
    iterations: int
    solver: str
    converged: bool
    history: list = field(default_factory=list)


def solve_control(p: ControlProblem, solver: str | None = None, tol: float = 1e-8,
                  max_iter: int = 2000, restart: int = 50, alpha: float | None = None) -> ControlSolution:
    """Solve the window system; coefficients outside the window are exactly zero."""
    if solver is None:
        solver = "cg" if p.formulation == "gram" else "gmres"
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    alpha = p.alpha if alpha is None else alpha
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    A = p.window_matrix(alpha)
    b = p.rhs[p.window]
    out = np.zeros(p.K.size)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return ControlSolution(out, 0.0, 0, solver, True, [0.0])
    history = []
    if solver == "direct":
        x = lu_solve(lu_factor(A), b)
        its = 1
    else:
        op = LinearOperator(A.shape, matvec=lambda v: A @ v, dtype=float)
        if solver == "cg":
            def cb(xk):
                history.append(float(np.linalg.norm(b - A @ xk) / bnorm))
            M = None
            if p.formulation == "gram":
                # G_WW is a Kronecker block whenever the window is made of whole time rows.
                Gw = _window_gram(p.G, p.window)
                if Gw is not None:
                    M = LinearOperator(A.shape, matvec=Gw.solve, dtype=float)
            x, info = cg(op, b, rtol=tol, atol=0.0, maxiter=max_iter, callback=cb, M=M)
        else:
            def cb(rk):
                history.append(float(rk))
            x, info = gmres(op, b, rtol=tol, atol=0.0, restart=restart,
                            maxiter=int(np.ceil(max_iter / restart)), callback=cb,
                            callback_type="pr_norm")
        its = len(history)
    res = float(np.linalg.norm(b - A @ x) / bnorm)
    out[p.window] = x
    return ControlSolution(out, res, its, solver, res <= tol * 10, history)


@dataclass
class SweepEntry:
    alpha: float
    solution: ControlSolution
    objective: float
    h_norm: float


def tikhonov_objective(p: ControlProblem, h: np.ndarray) -> float:
    """``|W h - W z|^2 = <Kh,h> - 2 <P K z, h> + <Kz,z>`` through the K quadratic form."""
    if p.target is None:
        raise ValueError("objective needs the target coefficients")
    F = p.K.form
    z = p.target
    Fs = 0.5 * (F + F.T)
    return float(h @ Fs @ h - 2 * h @ Fs @ z + z @ Fs @ z)


def h_norm(p: ControlProblem, h: np.ndarray) -> float:
    """Norm of the control in the formulation's own metric."""
    if p.formulation == "gram":
        return float(np.sqrt(max(h @ p.G.matvec(h), 0.0)))
    return float(np.linalg.norm(h))


def regularization_sweep(p: ControlProblem, alphas, **solve_kw) -> list[SweepEntry]:
    """Solve for every ``alpha`` (given in decreasing order)."""
    alphas = [float(a) for a in alphas]
    if any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    if any(a2 > a1 for a1, a2 in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be given in decreasing order")
    out = []
    for a in alphas:
        sol = solve_control(p, alpha=a, **solve_kw)
        h = sol.coefficients
        obj = tikhonov_objective(p, h) if p.target is not None else float("nan")
        out.append(SweepEntry(a, sol, obj, h_norm(p, h)))
    return out
