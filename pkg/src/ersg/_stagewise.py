"""Per-state one-shot solves shared by the N-stage and discounted solvers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import OneShotError
from .game_model import Game
from .oneshot import OneShotProblem, OneShotSolution, solve


def worker_count(workers: int | None = None) -> int:
    """Explicit ``workers``, else ``ERSG_THREADS``, else 1."""
    if workers is None:
        env = os.environ.get("ERSG_THREADS", "").strip()
        workers = int(env) if env else 1
    return max(1, int(workers))


def solve_state(g: Game, x: int, rho: np.ndarray, beta1: float, beta2: float, tol: float,
                sigma0=None, tau0=None) -> tuple[np.ndarray, np.ndarray, OneShotSolution]:
    """Solve state ``x``'s matrix game over its available actions.

    ``rho`` is the full (U, W) matrix; the returned strategies are padded
    with zeros on unavailable actions.
    """
    nu, nw = int(g.avail_p1[x]), int(g.avail_p2[x])
    sub = rho[:nu, :nw]
    s0 = None if sigma0 is None else sigma0[:nu]
    t0 = None if tau0 is None else tau0[:nw]
    sol = solve(OneShotProblem(sub, beta1, beta2), tol=tol, sigma0=s0, tau0=t0)
    sigma = np.zeros(g.n_actions_p1)
    tau = np.zeros(g.n_actions_p2)
    sigma[:nu] = sol.sigma
    tau[:nw] = sol.tau
    return sigma, tau, sol


def solve_all_states(g: Game, rho: np.ndarray, beta1: float, beta2: float, tol: float,
                     where: str, warm=None, workers: int | None = None):
    """Solve every state's game for a (X, U, W) payoff tensor.

    Returns ``(sigma (X,U), tau (X,W), values (X,), gaps (X,))``. A failing
    state raises :class:`OneShotError` annotated with ``where`` and ``x``.
    """
    X = g.n_states

    def one(x):
        s0 = t0 = None
        if warm is not None:
            s0, t0 = warm[0][x], warm[1][x]
        try:
            return solve_state(g, x, rho[x], beta1, beta2, tol, s0, t0)
        except OneShotError as e:
            raise OneShotError(f"{where}, state x={x}: {e}", best=e.best, gap=e.gap) from e

    n = worker_count(workers)
    if n > 1 and X > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(one, range(X)))
    else:
        results = [one(x) for x in range(X)]
    sigma = np.stack([r[0] for r in results])
    tau = np.stack([r[1] for r in results])
    values = np.array([r[2].value for r in results])
    gaps = np.array([r[2].gap for r in results])
    return sigma, tau, values, gaps
