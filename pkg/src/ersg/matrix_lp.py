"""Exact matrix-game equilibria by a dense tableau simplex method."""

from __future__ import annotations

import numpy as np

MAX_ACTIONS = 64
_EPS = 1e-12


def _simplex_max(A: np.ndarray, b: np.ndarray, c: np.ndarray, max_pivots: int = 10_000):
    """Maximize c.y s.t. A y <= b, y >= 0 with b >= 0, using Bland's rule.

    Returns (y, duals, objective). ``duals`` are the optimal multipliers of
    the inequality rows, read off the slack columns of the final tableau.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))
    for _ in range(max_pivots):
        reduced = T[m, :-1]
        entering = next((j for j in range(n + m) if reduced[j] < -_EPS), None)
        if entering is None:
            break
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > _EPS]
        if not rows:
            raise ArithmeticError("linear program is unbounded")
        ratios = [T[i, -1] / col[i] for i in rows]
        best = min(ratios)
        # Bland: among minimum-ratio rows, leave the one with the smallest basic index
        ties = [i for i, r in zip(rows, ratios) if r <= best + _EPS * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        T[leave] /= T[leave, entering]
        for i in range(m + 1):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering
    else:
        raise ArithmeticError("simplex pivot budget exhausted")
    y = np.zeros(n + m)
    for i, j in enumerate(basis):
        y[j] = T[i, -1]
    return y[:n], T[m, n:n + m].copy(), T[m, -1]


def solve_matrix_lp(rho) -> tuple[np.ndarray, np.ndarray, float]:
    """Equilibrium (sigma, tau, value) of the zero-sum matrix game ``rho``.

    The row player maximizes ``sigma @ rho @ tau``. The payoff is shifted to
    be strictly positive, the column player's LP ``max 1.y, A y <= 1`` is
    solved, and the row strategy is recovered from its dual.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or min(rho.shape) < 1:
        raise ValueError(f"payoff must be a non-empty matrix, got shape {rho.shape}")
    if max(rho.shape) > MAX_ACTIONS:
        raise ValueError(f"matrix games above {MAX_ACTIONS} actions per player are out of scope")
    if not np.isfinite(rho).all():
        raise ValueError("payoff matrix must be finite")
    shift = 1.0 - rho.min()
    A = rho + shift
    m, n = A.shape
    y, x, z = _simplex_max(A, np.ones(m), np.ones(n))
    x = np.maximum(x, 0.0)
    y = np.maximum(y, 0.0)
    sigma = x / x.sum()
    tau = y / y.sum()
    lower = float((sigma @ rho).min())
    upper = float((rho @ tau).max())
    return sigma, tau, 0.5 * (lower + upper)
