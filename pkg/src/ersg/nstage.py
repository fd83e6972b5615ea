"""Backward recursion for entropy-regularized N-stage games.

Stage ``t`` (0-based here, ``t = 0`` is the first decision) solves one
matrix game per state with payoff ``R + P V_{t+1}``; ``V_N`` is the terminal
payoff. All stage tables are kept since the Markov strategies are the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stagewise import solve_all_states
from .game_model import Game, MarkovStrategy, RegularizationConfig, format_beta, parse_beta, require_valid
from .oneshot import DEFAULT_TOL


@dataclass(frozen=True, eq=False)
class NStageSolution:
    """Markov equilibrium of an N-stage game.

    ``values[t]`` is the value function before stage ``t``; ``values[N]`` is
    the terminal payoff.
    """

    sigma: MarkovStrategy
    tau: MarkovStrategy
    values: list
    max_gap: float
    beta1: float
    beta2: float

    @property
    def horizon(self) -> int:
        return self.sigma.horizon

    def value(self, mu1) -> float:
        """Game value for the initial state distribution ``mu1``."""
        return float(np.asarray(mu1, dtype=float) @ self.values[0])

    def to_dict(self) -> dict:
        return {
            "kind": "nstage",
            "N": self.horizon,
            "beta1": format_beta(self.beta1),
            "beta2": format_beta(self.beta2),
            "values": [np.asarray(v).tolist() for v in self.values],
            "sigma": self.sigma.stages.tolist(),
            "tau": self.tau.stages.tolist(),
            "max_gap": self.max_gap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NStageSolution":
        return cls(
            sigma=MarkovStrategy(np.asarray(d["sigma"], dtype=float)),
            tau=MarkovStrategy(np.asarray(d["tau"], dtype=float)),
            values=[np.asarray(v, dtype=float) for v in d["values"]],
            max_gap=float(d["max_gap"]),
            beta1=parse_beta(d["beta1"]),
            beta2=parse_beta(d["beta2"]),
        )


def stage_payoff(g: Game, v_next, x: int) -> np.ndarray:
    """``rho(u, w) = R(x,u,w) + sum_x' P(x'|x,u,w) v_next(x')``."""
    v_next = np.asarray(v_next, dtype=float)
    if v_next.shape != (g.n_states,) or not np.isfinite(v_next).all():
        raise ValueError(f"v_next must be a finite vector of length {g.n_states}")
    X, U, W = g.shape
    rows = slice(x * U * W, (x + 1) * U * W)
    cont = np.asarray(g.transition[rows] @ v_next).reshape(U, W)
    return g.payoff[x] + cont


def solve_nstage(g: Game, cfg: RegularizationConfig, tol: float = DEFAULT_TOL,
                 workers: int | None = None) -> NStageSolution:
    """Markov equilibrium and stage values by backward induction.

    Each one-shot game is solved to ``tol / N`` so the stacked error of the
    first-stage value stays within ``tol``.
    """
    N = cfg.require_horizon()
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    require_valid(g)
    X, U, W = g.shape
    values = [None] * (N + 1)
    values[N] = np.array(g.terminal_payoff, dtype=float)
    sig = np.zeros((N, X, U))
    tau = np.zeros((N, X, W))
    max_gap = 0.0
    for t in range(N - 1, -1, -1):
        rho = g.payoff + g.expected_next(values[t + 1])
        sig[t], tau[t], values[t], gaps = solve_all_states(
            g, rho, cfg.beta1, cfg.beta2, tol / N, where=f"stage t={t}", workers=workers)
        max_gap = max(max_gap, float(gaps.max()))
    return NStageSolution(MarkovStrategy(sig), MarkovStrategy(tau), values, max_gap,
                          cfg.beta1, cfg.beta2)
