"""Shapley value iteration for entropy-regularized discounted games.

Each sweep solves one matrix game per state against a frozen copy of the
current value vector (Jacobi updates), so the sweep map is the contraction
``Psi`` and the usual ``|V_{k+1} - V_k| (gamma / (1 - gamma))`` bound certifies
the distance to the fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stagewise import solve_all_states
from .errors import ConvergenceError
from .game_model import Game, RegularizationConfig, StationaryStrategy, format_beta, parse_beta, require_valid

DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 10_000


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    sigma: StationaryStrategy
    tau: StationaryStrategy
    value: np.ndarray
    residual: float
    sweeps: int
    gamma: float
    beta1: float
    beta2: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": "discounted",
            "gamma": self.gamma,
            "beta1": format_beta(self.beta1),
            "beta2": format_beta(self.beta2),
            "value": np.asarray(self.value).tolist(),
            "sigma": self.sigma.dist.tolist(),
            "tau": self.tau.dist.tolist(),
            "residual": self.residual,
            "sweeps": self.sweeps,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscountedSolution":
        return cls(
            sigma=StationaryStrategy(np.asarray(d["sigma"], dtype=float)),
            tau=StationaryStrategy(np.asarray(d["tau"], dtype=float)),
            value=np.asarray(d["value"], dtype=float),
            residual=float(d["residual"]),
            sweeps=int(d["sweeps"]),
            gamma=float(d["gamma"]),
            beta1=parse_beta(d["beta1"]),
            beta2=parse_beta(d["beta2"]),
            converged=bool(d.get("converged", True)),
        )


def oneshot_tolerance(cfg: RegularizationConfig, tol: float) -> float:
    """Per-state solve accuracy that keeps the outer stopping bound valid."""
    return tol * (1.0 - cfg.require_gamma()) / 10.0


def _apply(g: Game, cfg: RegularizationConfig, v: np.ndarray, tol: float, warm=None, workers=None):
    rho = g.payoff + cfg.gamma * g.expected_next(v)
    sigma, tau, values, _ = solve_all_states(g, rho, cfg.beta1, cfg.beta2, tol,
                                             where="Shapley sweep", warm=warm, workers=workers)
    return values, sigma, tau


def shapley_apply(g: Game, cfg: RegularizationConfig, v, tol: float = DEFAULT_TOL,
                  workers: int | None = None) -> tuple[np.ndarray, StationaryStrategy, StationaryStrategy]:
    """One application of ``Psi``: per-state values of ``R + gamma P v`` and the strategies."""
    cfg.require_gamma()
    v = np.asarray(v, dtype=float)
    if v.shape != (g.n_states,) or not np.isfinite(v).all():
        raise ValueError(f"v must be a finite vector of length {g.n_states}")
    values, sigma, tau = _apply(g, cfg, v, tol, workers=workers)
    return values, StationaryStrategy(sigma), StationaryStrategy(tau)


def solve_discounted(g: Game, cfg: RegularizationConfig, tol: float = DEFAULT_TOL, v0=None,
                     max_sweeps: int = DEFAULT_MAX_SWEEPS, workers: int | None = None) -> DiscountedSolution:
    """Value iteration to within ``tol`` of the fixed point of ``Psi``.

    Stops once successive iterates differ by at most ``tol (1 - gamma) / (2 gamma)``.
    Each sweep warm-starts the per-state solves from the previous
    strategies. On budget exhaustion raises :class:`ConvergenceError` whose
    ``partial`` is the last iterate as an unconverged solution.
    """
    gamma = cfg.require_gamma()
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    require_valid(g)
    inner_tol = oneshot_tolerance(cfg, tol)
    stop = tol * (1.0 - gamma) / (2.0 * gamma)
    v = np.zeros(g.n_states) if v0 is None else np.array(v0, dtype=float)
    if v.shape != (g.n_states,):
        raise ValueError(f"v0 must have length {g.n_states}")
    warm = None
    history = []
    for sweep in range(1, max_sweeps + 1):
        nv, sigma, tau = _apply(g, cfg, v, inner_tol, warm=warm, workers=workers)
        res = float(np.abs(nv - v).max())
        history.append(res)
        v, warm = nv, (sigma, tau)
        if res <= stop:
            return DiscountedSolution(StationaryStrategy(sigma), StationaryStrategy(tau), v, res,
                                      sweep, gamma, cfg.beta1, cfg.beta2)
    partial = DiscountedSolution(StationaryStrategy(warm[0]), StationaryStrategy(warm[1]), v, history[-1],
                                 max_sweeps, gamma, cfg.beta1, cfg.beta2, converged=False)
    raise ConvergenceError(f"value iteration did not reach {stop:.3e} in {max_sweeps} sweeps",
                           history=history, partial=partial)
