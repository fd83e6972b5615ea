"""Exact evaluation of strategy pairs.

Everything here is linear algebra or exhaustive enumeration: finite-horizon
and discounted objectives, state occupancies, absorption probabilities and
best responses against a fixed opponent (for exploitability).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import logsumexp, softmax

from .errors import ConvergenceError, EnumerationLimitError, InvalidGameError
from .game_model import (
    PROB_TOL,
    Game,
    HistoryStrategy,
    MarkovStrategy,
    RegularizationConfig,
    StationaryStrategy,
    require_valid_strategy,
    row_entropy,
)

DENSE_LIMIT = 2000
ITER_TOL = 1e-10
ZERO_PROB = 1e-14
MAX_HISTORIES = 10**6
DEFAULT_SWEEPS = 100_000


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """State marginals ``mu[t]`` for t = 0..N (row N is after the last stage)."""

    mu: np.ndarray

    @property
    def horizon(self) -> int:
        return self.mu.shape[0] - 1


class Absorption(NamedTuple):
    win: float
    lose: float
    never: float


def _as_mu(g: Game, mu1) -> np.ndarray:
    mu1 = np.asarray(mu1, dtype=float)
    if mu1.shape != (g.n_states,) or (mu1 < 0).any() or abs(mu1.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"mu1 must be a distribution over {g.n_states} states")
    return mu1


def _as_markov(g: Game, s, player: int, N: int) -> MarkovStrategy:
    if isinstance(s, StationaryStrategy):
        s = MarkovStrategy.constant(s, N)
    if not isinstance(s, MarkovStrategy):
        raise TypeError(f"expected a Markov or stationary strategy, got {type(s).__name__}")
    if s.horizon < N:
        raise ValueError(f"player {player} strategy has horizon {s.horizon} < {N}")
    require_valid_strategy(g, s, player)
    return s


def _entropy_weight(beta: float) -> float:
    return 0.0 if math.isinf(beta) else 1.0 / beta


def rollout_occupancy(g: Game, sigma, tau, mu1, stages: int | None = None) -> OccupancyMeasure:
    """Forward state marginals under a Markov pair (``stages`` defaults to the horizon)."""
    N = sigma.horizon if stages is None and isinstance(sigma, MarkovStrategy) else stages
    if N is None:
        raise ValueError("stages is required for stationary strategies")
    sigma = _as_markov(g, sigma, 1, N)
    tau = _as_markov(g, tau, 2, N)
    mu = np.zeros((N + 1, g.n_states))
    mu[0] = _as_mu(g, mu1)
    for t in range(N):
        M = g.induced_chain(sigma.at(t), tau.at(t))
        mu[t + 1] = np.asarray(mu[t] @ M).ravel()
    return OccupancyMeasure(mu)


def phi_n_terms(g: Game, cfg: RegularizationConfig, sigma, tau, mu1) -> dict:
    """Components of the N-stage objective.

    ``payoff`` is the expected stage payoff sum, ``terminal`` the expected
    terminal payoff, ``entropy1``/``entropy2`` the summed per-stage policy
    entropies (unweighted).
    """
    N = cfg.require_horizon()
    sigma = _as_markov(g, sigma, 1, N)
    tau = _as_markov(g, tau, 2, N)
    occ = rollout_occupancy(g, sigma, tau, mu1, N)
    payoff = h1 = h2 = 0.0
    for t in range(N):
        s, q = sigma.at(t), tau.at(t)
        payoff += float(occ.mu[t] @ g.expected_payoff(s, q))
        h1 += float(occ.mu[t] @ row_entropy(s))
        h2 += float(occ.mu[t] @ row_entropy(q))
    terminal = float(occ.mu[N] @ g.terminal_payoff)
    return {"payoff": payoff, "terminal": terminal, "entropy1": h1, "entropy2": h2}


def phi_n(g: Game, cfg: RegularizationConfig, sigma, tau, mu1) -> float:
    """Regularized N-stage objective of a Markov (or stationary) pair."""
    t = phi_n_terms(g, cfg, sigma, tau, mu1)
    return (t["payoff"] + t["terminal"] + _entropy_weight(cfg.beta1) * t["entropy1"]
            - _entropy_weight(cfg.beta2) * t["entropy2"])


def phi_n_tree(g: Game, cfg: RegularizationConfig, sigma: HistoryStrategy, tau: HistoryStrategy,
               mu1, limit: int = MAX_HISTORIES) -> float:
    """N-stage objective of history-dependent strategies by full enumeration.

    The causal entropy terms are accumulated as ``-sum p(h, a) log(p(h, a) / p(h))``
    over every positive-probability history ``h``.
    """
    N = cfg.require_horizon()
    X, U, W = g.shape
    mu1 = _as_mu(g, mu1)
    succ = {}
    layer = {(x,): float(mu1[x]) for x in range(X) if mu1[x] > 0}
    count = len(layer)
    total = h1 = h2 = 0.0
    for t in range(N):
        nxt: dict[tuple, float] = {}
        for h, p in layer.items():
            x = h[-1]
            s = sigma(t, h)
            q = tau(t, h)
            if s.shape != (U,) or q.shape != (W,):
                raise InvalidGameError(f"strategy output has the wrong length at history {h}")
            for joint in p * s[s > 0]:
                h1 -= joint * math.log(joint / p)
            for joint in p * q[q > 0]:
                h2 -= joint * math.log(joint / p)
            for u in np.flatnonzero(s > 0):
                for w in np.flatnonzero(q > 0):
                    puw = p * s[u] * q[w]
                    total += puw * g.payoff[x, u, w]
                    key = (x, int(u), int(w))
                    if key not in succ:
                        succ[key] = g.successors(*key)
                    for y, py in succ[key]:
                        nxt[h + (int(u), int(w), y)] = puw * py
        count += len(nxt)
        if count > limit:
            raise EnumerationLimitError(f"more than {limit} histories by stage {t + 1}")
        layer = nxt
    total += sum(p * g.terminal_payoff[h[-1]] for h, p in layer.items())
    return total + _entropy_weight(cfg.beta1) * h1 - _entropy_weight(cfg.beta2) * h2


def _stationary(g: Game, s, player: int) -> StationaryStrategy:
    if not isinstance(s, StationaryStrategy):
        raise TypeError(f"expected a stationary strategy for player {player}, got {type(s).__name__}")
    require_valid_strategy(g, s, player)
    return s


def reward_vector(g: Game, cfg: RegularizationConfig, sigma: StationaryStrategy,
                  tau: StationaryStrategy) -> np.ndarray:
    """Per-state regularized stage reward of a stationary pair."""
    return (g.expected_payoff(sigma.dist, tau.dist)
            + _entropy_weight(cfg.beta1) * sigma.entropy()
            - _entropy_weight(cfg.beta2) * tau.entropy())


def _discounted_solve(M, r: np.ndarray, gamma: float) -> np.ndarray:
    X = r.shape[0]
    if X <= DENSE_LIMIT:
        M = M.toarray() if sparse.issparse(M) else M
        return np.linalg.solve(np.eye(X) - gamma * M, r)
    v = r / (1.0 - gamma)
    history = []
    for _ in range(DEFAULT_SWEEPS):
        nv = r + gamma * (M @ v)
        res = float(np.abs(nv - v).max())
        history.append(res)
        v = nv
        if res <= ITER_TOL:
            return v
    raise ConvergenceError("policy evaluation did not converge", history=history, partial=v)


def phi_inf(g: Game, cfg: RegularizationConfig, sigma: StationaryStrategy,
            tau: StationaryStrategy) -> np.ndarray:
    """Discounted regularized objective of a stationary pair, per start state."""
    gamma = cfg.require_gamma()
    sigma = _stationary(g, sigma, 1)
    tau = _stationary(g, tau, 2)
    r = reward_vector(g, cfg, sigma, tau)
    return _discounted_solve(g.induced_chain(sigma.dist, tau.dist), r, gamma)


def _reach_set(M, targets: np.ndarray) -> np.ndarray:
    """States with a positive-probability path into ``targets``."""
    rev = sparse.csr_array(sparse.csr_array(M).T)
    seen = np.zeros(M.shape[0], dtype=bool)
    seen[targets] = True
    frontier = np.asarray(targets)
    while frontier.size:
        preds = np.unique(rev[frontier].indices)
        frontier = preds[~seen[preds]]
        seen[frontier] = True
    return seen


def win_probability(g: Game, sigma: StationaryStrategy, tau: StationaryStrategy,
                    win_states, lose_states, start: int) -> Absorption:
    """Probabilities of hitting ``win_states`` first, ``lose_states`` first, or neither."""
    sigma = _stationary(g, sigma, 1)
    tau = _stationary(g, tau, 2)
    X = g.n_states
    win = np.zeros(X, dtype=bool)
    lose = np.zeros(X, dtype=bool)
    win[list(win_states)] = True
    lose[list(lose_states)] = True
    if (win & lose).any():
        raise ValueError("win and lose sets overlap")
    if win[start]:
        return Absorption(1.0, 0.0, 0.0)
    if lose[start]:
        return Absorption(0.0, 1.0, 0.0)
    M = g.induced_chain(sigma.dist, tau.dist)
    M = sparse.csr_array(M)
    # Transitions below ZERO_PROB are solver round-off from actions that are
    # never played; keeping them creates near-closed classes and a singular system.
    M.data[M.data < ZERO_PROB] = 0.0
    M.eliminate_zeros()
    absorbing = np.flatnonzero(win | lose)
    diag = M.diagonal()
    if not np.allclose(diag[absorbing], 1.0, atol=PROB_TOL, rtol=0):
        raise ValueError("win/lose states must be absorbing under the induced chain")
    reach = _reach_set(M, absorbing) & ~(win | lose)
    if not reach[start]:
        return Absorption(0.0, 0.0, 1.0)
    idx = np.flatnonzero(reach)
    A = sparse.identity(len(idx), format="csc") - M[idx][:, idx].tocsc()
    b = np.column_stack([np.asarray(M[idx][:, np.flatnonzero(win)].sum(axis=1)).ravel(),
                         np.asarray(M[idx][:, np.flatnonzero(lose)].sum(axis=1)).ravel()])
    if len(idx) <= DENSE_LIMIT:
        sol = np.linalg.solve(A.toarray(), b)
    else:
        sol = np.column_stack([spsolve(A, b[:, 0]), spsolve(A, b[:, 1])])
    k = int(np.searchsorted(idx, start))
    p_win = float(np.clip(sol[k, 0], 0.0, 1.0))
    p_lose = float(np.clip(sol[k, 1], 0.0, 1.0))
    return Absorption(p_win, p_lose, max(0.0, 1.0 - p_win - p_lose))


def best_response_value(g: Game, cfg: RegularizationConfig, fixed: StationaryStrategy,
                        fixed_player: int, tol: float = 1e-12,
                        max_sweeps: int = DEFAULT_SWEEPS) -> tuple[StationaryStrategy, np.ndarray]:
    """Optimal (soft) response to a fixed stationary opponent and its value.

    The free player solves the MDP left after averaging out the opponent's
    actions; its own entropy bonus enters through a log-sum-exp backup when
    its beta is finite. The opponent's entropy term is a constant per state.
    """
    if fixed_player not in (1, 2):
        raise ValueError(f"fixed_player must be 1 or 2, got {fixed_player}")
    gamma = cfg.require_gamma()
    fixed = _stationary(g, fixed, fixed_player)
    X, U, W = g.shape
    free = 3 - fixed_player
    beta = cfg.beta1 if free == 1 else cfg.beta2
    sign = 1.0 if free == 1 else -1.0  # player 1 maximizes
    # the fixed player's entropy enters with that player's sign
    fixed_w = _entropy_weight(cfg.beta1 if fixed_player == 1 else cfg.beta2)
    const = fixed_w * fixed.entropy() * (1.0 if fixed_player == 1 else -1.0)
    mask = g.action_mask(free)
    if fixed_player == 2:
        R = np.einsum("xuw,xw->xu", g.payoff, fixed.dist)
        mix = lambda ev: np.einsum("xuw,xw->xu", ev, fixed.dist)
    else:
        R = np.einsum("xu,xuw->xw", fixed.dist, g.payoff)
        mix = lambda ev: np.einsum("xu,xuw->xw", fixed.dist, ev)

    def q_of(v):
        return R + gamma * mix(g.expected_next(v)) + const[:, None]

    def backup(Q):
        Qm = np.where(mask, sign * Q, -np.inf)
        if math.isinf(beta):
            return sign * Qm.max(axis=1)
        return sign * logsumexp(beta * Qm, axis=1) / beta

    v = np.zeros(X)
    history = []
    stop = tol * (1.0 - gamma) / gamma
    for _ in range(max_sweeps):
        nv = backup(q_of(v))
        res = float(np.abs(nv - v).max())
        history.append(res)
        v = nv
        if res <= stop:
            break
    else:
        raise ConvergenceError("best-response value iteration did not converge", history=history, partial=v)
    Q = np.where(mask, sign * q_of(v), -np.inf)
    if math.isinf(beta):
        dist = np.zeros_like(Q)
        dist[np.arange(X), Q.argmax(axis=1)] = 1.0
    else:
        dist = softmax(beta * Q, axis=1)
    return StationaryStrategy(dist), v


def exploitability(g: Game, cfg: RegularizationConfig, sigma: StationaryStrategy,
                   tau: StationaryStrategy) -> tuple[np.ndarray, np.ndarray]:
    """Per-state gains available to each player by deviating from the pair.

    ``e1 = BR_1(tau) - phi``, ``e2 = phi - BR_2(sigma)``; both are
    nonnegative up to solver tolerance and vanish at an equilibrium.
    """
    v = phi_inf(g, cfg, sigma, tau)
    _, v1 = best_response_value(g, cfg, tau, 2)
    _, v2 = best_response_value(g, cfg, sigma, 1)
    return v1 - v, v - v2
