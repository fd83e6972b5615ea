"""Stochastic game data model, strategy containers and validation.

States and actions are dense integer indices. A state may restrict each
player to a prefix ``0..k-1`` of the action set (``avail_p1``/``avail_p2``);
this is how absorbing sink states carry a single action. Strategy tables are
padded to the full action count with zero mass on unavailable actions.

The transition kernel is held as a 2-D matrix whose row ``(x*U + u)*W + w``
is the successor distribution ``P(.|x,u,w)``. Kernels with fewer than 25%
nonzero entries are stored as a CSR sparse matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy import sparse
from scipy.special import entr

from .errors import InvalidGameError

PROB_TOL = 1e-9
ROUNDTRIP_TOL = 1e-15
SPARSE_DENSITY = 0.25

ValueFunction = np.ndarray  # shape (|X|,), one real per state


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def row_entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) along the last axis, with 0 log 0 = 0."""
    return entr(np.asarray(p, dtype=float)).sum(axis=-1)


def parse_beta(value) -> float:
    """Accept a positive number or the strings 'inf'/'infinity'."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity", "∞"):
            return math.inf
        value = float(value)
    beta = float(value)
    if not beta > 0:
        raise ValueError(f"rationality parameter must be > 0, got {value!r}")
    return beta


def format_beta(beta: float):
    """JSON-friendly encoding: finite floats stay numbers, infinity is 'inf'."""
    return "inf" if math.isinf(beta) else float(beta)


@dataclass(frozen=True)
class RegularizationConfig:
    """Rationality parameters plus either a discount or a horizon.

    ``beta1``/``beta2`` may be ``math.inf`` (perfectly rational player); the
    solvers branch on that explicitly rather than treating it as a large
    number.
    """

    beta1: float
    beta2: float
    gamma: float | None = None
    horizon: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta1", parse_beta(self.beta1))
        object.__setattr__(self, "beta2", parse_beta(self.beta2))
        if (self.gamma is None) == (self.horizon is None):
            raise ValueError("exactly one of gamma and horizon must be set")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.horizon is not None:
            if int(self.horizon) != self.horizon or self.horizon < 1:
                raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
            object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def discounted(self) -> bool:
        return self.gamma is not None

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise ValueError("this operation needs a discounted configuration (gamma)")
        return self.gamma

    def require_horizon(self) -> int:
        if self.horizon is None:
            raise ValueError("this operation needs an N-stage configuration (horizon)")
        return self.horizon


@dataclass(frozen=True, eq=False)
class Game:
    """Finite two-player zero-sum stochastic game.

    Build instances with :meth:`from_arrays` or :func:`game_from_dict`; the
    constructor only checks shapes; :func:`validate_game` checks the
    probabilistic invariants.
    """

    n_states: int
    n_actions_p1: int
    n_actions_p2: int
    transition: np.ndarray | sparse.csr_array
    payoff: np.ndarray
    terminal_payoff: np.ndarray
    avail_p1: np.ndarray
    avail_p2: np.ndarray
    labels: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        X, U, W = self.n_states, self.n_actions_p1, self.n_actions_p2
        if min(X, U, W) < 1:
            raise InvalidGameError(f"need at least one state and one action per player, got {(X, U, W)}")
        if self.transition.shape != (X * U * W, X):
            raise InvalidGameError(f"transition has shape {self.transition.shape}, expected {(X * U * W, X)}")
        if self.payoff.shape != (X, U, W):
            raise InvalidGameError(f"payoff has shape {self.payoff.shape}, expected {(X, U, W)}")
        if self.terminal_payoff.shape != (X,):
            raise InvalidGameError(f"terminal_payoff has shape {self.terminal_payoff.shape}, expected {(X,)}")
        for name, avail, n in (("avail_p1", self.avail_p1, U), ("avail_p2", self.avail_p2, W)):
            if avail.shape != (X,):
                raise InvalidGameError(f"{name} has shape {avail.shape}, expected {(X,)}")
            if avail.min() < 1 or avail.max() > n:
                raise InvalidGameError(f"{name} entries must lie in [1, {n}]")

    @classmethod
    def from_arrays(
        cls,
        transition,
        payoff,
        terminal_payoff=None,
        avail_p1=None,
        avail_p2=None,
        labels: Mapping[int, str] | None = None,
        storage: str = "auto",
    ) -> "Game":
        """Create a game from a kernel of shape (X,U,W,X) (or (X*U*W, X)) and payoff (X,U,W)."""
        payoff = np.asarray(payoff, dtype=float)
        if payoff.ndim != 3:
            raise InvalidGameError(f"payoff must be 3-D (X,U,W), got shape {payoff.shape}")
        X, U, W = payoff.shape
        if sparse.issparse(transition):
            P = sparse.csr_array(transition, dtype=float)
        else:
            P = np.asarray(transition, dtype=float)
        if math.prod(P.shape) != X * U * W * X:
            raise InvalidGameError(f"transition has {math.prod(P.shape)} entries, expected {X * U * W * X} for payoff shape {payoff.shape}")
        P = P.reshape((X * U * W, X))
        nnz = P.nnz if sparse.issparse(P) else int(np.count_nonzero(P))
        if storage == "auto":
            storage = "sparse" if nnz < SPARSE_DENSITY * P.shape[0] * P.shape[1] else "dense"
        if storage == "sparse":
            P = sparse.csr_array(P)
            P.sort_indices()
            P.data.setflags(write=False)
        elif storage == "dense":
            P = _frozen(P.toarray() if sparse.issparse(P) else P)
        else:
            raise ValueError(f"unknown storage {storage!r}")
        term = np.zeros(X) if terminal_payoff is None else terminal_payoff
        a1 = np.full(X, U) if avail_p1 is None else np.asarray(avail_p1)
        a2 = np.full(X, W) if avail_p2 is None else np.asarray(avail_p2)
        a1 = np.array(a1, dtype=np.int64)
        a2 = np.array(a2, dtype=np.int64)
        a1.setflags(write=False)
        a2.setflags(write=False)
        return cls(
            n_states=X,
            n_actions_p1=U,
            n_actions_p2=W,
            transition=P,
            payoff=_frozen(payoff),
            terminal_payoff=_frozen(term),
            avail_p1=a1,
            avail_p2=a2,
            labels=dict(labels or {}),
        )

    # -- shape helpers -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n_states, self.n_actions_p1, self.n_actions_p2

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.transition)

    def n_actions(self, player: int) -> int:
        return self.n_actions_p1 if player == 1 else self.n_actions_p2

    def avail(self, player: int) -> np.ndarray:
        return self.avail_p1 if player == 1 else self.avail_p2

    def action_mask(self, player: int) -> np.ndarray:
        """Boolean (X, A) table of available actions."""
        return np.arange(self.n_actions(player))[None, :] < self.avail(player)[:, None]

    def joint_mask(self) -> np.ndarray:
        return self.action_mask(1)[:, :, None] & self.action_mask(2)[:, None, :]

    def row_index(self, x: int, u: int, w: int) -> int:
        return (x * self.n_actions_p1 + u) * self.n_actions_p2 + w

    def transition_row(self, x: int, u: int, w: int) -> np.ndarray:
        i = self.row_index(x, u, w)
        if self.is_sparse:
            return self.transition[[i], :].toarray()[0]
        return np.array(self.transition[i])

    def successors(self, x: int, u: int, w: int) -> list[tuple[int, float]]:
        """Nonzero (x', p) pairs of P(.|x,u,w) in state order."""
        row = self.transition_row(x, u, w)
        nz = np.flatnonzero(row)
        return [(int(j), float(row[j])) for j in nz]

    def expected_next(self, v: np.ndarray) -> np.ndarray:
        """Array E[v(X') | x,u,w] of shape (X,U,W)."""
        v = np.asarray(v, dtype=float)
        return np.asarray(self.transition @ v).reshape(self.shape)

    def induced_chain(self, sigma: np.ndarray, tau: np.ndarray):
        """State-to-state kernel M(x'|x) under stationary tables sigma (X,U), tau (X,W).

        Returns a CSR matrix for sparse games and a dense array otherwise.
        """
        X, U, W = self.shape
        weights = (np.asarray(sigma)[:, :, None] * np.asarray(tau)[:, None, :]).ravel()
        if self.is_sparse:
            agg = sparse.csr_array(
                (weights, (np.repeat(np.arange(X), U * W), np.arange(X * U * W))),
                shape=(X, X * U * W),
            )
            return sparse.csr_array(agg @ self.transition)
        return np.einsum("xr,xry->xy", weights.reshape(X, U * W), self.transition.reshape(X, U * W, X))

    def expected_payoff(self, sigma: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Per-state stage payoff E_{sigma,tau}[R(x,u,w)]."""
        return np.einsum("xu,xuw,xw->x", sigma, self.payoff, tau)


# -- validation ----------------------------------------------------------


def validate_game(g: Game) -> list[str]:
    """Return every invariant violation of ``g``; empty list means valid."""
    problems: list[str] = []
    X, U, W = g.shape
    mask = g.joint_mask().ravel()
    P = g.transition
    if g.is_sparse:
        sums = np.asarray(P.sum(axis=1)).ravel()
        coo = P.tocoo()
        bad = coo.row[(coo.data < 0) | ~np.isfinite(coo.data)]
        neg_rows = np.unique(bad)
    else:
        sums = P.sum(axis=1)
        neg_rows = np.flatnonzero(((P < 0) | ~np.isfinite(P)).any(axis=1))
    for r in neg_rows:
        if mask[r]:
            x, u, w = np.unravel_index(r, (X, U, W))
            problems.append(f"negative or non-finite probability at (x={x}, u={u}, w={w})")
    bad_sum = np.flatnonzero(mask & ~(np.abs(sums - 1.0) <= PROB_TOL))
    for r in bad_sum:
        x, u, w = np.unravel_index(r, (X, U, W))
        problems.append(f"row sum {sums[r]:.6g} ≠ 1 at (x={x}, u={u}, w={w})")
    bad_pay = np.argwhere(g.joint_mask() & ~np.isfinite(g.payoff))
    for x, u, w in bad_pay:
        problems.append(f"non-finite payoff at (x={x}, u={u}, w={w})")
    for x in np.flatnonzero(~np.isfinite(g.terminal_payoff)):
        problems.append(f"non-finite terminal payoff at x={x}")
    return problems


def require_valid(g: Game) -> None:
    problems = validate_game(g)
    if problems:
        raise InvalidGameError("invalid game", problems)


# -- strategies ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Per-state action distribution, shape (X, A)."""

    dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(self.dist))
        if self.dist.ndim != 2:
            raise InvalidGameError(f"stationary strategy must be 2-D, got shape {self.dist.shape}")

    @property
    def n_states(self) -> int:
        return self.dist.shape[0]

    def entropy(self) -> np.ndarray:
        return row_entropy(self.dist)


@dataclass(frozen=True, eq=False)
class MarkovStrategy:
    """Stage-indexed action distributions, shape (N, X, A); stage 0 is t = 1."""

    stages: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stages", _frozen(self.stages))
        if self.stages.ndim != 3:
            raise InvalidGameError(f"Markov strategy must be 3-D, got shape {self.stages.shape}")

    @property
    def horizon(self) -> int:
        return self.stages.shape[0]

    def at(self, t: int) -> np.ndarray:
        return self.stages[t]

    @classmethod
    def constant(cls, strategy: StationaryStrategy, horizon: int) -> "MarkovStrategy":
        return cls(np.repeat(strategy.dist[None], horizon, axis=0))


History = tuple  # (x1, u1, w1, x2, ..., x_t): 3(t-1)+1 integers


@dataclass(frozen=True, eq=False)
class HistoryStrategy:
    """History-dependent strategy ``rule(t, h) -> distribution``.

    ``t`` is the 0-based stage and ``h`` the flat history tuple of length
    ``3t + 1``. Only meaningful for games small enough to enumerate.
    """

    rule: Callable[[int, tuple], np.ndarray]

    def __call__(self, t: int, history: tuple) -> np.ndarray:
        return np.asarray(self.rule(t, history), dtype=float)

    @classmethod
    def from_markov(cls, m: MarkovStrategy) -> "HistoryStrategy":
        return cls(lambda t, h: m.stages[t, h[-1]])

    @classmethod
    def from_table(cls, table: Mapping[tuple, np.ndarray]) -> "HistoryStrategy":
        return cls(lambda t, h: table[h])


def strategy_violations(g: Game, dist: np.ndarray, player: int, tol: float = PROB_TOL) -> list[str]:
    """Row-sum / sign / availability problems of a (X, A) table for ``player``."""
    dist = np.asarray(dist, dtype=float)
    expect = (g.n_states, g.n_actions(player))
    if dist.shape != expect:
        return [f"player {player} strategy has shape {dist.shape}, expected {expect}"]
    problems = []
    mask = g.action_mask(player)
    for x in np.flatnonzero((dist < 0).any(axis=1) | ~np.isfinite(dist).all(axis=1)):
        problems.append(f"player {player}: negative or non-finite entry at x={x}")
    for x in np.flatnonzero((np.abs(dist) * ~mask).sum(axis=1) > tol):
        problems.append(f"player {player}: mass on unavailable action at x={x}")
    sums = dist.sum(axis=1)
    for x in np.flatnonzero(~(np.abs(sums - 1.0) <= tol)):
        problems.append(f"player {player}: row sum {sums[x]:.6g} ≠ 1 at x={x}")
    return problems


def require_valid_strategy(g: Game, strategy, player: int) -> None:
    if isinstance(strategy, MarkovStrategy):
        problems = [f"stage {t}: {p}" for t in range(strategy.horizon)
                    for p in strategy_violations(g, strategy.at(t), player)]
    else:
        problems = strategy_violations(g, strategy.dist, player)
    if problems:
        raise InvalidGameError("invalid strategy", problems)


def uniform_strategy(g: Game, player: int) -> StationaryStrategy:
    """Uniform distribution over each state's available actions."""
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    mask = g.action_mask(player).astype(float)
    return StationaryStrategy(mask / mask.sum(axis=1, keepdims=True))


# -- serialization -------------------------------------------------------


def game_to_dict(g: Game) -> dict:
    X, U, W = g.shape
    mask = g.joint_mask()
    rows = []
    if g.is_sparse:
        P = g.transition
        for x, u, w in zip(*np.nonzero(mask)):
            r = g.row_index(x, u, w)
            lo, hi = P.indptr[r], P.indptr[r + 1]
            rows.append([int(x), int(u), int(w),
                         [[int(j), float(p)] for j, p in zip(P.indices[lo:hi], P.data[lo:hi])]])
    else:
        for x, u, w in zip(*np.nonzero(mask)):
            rows.append([int(x), int(u), int(w), [float(p) for p in g.transition[g.row_index(x, u, w)]]])
    payoff = [[int(x), int(u), int(w), float(g.payoff[x, u, w])]
              for x, u, w in zip(*np.nonzero(mask & (g.payoff != 0)))]
    out = {
        "states": X,
        "actions_p1": U if (g.avail_p1 == U).all() else [int(a) for a in g.avail_p1],
        "actions_p2": W if (g.avail_p2 == W).all() else [int(a) for a in g.avail_p2],
        "transition": rows,
        "payoff": payoff,
        "terminal_payoff": [float(r) for r in g.terminal_payoff],
    }
    if g.labels:
        out["labels"] = {str(k): v for k, v in sorted(g.labels.items())}
    return out


def _action_counts(spec, X: int, name: str) -> np.ndarray:
    if isinstance(spec, int):
        return np.full(X, spec, dtype=np.int64)
    counts = np.asarray(spec, dtype=np.int64)
    if counts.shape != (X,):
        raise InvalidGameError(f"{name} list must have one entry per state")
    return counts


def game_from_dict(d: Mapping) -> Game:
    """Inverse of :func:`game_to_dict`; missing payoffs and terminal payoffs are zero."""
    try:
        X = int(d["states"])
        a1 = _action_counts(d["actions_p1"], X, "actions_p1")
        a2 = _action_counts(d["actions_p2"], X, "actions_p2")
    except KeyError as exc:
        raise InvalidGameError(f"game file is missing field {exc}") from None
    U, W = int(a1.max()), int(a2.max())
    rows, cols, vals = [], [], []
    for entry in d.get("transition", []):
        x, u, w, dist = entry
        if not (0 <= x < X and 0 <= u < U and 0 <= w < W):
            raise InvalidGameError(f"transition entry index out of range: {(x, u, w)}")
        r = (x * U + u) * W + w
        if dist and isinstance(dist[0], (list, tuple)):
            for j, p in dist:
                rows.append(r), cols.append(int(j)), vals.append(float(p))
        else:
            if len(dist) != X:
                raise InvalidGameError(f"dense transition row for {(x, u, w)} has length {len(dist)}, expected {X}")
            for j, p in enumerate(dist):
                if p != 0:
                    rows.append(r), cols.append(j), vals.append(float(p))
    P = sparse.csr_array((vals, (rows, cols)), shape=(X * U * W, X))
    R = np.zeros((X, U, W))
    for x, u, w, r in d.get("payoff", []):
        R[x, u, w] = float(r)
    term = d.get("terminal_payoff")
    labels = {int(k): str(v) for k, v in (d.get("labels") or {}).items()}
    return Game.from_arrays(P, R, None if term is None else np.asarray(term, dtype=float),
                            a1, a2, labels)


def save_game(g: Game, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(g)))


def load_game(path) -> Game:
    return game_from_dict(json.loads(Path(path).read_text()))
