"""Entropy-regularized one-shot (matrix) games.

Player 1 picks ``sigma`` over the rows of ``rho`` and maximizes

    sigma' rho tau + (1/beta1) H(sigma) - (1/beta2) H(tau),

player 2 picks ``tau`` over the columns and minimizes it. Either beta may be
``math.inf``, which removes that player's entropy bonus.

Eliminating one player in closed form gives the two smooth bounds used
throughout: the lower objective ``F(sigma) = min_tau L`` and the upper
objective ``G(tau) = max_sigma L``. ``G(tau) - F(sigma)`` is a duality gap
certificate and every solve stops on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import NumericRangeError, OneShotError
from .game_model import PROB_TOL, row_entropy
from .matrix_lp import solve_matrix_lp

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 100_000

_ARMIJO = 1e-4
_MIN_STEP = 1e-14
_FULL_STEP_DECREMENT = 1e-10
_MU_MIN = 1e-20


@dataclass(frozen=True)
class OneShotProblem:
    rho: np.ndarray
    beta1: float
    beta2: float

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim == 1:
            rho = rho[None, :]
        if rho.ndim != 2 or min(rho.shape) < 1:
            raise ValueError(f"rho must be a non-empty matrix, got shape {rho.shape}")
        if not np.isfinite(rho).all():
            raise ValueError("rho must be finite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        for name in ("beta1", "beta2"):
            b = float(getattr(self, name))
            if not b > 0:
                raise ValueError(f"{name} must be > 0 (inf allowed), got {b}")
            object.__setattr__(self, name, b)

    @property
    def finite1(self) -> bool:
        return not math.isinf(self.beta1)

    @property
    def finite2(self) -> bool:
        return not math.isinf(self.beta2)


@dataclass(frozen=True)
class OneShotSolution:
    sigma: np.ndarray
    tau: np.ndarray
    value: float
    gap: float
    iterations: int
    lower: float
    upper: float
    # False when some beta is infinite: the strategies need not be unique
    unique: bool = True

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma.tolist(),
            "tau": self.tau.tolist(),
            "value": self.value,
            "gap": self.gap,
            "lower": self.lower,
            "upper": self.upper,
            "iterations": self.iterations,
            "unique": self.unique,
        }


def _as_dist(p, n: int, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {p.shape}")
    if (p < 0).any() or not np.isfinite(p).all() or abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"{name} is not a probability distribution")
    return p


def lower_objective(p: OneShotProblem, sigma) -> float:
    """``F(sigma) = min_tau L(sigma, tau)``; a lower bound on the game value."""
    sigma = _as_dist(sigma, p.rho.shape[0], "sigma")
    cols = sigma @ p.rho
    inner = -logsumexp(-p.beta2 * cols) / p.beta2 if p.finite2 else cols.min()
    bonus = row_entropy(sigma) / p.beta1 if p.finite1 else 0.0
    return float(bonus + inner)


def upper_objective(p: OneShotProblem, tau) -> float:
    """``G(tau) = max_sigma L(sigma, tau)``; an upper bound on the game value."""
    tau = _as_dist(tau, p.rho.shape[1], "tau")
    rows = p.rho @ tau
    inner = logsumexp(p.beta1 * rows) / p.beta1 if p.finite1 else rows.max()
    bonus = row_entropy(tau) / p.beta2 if p.finite2 else 0.0
    return float(inner - bonus)


def best_response_p2(p: OneShotProblem, sigma) -> np.ndarray:
    """Quantal response of player 2: ``tau(w) ∝ exp(-beta2 (sigma' rho)_w)``."""
    if not p.finite2:
        raise ValueError("beta2 is infinite; the softmax response is undefined")
    sigma = _as_dist(sigma, p.rho.shape[0], "sigma")
    return softmax(-p.beta2 * (sigma @ p.rho))


def best_response_p1(p: OneShotProblem, tau) -> np.ndarray:
    """Quantal response of player 1: ``sigma(u) ∝ exp(beta1 (rho tau)_u)``."""
    if not p.finite1:
        raise ValueError("beta1 is infinite; the softmax response is undefined")
    tau = _as_dist(tau, p.rho.shape[1], "tau")
    return softmax(p.beta1 * (p.rho @ tau))


# -- solvers -------------------------------------------------------------


def _log_start(start, n: int) -> np.ndarray:
    if start is None:
        return np.full(n, -math.log(n))
    start = np.maximum(np.asarray(start, dtype=float), 1e-300)
    ls = np.log(start)
    return ls - logsumexp(ls)


def _interior_saddle(rho, b1, b2, tol, max_iters, sigma0):
    """Both betas finite: maximize the strictly concave F over the simplex.

    Steps are multiplicative (``sigma <- sigma * exp(t e)``, renormalized),
    so iterates stay in the open simplex. ``e`` is the Newton direction for
    F restricted to the simplex, expressed relative to ``sigma``; a plain
    mirror-ascent step is the fallback when the line search rejects it.
    """
    U, W = rho.shape
    ls = _log_start(sigma0, U)

    def F_of(ls):
        s = np.exp(ls)
        return -(s * ls).sum() / b1 - logsumexp(-b2 * (s @ rho)) / b2

    F = F_of(ls)
    best = None
    stall = 0
    for it in range(max_iters + 1):
        s = np.exp(ls)
        tau = softmax(-b2 * (s @ rho))
        G = logsumexp(b1 * (rho @ tau)) / b1 - row_entropy(tau) / b2
        gap = max(G - F, 0.0)
        # tau is the exact response to sigma; also drive sigma onto the
        # response to tau so both quantal-response equations hold to tol
        resid = float(np.abs(s - softmax(b1 * (rho @ tau))).max())
        key = (max(gap - tol, 0.0), resid)
        if best is None or key < best[0]:
            best = (key, s, tau, F, G, it)
            stall = 0
        elif gap <= tol:
            # residual at its rounding floor (large betas)
            stall += 1
        if (gap <= tol and (resid <= tol or stall >= 3)) or it == max_iters:
            break

        g = rho @ tau - (ls + 1.0) / b1
        cov = np.diag(tau) - np.outer(tau, tau)
        Q = rho @ cov @ rho.T
        sq = np.sqrt(s)
        A = np.eye(U) + (b1 * b2) * (sq[:, None] * Q * sq[None, :])
        try:
            Z = np.linalg.solve(A, np.column_stack([sq * g, sq]))
            lam = (sq * Z[:, 0]).sum() / (sq * Z[:, 1]).sum()
            r = g - lam
            e = b1 * (r - (b1 * b2) * (Q @ (sq * (Z[:, 0] - lam * Z[:, 1]))))
            slope = float((s * r * e).sum())
        except np.linalg.LinAlgError:
            slope = -1.0
        # underflowed components contribute nothing to the slope yet can still
        # move by orders of magnitude in log space, so a zero slope is not a stop
        accepted = False
        if np.isfinite(slope) and slope >= 0:
            accepted, ls, F = _line_search(F_of, ls, F, e, slope, 1.0)
        if not accepted:
            r = g - (s * g).sum()
            accepted, ls, F = _line_search(F_of, ls, F, r, float((s * r * r).sum()), 1.0)
            if not accepted:
                break
    _, s, tau, F, G, it = best
    return s, tau, F, G, it


def _line_search(f, x, fx, direction, slope, t0, maximize=True):
    """Backtracking Armijo search along a multiplicative (log-space) direction."""
    sign = 1.0 if maximize else -1.0
    slack = 4 * np.finfo(float).eps * max(1.0, abs(fx))
    t = t0
    while t >= _MIN_STEP:
        cand = x + t * direction
        cand = cand - logsumexp(cand)
        fc = f(cand)
        if np.isfinite(fc) and sign * (fc - fx) >= _ARMIJO * t * slope - slack:
            return True, cand, fc
        t *= 0.5
    return False, x, fx


def _rational_column_player(rho, b1, tol, max_iters, tau0):
    """beta1 finite, beta2 infinite.

    The row player's objective ``H(sigma)/beta1 + min_w (sigma' rho)_w`` is
    nonsmooth, so the smooth convex side ``G(tau) = logsumexp(beta1 rho
    tau)/beta1`` is minimized instead (log-barrier Newton on the simplex) and
    ``sigma`` is recovered as the softmax response to ``tau``.
    """
    U, W = rho.shape
    lt = _log_start(tau0, W)
    mu = 1.0

    def G_of(lt):
        return logsumexp(b1 * (rho @ np.exp(lt))) / b1

    def phi_of(lt):
        return G_of(lt) - mu * lt.sum()

    best = None
    phi = phi_of(lt)
    last_gap, stall = math.inf, 0
    for it in range(max_iters + 1):
        tau = np.exp(lt)
        sigma = softmax(b1 * (rho @ tau))
        G = logsumexp(b1 * (rho @ tau)) / b1
        F = row_entropy(sigma) / b1 + (sigma @ rho).min()
        gap = max(G - F, 0.0)
        if best is None or gap < best[0]:
            best = (gap, sigma, tau, F, G, it)
        if gap <= tol or it == max_iters:
            break

        cov = np.diag(sigma) - np.outer(sigma, sigma)
        grad_s = tau * (sigma @ rho) - mu
        # the curvature term has rank < |U|, so solve the bordered KKT system
        # rather than eliminating through a possibly singular Hessian
        kkt = np.zeros((W + 1, W + 1))
        kkt[:W, :W] = b1 * (tau[:, None] * (rho.T @ cov @ rho) * tau[None, :]) + mu * np.eye(W)
        kkt[:W, W] = kkt[W, :W] = tau
        try:
            e = np.linalg.solve(kkt, np.append(-grad_s, 0.0))[:W]
            decrement = -float(grad_s @ e)
        except np.linalg.LinAlgError:
            decrement = math.nan
        if not np.isfinite(decrement):
            break
        if decrement <= 0.1 * mu and mu > _MU_MIN:
            mu *= 0.1
            phi = phi_of(lt)
            continue
        accepted, lt, phi = _line_search(phi_of, lt, phi, e, decrement, 1.0, maximize=False)
        if not accepted and decrement <= _FULL_STEP_DECREMENT * max(1.0, abs(phi)):
            # objective changes are below rounding here, but Newton is in its
            # quadratic regime, so the full step still sharpens tau
            lt = lt + e
            lt = lt - logsumexp(lt)
            phi = phi_of(lt)
            accepted = True
        if not accepted:
            if mu <= _MU_MIN:
                break
            mu *= 0.1
            phi = phi_of(lt)
        if mu <= _MU_MIN:
            stall = 0 if gap < last_gap else stall + 1
            last_gap = min(gap, last_gap)
            if stall >= 5:
                break
    gap, sigma, tau, F, G, it = best
    return sigma, tau, F, G, it


def _check_range(p: OneShotProblem) -> None:
    scale = float(np.abs(p.rho).max())
    for b in (p.beta1, p.beta2):
        if not math.isinf(b) and not math.isfinite(b * scale):
            raise NumericRangeError(f"beta * |rho| overflows float64 (beta={b}, max|rho|={scale})")


def solve(p: OneShotProblem, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
          sigma0=None, tau0=None) -> OneShotSolution:
    """Equilibrium of the regularized matrix game, certified to duality gap ``tol``.

    ``sigma0``/``tau0`` optionally warm-start the iterative paths (both
    betas finite: ``sigma0``; one beta infinite: the smooth side's strategy).
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    _check_range(p)
    rho = p.rho
    if p.finite1 and p.finite2:
        sigma, tau, lower, upper, iters = _interior_saddle(rho, p.beta1, p.beta2, tol, max_iters, sigma0)
    elif p.finite1:
        sigma, tau, lower, upper, iters = _rational_column_player(rho, p.beta1, tol, max_iters, tau0)
    elif p.finite2:
        # mirror image: player 2 of (-rho') becomes a maximizer with finite beta
        tau, sigma, lo_t, up_t, iters = _rational_column_player(-rho.T, p.beta2, tol, max_iters, sigma0)
        lower, upper = -up_t, -lo_t
    else:
        sigma, tau, _ = solve_matrix_lp(rho)
        lower = float((sigma @ rho).min())
        upper = float((rho @ tau).max())
        iters = 0
    gap = max(upper - lower, 0.0)
    sol = OneShotSolution(
        sigma=sigma, tau=tau, value=0.5 * (lower + upper), gap=gap, iterations=int(iters),
        lower=lower, upper=upper, unique=p.finite1 and p.finite2,
    )
    if not gap <= tol:
        raise OneShotError(f"duality gap {gap:.3e} above tolerance {tol:.3e} after {iters} iterations",
                           best=sol, gap=gap)
    return sol
