"""Acceptance gate: one group of checks per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""

import argparse
import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.special import softmax

from ersg.cli import sweep_rows
from ersg.discounted import shapley_apply, solve_discounted
from ersg.evaluate import exploitability, phi_inf, phi_n, phi_n_tree, win_probability
from ersg.game_model import Game, HistoryStrategy, MarkovStrategy, RegularizationConfig, StationaryStrategy
from ersg.gridworld import build_game, builtin_map
from ersg.nstage import solve_nstage
from ersg.oneshot import OneShotProblem, solve

import oracles
from conftest import random_game

INF = math.inf


# -- 1. one-shot saddle vs exhaustive grid ------------------------------------------


@pytest.mark.criterion(1)
def test_oneshot_matches_grid_maxmin_and_fixed_point():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(25):
        rho = rng.uniform(-1, 1, (2, 2))
        b1, b2 = rng.choice([1.0, 2.0, 5.0], size=2)
        sol = solve(OneShotProblem(rho, b1, b2))
        grid, _, _ = oracles.grid_maxmin_2x2(rho, b1, b2, step=1e-3)
        assert abs(sol.value - grid) <= 5e-3
        assert np.abs(sol.sigma - softmax(b1 * rho @ sol.tau)).max() <= 1e-6
        assert np.abs(sol.tau - softmax(-b2 * rho.T @ sol.sigma)).max() <= 1e-6
    assert time.perf_counter() - start <= 60


# -- 2. closed-form values of zero-payoff games ------------------------------------


def _zero_value(U, W, b1, b2):
    return math.log(U) / b1 - math.log(W) / b2


@pytest.mark.criterion(2)
@pytest.mark.parametrize("U,W,b1,b2", [(2, 3, 1.0, 2.0), (4, 2, 0.5, 3.0), (3, 3, 2.0, 2.0), (1, 4, 1.0, 0.25)])
def test_zero_payoff_closed_forms(U, W, b1, b2):
    c = _zero_value(U, W, b1, b2)
    assert solve(OneShotProblem(np.zeros((U, W)), b1, b2)).value == pytest.approx(c, abs=1e-8)
    g = Game.from_arrays(np.ones((1, U, W, 1)), np.zeros((1, U, W)))
    for N in (1, 2, 5):
        sol = solve_nstage(g, RegularizationConfig(b1, b2, horizon=N))
        assert sol.values[0][0] == pytest.approx(N * c, abs=1e-8)
    for gamma in (0.5, 0.8):
        sol = solve_discounted(g, RegularizationConfig(b1, b2, gamma=gamma), tol=1e-9)
        assert sol.value[0] == pytest.approx(c / (1 - gamma), abs=1e-8)


# -- 3. contraction and uniqueness ---------------------------------------------------


@pytest.mark.criterion(3)
def test_contraction_and_uniqueness():
    tol, gamma = 1e-6, 0.8
    rng = np.random.default_rng(303)
    betas = [(1.0, 1.0), (2.0, 5.0), (INF, 2.0), (3.0, INF), (INF, INF)]
    start = time.perf_counter()
    for k in range(10):
        X, U, W = int(rng.integers(1, 11)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        g = random_game(rng, X, U, W)
        cfg = RegularizationConfig(*betas[k % len(betas)], gamma=gamma)
        for _ in range(3):
            v, w = rng.uniform(-10, 10, (2, X))
            a, _, _ = shapley_apply(g, cfg, v, tol)
            b, _, _ = shapley_apply(g, cfg, w, tol)
            assert np.abs(a - b).max() <= gamma * np.abs(v - w).max() + 4 * tol
        first = solve_discounted(g, cfg, tol)
        second = solve_discounted(g, cfg, tol, v0=rng.uniform(-50, 50, X))
        assert np.abs(first.value - second.value).max() <= 2 * tol
    assert time.perf_counter() - start <= 120


# -- 4. equilibrium deviations and exploitability ------------------------------------

DEVIATION_BETAS = [(2.0, 2.0), (0.5, 4.0), (INF, 1.0), (1.0, INF), (INF, INF)]


def _mix(rng, dist):
    noise = rng.dirichlet(np.ones(dist.shape[-1]) * 0.5, size=dist.shape[:-1])
    w = rng.uniform(0.02, 1.0)
    return (1 - w) * dist + w * noise


@pytest.mark.criterion(4)
@pytest.mark.parametrize("betas", DEVIATION_BETAS)
def test_nstage_deviations(betas):
    rng = np.random.default_rng(404)
    g = random_game(rng, 4, 3, 2)
    cfg = RegularizationConfig(*betas, horizon=4)
    sol = solve_nstage(g, cfg)
    mu = rng.dirichlet(np.ones(4))
    value = phi_n(g, cfg, sol.sigma, sol.tau, mu)
    for _ in range(50):
        assert phi_n(g, cfg, MarkovStrategy(_mix(rng, sol.sigma.stages)), sol.tau, mu) <= value + 1e-5
        assert phi_n(g, cfg, sol.sigma, MarkovStrategy(_mix(rng, sol.tau.stages)), mu) >= value - 1e-5


@pytest.mark.criterion(4)
@pytest.mark.parametrize("betas", DEVIATION_BETAS)
def test_discounted_deviations_and_exploitability(betas):
    rng = np.random.default_rng(405)
    g = random_game(rng, 50, 3, 3)
    cfg = RegularizationConfig(*betas, gamma=0.8)
    sol = solve_discounted(g, cfg, tol=1e-8)
    v = phi_inf(g, cfg, sol.sigma, sol.tau)
    for _ in range(50):
        assert (phi_inf(g, cfg, StationaryStrategy(_mix(rng, sol.sigma.dist)), sol.tau) <= v + 1e-5).all()
        assert (phi_inf(g, cfg, sol.sigma, StationaryStrategy(_mix(rng, sol.tau.dist))) >= v - 1e-5).all()
    e1, e2 = exploitability(g, cfg, sol.sigma, sol.tau)
    assert e1.max() <= 1e-4 and e2.max() <= 1e-4


# -- 5. history-dependent deviations ---------------------------------------------------


@pytest.mark.criterion(5)
def test_history_dependent_deviations():
    rng = np.random.default_rng(505)
    g = random_game(rng, 2, 2, 2)
    cfg = RegularizationConfig(1.5, 2.5, horizon=2)
    sol = solve_nstage(g, cfg, tol=1e-10)
    mu = np.array([0.5, 0.5])
    s_star, t_star = HistoryStrategy.from_markov(sol.sigma), HistoryStrategy.from_markov(sol.tau)
    value = phi_n_tree(g, cfg, s_star, t_star, mu)
    assert value == pytest.approx(sol.value(mu), abs=1e-8)
    layers = oracles.history_layers(g, 2)
    for _ in range(50):
        s = HistoryStrategy.from_table(oracles.random_history_table(rng, layers, 2, sol.sigma.stages))
        t = HistoryStrategy.from_table(oracles.random_history_table(rng, layers, 2, sol.tau.stages))
        assert phi_n_tree(g, cfg, s, t_star, mu) <= value + 1e-6
        assert phi_n_tree(g, cfg, s_star, t, mu) >= value - 1e-6


# -- 6. and 7. grid-world experiment ----------------------------------------------------

GAMMA = 0.8


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_nash_wins_on_nominal_and_loses_on_blocked():
    start = time.perf_counter()
    src = build_game(builtin_map("nominal"))
    nash = solve_discounted(src.game, RegularizationConfig(INF, INF, gamma=GAMMA))
    r = win_probability(src.game, nash.sigma, nash.tau, [src.win_sink], [src.capture_sink], src.start)
    assert r.win == pytest.approx(1.0, abs=1e-6)
    rows = sweep_rows(argparse.Namespace(betas="inf", solve_map="builtin:nominal",
                                         eval_maps="builtin:blocked", gamma=GAMMA, tol=1e-6, opponent="nash"))
    assert rows[0]["win_prob"] == pytest.approx(0.0, abs=1e-6)
    assert time.perf_counter() - start <= 300


@pytest.fixture(scope="module")
def sweep():
    args = argparse.Namespace(betas="2,3,4,5,6,7,8,9,10,inf", solve_map="builtin:nominal",
                              eval_maps="builtin:nominal,builtin:blocked,builtin:side",
                              gamma=GAMMA, tol=1e-6, opponent="nash")
    return {(r["beta1"], r["eval_map"].removeprefix("builtin:")): r["win_prob"] for r in sweep_rows(args)}


@pytest.mark.slow
@pytest.mark.criterion(7)
def test_beta6_win_probabilities(sweep):
    assert sweep[6.0, "blocked"] == pytest.approx(0.20, abs=0.10)
    assert sweep[6.0, "side"] == pytest.approx(0.80, abs=0.10)
    assert sweep[INF, "nominal"] - sweep[6.0, "nominal"] == pytest.approx(0.15, abs=0.10)


@pytest.mark.slow
@pytest.mark.criterion(7)
def test_nominal_win_probability_monotone_from_beta4(sweep):
    wins = [sweep[float(b), "nominal"] for b in range(4, 11)]
    assert all(a <= b + 1e-9 for a, b in zip(wins, wins[1:]))


# -- 8. approach to the unregularized value -----------------------------------------


def _lp_value(rho):
    """max_p min_j (p^T rho)_j via scipy's LP solver."""
    U, W = rho.shape
    c = np.r_[np.zeros(U), -1.0]
    A_ub = np.c_[-rho.T, np.ones(W)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(W), A_eq=[np.r_[np.ones(U), 0.0]], b_eq=[1.0],
                  bounds=[(0, None)] * U + [(None, None)])
    assert res.status == 0
    return -res.fun


BETAS_8 = (1.0, 10.0, 100.0, 1000.0)


@pytest.fixture(scope="module")
def qre_errors():
    rng = np.random.default_rng(808)
    out = []
    for _ in range(10):
        rho = rng.uniform(-1, 1, (3, 3))
        lp = _lp_value(rho)
        out.append([solve(OneShotProblem(rho, b, b)).value - lp for b in BETAS_8])
    return np.array(out)


@pytest.mark.criterion(8)
def test_regularized_value_close_to_lp_value_at_beta_1000(qre_errors):
    assert np.abs(qre_errors[:, -1]).max() <= 1e-2


@pytest.mark.criterion(8)
def test_regularized_value_inside_shrinking_entropy_envelope(qre_errors):
    bound = math.log(3) / np.array(BETAS_8)
    assert (np.abs(qre_errors) <= bound + 1e-9).all()


@pytest.mark.criterion(8)
@pytest.mark.xfail(strict=True, reason="value(beta) - value_LP changes sign on some games, so its "
                   "absolute value is not monotone in beta (games 5 and 8 of this seed)")
def test_distance_to_lp_value_non_increasing(qre_errors):
    errs = np.abs(qre_errors)
    assert (errs[:, 1:] <= errs[:, :-1] + 1e-9).all()
