import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ersg.errors import NumericRangeError, OneShotError
from ersg.matrix_lp import solve_matrix_lp
from ersg.oneshot import (
    OneShotProblem,
    best_response_p1,
    best_response_p2,
    lower_objective,
    solve,
    upper_objective,
)

import oracles

INF = math.inf
CLOSED_ZERO_2x3 = math.log(2) - 0.5 * math.log(3)  # 0.143841...

# frozen from oracles.grid_maxmin_2x2(RHO_A, 2, 3, step=1e-3)
RHO_A = np.array([[0.584, 0.162], [-0.17, 0.894]])
RHO_A_GRID_VALUE = 0.46303526979702503
# frozen from oracles.grid_best_response_p{1,2} (step 1e-3, beta 2)
RHO_B = np.array([[-0.715, -0.072, 0.197], [0.081, 0.582, 0.464], [-0.278, -0.704, 0.496]])
SIGMA_B = np.array([0.126, 0.78, 0.094])
TAU_B = np.array([0.036, 0.376, 0.588])
GRID_BR2_B = np.array([0.556, 0.234, 0.21])
GRID_BR1_B = np.array([0.233, 0.554, 0.213])


def prob(rho, b1=1.0, b2=1.0):
    return OneShotProblem(np.asarray(rho, dtype=float), b1, b2)


# -- objectives ------------------------------------------------------------


def test_lower_objective_examples():
    assert lower_objective(prob(np.zeros((2, 2))), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    assert lower_objective(prob(np.zeros((2, 3)), 1, 2), [0.5, 0.5]) == pytest.approx(0.143841, abs=1e-6)
    assert lower_objective(prob([[1, -1], [-1, 1]]), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)


def test_upper_objective_examples():
    assert upper_objective(prob(np.zeros((2, 2))), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)
    assert upper_objective(prob([[1, -1], [-1, 1]]), [0.5, 0.5]) == pytest.approx(0.0, abs=1e-15)


def test_objectives_reject_invalid_distributions():
    with pytest.raises(ValueError):
        lower_objective(prob(np.zeros((2, 2))), [0.6, 0.6])
    with pytest.raises(ValueError):
        upper_objective(prob(np.zeros((2, 2))), [1.0])


def test_objectives_match_brute_force_min_max():
    p = prob(RHO_A, 2.0, 3.0)
    grid = np.linspace(0, 1, 2001)
    sigma = np.array([0.3, 0.7])
    inner = min(oracles.one_shot_payoff(RHO_A, sigma, [q, 1 - q], 2.0, 3.0) for q in grid)
    assert lower_objective(p, sigma) == pytest.approx(inner, abs=1e-6)
    tau = np.array([0.8, 0.2])
    outer = max(oracles.one_shot_payoff(RHO_A, [q, 1 - q], tau, 2.0, 3.0) for q in grid)
    assert upper_objective(p, tau) == pytest.approx(outer, abs=1e-6)


matrices = st.integers(1, 4).flatmap(
    lambda m: st.integers(1, 4).flatmap(
        lambda n: arrays(np.float64, (m, n), elements=st.floats(-5, 5, allow_nan=False))))
betas = st.sampled_from([0.5, 1.0, 3.0, 20.0])


def _dist(rng, n):
    return rng.dirichlet(np.ones(n))


@settings(max_examples=60, deadline=None)
@given(rho=matrices, b1=betas, b2=betas, seed=st.integers(0, 10_000))
def test_weak_duality(rho, b1, b2, seed):
    rng = np.random.default_rng(seed)
    p = prob(rho, b1, b2)
    sigma, tau = _dist(rng, rho.shape[0]), _dist(rng, rho.shape[1])
    assert upper_objective(p, tau) - lower_objective(p, sigma) >= -1e-12


# -- quantal responses -------------------------------------------------------


def test_best_response_examples():
    np.testing.assert_allclose(best_response_p2(prob(np.zeros((2, 3))), [0.5, 0.5]), [1 / 3] * 3)
    np.testing.assert_allclose(best_response_p2(prob([[1.0, 0.0]]), [1.0]), [0.268941, 0.731059], atol=1e-6)
    np.testing.assert_allclose(best_response_p1(prob(np.zeros((3, 2))), [0.5, 0.5]), [1 / 3] * 3)
    np.testing.assert_allclose(best_response_p1(prob([[1.0], [0.0]]), [1.0]), [0.731059, 0.268941], atol=1e-6)


def test_best_responses_match_grid_oracle():
    p = prob(RHO_B, 2.0, 2.0)
    np.testing.assert_allclose(best_response_p2(p, SIGMA_B), GRID_BR2_B, atol=1e-3)
    np.testing.assert_allclose(best_response_p1(p, TAU_B), GRID_BR1_B, atol=1e-3)


def test_best_response_rejects_infinite_beta():
    with pytest.raises(ValueError):
        best_response_p2(prob(np.zeros((2, 2)), 1.0, INF), [0.5, 0.5])
    with pytest.raises(ValueError):
        best_response_p1(prob(np.zeros((2, 2)), INF, 1.0), [0.5, 0.5])


# -- solve ---------------------------------------------------------------------


@pytest.mark.parametrize("rho, b1, b2, value, sigma, tau", [
    (np.zeros((2, 2)), 1, 1, 0.0, [0.5, 0.5], [0.5, 0.5]),
    (np.zeros((2, 3)), 1, 2, CLOSED_ZERO_2x3, [0.5, 0.5], [1 / 3] * 3),
    ([[1, -1], [-1, 1]], 1, 1, 0.0, [0.5, 0.5], [0.5, 0.5]),
])
def test_solve_closed_forms(rho, b1, b2, value, sigma, tau):
    sol = solve(prob(rho, b1, b2))
    assert sol.value == pytest.approx(value, abs=1e-9)
    np.testing.assert_allclose(sol.sigma, sigma, atol=1e-8)
    np.testing.assert_allclose(sol.tau, tau, atol=1e-8)
    assert sol.gap <= 1e-9 and sol.unique


def test_solve_matches_grid_saddle():
    sol = solve(prob(RHO_A, 2.0, 3.0))
    assert abs(sol.value - RHO_A_GRID_VALUE) <= 5e-3
    assert sol.lower - 1e-12 <= sol.value <= sol.upper + 1e-12


@settings(max_examples=40, deadline=None)
@given(rho=matrices, b1=betas, b2=betas)
def test_solution_is_certified_interior_fixed_point(rho, b1, b2):
    tol = 1e-9
    p = prob(rho, b1, b2)
    sol = solve(p, tol=tol)
    assert sol.gap <= tol
    for d in (sol.sigma, sol.tau):
        assert abs(d.sum() - 1) <= 1e-9 and (d > 0).all()
    c = 10
    assert np.abs(sol.sigma - best_response_p1(p, sol.tau)).max() <= c * tol
    assert np.abs(sol.tau - best_response_p2(p, sol.sigma)).max() <= c * tol


@pytest.mark.parametrize("seed", range(5))
def test_fixed_point_residual_at_tight_tolerance(seed):
    rng = np.random.default_rng(seed)
    p = prob(rng.uniform(-1, 1, (3, 4)), 2.0, 5.0)
    sol = solve(p, tol=1e-12)
    assert np.abs(sol.sigma - best_response_p1(p, sol.tau)).max() <= 1e-6
    assert np.abs(sol.tau - best_response_p2(p, sol.sigma)).max() <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_uniqueness_from_random_starts(seed):
    rng = np.random.default_rng(seed)
    tol = 1e-10
    p = prob(rng.uniform(-2, 2, (4, 3)), 1.5, 4.0)
    a = solve(p, tol=tol, sigma0=rng.dirichlet(np.ones(4)))
    b = solve(p, tol=tol, sigma0=rng.dirichlet(np.ones(4)))
    assert abs(a.value - b.value) <= 10 * tol
    np.testing.assert_allclose(a.sigma, b.sigma, atol=10 * tol)
    np.testing.assert_allclose(a.tau, b.tau, atol=10 * tol)


@pytest.mark.parametrize("seed", range(5))
def test_unilateral_deviations_do_not_pay(seed):
    rng = np.random.default_rng(seed)
    tol = 1e-9
    p = prob(rng.uniform(-1, 1, (3, 3)), 3.0, 2.0)
    sol = solve(p, tol=tol)
    for _ in range(100):
        s = rng.dirichlet(np.ones(3) * 0.5) * 0.3 + 0.7 * sol.sigma
        t = rng.dirichlet(np.ones(3) * 0.5) * 0.3 + 0.7 * sol.tau
        assert lower_objective(p, s / s.sum()) <= sol.value + tol
        assert upper_objective(p, t / t.sum()) >= sol.value - tol


@pytest.mark.parametrize("seed", range(5))
def test_constant_shift(seed):
    rng = np.random.default_rng(seed)
    tol = 1e-10
    rho = rng.uniform(-1, 1, (3, 2))
    a = solve(prob(rho, 2.0, 1.0), tol=tol)
    b = solve(prob(rho + 0.75, 2.0, 1.0), tol=tol)
    assert b.value - a.value == pytest.approx(0.75, abs=2 * tol)
    np.testing.assert_allclose(a.sigma, b.sigma, atol=10 * tol)
    np.testing.assert_allclose(a.tau, b.tau, atol=10 * tol)


@pytest.mark.parametrize("seed", range(5))
def test_one_sided_rational_cases_mirror_each_other(seed):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(-1, 1, (3, 4))
    a = solve(prob(rho, 2.5, INF))
    b = solve(prob(-rho.T, INF, 2.5))
    assert a.value == pytest.approx(-b.value, abs=2e-9)
    assert not a.unique and not b.unique
    np.testing.assert_allclose(a.sigma, b.tau, atol=1e-6)


def test_one_sided_value_matches_grid():
    for b1, b2 in ((2.0, INF), (INF, 3.0)):
        sol = solve(prob(RHO_A, b1, b2))
        grid_value, _, _ = oracles.grid_maxmin_2x2(RHO_A, b1, b2)
        assert abs(sol.value - grid_value) <= 5e-3
        assert sol.gap <= 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_one_sided_close_to_large_finite_beta(seed):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(-1, 1, (3, 3))
    a = solve(prob(rho, 2.0, INF))
    b = solve(prob(rho, 2.0, 1e4))
    assert abs(a.value - b.value) <= 2e-3


def test_both_rational_uses_lp():
    sol = solve(prob([[1, -1], [-1, 1]], INF, INF))
    assert sol.value == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(sol.sigma, [0.5, 0.5], atol=1e-12)
    assert not sol.unique


def test_qre_value_within_entropy_envelope_of_lp_value():
    rng = np.random.default_rng(11)
    for _ in range(20):
        rho = rng.uniform(-1, 1, (3, 2))
        _, _, v_lp = solve_matrix_lp(rho)
        for b in (1, 10, 100, 1000):
            v = solve(prob(rho, b, b)).value
            assert v_lp - math.log(2) / b - 1e-9 <= v <= v_lp + math.log(3) / b + 1e-9
        assert abs(v - v_lp) <= 1e-2


def test_qre_distance_to_lp_value_is_not_monotone_in_general():
    # the sign of value(beta) - value_LP can flip, so the distance may grow
    # between two betas even though it vanishes in the limit
    rho = np.random.default_rng(808).uniform(-1, 1, (6, 3, 3))[5]
    _, _, v_lp = solve_matrix_lp(rho)
    errs = [abs(solve(prob(rho, b, b)).value - v_lp) for b in (1, 10)]
    assert errs[1] > errs[0]


def test_errors():
    with pytest.raises(ValueError):
        solve(prob(np.zeros((2, 2))), tol=0)
    with pytest.raises(NumericRangeError):
        solve(prob([[1e308, 0.0]], 10.0, 10.0))
    with pytest.raises(OneShotError) as err:
        solve(prob(np.random.default_rng(0).uniform(-1, 1, (3, 3)), 50.0, 50.0), tol=1e-12, max_iters=1)
    assert err.value.best is not None and err.value.gap > 1e-12


# -- LP ------------------------------------------------------------------------------


def test_lp_examples():
    s, t, v = solve_matrix_lp([[1, -1], [-1, 1]])
    assert v == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(s, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(t, [0.5, 0.5], atol=1e-12)
    s, t, v = solve_matrix_lp([[3.0]])
    assert v == 3.0 and s.tolist() == [1.0] and t.tolist() == [1.0]


def test_lp_matches_grid_oracle():
    # frozen from oracles.grid_matrix_game([[2, 0], [1, 3]], step=1e-4)
    s, t, v = solve_matrix_lp([[2, 0], [1, 3]])
    assert abs(v - 1.5) <= 1e-3
    np.testing.assert_allclose(s, [0.5, 0.5], atol=1e-3)
    np.testing.assert_allclose(t, [0.75, 0.25], atol=1e-3)


@settings(max_examples=60, deadline=None)
@given(rho=matrices)
def test_lp_saddle_inequalities(rho):
    s, t, v = solve_matrix_lp(rho)
    assert abs(s.sum() - 1) < 1e-12 and abs(t.sum() - 1) < 1e-12
    assert (s >= 0).all() and (t >= 0).all()
    # no pure deviation helps either player
    assert (s @ rho).min() >= v - 1e-9
    assert (rho @ t).max() <= v + 1e-9


def test_lp_rejects_large_games():
    with pytest.raises(ValueError):
        solve_matrix_lp(np.zeros((65, 2)))


def test_lp_degenerate_game_terminates():
    # all-equal payoffs make every basis degenerate; Bland's rule must still stop
    s, t, v = solve_matrix_lp(np.ones((6, 6)))
    assert v == pytest.approx(1.0)
