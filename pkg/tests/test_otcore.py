"""Exact transport solvers against brute-force oracles."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mkdepth.errors import (
    DimensionMismatchError,
    InstanceTooLargeError,
    NonuniformWeightsError,
    SizeMismatchError,
)
from mkdepth.measures import DiscreteMeasure
from mkdepth.otcore import (
    Coupling,
    brute_force_ot,
    cost_matrix,
    solve_assignment,
    solve_discrete_ot,
    surplus_matrix,
)


# --- oracles -----------------------------------------------------------------

def permutation_minimum(source_pts: np.ndarray, target_pts: np.ndarray) -> float:
    """Mean matched squared distance minimized over every permutation."""
    n = len(source_pts)
    c = ((source_pts[:, None, :] - target_pts[None, :, :]) ** 2).sum(-1)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, c[np.arange(n), list(perm)].sum() / n)
    return float(best)


def cycle_improves(c: np.ndarray, sigma: np.ndarray, cycle: list, tol: float) -> bool:
    """Would rotating the matched targets along `cycle` lower the cost?"""
    before = sum(c[i, sigma[i]] for i in cycle)
    rolled = [sigma[cycle[(k + 1) % len(cycle)]] for k in range(len(cycle))]
    after = sum(c[i, j] for i, j in zip(cycle, rolled))
    return after < before - tol


def random_instance(rng, n, d, spread=1.0):
    return (
        DiscreteMeasure(rng.normal(size=(n, d)) * spread),
        DiscreteMeasure(rng.normal(size=(n, d)) * spread),
    )


# --- cost/surplus matrices ------------------------------------------------------

def test_cost_and_surplus_identity():
    rng = np.random.default_rng(0)
    u, y = rng.normal(size=(5, 3)), rng.normal(size=(7, 3))
    c = cost_matrix(u, y)
    s = surplus_matrix(u, y)
    uu = (u**2).sum(1)[:, None]
    yy = (y**2).sum(1)[None, :]
    assert np.allclose(c, uu + yy - 2 * s, atol=1e-12)
    assert c.min() >= 0.0
    assert np.allclose(c[2, 4], ((u[2] - y[4]) ** 2).sum())


# --- solve_assignment -------------------------------------------------------------

def test_assignment_matches_permutation_oracle_small():
    rng = np.random.default_rng(42)
    for trial in range(12):
        n = int(rng.integers(2, 8))
        d = int(rng.integers(1, 4))
        src, tgt = random_instance(rng, n, d)
        cpl = solve_assignment(src, tgt)
        oracle = permutation_minimum(src.points, tgt.points)
        assert cpl.objective == pytest.approx(oracle, rel=0, abs=1e-12)
        assert np.array_equal(np.sort(cpl.matching), np.arange(n))


def test_assignment_agrees_with_brute_force_coupling():
    rng = np.random.default_rng(7)
    for _ in range(5):
        src, tgt = random_instance(rng, 6, 2)
        fast = solve_assignment(src, tgt)
        slow = brute_force_ot(src, tgt)
        assert fast.objective == pytest.approx(slow.objective, abs=1e-12)


def test_assignment_strong_duality_and_marginals():
    rng = np.random.default_rng(3)
    src, tgt = random_instance(rng, 150, 2)
    cpl = solve_assignment(src, tgt)
    assert abs(cpl.objective - cpl.dual_value) <= 1e-7 * (1 + abs(cpl.objective))
    assert cpl.marginal_residual() <= 1e-12
    assert cpl.support_size == 150


def test_assignment_one_dimensional_is_monotone():
    rng = np.random.default_rng(11)
    src = DiscreteMeasure(rng.normal(size=(40, 1)))
    tgt = DiscreteMeasure(rng.normal(size=(40, 1)) * 2.0 + 1.0)
    cpl = solve_assignment(src, tgt)
    # the optimal one-dimensional coupling pairs order statistics
    order_src = np.argsort(src.points[:, 0])
    order_tgt = np.argsort(tgt.points[:, 0])
    assert np.array_equal(cpl.matching[order_src], order_tgt)


def test_assignment_objective_invariant_to_atom_order():
    rng = np.random.default_rng(13)
    src, tgt = random_instance(rng, 25, 2)
    perm = rng.permutation(25)
    shuffled = DiscreteMeasure(tgt.points[perm])
    a = solve_assignment(src, tgt)
    b = solve_assignment(src, shuffled)
    assert a.objective == pytest.approx(b.objective, abs=1e-12)


def test_assignment_cyclically_monotone_at_n200():
    rng = np.random.default_rng(19)
    src, tgt = random_instance(rng, 200, 2)
    cpl = solve_assignment(src, tgt)
    c = cost_matrix(src.points, tgt.points)
    sigma = cpl.matching
    for _ in range(500):
        k = int(rng.integers(2, 4))
        cycle = list(rng.choice(200, size=k, replace=False))
        assert not cycle_improves(c, sigma, cycle, tol=1e-9)


def test_assignment_input_validation():
    a = DiscreteMeasure(np.zeros((3, 2)) + np.arange(3)[:, None])
    b = DiscreteMeasure(np.zeros((4, 2)) + np.arange(4)[:, None])
    with pytest.raises(SizeMismatchError):
        solve_assignment(a, b)
    w = DiscreteMeasure(np.arange(3.0).reshape(-1, 1), np.array([1.0, 1.0, 2.0]))
    u = DiscreteMeasure(np.arange(3.0).reshape(-1, 1))
    with pytest.raises(NonuniformWeightsError):
        solve_assignment(w, u)
    big_pts = np.arange(12001, dtype=float).reshape(-1, 1)
    with pytest.raises(InstanceTooLargeError):
        solve_assignment(DiscreteMeasure(big_pts), DiscreteMeasure(big_pts + 0.5))


# --- solve_discrete_ot --------------------------------------------------------------

def weighted_instance(rng, n, m, d):
    src = DiscreteMeasure(rng.normal(size=(n, d)), rng.integers(1, 9, n).astype(float))
    tgt = DiscreteMeasure(rng.normal(size=(m, d)), rng.integers(1, 9, m).astype(float))
    return src, tgt


def test_discrete_ot_matches_vertex_oracle():
    rng = np.random.default_rng(23)
    for n, m in [(3, 4), (4, 3), (2, 5), (4, 4), (3, 3)]:
        src, tgt = weighted_instance(rng, n, m, 2)
        lp = solve_discrete_ot(src, tgt)
        oracle = brute_force_ot(src, tgt)
        assert lp.objective == pytest.approx(oracle.objective, abs=1e-10)
        assert lp.support_size <= n + m - 1
        assert lp.marginal_residual() <= 1e-12
        assert abs(lp.objective - lp.dual_value) <= 1e-9 * (1 + abs(lp.objective))


def test_discrete_ot_detects_permutation_plans():
    rng = np.random.default_rng(29)
    src, tgt = random_instance(rng, 12, 2)
    lp = solve_discrete_ot(src, tgt)
    fast = solve_assignment(src, tgt)
    assert lp.matching is not None
    assert lp.objective == pytest.approx(fast.objective, abs=1e-10)
    assert np.array_equal(lp.matching, fast.matching)


def test_discrete_ot_single_atom_target():
    src = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]))
    tgt = DiscreteMeasure(np.array([[0.5, 0.5]]))
    lp = solve_discrete_ot(src, tgt)
    assert lp.support_size == 2
    assert np.allclose(sorted(lp.masses), [0.5, 0.5])
    expected = 0.5 * (0.25 + 0.25) + 0.5 * (0.25 + 0.25)
    assert lp.objective == pytest.approx(expected, abs=1e-12)


def test_discrete_ot_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        solve_discrete_ot(
            DiscreteMeasure(np.zeros((2, 2)) + np.arange(2)[:, None]),
            DiscreteMeasure(np.arange(2.0).reshape(-1, 1)),
        )


# --- brute force oracle internals -----------------------------------------------------

def test_brute_force_uniform_equals_permutation_scan():
    rng = np.random.default_rng(31)
    src, tgt = random_instance(rng, 5, 2)
    cpl = brute_force_ot(src, tgt)
    assert cpl.objective == pytest.approx(
        permutation_minimum(src.points, tgt.points), abs=1e-14
    )
    # exact complementary slackness of the oracle duals on the matching
    s = surplus_matrix(src.points, tgt.points)
    gaps = cpl.psi + cpl.psi_star[cpl.matching] - s[np.arange(5), cpl.matching]
    assert np.abs(gaps).max() <= 1e-12
    feas = cpl.psi[:, None] + cpl.psi_star[None, :] - s
    assert feas.min() >= -1e-12


def test_brute_force_vertex_duals_are_feasible():
    rng = np.random.default_rng(37)
    src, tgt = weighted_instance(rng, 3, 4, 2)
    cpl = brute_force_ot(src, tgt)
    s = surplus_matrix(src.points, tgt.points)
    feas = cpl.psi[:, None] + cpl.psi_star[None, :] - s
    assert feas.min() >= -1e-9
    assert np.abs(feas[cpl.rows, cpl.cols]).max() <= 1e-9
    assert abs(cpl.objective - cpl.dual_value) <= 1e-9 * (1 + abs(cpl.objective))


def test_brute_force_size_caps():
    pts = np.arange(9.0).reshape(-1, 1)
    m9 = DiscreteMeasure(pts)
    with pytest.raises(InstanceTooLargeError):
        brute_force_ot(m9, DiscreteMeasure(pts + 0.5))
    w = DiscreteMeasure(pts[:5], np.arange(1.0, 6.0))
    with pytest.raises(InstanceTooLargeError):
        brute_force_ot(w, DiscreteMeasure(pts[:4]))


# --- property tests --------------------------------------------------------------------

coords = st.floats(min_value=-50, max_value=50, allow_nan=False, width=64)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_property_assignment_below_random_permutations(n, seed):
    rng = np.random.default_rng(seed)
    src, tgt = random_instance(rng, n, 2)
    cpl = solve_assignment(src, tgt)
    c = cost_matrix(src.points, tgt.points)
    for _ in range(10):
        perm = rng.permutation(n)
        assert cpl.objective <= c[np.arange(n), perm].sum() / n + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_property_discrete_ot_duals_feasible(n, m, seed):
    rng = np.random.default_rng(seed)
    src, tgt = weighted_instance(rng, n, m, 2)
    lp = solve_discrete_ot(src, tgt)
    s = surplus_matrix(src.points, tgt.points)
    feas = lp.psi[:, None] + lp.psi_star[None, :] - s
    assert feas.min() >= -1e-8
    assert lp.marginal_residual() <= 1e-10
