import json
import math

import numpy as np
import pytest

from limsup.cantortree import (
    BracketError,
    CantorTree,
    Level,
    TreeBuildError,
    build_level,
    build_tree,
    check_tree_invariants,
    choose_rho,
    dimension_bisect,
    mass_distribution_bound,
    max_feasible_rho,
    query_tree,
    rho_feasible,
    tree_to_json,
)
from limsup.dimfn import DimensionFunction
from limsup.geometry import Ball, IntervalUnion
from limsup.sequences import ExplicitSequence, RationalSequence

B0 = Ball(0.5, 0.5)
SQRT = DimensionFunction.power(0.5)


def test_choose_rho_closed_form():
    node = Ball(0.5, 0.1)
    support = IntervalUnion.from_pairs([(0.49, 0.51)])
    rho, d = choose_rho(support, node, IntervalUnion.from_pairs([(0.4, 0.6)]), SQRT, 1.0, 1.0)
    assert d == pytest.approx(0.09)
    assert rho == pytest.approx(0.04, rel=1e-10)
    assert rho_feasible(rho, SQRT, 1.0, 1.0, 0.2)


def test_choose_rho_distance_cap():
    node = Ball(0.5, 0.1)
    support = IntervalUnion.from_pairs([(0.49, 0.51)])
    rho, d = choose_rho(support, node, IntervalUnion.from_pairs([(0.48, 0.52)]), SQRT, 1.0, 1.0)
    assert rho == pytest.approx(0.005)


def test_choose_rho_touching_support():
    support = IntervalUnion.from_pairs([(0.4, 0.5)])
    with pytest.raises(ValueError, match="touches"):
        choose_rho(support, Ball(0.5, 0.1), IntervalUnion.from_pairs([(0.4, 0.6)]), SQRT, 1.0, 1.0)


def test_max_feasible_rho_invalid_f():
    # f(r) = r with C > 1 never reaches (r / diam)
    with pytest.raises(ValueError):
        max_feasible_rho(DimensionFunction.power(1.0), 1.0, 2.0, 1.0)


@pytest.mark.parametrize("s,C,diam", [(0.5, 1.0, 0.2), (2 / 3, 10.0, 1.0), (0.3, 100.0, 0.01)])
def test_max_feasible_rho_matches_closed_form(s, C, diam):
    # rho / diam = rho^s / C  =>  rho = (diam / C)^(1 / (1 - s))
    expected = min(diam, (diam / C) ** (1 / (1 - s)))
    got = max_feasible_rho(DimensionFunction.power(s), 1.0, C, diam)
    assert got == pytest.approx(expected, rel=1e-10)
    assert rho_feasible(got, DimensionFunction.power(s), 1.0, C, diam)


def test_build_level_single_atom():
    seq = ExplicitSequence((Ball(0.5, 0.1),))
    ex = build_level(B0, 0, seq, SQRT, 1.0, 1.0, 1)
    assert ex.net.size == 1
    assert ex.masses.tolist() == [1.0]


def test_build_level_two_symmetric_atoms():
    seq = ExplicitSequence((Ball(0.25, 0.1), Ball(0.75, 0.1)))
    ex = build_level(B0, 0, seq, SQRT, 1.0, 1.5, 2)
    assert ex.net.size == 2
    np.testing.assert_allclose(ex.masses, [0.5, 0.5], rtol=1e-12)


def test_explicit_ball_depth_one_chain():
    seq = ExplicitSequence((Ball(0.5, 0.1),))
    tree = build_tree(seq, SQRT, 1.0, 1.0, 1, B0, 1)
    assert [len(L) for L in tree.levels] == [1, 1]
    assert tree.levels[1].masses.tolist() == [1.0]
    assert check_tree_invariants(tree, seq)["ok"]
    # the one ball does not reach level 1's tail cutoff
    with pytest.raises(TreeBuildError) as exc:
        build_tree(seq, SQRT, 1.0, 1.0, 2, B0, 1)
    assert exc.value.word == (1,)
    assert exc.value.tree.depth == 1


def test_build_tree_requires_depth():
    with pytest.raises(ValueError):
        build_tree(ExplicitSequence((Ball(0.5, 0.1),)), SQRT, 1.0, 1.0, 0, B0, 1)


def test_partial_tree_without_raise():
    seq = ExplicitSequence((Ball(0.5, 0.1),))
    tree = build_tree(seq, SQRT, 1.0, 1.0, 3, B0, 1, raise_on_failure=False)
    assert tree.failure is not None and tree.depth == 1


def _one_leaf_tree(f):
    root = Level(np.array([0.5]), np.array([0.5]), np.array([1.0]), np.array([-1]), np.array([0]))
    root.rho = np.array([0.25])
    leaf = Level(np.array([0.5]), np.array([0.25]), np.array([1.0]), np.array([0]), np.array([1]))
    return CantorTree([root, leaf], f, 1.0, 1.0, B0, 1 / 3, 1)


def test_mass_distribution_lower_bound_is_reciprocal():
    m = mass_distribution_bound(_one_leaf_tree(DimensionFunction.power(1.0, kappa=2.0)), n_samples=100)
    assert m.c_hat == pytest.approx(2.0)
    assert m.lower_bound == pytest.approx(0.5)


def test_mass_distribution_one_atom_large_f():
    m = mass_distribution_bound(_one_leaf_tree(DimensionFunction.power(1.0, kappa=4.0)), n_samples=100)
    assert m.c_hat <= 1.0 + 1e-12


def test_query_tree_examples():
    tree = _one_leaf_tree(SQRT)
    assert query_tree(tree, Ball(0.5, 2.0)) == (1.0, 1.0)
    assert query_tree(tree, Ball(0.1, 0.1)) == (0.0, 0.0)
    lo, hi = query_tree(tree, Ball(0.5, 0.25))
    assert lo <= 1.0 <= hi


@pytest.fixture(scope="module")
def small_tree():
    seq = RationalSequence(3.0)
    f = DimensionFunction.power(2 / 3)
    return seq, build_tree(seq, f, 1.0, 1.0, 3, B0, seq.count(2000))


def test_small_tree_invariants(small_tree):
    seq, tree = small_tree
    inv = check_tree_invariants(tree, seq)
    assert inv["ok"], inv
    for total in tree.level_sums():
        assert total == pytest.approx(1.0, abs=1e-9)
    diag = json.loads(tree_to_json(tree))
    assert diag["depth"] == 3 and diag["failure"] is None
    assert tree.dump().count("\n") == 1 + sum(len(L) for L in tree.levels)


def test_brackets_shrink_with_depth(small_tree, rng):
    _, tree = small_tree
    for _ in range(100):
        c = rng.uniform(0, 1)
        B = Ball(c, rng.uniform(1e-3, 0.3))
        prev = (0.0, 1.0)
        for n in range(tree.depth + 1):
            lo, hi = query_tree(tree, B, n)
            assert lo <= hi + 1e-15
            assert lo >= prev[0] - 1e-12 and hi <= prev[1] + 1e-12
            prev = (lo, hi)


def test_leaf_bracket_contains_leaf_mass(small_tree):
    _, tree = small_tree
    L = tree.leaves
    for k in range(len(L)):
        lo, hi = query_tree(tree, Ball(float(L.centers[k]), float(L.radii[k])))
        assert lo - 1e-15 <= L.masses[k] <= hi + 1e-15


def test_mdp_on_small_tree(small_tree):
    _, tree = small_tree
    a = mass_distribution_bound(tree, n_samples=500, seed=3)
    b = mass_distribution_bound(tree, n_samples=500, seed=3)
    assert a == b
    assert a.lower_bound == pytest.approx(1 / a.c_hat)
    assert math.isfinite(a.c_hat)


def test_dirichlet_depth_one_c10(rational3, f23):
    tree = build_tree(rational3, f23, 1.0, 10.0, 1, B0, rational3.count(2000))
    kids = tree.levels[1]
    assert math.fsum(kids.masses.tolist()) == pytest.approx(1.0, abs=1e-12)
    c = np.sort(kids.centers)
    assert np.all(np.diff(c) >= 4 * tree.levels[0].rho[0] * (1 - 1e-12))
    assert check_tree_invariants(tree, rational3)["ok"]


def test_bisect_rejects_bad_bracket():
    seq = RationalSequence(2.0)
    with pytest.raises(BracketError):
        dimension_bisect(seq, 1.0, 10.0, 0, (0.9, 0.5), i_max=seq.count(200))
    with pytest.raises(BracketError):
        dimension_bisect(seq, 1.0, 10.0, 0, (1.05, 1.2), i_max=seq.count(200))
    with pytest.raises(ValueError):
        dimension_bisect(seq, 1.0, 10.0, 0, (0.5, 0.9))


def test_bisect_tau2_small():
    seq = RationalSequence(2.0)
    res = dimension_bisect(seq, 1.0, 10.0, 0, (0.75, 1.3), tol=0.02, i_max=seq.count(500))
    assert res.bracket[1] - res.bracket[0] <= 0.02
    assert abs(res.s_star - 1.0) <= 0.15
    assert res.history[0]["success"] and not res.history[1]["success"]
