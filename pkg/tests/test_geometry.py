import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limsup.geometry import (
    CANTOR_DIM,
    Ball,
    Balls,
    CantorSpace,
    IntervalUnion,
    UnitInterval,
    UnitSquare,
    ball_measure,
    distance_to_complement,
    make_space,
    maximal_separated_net,
    nearest_net_point,
    region_measure,
    voronoi_edges,
)

intervals = st.lists(
    st.tuples(st.floats(0, 1, allow_nan=False), st.floats(0, 0.3, allow_nan=False)).map(lambda t: (t[0], t[0] + t[1])),
    min_size=0,
    max_size=12,
)


def test_ball_rejects_bad_radius():
    with pytest.raises(ValueError):
        Ball(0.5, 0.0)
    with pytest.raises(ValueError):
        Ball(0.5, math.inf)


def test_ball_measure_interval():
    sp = UnitInterval()
    assert ball_measure(sp, Ball(0.5, 0.1)) == pytest.approx(0.2)
    assert ball_measure(sp, Ball(0.05, 0.1)) == pytest.approx(0.15)


def test_ball_measure_cantor_cylinder():
    sp = CantorSpace(depth=6)
    a, b = sp.cylinder([0, 2, 0])
    assert ball_measure(sp, Ball(0.5 * (a + b), 0.5 * (b - a))) == pytest.approx(0.125)


def test_region_measure_examples():
    sp = UnitInterval()
    assert region_measure(sp, IntervalUnion.from_pairs([(0, 0.5), (0.25, 0.75)])) == pytest.approx(0.75)
    assert region_measure(sp, IntervalUnion()) == 0.0
    assert region_measure(sp, IntervalUnion.from_pairs([(0, 0.2), (0.5, 0.6)])) == pytest.approx(0.3)


def test_canonical_form_merges_within_tolerance():
    u = IntervalUnion.from_pairs([(0.0, 0.3), (0.3 + 1e-13, 0.5), (0.7, 0.8)])
    assert len(u) == 2
    assert u.lo.tolist() == [0.0, 0.7]


@given(intervals)
def test_canonical_form_is_unique(pairs):
    u = IntervalUnion.from_pairs(pairs)
    v = IntervalUnion.from_pairs(list(reversed(pairs)))
    assert u == v
    assert np.all(u.lo[1:] > u.hi[:-1])
    # idempotent
    assert IntervalUnion(u.lo, u.hi) == u


@settings(max_examples=60)
@given(intervals)
def test_region_measure_matches_monte_carlo(pairs):
    sp = UnitInterval()
    u = IntervalUnion.from_pairs(pairs)
    x = np.random.default_rng(0).random(100_000)
    hits = np.zeros(x.size, dtype=bool)
    for a, b in pairs:
        hits |= (x > a) & (x < b)
    p = hits.mean()
    se = math.sqrt(max(p * (1 - p), 1e-12) / x.size)
    assert abs(region_measure(sp, u) - p) <= 3 * se + 1e-4


def test_distance_to_complement_examples():
    region = IntervalUnion.from_pairs([(0.4, 0.7)])
    assert distance_to_complement(np.array([0.5]), region) == pytest.approx(0.1)
    assert distance_to_complement(IntervalUnion.from_pairs([(0.45, 0.55)]), region) == pytest.approx(0.05)
    assert distance_to_complement(np.array([0.4]), region) == 0.0


def test_distance_ignores_hull_sides():
    region = IntervalUnion.from_pairs([(0.0, 0.3)])
    assert distance_to_complement(np.array([0.1]), region, UnitInterval()) == pytest.approx(0.2)
    assert distance_to_complement(np.array([0.1]), region) == pytest.approx(0.1)


def test_net_examples():
    sp = UnitInterval()
    np.testing.assert_allclose(maximal_separated_net(sp, IntervalUnion.from_pairs([(0, 1)]), 0.35), [0, 0.35, 0.7])
    np.testing.assert_allclose(maximal_separated_net(sp, IntervalUnion.from_pairs([(0.2, 0.3)]), 0.5), [0.2])
    np.testing.assert_allclose(maximal_separated_net(sp, IntervalUnion.from_pairs([(0, 0.1), (0.9, 1)]), 0.5), [0, 0.9])
    with pytest.raises(ValueError):
        maximal_separated_net(sp, IntervalUnion(), 0.1)


@settings(max_examples=60)
@given(intervals.filter(lambda p: len(p) > 0), st.floats(0.005, 0.5))
def test_net_is_separated_and_maximal(pairs, sep):
    sp = UnitInterval()
    support = IntervalUnion.from_pairs(pairs).clip(0.0, 1.0)
    if support.is_empty:
        return
    net = maximal_separated_net(sp, support, sep)
    assert np.all(np.diff(net) >= sep * (1 - 1e-12))
    assert np.all(support.locate(net) >= 0)
    # every support point is within sep of the net: check a dense grid of support points
    for a, b in support:
        xs = np.linspace(a, b, 50)
        d = np.min(np.abs(xs[:, None] - net[None, :]), axis=1)
        assert np.all(d <= sep * (1 + 1e-12))
        assert all(abs(nearest_net_point(x, net) - x) <= sep * (1 + 1e-12) for x in xs[::7])


def test_cantor_net_points_are_in_the_set():
    sp = CantorSpace(depth=8)
    net = maximal_separated_net(sp, IntervalUnion.from_pairs([(0, 1)]), 0.05)
    assert all(sp.contains(x) for x in net)
    assert np.all(np.diff(net) >= 0.05)


def test_nearest_net_point_examples():
    net = [0.0, 0.35, 0.7]
    assert nearest_net_point(0.3, net) == 0.35
    assert nearest_net_point(0.35, [0.0, 0.7, 0.7]) == 0.0
    assert nearest_net_point(0.7, net) == 0.7


def test_voronoi_edges():
    np.testing.assert_allclose(voronoi_edges(np.array([0.0, 0.4, 1.0]))[1:-1], [0.2, 0.7])


def test_interval_ahlfors_bounds(rng):
    sp = UnitInterval()
    x = rng.random(10_000)
    r = rng.uniform(1e-6, sp.r0, x.size)
    m = sp.measure_between(x - r, x + r)
    assert np.all(m >= sp.c1 * r - 1e-15)
    assert np.all(m <= sp.c2 * r + 1e-15)


def test_cantor_ahlfors_bounds(rng):
    sp = CantorSpace(depth=12)
    x = sp.sample(rng, 10_000)
    r = np.exp(rng.uniform(math.log(sp.r_min), 0.0, x.size))
    m = sp.measure_between(x - r, x + r)
    d = sp.delta
    assert np.all(m >= sp.c1 * r**d)
    assert np.all(m <= sp.c2 * r**d)


def test_cantor_cdf_inverse_roundtrip(rng):
    sp = CantorSpace(depth=10)
    u = rng.random(1000)
    np.testing.assert_allclose(sp.cdf(sp.inverse_cdf(u)), u, atol=1e-12)
    assert sp.delta == pytest.approx(CANTOR_DIM)


def test_cantor_next_point():
    sp = CantorSpace(depth=5)
    assert sp.next_point(0.4) == pytest.approx(2 / 3)
    assert sp.next_point(0.1) == pytest.approx(0.1)
    assert sp.next_point(1.5) is None


def test_cantor_level_intervals():
    u = CantorSpace(depth=5).level_intervals(3)
    assert len(u) == 8
    assert u.length() == pytest.approx((2 / 3) ** 3)


def test_unit_square_union_area():
    sq = UnitSquare()
    assert sq.union_area([((0.5, 0.5), 0.1)]) == pytest.approx(0.04)
    assert sq.union_area([((0.5, 0.5), 0.1), ((0.55, 0.5), 0.1)]) == pytest.approx(0.05 * 0.2 + 0.04)
    assert ball_measure(sq, Ball((0.0, 0.0), 0.2)) == pytest.approx(0.04)


def test_make_space():
    assert make_space("interval").delta == 1.0
    assert make_space("cantor", 7).depth == 7
    with pytest.raises(ValueError):
        make_space("torus")


def test_balls_concat_and_take():
    b = Balls.from_list([Ball(0.1, 0.1), Ball(0.5, 0.2)])
    c = Balls.concat([b, b.take(np.array([1]))])
    assert len(c) == 3
    assert c.indices.tolist() == [1, 2, 2]
