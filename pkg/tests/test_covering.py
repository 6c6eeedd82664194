import numpy as np
import pytest

from limsup.covering import (
    ACCEPTED,
    OUTSIDE,
    REJECTED,
    check_selection,
    dilation_bound_check,
    greedy_select,
    rescaled_lengths_total,
)
from limsup.dimfn import DimensionFunction
from limsup.geometry import Ball, Balls

F1 = DimensionFunction.power(1.0)
B0 = Ball(0.5, 0.5)


def test_three_disjoint_balls_all_selected():
    balls = Balls.from_list([Ball(0.2, 0.1), Ball(0.5, 0.1), Ball(0.8, 0.06)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0)
    assert res.success
    assert sorted(res.indices.tolist()) == [1, 2, 3]
    assert res.captured == pytest.approx(0.52)
    assert not check_selection(res)


def test_identical_balls_second_rejected():
    balls = Balls.from_list([Ball(0.5, 0.1), Ball(0.5, 0.1), Ball(0.2, 0.01)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0, stop_at_half=False)
    assert res.indices.tolist() == [1, 3]
    k = res.trace_index.tolist().index(2)
    assert res.trace_status[k] == REJECTED and res.trace_blocker[k] == 1
    assert not res.success


def test_touching_intervals_do_not_conflict():
    balls = Balls.from_list([Ball(0.25, 0.25), Ball(0.75, 0.25)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0, stop_at_half=False)
    assert res.indices.tolist() == [1, 2]


def test_outside_and_below_n():
    balls = Balls.from_list([Ball(0.5, 0.4), Ball(1.5, 0.1), Ball(0.35, 0.1)])
    res = greedy_select(balls, F1, 1.0, 1.0, Ball(0.5, 0.3), N=2, stop_at_half=False)
    assert res.indices.tolist() == [3]
    counts = res.status_counts()
    assert counts["below-N"] == 1 and counts["outside"] == 1


def test_stops_at_first_half_prefix():
    balls = Balls.from_list([Ball(0.1 + 0.2 * k, 0.05) for k in range(5)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0)
    # each rescaled ball has length 0.1, five of them make 0.5
    assert res.indices.size == 5 and res.success
    res2 = greedy_select(balls, DimensionFunction.power(1.0, kappa=2.0), 1.0, 1.0, B0)
    assert res2.indices.size == 3 and res2.success


def test_sort_is_by_radius_then_index():
    balls = Balls.from_list([Ball(0.5, 0.01), Ball(0.5, 0.2), Ball(0.5, 0.2)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0, stop_at_half=False)
    assert res.trace_index.tolist() == [2, 3, 1]
    assert res.indices.tolist() == [2]


def test_validation():
    balls = Balls.from_list([Ball(0.5, 0.1)])
    with pytest.raises(ValueError):
        greedy_select(balls, F1, 1.0, 0.0, B0)
    with pytest.raises(ValueError):
        greedy_select(balls, F1, 1.0, 1.0, B0, N=0)
    with pytest.raises(ValueError):
        greedy_select(balls, F1, 1.0, 1.0, Ball(5.0, 0.1))


def test_empty_input_is_partial():
    res = greedy_select(Balls.empty(), F1, 1.0, 1.0, B0)
    assert res.status == "partial" and res.captured == 0.0


def test_dilation_identical_blocker():
    balls = Balls.from_list([Ball(0.5, 0.1), Ball(0.5, 0.1)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0, stop_at_half=False)
    rep = dilation_bound_check(res, balls, F1, 1.0, 1.0, 2.0)
    assert rep.n_checked == 1 and rep.max_needed == pytest.approx(1.0) and rep.ok
    assert rep.eta == 10.0


def test_dilation_worst_case_tangent():
    # radii rho and 2 rho, nearly tangent; the larger one is scanned first and blocks
    rho = 0.05
    balls = Balls.from_list([Ball(0.5, 2 * rho), Ball(0.5 + 3 * rho - 1e-9, rho)])
    res = greedy_select(balls, F1, 1.0, 1.0, B0, stop_at_half=False)
    rep = dilation_bound_check(res, balls, F1, 1.0, 1.0, 2.0)
    assert rep.ok
    assert rep.max_needed == pytest.approx((rho + 3 * rho) / (2 * rho), rel=1e-6)


def test_dirichlet_selection_c10(dirichlet_balls, f23):
    res = greedy_select(dirichlet_balls, f23, 1.0, 10.0, B0)
    assert res.success and res.fraction >= 0.5
    assert not check_selection(res)
    # disjoint, so the clipped lengths add up to the captured measure
    clipped = np.minimum(res.scaled_balls.hi, 1.0) - np.maximum(res.scaled_balls.lo, 0.0)
    assert clipped.sum() == pytest.approx(res.captured, rel=1e-9)
    assert rescaled_lengths_total(res.balls, f23, 1.0, 10.0) >= res.captured
    # Monte Carlo cross-check of the captured measure
    x = np.random.default_rng(0).uniform(0, 1, 200_000)
    sb = res.scaled_balls
    order = np.argsort(sb.lo)
    lo, hi = np.maximum(sb.lo[order], 0.0), np.minimum(sb.hi[order], 1.0)
    k = np.searchsorted(lo, x, side="right") - 1
    hit = (k >= 0) & (x < hi[np.maximum(k, 0)])
    assert hit.mean() == pytest.approx(res.captured, abs=0.005)
    rep = dilation_bound_check(res, dirichlet_balls, f23, 1.0, 10.0, 2.0)
    assert rep.ok and rep.n_checked > 0


@pytest.mark.parametrize("C", [1.0, 10.0, 100.0])
def test_selection_invariants_across_c(rational3, f23, C):
    balls = rational3.generate(rational3.count(300))
    res = greedy_select(balls, f23, 1.0, C, B0, early_exit=True)
    assert not check_selection(res)
    assert np.all(res.trace_status[res.trace_status == ACCEPTED] == ACCEPTED)


def test_monotone_in_truncation(rational3, f23):
    caps = []
    for Q in (50, 100, 200, 400):
        balls = rational3.generate(rational3.count(Q))
        caps.append(greedy_select(balls, f23, 1.0, 30.0, B0, stop_at_half=False).captured)
    assert caps == sorted(caps)


def test_outside_flag_for_large_rescaled(f23):
    balls = Balls.from_list([Ball(0.9, 0.05)])
    res = greedy_select(balls, f23, 1.0, 1.0, Ball(0.5, 0.2), stop_at_half=False)
    assert res.trace_status.tolist() == [OUTSIDE]
