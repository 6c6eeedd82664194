import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from limsup.dimfn import DimensionFunction
from limsup.geometry import Ball, Balls, CantorSpace, IntervalUnion
from limsup.oracle import (
    band_box_dimension,
    box_count,
    count_cells,
    covering_upper,
    rational_band_counts,
    rational_tail_beyond,
)
from limsup.sequences import BAdicSequence, ExplicitSequence, RationalSequence


def test_unit_interval_slope_one():
    est = box_count(IntervalUnion.from_pairs([(0.0, 1.0)]), range(1, 15))
    assert est.counts.tolist() == [2**k for k in range(1, 15)]
    assert est.slope == pytest.approx(1.0)
    assert est.r2 == pytest.approx(1.0)


def test_cantor_cylinders_slope():
    est = box_count(CantorSpace(depth=12).level_intervals(12), range(1, 19), closed=True)
    assert abs(est.slope - math.log(2) / math.log(3)) <= 0.05
    assert np.all(np.diff(est.counts) >= 0)


def test_box_count_rejects_empty():
    with pytest.raises(ValueError):
        box_count(Balls.empty(), range(1, 3))
    with pytest.raises(ValueError):
        box_count(IntervalUnion.from_pairs([(0, 1)]), [])


def test_count_cells_open_closed():
    lo, hi = np.array([0.25]), np.array([0.5])
    assert count_cells(lo, hi, 2) == 1
    assert count_cells(lo, hi, 2, closed=True) == 2
    assert count_cells(np.empty(0), np.empty(0), 3) == 0


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=1, max_value=12),
    st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=20),
)
def test_count_bounds(k, raw):
    h = 2.0**-k
    lo = np.array([a for a, _ in raw])
    hi = lo + h + np.array([b for _, b in raw])  # every length at least 2^-k
    n = count_cells(lo, hi, k)
    u = IntervalUnion(lo, hi)
    total = u.length()
    assert total * 2**k - 1e-9 <= n <= total * 2**k + 2 * lo.size + 1e-9
    # brute force on the cell grid
    j0, j1 = int(np.floor(lo.min() * 2**k)), int(np.ceil(hi.max() * 2**k))
    cells = np.arange(j0, j1)
    meet = ((cells[:, None] + 1) * h > lo[None, :]) & (cells[:, None] * h < hi[None, :])
    assert n == int(meet.any(axis=1).sum())


def test_band_slope_tau3():
    est = band_box_dimension(RationalSequence(3.0), 50, 5000)
    assert abs(est.slope - 2 / 3) <= 0.1


@pytest.mark.parametrize("q0", [20, 50, 200])
def test_band_slope_stable_in_q0(q0):
    est = band_box_dimension(RationalSequence(3.0), q0, 5000)
    assert abs(est.slope - 2 / 3) <= 0.1


@pytest.mark.parametrize("tau", [2.0, 4.0])
def test_band_slope_other_tau(tau):
    est = band_box_dimension(RationalSequence(tau), 20, 3000)
    assert abs(est.slope - 2 / tau) <= 0.1


def test_band_counts_need_two_bands():
    with pytest.raises(ValueError):
        rational_band_counts(3.0, 50, 60, range(17, 18))
    with pytest.raises(TypeError):
        band_box_dimension(BAdicSequence(2, 2.0), 10, 100)


def test_covering_direct_sum_inside_integral_bracket():
    # sum_{Q < q <= Q2} (q + 1) (2 q^-3)^0.9 plus the bracket beyond Q2 must sit in the bracket beyond Q
    tau, s, Q, Q2 = 3.0, 0.9, 1000, 100_000
    seq = RationalSequence(tau)
    tails = covering_upper(DimensionFunction.power(s), seq, seq.count(Q2))
    direct = tails.tail(seq.first_index(Q + 1))
    q = np.arange(Q + 1, Q2 + 1, dtype=float)
    assert direct == pytest.approx(math.fsum(((q + 1) * (2 * q**-tau) ** s).tolist()), rel=1e-9)
    lo2, hi2 = rational_tail_beyond(tau, s, Q2)
    lo, hi = rational_tail_beyond(tau, s, Q)
    assert lo <= direct + lo2 and direct + hi2 <= hi


def test_tail_beyond_value_tau3():
    # frozen integral-test bracket for the infinite tail beyond q = 10^4 at s = 0.9
    lo, hi = rational_tail_beyond(3.0, 0.9, 10_000)
    assert lo <= hi
    assert hi == pytest.approx(4.2e-3, rel=0.05)
    with pytest.raises(ValueError):
        rational_tail_beyond(3.0, 0.5, 100)


def test_covering_tau3_s05_diverges():
    seq = RationalSequence(3.0)
    tails = covering_upper(DimensionFunction.power(0.5), seq, seq.count(3000))
    # summand ~ q^-0.5 per denominator: dyadic blocks grow
    assert tails.condensation_ratio() > 1.0
    assert np.all(np.diff(tails.block_sums[2:]) > 0)
    short = covering_upper(DimensionFunction.power(0.5), seq, seq.count(300))
    assert tails.total > short.total + 10


def test_covering_finite_sequence():
    seq = ExplicitSequence((Ball(0.5, 0.1), Ball(0.2, 0.05)))
    tails = covering_upper(DimensionFunction.power(1.0), seq, 2)
    assert tails.tail(1) == pytest.approx(0.3)
    assert tails.tail(2) == pytest.approx(0.1)
    assert tails.tail(3) == 0.0
