"""Brute-force cross-checks: dyadic box counts and covering sums.

Nothing here uses the greedy selection, the local measures or the tree, so
agreement with them is independent evidence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dimfn import CantelliTails, DimensionFunction, cantelli_upper_check
from .geometry import Balls, IntervalUnion
from .sequences import BallSequence, RationalSequence


@dataclass(frozen=True)
class BoxCountEstimate:
    ks: np.ndarray
    counts: np.ndarray
    slope: float
    intercept: float
    r2: float

    @property
    def scales(self) -> np.ndarray:
        return 2.0 ** -self.ks.astype(float)

    def to_dict(self) -> dict:
        return {"ks": self.ks.tolist(), "counts": self.counts.tolist(), "slope": self.slope, "r2": self.r2}


def _fit(ks, counts) -> BoxCountEstimate:
    ks = np.asarray(ks, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts <= 0):
        raise ValueError("some scale has no occupied cell")
    x = ks.astype(float)
    y = np.log2(counts.astype(float))
    if ks.size < 2:
        return BoxCountEstimate(ks, counts, float("nan"), float("nan"), float("nan"))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return BoxCountEstimate(ks, counts, float(slope), float(intercept), r2)


def count_cells(lo: np.ndarray, hi: np.ndarray, k: int, closed: bool = False) -> int:
    """Number of dyadic cells ``[j 2^-k, (j+1) 2^-k)`` meeting a union of intervals.

    Open intervals ``(a, b)`` meet cells ``floor(a 2^k) .. ceil(b 2^k) - 1``;
    closed ones also meet the cell starting at ``b`` when ``b 2^k`` is an
    integer.
    """
    if lo.size == 0:
        return 0
    s = float(2**k)
    first = np.floor(lo * s).astype(np.int64)
    last = (np.floor(hi * s) if closed else np.ceil(hi * s) - 1).astype(np.int64)
    last = np.maximum(last, first)
    order = np.argsort(first, kind="stable")
    first, last = first[order], last[order]
    run_last = np.maximum.accumulate(last)
    new = np.ones(first.size, dtype=bool)
    new[1:] = first[1:] > run_last[:-1]
    blk = np.cumsum(new) - 1
    b_first = first[new]
    b_last = np.full(b_first.size, np.iinfo(np.int64).min)
    np.maximum.at(b_last, blk, run_last)
    return int(np.sum(b_last - b_first + 1))


def box_count(region: IntervalUnion | Balls, k_range, closed: bool = False) -> BoxCountEstimate:
    """Box counts of a finite union at scales ``2^-k`` and the log-log slope."""
    if isinstance(region, Balls):
        lo, hi = region.lo, region.hi
    else:
        lo, hi = region.lo, region.hi
    if lo.size == 0:
        raise ValueError("empty region")
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range is empty")
    return _fit(ks, [count_cells(lo, hi, k, closed) for k in ks])


def rational_band_counts(tau: float, q0: int, Q: int, k_range) -> BoxCountEstimate:
    """Scale-band box counts for the rational family.

    At scale ``2^-k`` only balls with radius in ``(2^-(k+1), 2^-k]`` are
    counted, i.e. denominators ``q`` with ``q**-tau`` in that band.  Each band
    is a union of balls whose radius matches the cell size, so its count
    measures how many resolution-``2^-k`` pieces the limsup set needs at that
    scale.  The whole tail union would be counted by its dense centres
    instead and report dimension one at every cutoff.
    """
    ks, counts = [], []
    for k in k_range:
        qa = max(q0, math.ceil(2.0 ** (k / tau) - 1e-9))
        qb = min(Q, math.ceil(2.0 ** ((k + 1) / tau) - 1e-9) - 1)
        if qb < qa:
            continue
        total = 0
        lo_parts, hi_parts = [], []
        for q in range(qa, qb + 1):
            p = np.arange(q + 1)
            r = q ** -tau
            lo_parts.append(p / q - r)
            hi_parts.append(p / q + r)
        lo = np.clip(np.concatenate(lo_parts), 0.0, 1.0)
        hi = np.clip(np.concatenate(hi_parts), 0.0, 1.0)
        total = count_cells(lo, hi, k)
        ks.append(k)
        counts.append(total)
    if len(ks) < 2:
        raise ValueError("fewer than two complete bands in range")
    return _fit(ks, counts)


def band_box_dimension(seq: BallSequence, q0: int, Q: int, k_range=None) -> BoxCountEstimate:
    """Band box-count slope for a rational sequence between denominators ``q0`` and ``Q``."""
    if not isinstance(seq, RationalSequence):
        raise TypeError("band counts are implemented for rational sequences")
    tau = seq.tau
    if k_range is None:
        k_lo = math.ceil(tau * math.log2(max(q0, 2)))
        k_hi = math.floor(tau * math.log2(Q)) - 1
        k_range = range(k_lo, k_hi + 1)
    return rational_band_counts(tau, q0, Q, k_range)


def covering_upper(f: DimensionFunction, sequence: BallSequence | Balls, n_terms: int, n_points: int = 64) -> CantelliTails:
    """Tail sums ``sum_{i >= N} f(diam B_i)`` over the first ``n_terms`` balls.

    Tails beyond the end of a finite list are zero.
    """
    return cantelli_upper_check(f, sequence, n_terms, n_points)


def rational_tail_beyond(tau: float, s: float, Q: int, kappa: float = 1.0) -> tuple[float, float]:
    """Bracket for ``sum_{q > Q} (q + 1) f(2 q**-tau)`` with ``f = kappa r**s``.

    The summand ``g(q) = kappa 2**s (q + 1) q**(-tau s)`` is decreasing once
    ``tau s > 1``, so the integral test gives
    ``int_{Q+1}^inf g <= sum <= int_Q^inf g``; both integrals are closed form.
    Raises for ``tau s <= 2``, where the series diverges.
    """
    e = tau * s
    if e <= 2:
        raise ValueError("series diverges for tau * s <= 2")
    c = kappa * 2.0**s

    def integral(a):
        # int_a^inf (q + 1) q**-e dq
        return a ** (2 - e) / (e - 2) + a ** (1 - e) / (e - 1)

    return c * integral(Q + 1), c * integral(Q)
