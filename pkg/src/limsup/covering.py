"""Greedy disjoint selection of rescaled balls inside a fixed ball.

Given balls ``B_i = B(x_i, r_i)``, the rescaled balls
``B_i^{f/C} = B(x_i, (f(r_i)/C)**(1/delta))`` are scanned by non-increasing
radius; a ball is kept when its rescaled version lies in ``B0`` and misses
every rescaled ball kept so far.  The scan stops once the kept rescaled balls
cover half the measure of ``B0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sortedcontainers import SortedList

from .dimfn import DimensionFunction, rescaled_radii
from .geometry import AhlforsSpace, Ball, Balls, IntervalUnion, UnitInterval, ball_measure

ACCEPTED = 0
REJECTED = 1  # meets an accepted rescaled ball
BELOW_N = 2
OUTSIDE = 3  # rescaled ball not inside B0
UNEXAMINED = 4  # after the stopping point

STATUS_NAMES = {ACCEPTED: "accepted", REJECTED: "rejected", BELOW_N: "below-N", OUTSIDE: "outside", UNEXAMINED: "unexamined"}


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of :func:`greedy_select`.

    ``trace_*`` arrays follow the scan order (non-increasing radius, ties by
    index).  ``trace_blocker`` holds, for rejected balls, the index of an
    accepted ball whose rescaled version meets theirs, and ``-1`` otherwise.
    """

    indices: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    scaled_radii: np.ndarray
    captured: float
    target: float
    b0_measure: float
    status: str
    B0: Ball
    N: int
    C: float
    trace_index: np.ndarray
    trace_status: np.ndarray
    trace_blocker: np.ndarray

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def fraction(self) -> float:
        return self.captured / self.b0_measure if self.b0_measure > 0 else 0.0

    @property
    def balls(self) -> Balls:
        return Balls(self.centers, self.radii, self.indices)

    @property
    def scaled_balls(self) -> Balls:
        return Balls(self.centers, self.scaled_radii, self.indices)

    def status_counts(self) -> dict:
        codes, counts = np.unique(self.trace_status, return_counts=True)
        return {STATUS_NAMES[int(c)]: int(n) for c, n in zip(codes, counts)}

    def summary(self) -> dict:
        return {
            "status": self.status,
            "n_selected": int(self.indices.size),
            "captured": self.captured,
            "target": self.target,
            "fraction": self.fraction,
            "N": self.N,
            "C": self.C,
            "B0": [self.B0.center, self.B0.radius],
            "trace_counts": self.status_counts(),
        }


def _clipped(lo, hi, space: AhlforsSpace):
    return np.maximum(lo, space.lo), np.minimum(hi, space.hi)


def greedy_select(
    balls: Balls,
    f: DimensionFunction,
    delta: float,
    C: float,
    B0: Ball,
    N: int = 1,
    space: AhlforsSpace | None = None,
    stop_at_half: bool = True,
    early_exit: bool = False,
) -> SelectionResult:
    """Select indices ``I`` with pairwise disjoint ``B_i^{f/C}`` inside ``B0``.

    Intervals are clipped to the ambient hull before the containment and
    disjointness tests, and the rescaled balls are open, so touching
    intervals do not conflict.

    Parameters
    ----------
    balls : Balls
        Candidate balls with their sequence indices.
    f, delta, C
        Dimension function, ambient dimension and the constant ``C > 0``.
    B0 : Ball
        The ball to fill.
    N : int
        Balls with index ``< N`` are ignored.
    space : AhlforsSpace, optional
        Ambient space, the unit interval by default.
    stop_at_half : bool
        When False the scan runs to the end of the input.
    early_exit : bool
        Give up as soon as the captured measure plus the measure of all
        remaining candidates falls short of the target.  The reported
        fraction is then a lower bound on what a full scan would give.

    Returns
    -------
    SelectionResult
        ``status`` is ``"success"`` once half of ``H(B0)`` is captured and
        ``"partial"`` if the input ran out first.
    """
    space = space or UnitInterval()
    if N < 1:
        raise ValueError("N must be >= 1")
    if not C > 0:
        raise ValueError("C must be positive")
    m0 = ball_measure(space, B0)
    if not m0 > 0:
        raise ValueError("B0 carries no mass")
    target = 0.5 * m0

    order = np.lexsort((balls.indices, -balls.radii))
    idx = balls.indices[order]
    ctr = balls.centers[order]
    rad = balls.radii[order]
    R = rescaled_radii(rad, f, delta, C) if rad.size else np.empty(0)
    lo, hi = _clipped(ctr - R, ctr + R, space)
    b_lo, b_hi = _clipped(np.array(B0.lo), np.array(B0.hi), space)
    b_lo, b_hi = float(b_lo), float(b_hi)

    status = np.full(idx.size, UNEXAMINED, dtype=np.int8)
    blocker = np.full(idx.size, -1, dtype=np.int64)
    low = idx < N
    status[low] = BELOW_N
    inside = (lo >= b_lo) & (hi <= b_hi) & (hi > lo)
    status[~low & ~inside] = OUTSIDE
    live = np.nonzero(~low & inside)[0]

    accepted = SortedList()
    chosen: list[int] = []
    captured = 0.0
    done = captured >= target and stop_at_half
    lo_l, hi_l, idx_l = lo.tolist(), hi.tolist(), idx.tolist()
    if early_exit and live.size:
        rest = space.measure_between(lo[live], hi[live])
        suffix = np.concatenate([np.cumsum(rest[::-1])[::-1], [0.0]]).tolist()
    for step, k in enumerate(live.tolist()):
        if done:
            break
        if early_exit and captured + suffix[step] < target:
            break
        a, b = lo_l[k], hi_l[k]
        pos = accepted.bisect_left((a, b))
        hit = -1
        if pos > 0:
            pa, pb, pi = accepted[pos - 1]
            if pb > a:
                hit = pi
        if hit < 0 and pos < len(accepted):
            na, nb, ni = accepted[pos]
            if na < b:
                hit = ni
        if hit >= 0:
            status[k] = REJECTED
            blocker[k] = hit
            continue
        status[k] = ACCEPTED
        accepted.add((a, b, idx_l[k]))
        chosen.append(k)
        captured += float(space.measure_between(a, b))
        if stop_at_half and captured >= target:
            done = True

    sel = np.asarray(chosen, dtype=np.int64)
    # recompute from the canonical union to avoid summation drift
    if sel.size:
        captured = float(np.sum(space.measure_between(*_union_arrays(lo[sel], hi[sel]))))
    result_status = "success" if captured >= target else "partial"
    return SelectionResult(
        indices=idx[sel],
        centers=ctr[sel],
        radii=rad[sel],
        scaled_radii=R[sel],
        captured=captured,
        target=target,
        b0_measure=m0,
        status=result_status,
        B0=B0,
        N=N,
        C=float(C),
        trace_index=idx,
        trace_status=status,
        trace_blocker=blocker,
    )


def _union_arrays(lo, hi):
    u = IntervalUnion(lo, hi)
    return u.lo, u.hi


def check_selection(result: SelectionResult, space: AhlforsSpace | None = None) -> list[str]:
    """Exact recheck of disjointness and containment; returns violations."""
    space = space or UnitInterval()
    out = []
    lo, hi = _clipped(result.centers - result.scaled_radii, result.centers + result.scaled_radii, space)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    overlap = np.nonzero(hi[:-1] > lo[1:])[0]
    for k in overlap.tolist():
        out.append(f"indices {result.indices[order][k]} and {result.indices[order][k + 1]} overlap")
    b_lo, b_hi = _clipped(np.array(result.B0.lo), np.array(result.B0.hi), space)
    bad = np.nonzero((lo < b_lo) | (hi > b_hi))[0]
    for k in bad.tolist():
        out.append(f"index {result.indices[order][k]} leaves B0")
    if np.any(result.indices < result.N):
        out.append("selected index below N")
    return out


@dataclass(frozen=True)
class DilationReport:
    eta: float
    n_checked: int
    max_needed: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def dilation_bound_check(result: SelectionResult, balls: Balls, f: DimensionFunction, delta: float, C: float, lam: float) -> DilationReport:
    """Check each rejected rescaled ball sits inside ``eta`` times its blocker.

    ``eta = 5 * lam**delta``.  The dilation needed for rejected ``j`` with
    blocker ``i`` is ``(R_j + |x_i - x_j|) / R_i`` with ``R`` the rescaled radii.
    """
    eta = 5.0 * lam**delta
    rej = np.nonzero(result.trace_status == REJECTED)[0]
    if rej.size == 0:
        return DilationReport(eta, 0, 0.0, [])
    pos = {int(i): k for k, i in enumerate(balls.indices.tolist())}
    j_idx = result.trace_index[rej]
    i_idx = result.trace_blocker[rej]
    jk = np.array([pos[int(i)] for i in j_idx.tolist()])
    ik = np.array([pos[int(i)] for i in i_idx.tolist()])
    Rj = rescaled_radii(balls.radii[jk], f, delta, C)
    Ri = rescaled_radii(balls.radii[ik], f, delta, C)
    needed = (Rj + np.abs(balls.centers[jk] - balls.centers[ik])) / Ri
    bad = np.nonzero(needed > eta * (1 + 1e-12))[0]
    violations = [(int(j_idx[k]), int(i_idx[k]), float(needed[k])) for k in bad.tolist()]
    return DilationReport(eta, int(rej.size), float(needed.max()), violations)


def rescaled_lengths_total(balls: Balls, f: DimensionFunction, delta: float, C: float) -> float:
    """Sum of ``2 (f(r_i)/C)**(1/delta)``; an upper bound on anything greedy can capture."""
    if len(balls) == 0:
        return 0.0
    return float(math.fsum((2.0 * rescaled_radii(balls.radii, f, delta, C)).tolist()))
