"""Dimension functions ``f(r) = kappa * r**s * log(1/r)**t`` and their checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ball

_GRID_DECADES = 280.0


class InvalidDimensionFunction(ValueError):
    pass


@dataclass(frozen=True)
class DimensionFunction:
    """``f(r) = kappa * r**s * (log(1/r))**t``, with ``f(0) = 0``.

    For ``t == 0`` the formula is used for every ``r >= 0``; otherwise ``f``
    is only defined on ``[0, 1)``.
    """

    kappa: float = 1.0
    s: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidDimensionFunction("kappa must be positive")
        if self.s < 0:
            raise InvalidDimensionFunction("s must be >= 0")
        if self.s == 0 and self.t >= 0:
            raise InvalidDimensionFunction("s = 0 needs t < 0 for f(0) = 0")

    @classmethod
    def power(cls, s: float, kappa: float = 1.0) -> "DimensionFunction":
        return cls(kappa=kappa, s=s, t=0.0)

    def log(self, r):
        """``log f(r)`` for ``r > 0``, computed without underflow."""
        r = np.asarray(r, dtype=float)
        lr = np.log(r)
        out = math.log(self.kappa) + self.s * lr
        if self.t != 0.0:
            if np.any(r >= 1.0):
                raise ValueError("log-corrected dimension function needs r < 1")
            out = out + self.t * np.log(-lr)
        return out

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        pos = r > 0
        out = np.zeros_like(r)
        if np.any(pos):
            out[pos] = np.exp(self.log(r[pos]))
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "s": self.s, "t": self.t}

    def __str__(self) -> str:
        core = f"{self.kappa:g}*r^{self.s:g}"
        return core if self.t == 0 else f"{core}*log(1/r)^{self.t:g}"


@dataclass(frozen=True)
class FValidity:
    decreasing_ok: bool
    divergence_ok: bool
    lam: float
    r_max: float
    delta: float

    @property
    def valid(self) -> bool:
        return self.decreasing_ok and self.divergence_ok

    @property
    def valid_range(self) -> tuple[float, float]:
        return (0.0, self.r_max)

    def failures(self) -> list[str]:
        out = []
        if not self.decreasing_ok:
            out.append("decrease: r^-delta f(r) not decreasing")
        if not self.divergence_ok:
            out.append("divergence: r^-delta f(r) does not diverge")
        return out


def _log_grid(r_max: float, n: int) -> np.ndarray:
    top = math.log(r_max)
    return np.exp(np.linspace(top - _GRID_DECADES * math.log(10), top, n))


def check_dimension_function(
    f: DimensionFunction, delta: float, r_max: float = 1 / math.e, n_grid: int = 10_000
) -> FValidity:
    """Check ``r**-delta f(r)`` is non-increasing and unbounded near 0.

    Both conditions are decided analytically for the parametric family and
    confirmed on a log grid; the doubling constant ``lam`` is the grid
    supremum of ``(f(2r)/f(r))**(1/delta)`` inflated by 1%.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0 < r_max <= 1 / math.e + 1e-15:
        raise ValueError("r_max must lie in (0, 1/e]")
    r = _log_grid(r_max, n_grid)
    lf = f.log(r)
    if np.any(np.diff(lf) <= 0):
        raise InvalidDimensionFunction(f"{f} is not increasing on (0, {r_max:g}]")

    lg = lf - delta * np.log(r)  # log(r^-delta f(r)), increasing r
    grid_decreasing = bool(np.all(np.diff(lg) <= 1e-12 * np.maximum(1.0, np.abs(lg[1:]))))
    # d log g / d log r = (s - delta) - t / log(1/r); need <= 0 for log(1/r) >= log(1/r_max)
    big_l = math.log(1 / r_max)
    slope_at_top = (f.s - delta) - f.t / big_l
    slope_at_zero = f.s - delta
    analytic_decreasing = slope_at_top <= 1e-15 and (slope_at_zero < 0 or (slope_at_zero == 0 and f.t >= 0))
    decreasing_ok = grid_decreasing and analytic_decreasing

    analytic_div = f.s < delta or (f.s == delta and f.t > 0)
    grid_div = bool(lg[0] - lg[-1] > 1e-9 * max(1.0, abs(lg[-1])))  # log growth is slow, so only ask for growth
    divergence_ok = analytic_div and grid_div

    ratio = np.exp((f.log(2.0 * r) - f.log(r)) / delta)
    lam = float(np.max(ratio)) * 1.01
    return FValidity(decreasing_ok, divergence_ok, lam, r_max, delta)


def rescaled_radii(radii, f: DimensionFunction, delta: float, C: float) -> np.ndarray:
    """Radii of ``B^{f/C}``: ``(f(r)/C)**(1/delta)``."""
    if not C > 0:
        raise ValueError("C must be positive")
    radii = np.asarray(radii, dtype=float)
    return np.exp((f.log(radii) - math.log(C)) / delta)


def scale_ball(b: Ball, f: DimensionFunction, delta: float, C: float = 1.0) -> Ball:
    return Ball(b.center, float(rescaled_radii(b.radius, f, delta, C)))


@dataclass(frozen=True)
class CantelliTails:
    """Tail sums ``T_N = sum_{i=N}^{n} f(diam B_i)`` at log-spaced ``N``."""

    N: np.ndarray
    tails: np.ndarray
    n_terms: int
    block_sums: np.ndarray  # sums over index blocks [2^j, 2^(j+1))
    run_starts: np.ndarray | None = None
    run_values: np.ndarray | None = None
    run_suffix: np.ndarray | None = None

    def tail(self, N: int) -> float:
        """``T_N`` at any ``N >= 1``; zero past the last term."""
        if N < 1:
            raise ValueError("N must be >= 1")
        if N > self.n_terms:
            return 0.0
        k = int(np.searchsorted(self.run_starts, N, side="right")) - 1
        nxt = self.run_starts[k + 1] if k + 1 < self.run_starts.size else self.n_terms + 1
        return float(self.run_suffix[k + 1] + self.run_values[k] * (nxt - N))

    @property
    def total(self) -> float:
        return float(self.tails[0])

    def first_below(self, threshold: float) -> int | None:
        hits = np.nonzero(self.tails < threshold)[0]
        return int(self.N[hits[0]]) if hits.size else None

    def condensation_ratio(self, last: int = 4) -> float:
        """Geometric-mean ratio of the last complete dyadic block sums.

        Below one is the Cauchy condensation signature of a convergent series.
        """
        b = self.block_sums[self.block_sums > 0]
        if b.size < 2:
            return 0.0
        b = b[-(last + 1):]
        return float(np.exp(np.mean(np.diff(np.log(b)))))


def tail_sums(values: np.ndarray, counts: np.ndarray, n_points: int = 64) -> CantelliTails:
    """Tail sums of a run-length encoded series ``values[k]`` repeated ``counts[k]`` times."""
    values = np.asarray(values, dtype=float)
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    if n < 1:
        raise ValueError("need at least one term")
    starts = np.concatenate([[1], 1 + np.cumsum(counts)[:-1]])  # first index of each run
    block = values * counts
    # suffix sums over runs: S[k] = sum of runs k.. end
    suffix = np.concatenate([np.cumsum(block[::-1])[::-1], [0.0]])

    def tail_at(N):
        k = np.searchsorted(starts, N, side="right") - 1
        within = starts[k] + counts[k] - N  # terms of run k at index >= N
        return suffix[k + 1] + values[k] * within

    Ns = np.unique(np.round(np.logspace(0, math.log10(n), n_points)).astype(np.int64))
    tails = np.array([tail_at(N) for N in Ns])

    n_blocks = int(math.floor(math.log2(n))) if n > 1 else 0
    edges = 2 ** np.arange(n_blocks + 1, dtype=np.int64)
    cum_at = np.array([suffix[0] - tail_at(e) for e in edges])  # sum of terms with index < e
    bsums = np.diff(cum_at) if edges.size > 1 else np.empty(0)
    return CantelliTails(Ns, tails, n, bsums, starts, values, suffix)


def cantelli_upper_check(f: DimensionFunction, seq, n_terms: int, n_points: int = 64) -> CantelliTails:
    """Hausdorff-Cantelli tails ``sum_{i >= N} f(diam B_i)`` for the first ``n_terms`` balls.

    ``seq`` is a ball sequence (anything with ``radius_profile``) or a
    :class:`~limsup.geometry.Balls` family.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if hasattr(seq, "radius_profile"):
        radii, counts = seq.radius_profile(n_terms)
    else:
        radii = np.asarray(seq.radii[:n_terms], dtype=float)
        counts = np.ones(radii.size, dtype=np.int64)
    return tail_sums(f(2.0 * radii), counts, n_points)
