"""The local measure ``mu(B0, N)`` built from a greedy selection.

Each selected ball ``B_i`` carries the weight ``H(B_i^{f/C}) / K`` spread
uniformly (for the space's natural measure) over ``B_i``, with ``K`` the
total rescaled measure.  Atoms are disjoint closed intervals, so the measure
has a cheap exact CDF and ball queries are two CDF evaluations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covering import SelectionResult, greedy_select
from .dimfn import DimensionFunction, rescaled_radii
from .geometry import AhlforsSpace, Ball, Balls, IntervalUnion, UnitInterval, ball_measure


class RadiiTooLarge(ValueError):
    """No tail of the truncated sequence satisfies ``f(r)/C >= (2r)**delta``."""


class SelectionFailed(RuntimeError):
    def __init__(self, message: str, selection: SelectionResult):
        super().__init__(message)
        self.selection = selection


def adjusted_N(balls: Balls, f: DimensionFunction, delta: float, C: float, N: int) -> int:
    """Smallest ``N' >= N`` with ``f(r_i)/C >= (2 r_i)**delta`` for every listed ``i >= N'``."""
    if len(balls) == 0:
        raise RadiiTooLarge("radii too large for this C: no balls")
    bad = f.log(balls.radii) - math.log(C) < delta * np.log(2.0 * balls.radii)
    bad_idx = balls.indices[bad]
    n_prime = max(N, int(bad_idx.max()) + 1) if bad_idx.size else N
    if n_prime > int(balls.indices.max()):
        raise RadiiTooLarge(f"radii too large for this C (C={C:g}): every listed ball has f(r)/C < (2r)^delta")
    return n_prime


@dataclass(frozen=True)
class WeightedBallMeasure:
    """Probability measure with uniform density on disjoint closed atoms.

    ``lo``/``hi`` are the atom intervals (cores of radius ``theta * r_i``,
    clipped to the ambient hull) sorted left to right.
    """

    space: AhlforsSpace
    indices: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    scaled_radii: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    weights: np.ndarray
    atom_mass: np.ndarray
    K: float
    B0: Ball
    N: int
    N_requested: int
    C: float
    f: DimensionFunction
    delta: float
    theta: float = 1.0
    status: str = "success"
    selection: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_cumw", np.concatenate([[0.0], np.cumsum(self.weights)]))

    def __len__(self) -> int:
        return self.indices.size

    @property
    def K_ratio(self) -> float:
        return self.K / ball_measure(self.space, self.B0)

    @property
    def support(self) -> IntervalUnion:
        return IntervalUnion(self.lo, self.hi)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.lo, x, side="right") - 1
        kc = np.clip(k, 0, None)
        part = self.space.measure_between(self.lo[kc], np.minimum(x, self.hi[kc])) / self.atom_mass[kc]
        val = self._cumw[kc] + self.weights[kc] * np.clip(part, 0.0, 1.0)
        out = np.where(k >= 0, val, 0.0)
        return out if out.ndim else float(out)

    def mass(self, a, b):
        """Mass of ``(a, b)`` (endpoints carry no mass)."""
        return np.maximum(self.cdf(b) - self.cdf(a), 0.0)

    def query(self, B: Ball) -> float:
        return float(self.mass(B.lo, B.hi))

    def query_region(self, region: IntervalUnion) -> float:
        if region.is_empty:
            return 0.0
        return float(np.sum(self.mass(region.lo, region.hi)))

    def atoms_met(self, a, b):
        """Range ``[k0, k1)`` of atoms meeting the open interval ``(a, b)``."""
        k0 = np.searchsorted(self.hi, a, side="right")
        k1 = np.searchsorted(self.lo, b, side="left")
        return k0, np.maximum(k1, k0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        k = np.clip(np.searchsorted(self._cumw, u, side="right") - 1, 0, len(self) - 1)
        fa = self.space.cdf(self.lo[k])
        fb = self.space.cdf(self.hi[k])
        return self.space.inverse_cdf(fa + rng.random(n) * (fb - fa))

    def summary(self) -> dict:
        return {
            "n_atoms": int(len(self)),
            "K": self.K,
            "K_ratio": self.K_ratio,
            "N": self.N,
            "N_requested": self.N_requested,
            "C": self.C,
            "theta": self.theta,
            "status": self.status,
        }


def build_local_measure(
    balls: Balls,
    f: DimensionFunction,
    delta: float,
    C: float,
    B0: Ball,
    N: int = 1,
    space: AhlforsSpace | None = None,
    theta: float = 1.0,
    allow_partial: bool = False,
    selection: SelectionResult | None = None,
) -> WeightedBallMeasure:
    """Build ``mu(B0, N)``.

    ``N`` is first raised to the adjusted cutoff so that every atom sits
    inside its rescaled ball.  Atoms are the balls ``B(x_i, theta * r_i)``;
    ``theta = 1`` gives the construction as stated, smaller values leave room
    between the support and the boundary of the tail region.

    Raises
    ------
    RadiiTooLarge
        If no admissible cutoff exists in the listed balls.
    SelectionFailed
        If the greedy selection stops short of half of ``B0`` and
        ``allow_partial`` is False.
    """
    space = space or UnitInterval()
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    n_prime = adjusted_N(balls, f, delta, C, N)
    sel = selection if selection is not None else greedy_select(balls, f, delta, C, B0, n_prime, space)
    if not sel.success and not allow_partial:
        raise SelectionFailed(f"greedy selection captured only {sel.fraction:.4f} of B0 (C={C:g}, N={n_prime})", sel)
    if sel.indices.size == 0:
        raise SelectionFailed("greedy selection is empty", sel)

    c, r, R = sel.centers, sel.radii, sel.scaled_radii
    lo = np.maximum(c - theta * r, space.lo)
    hi = np.minimum(c + theta * r, space.hi)
    m = space.measure_between(lo, hi)
    h_scaled = space.measure_between(np.maximum(c - R, space.lo), np.minimum(c + R, space.hi))
    keep = (m > 0) & (h_scaled > 0)  # atoms in gaps of the ambient set carry nothing
    order = np.argsort(lo[keep], kind="stable")

    def pick(a):
        return a[keep][order]

    K = float(math.fsum(pick(h_scaled).tolist()))
    w = pick(h_scaled) / K
    return WeightedBallMeasure(
        space=space,
        indices=pick(sel.indices),
        centers=pick(c),
        radii=pick(r),
        scaled_radii=pick(R),
        lo=pick(lo),
        hi=pick(hi),
        weights=w,
        atom_mass=pick(m),
        K=K,
        B0=B0,
        N=n_prime,
        N_requested=N,
        C=float(C),
        f=f,
        delta=delta,
        theta=theta,
        status=sel.status,
        selection=sel.summary(),
    )


def query_local(mu: WeightedBallMeasure, B: Ball) -> float:
    """``sum_i w_i H(B_i & B) / H(B_i)``."""
    return mu.query(B)


# ---------------------------------------------------------------------------
# the ball bound


HIST_EDGES = np.concatenate([[0.0], np.logspace(-6, 4, 41), [np.inf]])


def star_bound(mu: WeightedBallMeasure, rho) -> np.ndarray:
    """``max((rho / diam B0)**delta, f(rho)/C)``."""
    rho = np.asarray(rho, dtype=float)
    D = mu.B0.diam
    r_f = np.minimum(rho, 1.0 - 1e-12) if mu.f.t != 0 else rho
    return np.maximum((rho / D) ** mu.delta, np.exp(mu.f.log(r_f)) / mu.C)


def crossing_radius(mu: WeightedBallMeasure) -> float | None:
    """Radius where ``(rho/D)**delta`` overtakes ``f(rho)/C``, if below ``D``."""
    D = mu.B0.diam

    def g(r):
        return mu.delta * math.log(r / D) - (float(mu.f.log(min(r, 1 - 1e-12))) - math.log(mu.C))

    lo, hi = 1e-300, D
    if g(hi) <= 0 or g(lo) > 0:
        return None
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1 < 1e-13:
            break
    return hi


@dataclass
class BoundReport:
    """Worst ratio ``mu(B) / star_bound`` over the tested balls.

    Reports from disjoint sample batches combine with :meth:`merge`.
    """

    samples: int
    worst_ratio: float
    worst_ball: Ball | None
    histogram: np.ndarray
    worst_single_atom: float = 0.0  # max mu(B) C K / f(rho) over one-atom balls
    single_atom_limit: float = math.inf
    multi_atom_violations: int = 0
    n_multi_atom: int = 0
    sources: dict = field(default_factory=dict)  # worst ratio per family

    def merge(self, other: "BoundReport") -> "BoundReport":
        if other.worst_ratio > self.worst_ratio:
            worst, ball = other.worst_ratio, other.worst_ball
        else:
            worst, ball = self.worst_ratio, self.worst_ball
        src = dict(self.sources)
        for k, v in other.sources.items():
            src[k] = max(src.get(k, 0.0), v)
        return BoundReport(
            samples=self.samples + other.samples,
            worst_ratio=worst,
            worst_ball=ball,
            histogram=self.histogram + other.histogram,
            worst_single_atom=max(self.worst_single_atom, other.worst_single_atom),
            single_atom_limit=min(self.single_atom_limit, other.single_atom_limit),
            multi_atom_violations=self.multi_atom_violations + other.multi_atom_violations,
            n_multi_atom=self.n_multi_atom + other.n_multi_atom,
            sources=src,
        )

    @property
    def single_atom_ok(self) -> bool:
        return self.worst_single_atom <= self.single_atom_limit * (1 + 1e-9)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "worst_ratio": self.worst_ratio,
            "worst_ball": None if self.worst_ball is None else [self.worst_ball.center, self.worst_ball.radius],
            "histogram": self.histogram.tolist(),
            "worst_single_atom": self.worst_single_atom,
            "single_atom_limit": self.single_atom_limit,
            "single_atom_ok": self.single_atom_ok,
            "multi_atom_violations": self.multi_atom_violations,
            "n_multi_atom": self.n_multi_atom,
            "sources": dict(sorted(self.sources.items())),
        }


class _RangeMax:
    """Sparse table for range maxima over a fixed array."""

    def __init__(self, a: np.ndarray):
        self.levels = [np.asarray(a, dtype=float)]
        j = 1
        while 2 * j <= a.size:
            prev = self.levels[-1]
            self.levels.append(np.maximum(prev[:-j], prev[j:]))
            j *= 2

    def query(self, k0: np.ndarray, k1: np.ndarray) -> np.ndarray:
        """Max over ``[k0, k1)``; ranges must be nonempty."""
        n = k1 - k0
        lev = np.floor(np.log2(np.maximum(n, 1))).astype(int)
        out = np.empty(n.size)
        for L in np.unique(lev):
            sel = lev == L
            tab = self.levels[L]
            out[sel] = np.maximum(tab[k0[sel]], tab[k1[sel] - (1 << L)])
        return out


def _evaluate(mu: WeightedBallMeasure, x: np.ndarray, rho: np.ndarray, rmax: _RangeMax, report: BoundReport, source: str):
    a, b = x - rho, x + rho
    m = mu.mass(a, b)
    ratio = m / star_bound(mu, rho)
    report.samples += int(x.size)
    report.histogram += np.histogram(ratio, HIST_EDGES)[0]
    if ratio.size:
        k = int(np.argmax(ratio))
        report.sources[source] = max(report.sources.get(source, 0.0), float(ratio[k]))
        if ratio[k] > report.worst_ratio:
            report.worst_ratio = float(ratio[k])
            report.worst_ball = Ball(float(x[k]), float(rho[k]))

    k0, k1 = mu.atoms_met(a, b)
    n_met = k1 - k0
    one = n_met == 1
    if np.any(one):
        r_f = np.minimum(rho[one], 1 - 1e-12) if mu.f.t != 0 else rho[one]
        single = m[one] * mu.C * mu.K / np.exp(mu.f.log(r_f))
        report.worst_single_atom = max(report.worst_single_atom, float(single.max()))
    many = n_met >= 2
    if np.any(many):
        biggest = rmax.query(k0[many], k1[many])
        report.n_multi_atom += int(many.sum())
        report.multi_atom_violations += int(np.sum(0.5 * biggest > 2.0 * rho[many] * (1 + 1e-12)))


def _bound_reaches(mu: WeightedBallMeasure, level: float) -> float:
    """Smallest radius in ``(0, diam B0]`` with ``star_bound >= level``, else ``diam B0``."""
    D = mu.B0.diam
    if float(star_bound(mu, D)) < level:
        return D
    lo, hi = 1e-300, D
    for _ in range(2000):
        mid = math.sqrt(lo * hi)
        if float(star_bound(mu, mid)) >= level:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1 < 1e-12:
            break
    return hi


def verify_star_hypothesis(
    mu: WeightedBallMeasure,
    n_samples: int = 10_000,
    seed: int = 0,
    n_exact: int = 64,
    stream: int = 0,
) -> BoundReport:
    """Test ``mu(B) <= K0 * max((rho/diam B0)**delta, f(rho)/C)`` and record ``K0``.

    Three families are tested: random balls (centres half uniform in ``B0``,
    half drawn from ``mu``; radii log-uniform between a tenth of the smallest
    atom radius and ``diam B0``), the extremal radii of ``n_exact`` of those
    centres, and balls built on the atoms themselves.

    For a fixed centre, ``rho -> mu(B(x, rho))`` is continuous and changes
    slope only when ``x +- rho`` crosses an atom endpoint, and on each piece
    the ratio has no interior maximum.  On the unit interval the ratio's
    maximum over ``rho`` is therefore attained at an endpoint distance or at
    the radius where the two branches of the bound cross; those radii are
    enumerated exactly.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng([seed, stream])
    space, delta = mu.space, mu.delta
    lim = (space.c2 / space.c1) * 2.0**delta
    report = BoundReport(0, 0.0, None, np.zeros(HIST_EDGES.size - 1, dtype=np.int64), single_atom_limit=lim)
    rmax = _RangeMax(mu.scaled_radii)
    D = mu.B0.diam
    r_lo = float(mu.radii.min()) / 10.0

    n_u = n_samples // 2
    xs = np.concatenate([
        space.sample(rng, n_u, mu.B0.lo, mu.B0.hi),
        mu.sample(rng, n_samples - n_u),
    ])
    rho = np.exp(rng.uniform(math.log(r_lo), math.log(D), xs.size))
    _evaluate(mu, xs, rho, rmax, report, "random")

    # extremal radii for a subset of the centres.  Since mu(B) <= 1, radii
    # with 1/star_bound below the worst ratio so far cannot improve it.
    ends = np.sort(np.concatenate([mu.lo, mu.hi]))
    cross = crossing_radius(mu)
    extra = np.array([D] + ([cross] if cross is not None else []))
    r_cut = _bound_reaches(mu, 1.0 / report.worst_ratio) if report.worst_ratio > 0 else D
    pick = np.concatenate([xs[: n_exact // 2], xs[n_u : n_u + n_exact - n_exact // 2]])
    for x in pick.tolist():
        near = ends[np.searchsorted(ends, x - r_cut) : np.searchsorted(ends, x + r_cut, side="right")]
        radii = np.concatenate([np.abs(near - x), extra])
        radii = radii[(radii >= r_lo) & (radii <= min(D, r_cut))]
        if radii.size:
            _evaluate(mu, np.full(radii.size, x), radii, rmax, report, "extremal")

    # balls on the atoms: the atom itself, and at the rescaled scale
    c = mu.centers
    for name, r in (
        ("atom", mu.radii * mu.theta),
        ("atom-full", mu.radii),
        ("scaled-half", 0.5 * mu.scaled_radii),
        ("scaled", mu.scaled_radii),
        ("scaled-double", 2.0 * mu.scaled_radii),
    ):
        r = np.minimum(r, D)
        _evaluate(mu, c, r, rmax, report, name)
    return report
