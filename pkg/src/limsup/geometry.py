"""Ahlfors regular spaces, balls, interval unions and separated nets.

Two one-dimensional spaces carry the whole pipeline: the unit interval with
Lebesgue measure (``delta = 1``) and a depth-``m`` middle-third Cantor
prefractal with its natural measure (``delta = log 2 / log 3``).  Both are
described by a cumulative distribution function, so every region measure is a
difference of CDF values.  The unit square (``delta = 2``) is available for
ball and region measures only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

#: endpoints closer than this are merged when canonicalising unions
MERGE_TOL = 1e-12

CANTOR_DIM = math.log(2) / math.log(3)


@dataclass(frozen=True)
class Ball:
    """Open ball ``B(center, radius)``."""

    center: float
    radius: float

    def __post_init__(self):
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise ValueError(f"ball radius must be positive and finite, got {self.radius!r}")

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius

    @property
    def diam(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Balls:
    """Indexed family of 1-D balls stored column-wise.

    ``indices`` are the positions of the balls in their generating sequence
    (1-based), which is what the tail cutoff ``N`` refers to.
    """

    centers: np.ndarray
    radii: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).ravel()
        r = np.asarray(self.radii, dtype=float).ravel()
        i = np.asarray(self.indices, dtype=np.int64).ravel()
        if not (c.shape == r.shape == i.shape):
            raise ValueError("centers, radii and indices must have equal length")
        if r.size and not np.all((r > 0) & np.isfinite(r)):
            raise ValueError("all radii must be positive and finite")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "indices", i)

    @classmethod
    def from_list(cls, balls: Sequence[Ball], indices=None) -> "Balls":
        if indices is None:
            indices = np.arange(1, len(balls) + 1)
        return cls(
            np.array([b.center for b in balls], dtype=float),
            np.array([b.radius for b in balls], dtype=float),
            np.asarray(indices),
        )

    @classmethod
    def empty(cls) -> "Balls":
        return cls(np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.centers.size

    def __getitem__(self, k) -> Ball:
        return Ball(float(self.centers[k]), float(self.radii[k]))

    def __iter__(self) -> Iterator[Ball]:
        for c, r in zip(self.centers.tolist(), self.radii.tolist()):
            yield Ball(c, r)

    def take(self, mask_or_idx) -> "Balls":
        return Balls(self.centers[mask_or_idx], self.radii[mask_or_idx], self.indices[mask_or_idx])

    @staticmethod
    def concat(parts: Iterable["Balls"]) -> "Balls":
        parts = [p for p in parts if len(p)]
        if not parts:
            return Balls.empty()
        return Balls(
            np.concatenate([p.centers for p in parts]),
            np.concatenate([p.radii for p in parts]),
            np.concatenate([p.indices for p in parts]),
        )

    @property
    def lo(self) -> np.ndarray:
        return self.centers - self.radii

    @property
    def hi(self) -> np.ndarray:
        return self.centers + self.radii


class IntervalUnion:
    """Finite union of intervals in canonical form.

    Members are sorted, pairwise disjoint, and separated by more than
    :data:`MERGE_TOL`.  Whether an endpoint belongs to the set is not
    tracked; all measures involved are atomless.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo=(), hi=(), *, canonical: bool = False):
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same length")
        if not canonical:
            lo, hi = _canonicalize(lo, hi)
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "IntervalUnion":
        pairs = list(pairs)
        if not pairs:
            return cls()
        arr = np.asarray(pairs, dtype=float)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def from_balls(cls, balls: Balls | Sequence[Ball]) -> "IntervalUnion":
        if not isinstance(balls, Balls):
            balls = Balls.from_list(list(balls))
        return cls(balls.lo, balls.hi)

    def __len__(self) -> int:
        return self.lo.size

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(zip(self.lo.tolist(), self.hi.tolist()))

    def __repr__(self) -> str:
        inner = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self)
        return f"IntervalUnion({inner})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return len(self) == len(other) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    @property
    def is_empty(self) -> bool:
        return self.lo.size == 0

    def length(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def clip(self, a: float, b: float) -> "IntervalUnion":
        lo = np.maximum(self.lo, a)
        hi = np.minimum(self.hi, b)
        keep = hi > lo
        return IntervalUnion(lo[keep], hi[keep], canonical=True)

    def locate(self, x) -> np.ndarray:
        """Index of the member containing each ``x`` (closed), or -1."""
        x = np.asarray(x, dtype=float)
        if self.is_empty:
            return np.full(x.shape, -1)
        k = np.searchsorted(self.lo, x, side="right") - 1
        ok = (k >= 0) & (x <= self.hi[np.clip(k, 0, None)])
        return np.where(ok, k, -1)

    def contains_interval(self, a: float, b: float) -> bool:
        if self.is_empty:
            return False
        k = int(np.searchsorted(self.lo, a, side="right")) - 1
        return k >= 0 and self.lo[k] <= a and b <= self.hi[k]


def _canonicalize(lo: np.ndarray, hi: np.ndarray):
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run_hi = np.maximum.accumulate(hi)
    # a new block starts where the gap to everything before exceeds the tolerance
    starts = np.ones(lo.size, dtype=bool)
    starts[1:] = lo[1:] > run_hi[:-1] + MERGE_TOL
    block = np.cumsum(starts) - 1
    out_lo = lo[starts]
    out_hi = np.full(out_lo.size, -np.inf)
    np.maximum.at(out_hi, block, run_hi)
    return out_lo, out_hi


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class AhlforsSpace:
    """Base class for the concrete spaces.

    ``c1 r**delta <= mu(B(x, r)) <= c2 r**delta`` for centres in the support
    and ``r_min <= r <= r0``.
    """

    delta: float
    c1: float
    c2: float
    r0: float
    r_min: float = 0.0
    kind: str = field(default="abstract")

    # hull of the ambient set
    lo: float = 0.0
    hi: float = 1.0

    def cdf(self, x):
        raise NotImplementedError

    def inverse_cdf(self, u):
        raise NotImplementedError

    def next_point(self, y: float) -> float | None:
        """Smallest ambient point ``>= y``, or ``None``."""
        raise NotImplementedError

    def total_measure(self) -> float:
        return float(self.cdf(self.hi) - self.cdf(self.lo))

    def measure_between(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return np.maximum(self.cdf(np.maximum(a, b)) - self.cdf(a), 0.0)

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        p = self.next_point(x - tol)
        return p is not None and p <= x + tol

    def sample(self, rng: np.random.Generator, n: int, a: float | None = None, b: float | None = None) -> np.ndarray:
        """``n`` points from the natural measure restricted to ``[a, b]``."""
        a = self.lo if a is None else max(a, self.lo)
        b = self.hi if b is None else min(b, self.hi)
        fa, fb = float(self.cdf(a)), float(self.cdf(b))
        if fb <= fa:
            raise ValueError(f"[{a}, {b}] carries no mass")
        return self.inverse_cdf(fa + rng.random(n) * (fb - fa))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta, "c1": self.c1, "c2": self.c2, "r0": self.r0}


@dataclass(frozen=True)
class UnitInterval(AhlforsSpace):
    """``[0, 1]`` with Lebesgue measure; ``r <= mu(B(x, r)) <= 2r`` for ``r <= 1``."""

    delta: float = 1.0
    c1: float = 0.5
    c2: float = 2.0
    r0: float = 1.0
    kind: str = "unit-interval"

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def inverse_cdf(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0)

    def next_point(self, y: float) -> float | None:
        if y > 1.0:
            return None
        return max(float(y), 0.0)


@dataclass(frozen=True)
class CantorSpace(AhlforsSpace):
    """Depth-``m`` middle-third Cantor prefractal.

    The ambient set is the union of the ``2**m`` closed triadic intervals of
    length ``3**-m``, each carrying mass ``2**-m`` spread uniformly.  Balls of
    radius at least ``3**-m`` see the Cantor measure up to the quoted
    constants.
    """

    depth: int = 20
    delta: float = CANTOR_DIM
    c1: float = 0.45
    c2: float = 4.0
    r0: float = 1.0
    r_min: float = -1.0
    kind: str = "cantor-ternary"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("Cantor depth must be >= 1")
        if self.r_min < 0:
            object.__setattr__(self, "r_min", 3.0 ** -self.depth)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        y = x.copy()
        out = np.zeros_like(y)
        live = np.ones(y.shape, dtype=bool)
        mass = 1.0
        for _ in range(self.depth):
            mass *= 0.5
            y3 = 3.0 * y
            d = np.clip(np.floor(y3), 0, 2)
            out = np.where(live & (d >= 1), out + mass, out)
            live = live & (d != 1)
            y = np.where(d == 2, y3 - 2.0, y3)
        out = np.where(live, out + mass * np.clip(y, 0.0, 1.0), out)
        return out if out.ndim else float(out)

    def inverse_cdf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        x = np.zeros_like(u)
        scale = 1.0
        for _ in range(self.depth):
            scale /= 3.0
            bit = u >= 0.5
            x = np.where(bit, x + 2.0 * scale, x)
            u = np.where(bit, 2.0 * u - 1.0, 2.0 * u)
        return x + scale * np.clip(u, 0.0, 1.0)

    def next_point(self, y: float) -> float | None:
        y = float(y)
        if y > 1.0:
            return None
        if y <= 0.0:
            return 0.0
        base, scale, z = 0.0, 1.0, y
        for _ in range(self.depth):
            scale /= 3.0
            z3 = 3.0 * z
            d = min(int(math.floor(z3)), 2)
            if d == 1:
                return base + 2.0 * scale
            if d == 2:
                base += 2.0 * scale
                z = z3 - 2.0
            else:
                z = z3
        return y

    def cylinder(self, digits: Sequence[int]) -> tuple[float, float]:
        """Closed interval of the cylinder with the given ternary digits."""
        if any(d not in (0, 2) for d in digits):
            raise ValueError("Cantor digits must be 0 or 2")
        a = sum(d * 3.0 ** -(k + 1) for k, d in enumerate(digits))
        return a, a + 3.0 ** -len(digits)

    def point(self, digits: Sequence[int]) -> float:
        """Left endpoint of the cylinder with the given digits."""
        return self.cylinder(digits)[0]

    def level_intervals(self, level: int) -> IntervalUnion:
        """The ``2**level`` closed intervals of the level-``level`` construction."""
        lo = np.zeros(1)
        for k in range(1, level + 1):
            s = 3.0 ** -k
            lo = np.concatenate([lo, lo + 2.0 * s])
        lo.sort()
        return IntervalUnion(lo, lo + 3.0 ** -level, canonical=True)

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["depth"] = self.depth
        return d


@dataclass(frozen=True)
class UnitSquare(AhlforsSpace):
    """``[0, 1]**2`` with area and the sup metric, balls being squares.

    Only ball and region measures are provided.
    """

    delta: float = 2.0
    c1: float = 0.5
    c2: float = 4.0
    r0: float = 1.0
    kind: str = "unit-square"

    def square_area(self, center, radius: float) -> float:
        cx, cy = center
        w = min(cx + radius, 1.0) - max(cx - radius, 0.0)
        h = min(cy + radius, 1.0) - max(cy - radius, 0.0)
        return max(w, 0.0) * max(h, 0.0)

    def union_area(self, squares: Sequence[tuple[tuple[float, float], float]]) -> float:
        """Exact area of a union of clipped squares by coordinate compression."""
        boxes = []
        for (cx, cy), r in squares:
            x0, x1 = max(cx - r, 0.0), min(cx + r, 1.0)
            y0, y1 = max(cy - r, 0.0), min(cy + r, 1.0)
            if x1 > x0 and y1 > y0:
                boxes.append((x0, x1, y0, y1))
        if not boxes:
            return 0.0
        xs = sorted({b[0] for b in boxes} | {b[1] for b in boxes})
        area = 0.0
        for xa, xb in zip(xs[:-1], xs[1:]):
            mid = 0.5 * (xa + xb)
            ys = IntervalUnion.from_pairs([(b[2], b[3]) for b in boxes if b[0] <= mid <= b[1]])
            area += (xb - xa) * ys.length()
        return area


def make_space(kind: str, depth: int = 20) -> AhlforsSpace:
    if kind in ("interval", "unit-interval"):
        return UnitInterval()
    if kind in ("cantor", "cantor-ternary"):
        return CantorSpace(depth=depth)
    if kind in ("square", "unit-square"):
        return UnitSquare()
    raise ValueError(f"unknown space kind {kind!r}")


# ---------------------------------------------------------------------------
# measures


def ball_measure(space: AhlforsSpace, b: Ball) -> float:
    """Measure of ``b`` intersected with the ambient set."""
    if isinstance(space, UnitSquare):
        return space.square_area(b.center, b.radius)
    return float(space.measure_between(b.lo, b.hi))


def region_measure(space: AhlforsSpace, r: IntervalUnion) -> float:
    """Measure of a canonical union; members are disjoint so it is a plain sum."""
    if r.is_empty:
        return 0.0
    return float(np.sum(space.measure_between(r.lo, r.hi)))


def distance_to_complement(p, open_region: IntervalUnion, space: AhlforsSpace | None = None) -> float:
    """Distance from ``p`` to the complement of ``open_region`` in the ambient set.

    ``p`` is an :class:`IntervalUnion` or an array of points.  Sides of a
    region member lying on the ambient hull have no complement beyond them.
    Returns ``0.0`` when some part of ``p`` is not strictly inside the region;
    callers treat that as "cannot choose a radius".

    In the Cantor space the gaps of the ambient set are ignored, so the value
    is a lower bound for the true distance.
    """
    if isinstance(p, IntervalUnion):
        a, b = p.lo, p.hi
    else:
        a = b = np.atleast_1d(np.asarray(p, dtype=float))
    if a.size == 0:
        raise ValueError("empty point set")
    if open_region.is_empty:
        return 0.0
    hull_lo = space.lo if space is not None else -np.inf
    hull_hi = space.hi if space is not None else np.inf
    k = np.searchsorted(open_region.lo, a, side="right") - 1
    if np.any(k < 0):
        return 0.0
    lo, hi = open_region.lo[k], open_region.hi[k]
    if np.any(b > hi):
        return 0.0
    left = np.where(lo <= hull_lo, np.inf, a - lo)
    right = np.where(hi >= hull_hi, np.inf, hi - b)
    d = float(np.min(np.minimum(left, right)))
    if not d > 0:
        return 0.0
    return d


def maximal_separated_net(space: AhlforsSpace, support: IntervalUnion, sep: float) -> np.ndarray:
    """Greedy left-to-right maximal ``sep``-separated subset of the support.

    The support is ``support`` intersected with the ambient set.  Each new
    point is the smallest support point at distance ``>= sep`` from the last
    one, so consecutive points are at least ``sep`` apart and every support
    point lies within ``sep`` of the net.
    """
    if not sep > 0:
        raise ValueError("separation must be positive")
    if support.is_empty:
        raise ValueError("empty support")
    if isinstance(space, UnitInterval):
        return _net_lebesgue(support.clip(space.lo, space.hi), sep)
    out = []
    target = -np.inf
    for a, b in support:
        start = max(a, target)
        while start <= b:
            x = space.next_point(start)
            if x is None or x > b:
                break
            out.append(x)
            target = x + sep
            start = target
    if not out:
        raise ValueError("support does not meet the ambient set")
    return np.asarray(out)


def _net_lebesgue(support: IntervalUnion, sep: float) -> np.ndarray:
    if support.is_empty:
        raise ValueError("support does not meet the ambient set")
    parts = []
    target = -np.inf
    for a, b in support:
        start = max(a, target)
        if start > b:
            continue
        n = int(math.floor((b - start) / sep)) + 2
        pts = start + sep * np.arange(n)
        pts = pts[pts <= b]
        parts.append(pts)
        target = pts[-1] + sep
    return np.concatenate(parts)


def nearest_net_point(x, net) -> float:
    """Net point closest to ``x``; ties go to the lowest index."""
    net = np.asarray(net, dtype=float)
    if net.size == 0:
        raise ValueError("empty net")
    return float(net[int(np.argmin(np.abs(net - x)))])


def voronoi_edges(net: np.ndarray) -> np.ndarray:
    """Cell boundaries of a sorted 1-D net: ``-inf``, the mid-gaps, ``+inf``."""
    net = np.asarray(net, dtype=float)
    return np.concatenate([[-np.inf], 0.5 * (net[:-1] + net[1:]), [np.inf]])
