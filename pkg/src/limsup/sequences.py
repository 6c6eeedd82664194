"""Ball sequences ``(B_i)`` with radii tending to zero.

Indices are 1-based positions in the enumeration.  Rational and b-adic
families enumerate by level (denominator ``q`` or exponent ``k``) and then
numerator, so the index of every ball is available in closed form and local
windows can be listed without materialising the whole prefix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import AhlforsSpace, Ball, Balls, UnitInterval

_BLOCK = 4096


class BallSequence:
    """Common interface; subclasses implement the enumeration."""

    kind = "abstract"

    def generate(self, i_max: int) -> Balls:
        raise NotImplementedError

    def balls_meeting(self, a: float, b: float, index_min: int = 1, index_max: int | None = None) -> Balls:
        """Balls with index in ``[index_min, index_max]`` meeting the open interval ``(a, b)``."""
        if index_max is None:
            raise ValueError("index_max is required for local queries")
        balls = self.generate(index_max)
        keep = (balls.indices >= index_min) & (balls.lo < b) & (balls.hi > a)
        return balls.take(keep)

    def radius_profile(self, i_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Run-length encoding ``(radii, counts)`` of the first ``i_max`` radii."""
        r = self.generate(i_max).radii
        return r, np.ones(r.size, dtype=np.int64)

    def first_index_with_radius_at_most(self, rho: float, i_max: int) -> int | None:
        """Smallest ``N`` with every radius of index ``N..i_max`` at most ``rho``."""
        r = self.generate(i_max).radii
        bad = np.nonzero(r > rho)[0]
        n = int(bad[-1]) + 2 if bad.size else 1
        return n if n <= i_max else None

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class RationalSequence(BallSequence):
    """Balls ``B(p/q, q**-tau)`` for ``0 <= p <= q``, by increasing ``q`` then ``p``.

    Fractions are not reduced, so ``1/2`` and ``2/4`` both appear.
    """

    tau: float
    kind = "rational"

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError("rational sequences need tau > 1")

    @staticmethod
    def first_index(q):
        """Index of ``0/q``."""
        q = np.asarray(q, dtype=np.int64)
        return (q - 1) * (q + 2) // 2 + 1

    @staticmethod
    def count(Q: int) -> int:
        """Number of balls with denominator ``<= Q``."""
        return Q * (Q + 3) // 2

    @classmethod
    def denominator_of(cls, i: int) -> int:
        if i < 1:
            raise ValueError("indices start at 1")
        q = max(1, int(math.isqrt(2 * i)) - 1)
        while cls.first_index(q + 1) <= i:
            q += 1
        while cls.first_index(q) > i:
            q -= 1
        return q

    def _block(self, q_lo: int, q_hi: int, a: float, b: float, index_min: int, index_max: int) -> Balls:
        qs = np.arange(q_lo, q_hi + 1, dtype=np.int64)
        if qs.size == 0:
            return Balls.empty()
        r = qs.astype(float) ** -self.tau
        if math.isinf(a) and math.isinf(b):
            p_lo = np.zeros_like(qs)
            p_hi = qs.copy()
        else:
            p_lo = np.clip(np.floor((a - r) * qs).astype(np.int64) - 1, 0, qs)
            p_hi = np.clip(np.ceil((b + r) * qs).astype(np.int64) + 1, 0, qs)
        n = np.maximum(p_hi - p_lo + 1, 0)
        total = int(n.sum())
        if total == 0:
            return Balls.empty()
        q_rep = np.repeat(qs, n)
        offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
        p = np.repeat(p_lo, n) + offs
        radii = np.repeat(r, n)
        centers = p / q_rep
        idx = self.first_index(q_rep) + p
        keep = (idx >= index_min) & (idx <= index_max)
        if not (math.isinf(a) and math.isinf(b)):
            keep &= (centers - radii < b) & (centers + radii > a)
        return Balls(centers[keep], radii[keep], idx[keep])

    def generate(self, i_max: int) -> Balls:
        if i_max < 1:
            raise ValueError("i_max must be >= 1")
        return self._block(1, self.denominator_of(i_max), -math.inf, math.inf, 1, i_max)

    def balls_meeting(self, a, b, index_min=1, index_max=None):
        if index_max is None:
            raise ValueError("index_max is required for local queries")
        if index_min > index_max:
            return Balls.empty()
        q0, q1 = self.denominator_of(max(index_min, 1)), self.denominator_of(index_max)
        parts = []
        step = max(1, 2_000_000 // max(1, int((b - a) * q1) + 2))
        for lo in range(q0, q1 + 1, step):
            parts.append(self._block(lo, min(lo + step - 1, q1), a, b, index_min, index_max))
        return Balls.concat(parts)

    def radius_profile(self, i_max: int):
        Q = self.denominator_of(i_max)
        qs = np.arange(1, Q + 1, dtype=np.int64)
        counts = qs + 1
        counts[-1] = i_max - self.first_index(Q) + 1
        return qs.astype(float) ** -self.tau, counts

    def first_index_with_radius_at_most(self, rho: float, i_max: int) -> int | None:
        # radii decrease with q
        q = max(1, math.ceil(rho ** (-1.0 / self.tau) - 1e-9))
        while q > 1 and (q - 1) ** -self.tau <= rho:
            q -= 1
        while q ** -self.tau > rho:
            q += 1
        n = int(self.first_index(q))
        return n if n <= i_max else None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "tau": self.tau}


@dataclass(frozen=True)
class BAdicSequence(BallSequence):
    """Balls ``B(p/b**k, b**(-k*tau))`` for ``k >= 0`` and ``0 <= p <= b**k``."""

    base: int
    tau: float
    kind = "badic"

    def __post_init__(self):
        if self.base < 2:
            raise ValueError("base must be >= 2")
        if not self.tau > 1:
            raise ValueError("b-adic sequences need tau > 1")

    def first_index(self, k: int) -> int:
        b = self.base
        return (b**k - 1) // (b - 1) + k + 1

    def level_of(self, i: int) -> int:
        k = 0
        while self.first_index(k + 1) <= i:
            k += 1
        return k

    def _level(self, k, a, b, index_min, index_max) -> Balls:
        bk = self.base**k
        r = float(bk) ** -self.tau
        if math.isinf(a):
            p = np.arange(0, bk + 1, dtype=np.int64)
        else:
            p = np.arange(max(0, math.floor((a - r) * bk) - 1), min(bk, math.ceil((b + r) * bk) + 1) + 1, dtype=np.int64)
        idx = self.first_index(k) + p
        centers = p / bk
        keep = (idx >= index_min) & (idx <= index_max)
        if not math.isinf(a):
            keep &= (centers - r < b) & (centers + r > a)
        return Balls(centers[keep], np.full(int(keep.sum()), r), idx[keep])

    def generate(self, i_max: int) -> Balls:
        if i_max < 1:
            raise ValueError("i_max must be >= 1")
        return Balls.concat(self._level(k, -math.inf, math.inf, 1, i_max) for k in range(self.level_of(i_max) + 1))

    def balls_meeting(self, a, b, index_min=1, index_max=None):
        if index_max is None:
            raise ValueError("index_max is required for local queries")
        k0, k1 = self.level_of(max(index_min, 1)), self.level_of(index_max)
        return Balls.concat(self._level(k, a, b, index_min, index_max) for k in range(k0, k1 + 1))

    def radius_profile(self, i_max: int):
        K = self.level_of(i_max)
        ks = np.arange(K + 1)
        counts = np.array([self.base**k + 1 for k in ks], dtype=np.int64)
        counts[-1] = i_max - self.first_index(K) + 1
        return np.array([float(self.base**k) ** -self.tau for k in ks]), counts

    def first_index_with_radius_at_most(self, rho: float, i_max: int) -> int | None:
        k = 0
        while float(self.base**k) ** -self.tau > rho:
            k += 1
        n = self.first_index(k)
        return n if n <= i_max else None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "base": self.base, "tau": self.tau}


@dataclass(frozen=True)
class RandomSequence(BallSequence):
    """Centres drawn from the space's natural measure, ``rad(B_i) = i**(-1/delta) / 2``.

    Centres come in blocks of 4096, block ``j`` drawn from a generator keyed
    by ``(seed, j)``, so any prefix is reproducible on its own.
    """

    seed: int
    space: AhlforsSpace = field(default_factory=UnitInterval)
    kind = "random"

    def _centers(self, i_max: int) -> np.ndarray:
        n_blocks = -(-i_max // _BLOCK)
        parts = [self.space.sample(np.random.default_rng([self.seed, j]), _BLOCK) for j in range(n_blocks)]
        return np.concatenate(parts)[:i_max]

    def generate(self, i_max: int) -> Balls:
        if i_max < 1:
            raise ValueError("i_max must be >= 1")
        i = np.arange(1, i_max + 1)
        radii = 0.5 * (1.0 / i) ** (1.0 / self.space.delta)
        return Balls(self._centers(i_max), radii, i)

    def first_index_with_radius_at_most(self, rho: float, i_max: int) -> int | None:
        n = max(1, math.ceil((2.0 * rho) ** -self.space.delta - 1e-9))
        while n > 1 and 0.5 * (n - 1) ** (-1.0 / self.space.delta) <= rho:
            n -= 1
        while 0.5 * n ** (-1.0 / self.space.delta) > rho:
            n += 1
        return n if n <= i_max else None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "space": self.space.kind}


@dataclass(frozen=True)
class ExplicitSequence(BallSequence):
    balls: tuple[Ball, ...]
    kind = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if not self.balls:
            raise ValueError("explicit sequence needs at least one ball")

    def generate(self, i_max: int) -> Balls:
        if i_max < 1:
            raise ValueError("i_max must be >= 1")
        return Balls.from_list(list(self.balls[:i_max]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "balls": [[b.center, b.radius] for b in self.balls]}


def generate(seq: BallSequence, i_max: int) -> Balls:
    return seq.generate(i_max)


class TailRestriction(NamedTuple):
    balls: Balls
    satisfiable: bool


def restrict_to(balls: Balls, N: int, B0: Ball) -> TailRestriction:
    """Balls of index ``>= N`` that meet ``B0``; returned whole, not clipped.

    ``satisfiable`` is False when nothing is left, i.e. no measure supported
    on the tail inside ``B0`` can exist at this ``N``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    keep = (balls.indices >= N) & (np.abs(balls.centers - B0.center) < balls.radii + B0.radius)
    out = balls.take(keep)
    return TailRestriction(out, len(out) > 0)


def restrict_to_space(balls: Balls, space: AhlforsSpace) -> Balls:
    """Keep the balls whose centre lies in the ambient set; indices unchanged."""
    keep = np.array([space.contains(c) for c in balls.centers.tolist()], dtype=bool)
    return balls.take(keep)


@dataclass(frozen=True)
class RestrictedSequence(BallSequence):
    """A sequence with balls whose centre misses the ambient set removed.

    Indices are those of the parent sequence.
    """

    parent: BallSequence
    space: AhlforsSpace

    @property
    def kind(self):
        return f"{self.parent.kind}|{self.space.kind}"

    def generate(self, i_max: int) -> Balls:
        return restrict_to_space(self.parent.generate(i_max), self.space)

    def balls_meeting(self, a, b, index_min=1, index_max=None):
        return restrict_to_space(self.parent.balls_meeting(a, b, index_min, index_max), self.space)

    def radius_profile(self, i_max: int):
        r = self.generate(i_max).radii
        return r, np.ones(r.size, dtype=np.int64)

    def first_index_with_radius_at_most(self, rho, i_max):
        return self.parent.first_index_with_radius_at_most(rho, i_max)

    def to_dict(self) -> dict:
        return {"kind": "restricted", "parent": self.parent.to_dict(), "space": self.space.kind}


def make_sequence(spec: dict, space: AhlforsSpace | None = None) -> BallSequence:
    """Build a sequence from a config mapping such as ``{"kind": "rational", "tau": 3}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "rational":
        seq: BallSequence = RationalSequence(float(spec["tau"]))
    elif kind == "badic":
        seq = BAdicSequence(int(spec["base"]), float(spec["tau"]))
    elif kind == "random":
        seq = RandomSequence(int(spec["seed"]), space or UnitInterval())
    elif kind == "explicit":
        seq = ExplicitSequence(tuple(Ball(float(c), float(r)) for c, r in spec["balls"]))
    else:
        raise ValueError(f"unknown sequence kind {kind!r}")
    if spec.get("restrict_to_space") and space is not None:
        seq = RestrictedSequence(seq, space)
    return seq
