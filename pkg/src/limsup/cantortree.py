"""Recursive Cantor-type construction of a measure on a limsup set.

Level ``n`` of the tree is a family of disjoint balls ``B_w`` with masses
``p_w`` summing to one.  A node is expanded by building the local measure
``mu(B_w, n + 1)`` on the tail of the sequence, choosing a radius ``rho_w``,
taking a maximal ``4 rho_w``-separated net of the support and giving each net
point the local mass of its Voronoi cell.  Levels are stored as flat arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .covering import greedy_select
from .dimfn import DimensionFunction, InvalidDimensionFunction, cantelli_upper_check, check_dimension_function
from .geometry import (
    AhlforsSpace,
    Ball,
    IntervalUnion,
    UnitInterval,
    distance_to_complement,
    maximal_separated_net,
    voronoi_edges,
)
from .localmeasure import RadiiTooLarge, SelectionFailed, WeightedBallMeasure, build_local_measure
from .sequences import BallSequence

#: atoms are shrunk to this fraction of their ball so the support stays off the tail boundary
DEFAULT_THETA = 1.0 / 3.0


class TreeBuildError(RuntimeError):
    """A node could not be expanded; ``tree`` holds the levels built so far."""

    def __init__(self, message: str, word: tuple, tree: "CantorTree | None" = None):
        super().__init__(f"{message} (node {word_str(word)})")
        self.word = word
        self.tree = tree


def word_str(word) -> str:
    return "()" if not word else ".".join(str(a) for a in word)


def max_feasible_rho(f: DimensionFunction, delta: float, C: float, diam: float, rtol: float = 1e-12) -> float:
    """Largest ``rho <= diam`` with ``(rho / diam)**delta <= f(rho) / C``.

    ``f(rho) / rho**delta`` is non-increasing, so the feasible radii form an
    interval ``(0, rho*]``; ``rho*`` is found by bisection in log space and
    then nudged down until the inequality holds as evaluated.
    """
    if not diam > 0:
        raise ValueError("diam must be positive")

    def g(r):
        return float(f.log(r)) - math.log(C) - delta * math.log(r / diam)

    if g(diam) >= 0:
        return diam
    lo = diam
    while g(lo) < 0:
        lo *= 1e-3
        if lo < 1e-300:
            raise ValueError("no feasible radius: f/C never exceeds (r/diam)^delta")
    hi = lo * 1e3
    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        if g(mid) >= 0:
            lo = mid
        else:
            hi = mid
    while g(lo) < 0:
        lo = math.nextafter(lo, 0.0)
    return lo


def hull_diam(ball: Ball, space: AhlforsSpace) -> float:
    """Diameter of ``ball`` within the ambient hull."""
    return min(ball.hi, space.hi) - max(ball.lo, space.lo)


def rho_feasible(rho: float, f: DimensionFunction, delta: float, C: float, diam: float) -> bool:
    """Direct evaluation of ``(rho/diam)**delta <= f(rho)/C``."""
    return (rho / diam) ** delta <= float(f(rho)) / C


def choose_rho(
    mu: WeightedBallMeasure | IntervalUnion,
    B_omega: Ball,
    tail_region: IntervalUnion,
    f: DimensionFunction,
    delta: float,
    C: float,
    space: AhlforsSpace | None = None,
) -> tuple[float, float]:
    """Return ``(rho, d)`` with ``rho = min(d / 2, rho*)``.

    ``d`` is the distance from the support of ``mu`` to the complement of
    ``tail_region`` (already intersected with ``B_omega``).
    """
    support = mu.support if isinstance(mu, WeightedBallMeasure) else mu
    d = distance_to_complement(support, tail_region, space)
    if not d > 0:
        raise ValueError("support touches boundary")
    rho_star = max_feasible_rho(f, delta, C, hull_diam(B_omega, space or UnitInterval()))
    return min(0.5 * d, rho_star), d


@dataclass
class Level:
    """Nodes of one level; index ``k`` is a node, ``parent`` points into the previous level."""

    centers: np.ndarray
    radii: np.ndarray
    masses: np.ndarray
    parent: np.ndarray
    child_no: np.ndarray  # 1-based position among siblings
    # filled when the level is expanded
    rho: np.ndarray | None = None
    dist: np.ndarray | None = None
    n_children: np.ndarray | None = None
    n_atoms: np.ndarray | None = None
    N_used: np.ndarray | None = None

    def __len__(self) -> int:
        return self.centers.size

    @property
    def lo(self):
        return self.centers - self.radii

    @property
    def hi(self):
        return self.centers + self.radii


@dataclass
class CantorTree:
    levels: list
    f: DimensionFunction
    delta: float
    C: float
    root: Ball
    theta: float
    i_max: int
    sequence: dict = field(default_factory=dict)
    space: AhlforsSpace = field(default_factory=UnitInterval)
    failure: str | None = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def leaves(self) -> Level:
        return self.levels[-1]

    def word(self, level: int, k: int) -> tuple:
        out = []
        while level > 0:
            L = self.levels[level]
            out.append(int(L.child_no[k]))
            k = int(L.parent[k])
            level -= 1
        return tuple(reversed(out))

    def level_sums(self) -> list[float]:
        return [float(math.fsum(L.masses.tolist())) for L in self.levels]

    def diagnostics(self) -> dict:
        out = []
        for n, L in enumerate(self.levels):
            row = {"level": n, "nodes": len(L), "mass": float(math.fsum(L.masses.tolist()))}
            row["radius_min"] = float(L.radii.min())
            row["radius_max"] = float(L.radii.max())
            if L.rho is not None:
                row["rho_min"] = float(L.rho.min())
                row["rho_max"] = float(L.rho.max())
                row["branching_min"] = int(L.n_children.min())
                row["branching_max"] = int(L.n_children.max())
            out.append(row)
        return {"depth": self.depth, "C": self.C, "theta": self.theta, "i_max": self.i_max, "levels": out, "failure": self.failure}

    def dump(self) -> str:
        """One line per node: level, word, centre, radius, mass, rho, children."""
        lines = ["# level word center radius mass rho n_children"]
        for n, L in enumerate(self.levels):
            for k in range(len(L)):
                rho = "-" if L.rho is None else f"{L.rho[k]:.17g}"
                kids = "-" if L.n_children is None else str(int(L.n_children[k]))
                lines.append(f"{n} {word_str(self.word(n, k))} {L.centers[k]:.17g} {L.radii[k]:.17g} {L.masses[k]:.17g} {rho} {kids}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class NodeExpansion:
    mu: WeightedBallMeasure
    rho: float
    dist: float
    net: np.ndarray
    masses: np.ndarray  # local masses of the Voronoi cells, summing to 1


def build_level(
    node: Ball,
    level: int,
    sequence: BallSequence,
    f: DimensionFunction,
    delta: float,
    C: float,
    i_max: int,
    space: AhlforsSpace | None = None,
    theta: float = DEFAULT_THETA,
) -> NodeExpansion:
    """Expand one node at depth ``level``; the tail cutoff is ``N = level + 1``."""
    space = space or UnitInterval()
    N = level + 1
    balls = sequence.balls_meeting(node.lo, node.hi, N, i_max)
    if len(balls) == 0:
        raise RadiiTooLarge("no tail balls meet this node")
    mu = build_local_measure(balls, f, delta, C, node, N, space, theta=theta)
    tail = IntervalUnion(balls.lo, balls.hi).clip(node.lo, node.hi)
    rho, d = choose_rho(mu, node, tail, f, delta, C, space)
    net = maximal_separated_net(space, mu.support, 4.0 * rho)
    cum = mu.cdf(voronoi_edges(net)[1:-1])
    edges = np.concatenate([[0.0], np.atleast_1d(cum), [1.0]])
    return NodeExpansion(mu, rho, d, net, np.diff(edges))


def build_tree(
    sequence: BallSequence,
    f: DimensionFunction,
    delta: float,
    C: float,
    depth: int,
    root_ball: Ball,
    i_max: int,
    space: AhlforsSpace | None = None,
    theta: float = DEFAULT_THETA,
    max_nodes: int = 200_000,
    raise_on_failure: bool = True,
) -> CantorTree:
    """Build the tree level by level down to ``depth``.

    On failure a :class:`TreeBuildError` carrying the partial tree is raised,
    unless ``raise_on_failure`` is False, in which case the partial tree is
    returned with ``failure`` set.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    space = space or UnitInterval()
    root = Level(
        centers=np.array([root_ball.center]),
        radii=np.array([root_ball.radius]),
        masses=np.array([1.0]),
        parent=np.array([-1]),
        child_no=np.array([0]),
    )
    tree = CantorTree([root], f, delta, C, root_ball, theta, i_max, sequence.to_dict(), space)
    for n in range(depth):
        L = tree.levels[-1]
        rho = np.empty(len(L))
        dist = np.empty(len(L))
        nkid = np.empty(len(L), dtype=np.int64)
        natom = np.empty(len(L), dtype=np.int64)
        nused = np.empty(len(L), dtype=np.int64)
        parts_c, parts_m, parts_p, parts_a, parts_r = [], [], [], [], []
        total = 0
        for k in range(len(L)):
            node = Ball(float(L.centers[k]), float(L.radii[k]))
            try:
                ex = build_level(node, n, sequence, f, delta, C, i_max, space, theta)
            except (RadiiTooLarge, SelectionFailed, ValueError) as exc:
                return _fail(tree, f"level {n}: {exc}", tree.word(n, k), raise_on_failure)
            rho[k], dist[k] = ex.rho, ex.dist
            nkid[k], natom[k], nused[k] = ex.net.size, len(ex.mu), ex.mu.N
            total += ex.net.size
            if total > max_nodes:
                return _fail(tree, f"level {n + 1} exceeds the node budget of {max_nodes}", tree.word(n, k), raise_on_failure)
            parts_c.append(ex.net)
            parts_m.append(L.masses[k] * ex.masses)
            parts_p.append(np.full(ex.net.size, k))
            parts_a.append(np.arange(1, ex.net.size + 1))
            parts_r.append(np.full(ex.net.size, ex.rho))
        L.rho, L.dist, L.n_children, L.n_atoms, L.N_used = rho, dist, nkid, natom, nused
        tree.levels.append(
            Level(
                centers=np.concatenate(parts_c),
                radii=np.concatenate(parts_r),
                masses=np.concatenate(parts_m),
                parent=np.concatenate(parts_p),
                child_no=np.concatenate(parts_a),
            )
        )
    return tree


def _fail(tree: CantorTree, msg: str, word: tuple, raise_on_failure: bool) -> CantorTree:
    tree.failure = f"{msg} (node {word_str(word)})"
    if raise_on_failure:
        raise TreeBuildError(msg, word, tree)
    return tree


def query_tree(tree: CantorTree, B: Ball, level: int | None = None) -> tuple[float, float]:
    """Bracket ``[lower, upper]`` for the limit measure of the open ball ``B``.

    ``lower`` sums the masses of nodes at ``level`` (default: deepest) lying
    inside ``B``, ``upper`` those meeting ``B``.
    """
    L = tree.levels[-1 if level is None else level]
    lower, upper = _bracket(L, np.array([B.lo]), np.array([B.hi]))
    return float(lower[0]), float(upper[0])


def _prefix(L: Level):
    order = np.argsort(L.centers, kind="stable")
    c, r = L.centers[order], L.radii[order]
    cm = np.concatenate([[0.0], np.cumsum(L.masses[order])])
    return c - r, c + r, cm


def _bracket(L: Level, a: np.ndarray, b: np.ndarray):
    """Vectorised brackets; node balls of one level are disjoint, so both are contiguous ranges."""
    lo, hi, cm = _prefix(L)
    # meeting: hi > a and lo < b
    m0 = np.searchsorted(hi, a, side="right")
    m1 = np.searchsorted(lo, b, side="left")
    upper = np.where(m1 > m0, cm[np.maximum(m1, m0)] - cm[m0], 0.0)
    # inside: lo >= a and hi <= b
    i0 = np.searchsorted(lo, a, side="left")
    i1 = np.searchsorted(hi, b, side="right")
    lower = np.where(i1 > i0, cm[np.maximum(i1, i0)] - cm[i0], 0.0)
    return lower, upper


# ---------------------------------------------------------------------------
# invariants


def check_tree_invariants(tree: CantorTree, sequence: BallSequence, mass_tol: float = 1e-9) -> dict:
    """Recheck mass conservation, disjointness, radius feasibility and containment."""
    f, delta, C, space = tree.f, tree.delta, tree.C, tree.space
    worst_mass = 0.0
    disjoint_viol = 0
    sep_viol = 0
    feas_viol = 0
    contain_viol = 0
    for n in range(tree.depth):
        P, Q = tree.levels[n], tree.levels[n + 1]
        sums = np.bincount(Q.parent, weights=Q.masses, minlength=len(P))
        worst_mass = max(worst_mass, float(np.max(np.abs(sums - P.masses))))
        by_parent = np.argsort(Q.parent, kind="stable")
        starts = np.searchsorted(Q.parent[by_parent], np.arange(len(P) + 1))
        for k in range(len(P)):
            c = np.sort(Q.centers[by_parent[starts[k] : starts[k + 1]]])
            rho = float(P.rho[k])
            if c.size > 1:
                disjoint_viol += int(np.sum(c[1:] - rho < c[:-1] + rho))
                sep_viol += int(np.sum((c[1:] - rho) - (c[:-1] + rho) < 2 * rho * (1 - 1e-9)))
            node = Ball(float(P.centers[k]), float(P.radii[k]))
            if not (rho < P.dist[k] and rho_feasible(rho, f, delta, C, hull_diam(node, space))):
                feas_viol += 1
            tail = sequence.balls_meeting(node.lo, node.hi, n + 1, tree.i_max)
            lo_n, hi_n = max(node.lo, space.lo), min(node.hi, space.hi)
            region = IntervalUnion(tail.lo, tail.hi).clip(lo_n, hi_n)
            for x in c.tolist():
                if not region.contains_interval(max(x - rho, lo_n), min(x + rho, hi_n)):
                    contain_viol += 1
    return {
        "mass_error": worst_mass,
        "mass_ok": worst_mass <= mass_tol,
        "level_sums": tree.level_sums(),
        "disjoint_violations": disjoint_viol,
        "separation_violations": sep_viol,
        "feasibility_violations": feas_viol,
        "containment_violations": contain_viol,
        "ok": worst_mass <= mass_tol and disjoint_viol == 0 and feas_viol == 0 and contain_viol == 0,
    }


# ---------------------------------------------------------------------------
# mass distribution


@dataclass(frozen=True)
class MDPResult:
    c_hat: float
    lower_bound: float
    worst_ball: Ball
    rho_range: tuple
    n_balls: int

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "lower_bound": self.lower_bound,
            "worst_ball": [self.worst_ball.center, self.worst_ball.radius],
            "rho_range": list(self.rho_range),
            "n_balls": self.n_balls,
        }


def mass_distribution_bound(tree: CantorTree, f: DimensionFunction | None = None, C: float | None = None, n_samples: int = 10_000, seed: int = 0, stream: int = 0) -> MDPResult:
    """Estimate ``c`` in ``mu(B(x, rho)) <= c f(rho)`` and return ``1/c``.

    Radii range from the leaf radius up to the root's ``rho``; ``mu`` is
    replaced by the upper bracket at the deepest level.  Besides random balls
    (centres from the leaves by mass and uniform in the root) the test
    includes balls centred at leaves whose radius sits at each level's radius.
    ``C`` is accepted for symmetry with the construction and not used: the
    bound is on ``f`` itself.
    """
    f = f or tree.f
    L = tree.leaves
    if tree.levels[0].rho is None:
        raise ValueError("tree has no expanded level")
    r_hi = float(tree.levels[0].rho[0])
    r_lo = float(L.radii.min())
    rng = np.random.default_rng([seed, stream])
    n_leaf = n_samples // 2
    pick = rng.choice(len(L), size=n_leaf, p=L.masses / L.masses.sum())
    xs = np.concatenate([L.centers[pick], rng.uniform(tree.root.lo, tree.root.hi, n_samples - n_leaf)])
    rho = np.exp(rng.uniform(math.log(r_lo), math.log(max(r_hi, r_lo)), xs.size))

    thresholds = sorted({float(r) for lev in tree.levels[1:] for r in np.unique(lev.radii)} | {r_hi})
    adv_x, adv_r = [], []
    for t in thresholds:
        for factor in (1.0, 2.0, 4.0):
            r = min(t * factor, r_hi)
            if r >= r_lo:
                adv_x.append(L.centers)
                adv_r.append(np.full(len(L), r))
    xs = np.concatenate([xs] + adv_x)
    rho = np.concatenate([rho] + adv_r)
    _, upper = _bracket(L, xs - rho, xs + rho)
    ratio = upper / f(rho)
    k = int(np.argmax(ratio))
    c_hat = float(ratio[k])
    return MDPResult(c_hat, 1.0 / c_hat if c_hat > 0 else math.inf, Ball(float(xs[k]), float(rho[k])), (r_lo, r_hi), int(xs.size))


# ---------------------------------------------------------------------------
# dimension search


@dataclass
class BisectResult:
    s_star: float
    bracket: tuple
    history: list
    tol: float

    def to_dict(self) -> dict:
        return {"s_star": self.s_star, "bracket": list(self.bracket), "tol": self.tol, "history": self.history}


class BracketError(ValueError):
    pass


def dimension_bisect(
    sequence: BallSequence,
    delta: float,
    C: float,
    depth: int,
    s_range: tuple[float, float],
    tol: float = 0.01,
    i_max: int | None = None,
    B0: Ball = Ball(0.5, 0.5),
    space: AhlforsSpace | None = None,
    ceiling: float = 1e3,
    n_samples: int = 2000,
    seed: int = 0,
    tail_terms: int | None = None,
) -> BisectResult:
    """Locate the transition exponent ``s*`` for ``f(r) = r**s``.

    ``s`` counts as a success when ``r**s`` is a valid dimension function
    for ``delta``, the greedy selection fills half of ``B0`` at cutoff 1,
    and, for ``depth >= 1``, the tree builds and its mass-distribution
    constant stays below ``ceiling``.  The bracket must have a success at
    its lower end, and a failure at its upper end whose Cantelli series
    looks convergent there (dyadic block sums shrinking).
    """
    space = space or UnitInterval()
    if i_max is None:
        raise ValueError("i_max is required")
    balls = sequence.generate(i_max)
    history = []

    def success(s: float) -> bool:
        f = DimensionFunction.power(s)
        try:
            ok = check_dimension_function(f, delta).valid
        except InvalidDimensionFunction:
            ok = False
        why = "invalid f"
        if ok:
            sel = greedy_select(balls, f, delta, C, B0, 1, space, early_exit=True)
            ok = sel.success
            why = f"greedy {sel.fraction:.4f}"
        if ok and depth >= 1:
            try:
                tree = build_tree(sequence, f, delta, C, depth, B0, i_max, space)
                m = mass_distribution_bound(tree, f, C, n_samples, seed)
                ok = m.c_hat <= ceiling
                why = f"c_hat {m.c_hat:.4g}"
            except (TreeBuildError, ValueError) as exc:
                ok, why = False, f"tree: {exc}"
        history.append({"s": s, "success": ok, "why": why})
        return ok

    lo, hi = s_range
    if not lo < hi:
        raise BracketError("s_range must be increasing")
    if not success(lo):
        raise BracketError(f"s_range does not bracket the transition: s={lo} fails")
    if success(hi):
        raise BracketError(f"s_range does not bracket the transition: s={hi} succeeds")
    tails = cantelli_upper_check(DimensionFunction.power(hi), sequence, tail_terms or i_max)
    if not tails.condensation_ratio() < 1:
        raise BracketError(f"Cantelli series at s={hi} does not look convergent")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if success(mid):
            lo = mid
        else:
            hi = mid
    return BisectResult(0.5 * (lo + hi), (lo, hi), history, tol)


def tree_to_json(tree: CantorTree) -> str:
    return json.dumps(tree.diagnostics(), sort_keys=True)
