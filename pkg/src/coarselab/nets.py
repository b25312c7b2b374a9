"""Discretization pipeline: separated nets, approximating graphs, covering
estimates, approximating bundles from sampled metrics, and the Bowditch
path-family criterion.

Metrics on sampled spaces are exact rationals. Net selection is greedy in
ascending point-id order (determinism over generality); metric axioms are
validated exhaustively up to 200 points and by seeded sampling above, and
violations abort construction.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadPathFamily,
    DisconnectedNetGraph,
    InvalidParams,
    MetricAxiomViolation,
)
from .bundles import BundleSpec, GraphBundle, validate_bundle
from .graphs import MetricGraph, geodesic

__all__ = [
    "SampledSpace",
    "Net",
    "StronglyProperParams",
    "DistortionStats",
    "BowditchReport",
    "sampled_space",
    "line_sample",
    "scaled_graph_space",
    "separated_net",
    "net_graph",
    "qi_audit",
    "strongly_proper_estimate",
    "approx_bundle",
    "bowditch_check",
    "spaced_waypoint_family",
]

_EXHAUSTIVE_TRIANGLE_LIMIT = 200


@dataclass(frozen=True)
class SampledSpace:
    """Finite metric space with an exact rational distance matrix."""

    metric: tuple[tuple[Fraction, ...], ...]

    @property
    def point_count(self) -> int:
        return len(self.metric)

    def d(self, p: int, q: int) -> Fraction:
        return self.metric[p][q]


@dataclass(frozen=True)
class Net:
    members: tuple[int, ...]
    separation: Fraction
    covering_radius: Fraction


@dataclass(frozen=True)
class StronglyProperParams:
    """Covering table (R, r) -> N(R, r), made monotone by taking maxima over
    smaller R and larger r (an over-count still covers)."""

    table: tuple[tuple[Fraction, Fraction, int], ...]

    def lookup(self, radius: Fraction, r: Fraction) -> int:
        for rr, cr, n in self.table:
            if rr == radius and cr == r:
                return n
        raise KeyError((radius, r))


@dataclass(frozen=True)
class DistortionStats:
    multiplicative: Fraction | None
    additive: Fraction
    pairs_checked: int
    collapsed_pairs: int
    failed: bool


@dataclass(frozen=True)
class BowditchReport:
    condition1_max: int
    condition2_max: int
    smallest_pass: int
    requested: int
    passed: bool
    witness: tuple[int, int, int] | None


def sampled_space(metric: Sequence[Sequence[Fraction | int | str]], seed: int = 0) -> SampledSpace:
    """Build and validate a sampled space from a dense symmetric matrix."""
    m = len(metric)
    rows = []
    for i in range(m):
        if len(metric[i]) != m:
            raise InvalidParams("metric matrix is not square")
        rows.append(tuple(Fraction(x) for x in metric[i]))
    mat = tuple(rows)
    for i in range(m):
        if mat[i][i] != 0:
            raise MetricAxiomViolation(f"nonzero diagonal at {i}")
        for j in range(i + 1, m):
            if mat[i][j] != mat[j][i]:
                raise MetricAxiomViolation(f"asymmetric at ({i}, {j})")
            if mat[i][j] < 0:
                raise MetricAxiomViolation(f"negative distance at ({i}, {j})")
    if m <= _EXHAUSTIVE_TRIANGLE_LIMIT:
        triples = itertools.combinations(range(m), 3)
    else:
        rng = random.Random(seed)
        triples = (
            tuple(sorted(rng.sample(range(m), 3))) for _ in range(_EXHAUSTIVE_TRIANGLE_LIMIT**2)
        )
    for i, j, k in triples:
        dij, djk, dik = mat[i][j], mat[j][k], mat[i][k]
        if dij > djk + dik or djk > dij + dik or dik > dij + djk:
            raise MetricAxiomViolation(f"triangle inequality fails on ({i}, {j}, {k})")
    return SampledSpace(metric=mat)


def line_sample(count: int, spacing: Fraction | int | str) -> SampledSpace:
    s = Fraction(spacing)
    return SampledSpace(
        metric=tuple(
            tuple(abs(i - j) * s for j in range(count)) for i in range(count)
        )
    )


def scaled_graph_space(g: MetricGraph, scale: Fraction | int | str = 1) -> SampledSpace:
    """A graph's vertex set with its path metric scaled by a rational."""
    s = Fraction(scale)
    D = g.distance_matrix
    return SampledSpace(
        metric=tuple(
            tuple(Fraction(int(D[i, j])) * s for j in range(g.vertex_count))
            for i in range(g.vertex_count)
        )
    )


def separated_net(space: SampledSpace) -> Net:
    """Greedy maximal 1-separated subset, scanned in ascending point id.

    Maximality is re-verified: every excluded point lies within 1 of a
    member, so the covering radius is at most 1.
    """
    members: list[int] = []
    for p in range(space.point_count):
        if all(space.d(p, q) >= 1 for q in members):
            members.append(p)
    covering = Fraction(0)
    for p in range(space.point_count):
        near = min(space.d(p, q) for q in members)
        covering = max(covering, near)
    if covering > 1:
        raise MetricAxiomViolation("greedy net failed maximality, metric is inconsistent")
    return Net(members=tuple(members), separation=Fraction(1), covering_radius=covering)


def net_graph(net: Net, space: SampledSpace) -> tuple[MetricGraph, tuple[int, ...]]:
    """Graph on net members with edges at metric distance <= 3, plus the
    member-to-point correspondence for distortion audits."""
    k = len(net.members)
    adj: list[set[int]] = [set() for _ in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            if space.d(net.members[a], net.members[b]) <= 3:
                adj[a].add(b)
                adj[b].add(a)
    g = MetricGraph(
        adjacency=tuple(tuple(sorted(s)) for s in adj), meta={"kind": "net_graph"}
    )
    if k > 1 and (g.distance_row(0) < 0).any():
        raise DisconnectedNetGraph("net graph is not connected at edge scale 3")
    return g, net.members


def qi_audit(
    mapping: Sequence[int],
    g: MetricGraph,
    space: SampledSpace,
    pair_samples: int | None = None,
    seed: int = 0,
) -> DistortionStats:
    """Best two-sided multiplicative constant over vertex pairs.

    Pairs mapping to the same point are collapse failures: the
    multiplicative constant is unbounded (None) and the additive field
    records the largest collapsed graph distance.
    """
    n = g.vertex_count
    if len(mapping) != n:
        raise InvalidParams("mapping must cover every graph vertex")
    all_pairs = n * (n - 1) // 2
    if pair_samples is None or all_pairs <= pair_samples:
        pairs = itertools.combinations(range(n), 2)
    else:
        rng = random.Random(seed)
        pairs = (
            tuple(sorted(rng.sample(range(n), 2))) for _ in range(pair_samples)
        )
    mult = Fraction(1)
    additive = Fraction(0)
    collapsed = 0
    checked = 0
    for u, v in pairs:
        checked += 1
        dg = Fraction(g.distance(u, v))
        ds = space.d(mapping[u], mapping[v])
        if ds == 0:
            collapsed += 1
            additive = max(additive, dg)
            continue
        mult = max(mult, dg / ds, ds / dg)
    failed = collapsed > 0
    return DistortionStats(
        multiplicative=None if failed else mult,
        additive=additive,
        pairs_checked=checked,
        collapsed_pairs=collapsed,
        failed=failed,
    )


def _greedy_cover_count(space: SampledSpace, center: int, radius: Fraction, r: Fraction) -> int:
    ball = [p for p in range(space.point_count) if space.d(center, p) <= radius]
    uncovered = set(ball)
    count = 0
    # the ball's own center goes first so radius <= r gives exactly one ball
    order = [center] + [p for p in ball if p != center]
    for p in order:
        if not uncovered:
            break
        if p not in uncovered and p != center:
            continue
        count += 1
        uncovered -= {q for q in uncovered if space.d(p, q) <= r}
    return count


def strongly_proper_estimate(
    space: SampledSpace,
    radii: Sequence[Fraction | int | str],
    cover_radii: Sequence[Fraction | int | str],
) -> StronglyProperParams:
    """Greedy covering counts per (R, r) over all centers, with monotone
    repair so the table is non-decreasing in R and non-increasing in r."""
    if not radii or not cover_radii:
        raise InvalidParams("radius lists must be non-empty")
    rs = sorted({Fraction(x) for x in radii})
    crs = sorted({Fraction(x) for x in cover_radii})
    raw: dict[tuple[Fraction, Fraction], int] = {}
    for radius in rs:
        for r in crs:
            raw[(radius, r)] = max(
                _greedy_cover_count(space, c, radius, r) for c in range(space.point_count)
            )
    table = []
    for radius in rs:
        for r in crs:
            n = max(
                raw[(rr, cc)] for rr in rs if rr <= radius for cc in crs if cc >= r
            )
            table.append((radius, r, n))
    return StronglyProperParams(table=tuple(table))


def approx_bundle(
    base_space: SampledSpace,
    fiber_sampler: Callable[[int], SampledSpace],
    c: Fraction | int | str,
    total_metric: Callable[[int, int, int, int], Fraction] | None = None,
) -> GraphBundle:
    """Approximating bundle from sampled metrics.

    The base is netted to give the levels; each level's fiber space is
    netted and turned into a net graph (edges <= 3 in the fiber metric);
    cross edges join consecutive-level net points at total distance at
    most 6c + 3, then bundle validation runs.

    When fiber samplers share a point-id space and no total metric is
    supplied, the total distance between (p, j) and (q, j+1) defaults to
    the base gap plus the coarser fiber's distance min(d_j, d_j+1).
    """
    c = Fraction(c)
    if c < 0:
        raise InvalidParams("c must be >= 0")
    base_net = separated_net(base_space)
    n_levels = len(base_net.members)
    if n_levels < 2:
        raise InvalidParams("base sample nets to fewer than 2 levels")
    spaces = [fiber_sampler(j) for j in range(n_levels)]
    nets = [separated_net(s) for s in spaces]
    graphs = [net_graph(n, s)[0] for n, s in zip(nets, spaces)]

    def default_total(j: int, p: int, jj: int, q: int) -> Fraction:
        gap = base_space.d(base_net.members[j], base_net.members[jj])
        return gap + min(spaces[j].d(p, q), spaces[jj].d(p, q))

    tm = total_metric or default_total
    threshold = 6 * c + 3
    cross_edges = []
    for j in range(n_levels - 1):
        edges = []
        for a, p in enumerate(nets[j].members):
            for b, q in enumerate(nets[j + 1].members):
                if tm(j, p, j + 1, q) <= threshold:
                    edges.append((a, b))
        cross_edges.append(tuple(edges))
    spec = BundleSpec(
        fiber_sizes=tuple(len(n.members) for n in nets),
        fiber_edges=tuple(tuple(g.edges()) for g in graphs),
        cross_edges=tuple(cross_edges),
        meta={
            "kind": "approx_bundle",
            "c": str(c),
            "nets": tuple(n.members for n in nets),
            "base_net": base_net.members,
        },
    )
    return validate_bundle(spec)


# ---------------------------------------------------------------------------
# Bowditch criterion


def _family_paths(
    g: MetricGraph, path_family: Callable[[int, int], Sequence[int]]
) -> dict[tuple[int, int], tuple[int, ...]]:
    paths = {}
    n = g.vertex_count
    for u in range(n):
        for v in range(u, n):
            p = tuple(int(x) for x in path_family(u, v))
            if not p or p[0] != u or p[-1] != v:
                raise BadPathFamily(f"path for ({u}, {v}) has wrong endpoints")
            for a, b in zip(p, p[1:]):
                if b not in g.adjacency[a]:
                    raise BadPathFamily(f"path for ({u}, {v}) breaks at ({a}, {b})")
            paths[(u, v)] = p
    return paths


def bowditch_check(
    g: MetricGraph,
    path_family: Callable[[int, int], Sequence[int]],
    bound: int,
) -> BowditchReport:
    """Exhaustive check of the two path-family conditions: every side of
    every triple within D of the union of the other two, and adjacent-pair
    paths of diameter at most D. Reports the smallest passing D."""
    paths = _family_paths(g, path_family)
    D = g.distance_matrix

    def side(u: int, v: int) -> tuple[int, ...]:
        return paths[(min(u, v), max(u, v))]

    cond2 = 0
    for (u, v), p in paths.items():
        if g.distance(u, v) <= 1:
            verts = sorted(set(p))
            cond2 = max(cond2, int(D[np.ix_(verts, verts)].max()))
    cond1 = 0
    witness = None
    n = g.vertex_count
    for x, y, z in itertools.combinations(range(n), 3):
        for a, b, c_ in ((x, y, z), (y, z, x), (z, x, y)):
            own = sorted(set(side(a, b)))
            union = sorted(set(side(b, c_)) | set(side(c_, a)))
            worst = int(D[np.ix_(own, union)].min(axis=1).max())
            if worst > cond1:
                cond1 = worst
                witness = (a, b, c_)
    smallest = max(cond1, cond2)
    return BowditchReport(
        condition1_max=cond1,
        condition2_max=cond2,
        smallest_pass=smallest,
        requested=bound,
        passed=smallest <= bound,
        witness=witness if smallest > bound else None,
    )


def spaced_waypoint_family(
    base_fiber: MetricGraph, spacing: int
) -> Callable[[int, int], tuple[int, ...]]:
    """Path family for a shortcut fiber: waypoints along the canonical base
    geodesic at the given spacing (consecutive waypoints sit within one
    shortcut edge)."""
    if spacing < 1:
        raise InvalidParams("spacing must be >= 1")

    def family(u: int, v: int) -> tuple[int, ...]:
        if u == v:
            return (u,)
        verts = geodesic(base_fiber, u, v).vertices
        picks = list(verts[::spacing])
        if picks[-1] != verts[-1]:
            picks.append(verts[-1])
        return tuple(picks)

    return family
