"""Hyperbolicity estimation and quasigeodesic certification.

Conventions used throughout:

* The four-point delta is geodesic-choice-free and is the primary value.
  For a quadruple it equals (S1 - S2)/2 where S1 >= S2 >= S3 are the three
  pairwise distance sums; the scan is exact over all distinct quadruples.
  Graphs whose blocks are all cliques have delta = 0 (their metric is a
  tree metric), which gives an O(n + m) fast path; everything else goes
  through a compiled quadruple scan.
* All certified values are exact: half-integers are carried as Fractions
  (internally as doubled integers), never floats.
* Slim-triangle values are relative to the canonical geodesic family
  (BFS, lowest-id parent) unless exhaustive mode is requested.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DetourEndpointsMismatch,
    InvalidVertex,
    JunctionTooSharp,
    NoDetour,
    NotAPath,
    NotQuasigeodesic,
    TooLargeForExhaustive,
)
from .graphs import GeodesicPath, MetricGraph, all_geodesics, geodesic, hausdorff_distance

__all__ = [
    "HyperbolicityEstimate",
    "QuasiGeodesicCert",
    "ChainSpec",
    "CornerProductReport",
    "DetourReport",
    "gromov_product",
    "gromov_product2",
    "quadruple_delta",
    "delta_four_point",
    "delta_slim",
    "hyperbolicity_estimate",
    "fit_k",
    "check_k",
    "certify_path",
    "corner_product_check",
    "make_chain",
    "chain_certify",
    "detour_check",
    "sample_detours",
    "stability_audit",
]

_K_GRID = 1 << 20  # denominator for rounding irrational k requirements up

_EXHAUSTIVE_LIMIT = 40


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class HyperbolicityEstimate:
    delta_four_point: Fraction
    witness_quadruple: tuple[int, int, int, int]
    delta_slim_canonical: Fraction | None = None
    witness_triangle: tuple[int, int, int] | None = None


@dataclass(frozen=True)
class QuasiGeodesicCert:
    """Two-sided (k, k) certificate for a vertex path.

    k_fit is the smallest constant satisfying
        |s - t| / k - k <= d(path[s], path[t]) <= k |s - t| + k
    over all index pairs, rounded up to the 2**-20 grid when the exact
    optimum is irrational. Always re-verifiable by check_k.
    """

    path: tuple[int, ...]
    k_fit: Fraction
    hausdorff_to_geodesic: int
    legs_meet_threshold: bool | None = None
    leg_threshold: int | None = None


@dataclass(frozen=True)
class ChainSpec:
    anchors: tuple[int, ...]
    leg_lengths: tuple[int, ...]
    junction_products: tuple[Fraction, ...]


@dataclass(frozen=True)
class CornerProductReport:
    corner: int
    value: Fraction
    moreover_value: Fraction
    bound: Fraction
    passed: bool
    k: Fraction
    k_fit: Fraction
    delta: Fraction


@dataclass(frozen=True)
class DetourReport:
    n: int
    length: int
    bound: float
    passed: bool
    vacuous: bool


# ---------------------------------------------------------------------------
# Gromov products


def gromov_product2(g: MetricGraph, base: int, y: int, z: int) -> int:
    """Doubled Gromov product: d(base,y) + d(base,z) - d(y,z)."""
    row = g.distance_row(base)
    return int(row[y]) + int(row[z]) - g.distance(y, z)


def gromov_product(g: MetricGraph, base: int, y: int, z: int) -> Fraction:
    """(y, z) with respect to base: half the doubled product, exact."""
    return Fraction(gromov_product2(g, base, y, z), 2)


def quadruple_delta(g: MetricGraph, quad: Sequence[int]) -> Fraction:
    """Four-point defect of one quadruple: (S1 - S2)/2, clamped at 0."""
    a, b, c, d = quad
    for v in quad:
        g.check_vertex(v)
    s1 = g.distance(a, b) + g.distance(c, d)
    s2 = g.distance(a, c) + g.distance(b, d)
    s3 = g.distance(a, d) + g.distance(b, c)
    top = sorted((s1, s2, s3))
    return Fraction(max(0, top[2] - top[1]), 2)


# ---------------------------------------------------------------------------
# block-graph fast path: delta = 0 iff every biconnected block is a clique


def _is_block_graph(g: MetricGraph) -> bool:
    n = g.vertex_count
    if n <= 2:
        return True
    adj = g.adjacency
    disc = [0] * n
    low = [0] * n
    timer = 1
    edge_stack: list[tuple[int, int]] = []
    adjacent = [set(nb) for nb in adj]

    def clique_block(edges: list[tuple[int, int]]) -> bool:
        verts = set()
        for u, v in edges:
            verts.add(u)
            verts.add(v)
        k = len(verts)
        if len(edges) != k * (k - 1) // 2:
            return False
        return all(v in adjacent[u] for u, v in itertools.combinations(verts, 2))

    # iterative Tarjan; the graph is connected so one root suffices
    stack: list[tuple[int, int, int]] = [(0, -1, 0)]
    disc[0] = low[0] = timer
    timer += 1
    while stack:
        u, parent, idx = stack.pop()
        if idx < len(adj[u]):
            stack.append((u, parent, idx + 1))
            v = adj[u][idx]
            if v == parent:
                continue
            if disc[v] == 0:
                edge_stack.append((u, v))
                disc[v] = low[v] = timer
                timer += 1
                stack.append((v, u, 0))
            elif disc[v] < disc[u]:
                edge_stack.append((u, v))
                low[u] = min(low[u], disc[v])
        else:
            if parent >= 0:
                low[parent] = min(low[parent], low[u])
                if low[u] >= disc[parent]:
                    block: list[tuple[int, int]] = []
                    while edge_stack:
                        e = edge_stack.pop()
                        block.append(e)
                        if e == (parent, u):
                            break
                    if not clique_block(block):
                        return False
    return True


# ---------------------------------------------------------------------------
# compiled quadruple scan

_NUMBA_KERNELS: dict[str, object] = {}


def _get_kernels():
    if "scan" in _NUMBA_KERNELS:
        return _NUMBA_KERNELS["scan"], _NUMBA_KERNELS["witness"]
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def scan(D):  # pragma: no cover - compiled
        n = D.shape[0]
        per_a = np.zeros(n, dtype=np.int64)
        for a in prange(n - 3):
            Da = D[a]
            best = np.int64(0)
            for b in range(a + 1, n - 2):
                dab = np.int64(Da[b])
                Db = D[b]
                for c in range(b + 1, n - 1):
                    dac = np.int64(Da[c])
                    dbc = np.int64(Db[c])
                    Dc = D[c]
                    row_best = np.int64(0)
                    for d in range(c + 1, n):
                        s1 = dab + np.int64(Dc[d])
                        s2 = dac + np.int64(Db[d])
                        s3 = dbc + np.int64(Da[d])
                        mx2 = max(s1, s2)
                        top1 = max(s3, mx2)
                        top2 = max(min(s3, mx2), min(s1, s2))
                        val = top1 - top2
                        if val > row_best:
                            row_best = val
                    if row_best > best:
                        best = row_best
            per_a[a] = best
        return per_a

    @njit(cache=True)
    def witness(D, target):  # pragma: no cover - compiled
        n = D.shape[0]
        for a in range(n - 3):
            Da = D[a]
            for b in range(a + 1, n - 2):
                dab = np.int64(Da[b])
                Db = D[b]
                for c in range(b + 1, n - 1):
                    dac = np.int64(Da[c])
                    dbc = np.int64(Db[c])
                    Dc = D[c]
                    for d in range(c + 1, n):
                        s1 = dab + np.int64(Dc[d])
                        s2 = dac + np.int64(Db[d])
                        s3 = dbc + np.int64(Da[d])
                        mx2 = max(s1, s2)
                        top1 = max(s3, mx2)
                        top2 = max(min(s3, mx2), min(s1, s2))
                        if top1 - top2 >= target:
                            return a, b, c, d
        return 0, 1, 2, 3

    _NUMBA_KERNELS["scan"] = scan
    _NUMBA_KERNELS["witness"] = witness
    return scan, witness


def _delta4_python(D: np.ndarray) -> tuple[int, tuple[int, int, int, int]]:
    n = D.shape[0]
    best = 0
    quad = (0, 1, 2, 3) if n >= 4 else (0, 0, 0, 0)
    Dl = D.tolist()
    for a in range(n - 3):
        Da = Dl[a]
        for b in range(a + 1, n - 2):
            dab = Da[b]
            Db = Dl[b]
            for c in range(b + 1, n - 1):
                dac = Da[c]
                dbc = Db[c]
                Dc = Dl[c]
                for d in range(c + 1, n):
                    s1 = dab + Dc[d]
                    s2 = dac + Db[d]
                    s3 = dbc + Da[d]
                    top = sorted((s1, s2, s3))
                    val = top[2] - top[1]
                    if val > best:
                        best = val
                        quad = (a, b, c, d)
    return best, quad


def delta_four_point(g: MetricGraph) -> HyperbolicityEstimate:
    """Exact four-point delta with a witness quadruple.

    Block graphs (in particular trees) short-circuit to 0; otherwise the
    full distinct-quadruple scan runs (compiled when numba is available).
    The witness is the lexicographically first quadruple attaining the max.
    """
    n = g.vertex_count
    if n < 4 or _is_block_graph(g):
        quad = (0, min(1, n - 1), min(2, n - 1), min(3, n - 1))
        return HyperbolicityEstimate(delta_four_point=Fraction(0), witness_quadruple=quad)
    D = g.distance_matrix
    try:
        scan, witness = _get_kernels()
        D32 = np.ascontiguousarray(D, dtype=np.int32)
        best = int(scan(D32).max())
        quad = tuple(int(x) for x in witness(D32, best))
    except ImportError:
        best, quad = _delta4_python(D)
    return HyperbolicityEstimate(delta_four_point=Fraction(best, 2), witness_quadruple=quad)


# ---------------------------------------------------------------------------
# slim triangles


def _canonical_side(g: MetricGraph, u: int, v: int) -> tuple[int, ...]:
    if u <= v:
        return geodesic(g, u, v).vertices
    return geodesic(g, v, u).vertices


def _slimness(D: np.ndarray, sides: tuple[tuple[int, ...], ...]) -> int:
    worst = 0
    for i in range(3):
        own = list(sides[i])
        other = sorted(set(sides[(i + 1) % 3]) | set(sides[(i + 2) % 3]))
        sub = D[np.ix_(own, other)]
        worst = max(worst, int(sub.min(axis=1).max()))
    return worst


def delta_slim(g: MetricGraph, mode: str = "canonical") -> Fraction:
    """Slim-triangle constant over the canonical geodesic family, or over
    every geodesic choice in exhaustive mode (graphs up to 40 vertices)."""
    n = g.vertex_count
    D = g.distance_matrix
    if mode == "canonical":
        worst = 0
        for u, v, w in itertools.combinations(range(n), 3):
            sides = (
                _canonical_side(g, u, v),
                _canonical_side(g, v, w),
                _canonical_side(g, u, w),
            )
            worst = max(worst, _slimness(D, sides))
        return Fraction(worst)
    if mode == "exhaustive":
        if n > _EXHAUSTIVE_LIMIT:
            raise TooLargeForExhaustive(f"{n} vertices > {_EXHAUSTIVE_LIMIT}")
        geo_cache: dict[tuple[int, int], list[tuple[int, ...]]] = {}

        def geos(u: int, v: int) -> list[tuple[int, ...]]:
            key = (min(u, v), max(u, v))
            if key not in geo_cache:
                geo_cache[key] = all_geodesics(g, key[0], key[1])
            return geo_cache[key]

        worst = 0
        for u, v, w in itertools.combinations(range(n), 3):
            for s1 in geos(u, v):
                for s2 in geos(v, w):
                    for s3 in geos(u, w):
                        worst = max(worst, _slimness(D, (s1, s2, s3)))
        return Fraction(worst)
    raise ValueError(f"unknown mode {mode!r}")


def _slim_witness(g: MetricGraph) -> tuple[Fraction, tuple[int, int, int]]:
    n = g.vertex_count
    D = g.distance_matrix
    worst = 0
    tri = (0, min(1, n - 1), min(2, n - 1))
    for u, v, w in itertools.combinations(range(n), 3):
        sides = (
            _canonical_side(g, u, v),
            _canonical_side(g, v, w),
            _canonical_side(g, u, w),
        )
        s = _slimness(D, sides)
        if s > worst:
            worst = s
            tri = (u, v, w)
    return Fraction(worst), tri


def hyperbolicity_estimate(g: MetricGraph, with_slim: bool = True) -> HyperbolicityEstimate:
    est = delta_four_point(g)
    if not with_slim or g.vertex_count < 3:
        return est
    slim, tri = _slim_witness(g)
    return HyperbolicityEstimate(
        delta_four_point=est.delta_four_point,
        witness_quadruple=est.witness_quadruple,
        delta_slim_canonical=slim,
        witness_triangle=tri,
    )


# ---------------------------------------------------------------------------
# (k, k) fitting


def _ceil_sqrt(x: int) -> int:
    s = math.isqrt(x)
    return s if s * s == x else s + 1


def _lower_requirement(d: int, delta_idx: int) -> Fraction:
    """Smallest k with delta_idx / k - k <= d, as an exact Fraction
    (rounded up to the 2**-20 grid when the true root is irrational)."""
    disc = d * d + 4 * delta_idx
    s = math.isqrt(disc)
    if s * s == disc:
        return Fraction(s - d, 2)
    num = _ceil_sqrt(disc * _K_GRID * _K_GRID) - d * _K_GRID
    return Fraction(-(-num // 2), _K_GRID)


def fit_k(pair_data: Iterable[tuple[int, int]]) -> Fraction:
    """Smallest k >= 1 with |s-t|/k - k <= d <= k |s-t| + k for every
    (index gap, distance) pair; exact and re-verifiable."""
    k = Fraction(1)
    for delta_idx, d in pair_data:
        k = max(k, Fraction(d, delta_idx + 1))
        if delta_idx > d:
            k = max(k, _lower_requirement(d, delta_idx))
    return k


def check_k(pair_data: Iterable[tuple[int, int]], k: Fraction) -> bool:
    for delta_idx, d in pair_data:
        if d > k * delta_idx + k:
            return False
        if Fraction(delta_idx, 1) / k - k > d:
            return False
    return True


def _path_pairs(g: MetricGraph, path: Sequence[int]) -> list[tuple[int, int]]:
    out = []
    for s in range(len(path)):
        row = g.distance_row(path[s])
        for t in range(s + 1, len(path)):
            out.append((t - s, int(row[path[t]])))
    return out


def certify_path(g: MetricGraph, path: Sequence[int]) -> QuasiGeodesicCert:
    """Fit k over all index pairs and measure the Hausdorff distance to the
    canonical geodesic between the endpoints."""
    verts = tuple(int(v) for v in path)
    if not verts:
        raise NotAPath("empty path")
    for a, b in zip(verts, verts[1:]):
        if b not in g.adjacency[a]:
            raise NotAPath(f"consecutive vertices {a}, {b} are not adjacent")
    k = fit_k(_path_pairs(g, verts))
    geo = geodesic(g, verts[0], verts[-1])
    hd = hausdorff_distance(g, verts, geo.vertices)
    return QuasiGeodesicCert(path=verts, k_fit=k, hausdorff_to_geodesic=hd)


def stability_audit(g: MetricGraph, path: Sequence[int]) -> QuasiGeodesicCert:
    """Empirical stability check: k of the path and its Hausdorff distance
    to the canonical geodesic. Monotone evidence only, never certified
    against a symbolic stability constant."""
    return certify_path(g, path)


# ---------------------------------------------------------------------------
# corner products


def corner_product_check(
    g: MetricGraph, y: int, z: int, w: int, k: Fraction | int
) -> CornerProductReport:
    """Check the small-inner-product bound at a quasigeodesic corner.

    The concatenation [z,y] * [y,w] must certify as a k-quasigeodesic;
    the report asserts max_x min((x,z)_y, (x,w)_y) <= k * delta + k^2 / 2
    against the measured four-point delta.
    """
    k = Fraction(k)
    for v in (y, z, w):
        g.check_vertex(v)
    leg1 = geodesic(g, z, y).vertices
    leg2 = geodesic(g, y, w).vertices
    path = leg1 + leg2[1:]
    k_fit = fit_k(_path_pairs(g, path))
    if k_fit > k:
        raise NotQuasigeodesic(f"corner path fits k={k_fit}, exceeds requested k={k}")
    delta = delta_four_point(g).delta_four_point
    row_z = g.distance_row(z)
    row_w = g.distance_row(w)
    row_y = g.distance_row(y)
    value2 = 0
    for x in range(g.vertex_count):
        pz = int(row_y[x]) + int(row_y[z]) - int(row_z[x])
        pw = int(row_y[x]) + int(row_y[w]) - int(row_w[x])
        value2 = max(value2, min(pz, pw))
    value = Fraction(value2, 2)
    moreover = gromov_product(g, y, z, w)
    bound = k * delta + k * k / 2
    return CornerProductReport(
        corner=y,
        value=value,
        moreover_value=moreover,
        bound=bound,
        passed=value <= bound and moreover <= bound,
        k=k,
        k_fit=k_fit,
        delta=delta,
    )


# ---------------------------------------------------------------------------
# anchor chains


def make_chain(g: MetricGraph, anchors: Sequence[int]) -> ChainSpec:
    verts = tuple(int(a) for a in anchors)
    if len(verts) < 2:
        raise NotAPath("chain needs at least two anchors")
    for a in verts:
        g.check_vertex(a)
    legs = tuple(g.distance(a, b) for a, b in zip(verts, verts[1:]))
    products = tuple(
        gromov_product(g, verts[i], verts[i - 1], verts[i + 1])
        for i in range(1, len(verts) - 1)
    )
    return ChainSpec(anchors=verts, leg_lengths=legs, junction_products=products)


def chain_certify(
    chain: ChainSpec, g: MetricGraph, cap: Fraction | int, leg_threshold: int = 1
) -> QuasiGeodesicCert:
    """Concatenate canonical geodesics along the chain anchors and fit k.

    Junction products above `cap` raise JunctionTooSharp. The certificate
    records whether every leg meets `leg_threshold`; the achieved k is
    measured, not derived from a symbolic local-to-global constant.
    """
    cap = Fraction(cap)
    for i, p in enumerate(chain.junction_products):
        if p > cap:
            raise JunctionTooSharp(i + 1, p, cap)
    path: list[int] = [chain.anchors[0]]
    for a, b in zip(chain.anchors, chain.anchors[1:]):
        path.extend(geodesic(g, a, b).vertices[1:])
    verts = tuple(path)
    k = fit_k(_path_pairs(g, verts))
    geo = geodesic(g, verts[0], verts[-1])
    hd = hausdorff_distance(g, verts, geo.vertices)
    return QuasiGeodesicCert(
        path=verts,
        k_fit=k,
        hausdorff_to_geodesic=hd,
        legs_meet_threshold=all(l >= leg_threshold for l in chain.leg_lengths),
        leg_threshold=leg_threshold,
    )


# ---------------------------------------------------------------------------
# exponential detour divergence


def detour_check(
    g: MetricGraph,
    geo: GeodesicPath,
    center: int,
    detour: Sequence[int],
    delta: Fraction | int,
) -> DetourReport:
    """Assert length(detour) >= b**(n-1) with b = 2**(1/(delta+1)), where n
    is the detour's minimum distance to the center.

    The comparison is exact: with delta = p/2 the inequality is equivalent
    to length**(p+2) >= 2**(2(n-1)) over the integers.
    """
    delta = Fraction(delta)
    if delta * 2 != int(delta * 2):
        raise ValueError("delta must be a half-integer")
    verts = tuple(int(v) for v in detour)
    if not verts:
        raise NotAPath("empty detour")
    for a, b in zip(verts, verts[1:]):
        if b not in g.adjacency[a]:
            raise NotAPath(f"detour vertices {a}, {b} are not adjacent")
    if center not in geo.vertices:
        raise DetourEndpointsMismatch(f"center {center} does not lie on the geodesic")
    if verts[0] != geo.vertices[0] or verts[-1] != geo.vertices[-1]:
        raise DetourEndpointsMismatch("detour does not join the geodesic endpoints")
    row = g.distance_row(center)
    n = min(int(row[v]) for v in verts)
    length = len(verts) - 1
    p = int(delta * 2)
    bound = 2.0 ** (2 * max(n - 1, 0) / (p + 2))
    if n == 0:
        return DetourReport(n=0, length=length, bound=1.0, passed=True, vacuous=True)
    passed = length ** (p + 2) >= 2 ** (2 * (n - 1))
    return DetourReport(n=n, length=length, bound=bound, passed=passed, vacuous=False)


def sample_detours(
    g: MetricGraph,
    geo: GeodesicPath,
    center: int,
    count: int,
    seed: int = 0,
) -> list[tuple[int, ...]]:
    """Deterministically sample paths joining the geodesic endpoints while
    avoiding balls of growing radius around the center.

    For each exclusion radius the ball is deleted and a randomized-tie-break
    BFS path is taken in what remains. Raises NoDetour when no radius >= 1
    admits any detour (trees separate, so this is the expected tree outcome).
    """
    if center not in geo.vertices:
        raise DetourEndpointsMismatch(f"center {center} does not lie on the geodesic")
    src, dst = geo.vertices[0], geo.vertices[-1]
    row = g.distance_row(center)
    max_n = min(int(row[src]), int(row[dst]))
    rng = random.Random(seed)
    found: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    attempts = 0
    while len(found) < count and attempts < count * 8:
        exclusion = 1 + attempts % max(max_n, 1)
        attempts += 1
        allowed = row >= exclusion
        if not (allowed[src] and allowed[dst]):
            continue
        path = _random_subgraph_path(g, allowed, src, dst, rng)
        if path is not None and path not in seen:
            seen.add(path)
            found.append(path)
    if not found:
        raise NoDetour(f"no detour avoids any ball around {center}")
    return found


def _random_subgraph_path(
    g: MetricGraph, allowed: np.ndarray, src: int, dst: int, rng: random.Random
) -> tuple[int, ...] | None:
    from collections import deque

    parent = {src: -1}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        nbs = [v for v in g.adjacency[u] if allowed[v] and v not in parent]
        rng.shuffle(nbs)
        for v in nbs:
            parent[v] = u
            queue.append(v)
    if dst not in parent:
        return None
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return tuple(path)
