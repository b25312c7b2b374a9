"""Finite proxies for ideal-triangle barycenters and the inductive
trivalent-tree embedding.

Boundary points are replaced by sphere tips at a finite radius
(DirectionProxy); every statement is asserted with rim-exclusion margins.
Tie-breaks are always ascending vertex id, so runs are reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateTriangle,
    DepthExceedsGraph,
    EmbeddingFailed,
    InvalidParams,
    NoBranchPair,
    NotInterior,
    RadiusTooLarge,
)
from .graphs import GeodesicPath, MetricGraph, geodesic, regular_tree
from .hyperbolicity import delta_four_point, fit_k

__all__ = [
    "DirectionProxy",
    "TriangleCenter",
    "EmbedConfig",
    "TreeEmbedding",
    "EmbeddingReport",
    "direction_proxy",
    "triangle_center",
    "coarse_surjectivity_constant",
    "find_branch_pair",
    "default_embed_config",
    "embed_t3",
    "verify_embedding",
]


@dataclass(frozen=True)
class DirectionProxy:
    """Stand-in for a boundary direction: a tip at exact distance R."""

    base: int
    radius: int
    tip: int
    ray: GeodesicPath


@dataclass(frozen=True)
class TriangleCenter:
    corners: tuple[int, int, int]
    center: int
    slack: int


@dataclass(frozen=True)
class EmbedConfig:
    """Explicit constants for the inductive embedding.

    junction_cap bounds Gromov products at the corners, d_step is the edge
    image length, proxy_radius the sphere radius for direction proxies.
    d_step must exceed twice the cap so legs dominate the corners.
    """

    junction_cap: Fraction
    d_step: int
    depth: int
    proxy_radius: int

    def __post_init__(self) -> None:
        if self.depth < 0 or self.d_step < 1 or self.proxy_radius < 0:
            raise InvalidParams(f"bad embed config {self}")
        if Fraction(self.d_step) <= 2 * Fraction(self.junction_cap):
            raise InvalidParams(
                f"d_step {self.d_step} must exceed twice the junction cap {self.junction_cap}"
            )


@dataclass(frozen=True)
class TreeEmbedding:
    """Map from a depth-truncated trivalent tree into a graph.

    k_measured is fitted against the step-scaled tree metric (tree edges
    count d_step), matching a construction that maps edges onto geodesics
    of length d_step; a tree embedded in a tree therefore measures k = 1.
    """

    tree: MetricGraph
    images: tuple[int, ...]
    d_step: int
    k_measured: Fraction
    min_pair_distance: int


@dataclass(frozen=True)
class EmbeddingReport:
    injective: bool
    min_pair_distance: int
    k_measured: Fraction
    scaled_inequality_holds: bool
    k_raw: Fraction
    passed: bool


def direction_proxy(g: MetricGraph, base: int, radius: int, tip: int) -> DirectionProxy:
    if g.distance(base, tip) != radius:
        raise InvalidParams(f"tip {tip} is not at distance {radius} from {base}")
    return DirectionProxy(base=base, radius=radius, tip=tip, ray=geodesic(g, base, tip))


def _canonical_side(g: MetricGraph, u: int, v: int) -> tuple[int, ...]:
    return geodesic(g, min(u, v), max(u, v)).vertices


def triangle_center(g: MetricGraph, t1: int, t2: int, t3: int) -> TriangleCenter:
    """Vertex minimizing the max distance to the three canonical sides,
    lowest id on ties."""
    if len({t1, t2, t3}) != 3:
        raise DegenerateTriangle(f"tips {(t1, t2, t3)} are not distinct")
    for t in (t1, t2, t3):
        g.check_vertex(t)
    D = g.distance_matrix
    sides = [
        sorted(set(_canonical_side(g, t1, t2))),
        sorted(set(_canonical_side(g, t2, t3))),
        sorted(set(_canonical_side(g, t1, t3))),
    ]
    per_side = np.stack([D[:, side].min(axis=1) for side in sides])
    slack_per_vertex = per_side.max(axis=0)
    center = int(slack_per_vertex.argmin())
    return TriangleCenter(corners=(t1, t2, t3), center=center, slack=int(slack_per_vertex[center]))


def _sphere(g: MetricGraph, u: int, radius: int) -> list[int]:
    row = g.distance_row(u)
    return np.flatnonzero(row == radius).tolist()


def coarse_surjectivity_constant(g: MetricGraph, radius: int) -> int | None:
    """Finite-scale surjectivity constant of the center map.

    Search strategy: interior vertices are those farther than radius/2 from
    the rim; each is matched against triangle centers with tips on the
    radius-sphere around its nearest deep vertex (a vertex whose rim
    distance is at least the radius). Tip triples are scanned in ascending
    lexicographic order with early exit at distance 0. Returns None
    (unbounded) when some interior vertex has no deep vertex or the sphere
    admits no triple.
    """
    graph_radius = int(g.distance_matrix.max(axis=1).min())
    if radius > graph_radius:
        raise RadiusTooLarge(f"radius {radius} exceeds graph radius {graph_radius}")
    n = g.vertex_count
    rim_d = np.array([g.rim_distance(v) for v in range(n)])
    interior = [v for v in range(n) if rim_d[v] > radius / 2]
    deep = [v for v in range(n) if rim_d[v] >= radius]
    if not interior:
        return None
    worst = 0
    for v in interior:
        row = g.distance_row(v)
        if not deep:
            return None
        anchor = min(deep, key=lambda u: (int(row[u]), u))
        sphere = _sphere(g, anchor, radius)
        if len(sphere) < 3:
            return None
        best = None
        for t1, t2, t3 in itertools.combinations(sphere, 3):
            c = triangle_center(g, t1, t2, t3).center
            d = int(row[c])
            if best is None or d < best:
                best = d
            if best == 0:
                break
        worst = max(worst, best)
    return worst


def find_branch_pair(
    g: MetricGraph,
    y: int,
    x: int,
    cfg: EmbedConfig,
    enforce_interior: bool = True,
) -> tuple[int, int]:
    """Two sphere points at distance d_step from y branching away from x:
    all three Gromov products at y stay within the junction cap. Search is
    over sphere vertex pairs in ascending id order."""
    g.check_vertex(y)
    g.check_vertex(x)
    if enforce_interior and g.rim_distance(y) <= cfg.d_step + cfg.proxy_radius / 2:
        raise NotInterior(
            f"vertex {y} has rim distance {g.rim_distance(y)}, needs more than "
            f"{cfg.d_step + cfg.proxy_radius / 2}"
        )
    pair = _branch_pair_search(g, y, x, cfg)
    if pair is None:
        raise NoBranchPair(y)
    return pair


def _products_ok(
    g: MetricGraph, y: int, cap2: int, candidates: Sequence[int], x: int | None
) -> bool:
    row_y = g.distance_row(y)
    for u, v in itertools.combinations(candidates, 2):
        if int(row_y[u]) + int(row_y[v]) - g.distance(u, v) > cap2:
            return False
    if x is not None:
        for u in candidates:
            if int(row_y[u]) + int(row_y[x]) - g.distance(u, x) > cap2:
                return False
    return True


def _branch_pair_search(g: MetricGraph, y: int, x: int, cfg: EmbedConfig) -> tuple[int, int] | None:
    cap2 = _doubled_cap(cfg.junction_cap)
    sphere = _sphere(g, y, cfg.d_step)
    for y1, y2 in itertools.combinations(sphere, 2):
        if _products_ok(g, y, cap2, (y1, y2), x):
            return (y1, y2)
    return None


def _doubled_cap(cap: Fraction) -> int:
    # products are half-integers; compare doubled values exactly
    doubled = Fraction(cap) * 2
    return math.floor(doubled)


def default_embed_config(g: MetricGraph, depth: int) -> EmbedConfig:
    """Measured defaults: cap = measured four-point delta, step = 2*ceil(cap) + 2."""
    delta = delta_four_point(g).delta_four_point
    d_step = 2 * math.ceil(delta) + 2
    return EmbedConfig(
        junction_cap=delta,
        d_step=d_step,
        depth=depth,
        proxy_radius=2 * d_step * depth,
    )


def embed_t3(g: MetricGraph, root: int, cfg: EmbedConfig) -> TreeEmbedding:
    """Breadth-first inductive embedding of the trivalent tree.

    The root gets a pairwise-branching triple on its d_step-sphere; every
    later vertex gets a branch pair avoiding its parent direction. Edges
    are carried by canonical geodesics, so distances are measured against
    the step-scaled tree metric. Depth margins are checked once at the
    root (rim distance >= d_step * depth) rather than per expansion.
    """
    g.check_vertex(root)
    tree = regular_tree(3, cfg.depth)
    if cfg.depth == 0:
        return TreeEmbedding(
            tree=tree, images=(root,), d_step=cfg.d_step, k_measured=Fraction(1), min_pair_distance=0
        )
    if g.rim_distance(root) < cfg.d_step * cfg.depth:
        raise DepthExceedsGraph(
            f"root rim distance {g.rim_distance(root)} < d_step*depth = {cfg.d_step * cfg.depth}"
        )
    images: list[int] = [root]
    parent_image: list[int] = [-1]
    cap2 = _doubled_cap(cfg.junction_cap)

    sphere = _sphere(g, root, cfg.d_step)
    triple = None
    for cand in itertools.combinations(sphere, 3):
        if _products_ok(g, root, cap2, cand, None):
            triple = cand
            break
    if triple is None:
        raise NoBranchPair(root, tree_vertex=0)
    for t in triple:
        images.append(t)
        parent_image.append(root)

    # tree ids are breadth-first: vertices at level l precede level l+1
    level_start = 1
    level_size = 3
    for _level in range(1, cfg.depth):
        next_images: list[tuple[int, int]] = []
        for w in range(level_start, level_start + level_size):
            y = images[w]
            x = parent_image[w]
            pair = _branch_pair_search(g, y, x, cfg)
            if pair is None:
                raise NoBranchPair(y, tree_vertex=w)
            next_images.append((pair[0], y))
            next_images.append((pair[1], y))
        for img, par in next_images:
            images.append(img)
            parent_image.append(par)
        level_start += level_size
        level_size *= 2

    if len(set(images)) != len(images):
        raise EmbeddingFailed("tree vertices received coinciding images")

    k, min_pair = _measure_embedding(g, tree, images, cfg.d_step)
    return TreeEmbedding(
        tree=tree,
        images=tuple(images),
        d_step=cfg.d_step,
        k_measured=k,
        min_pair_distance=min_pair,
    )


def _measure_embedding(
    g: MetricGraph, tree: MetricGraph, images: Sequence[int], d_step: int
) -> tuple[Fraction, int]:
    pairs: list[tuple[int, int]] = []
    min_pair = None
    n = len(images)
    for i in range(n):
        row = g.distance_row(images[i])
        tri = tree.distance_row(i)
        for j in range(i + 1, n):
            d_g = int(row[images[j]])
            pairs.append((int(tri[j]) * d_step, d_g))
            if min_pair is None or d_g < min_pair:
                min_pair = d_g
    if not pairs:
        return Fraction(1), 0
    return fit_k(pairs), int(min_pair)


def verify_embedding(g: MetricGraph, emb: TreeEmbedding) -> EmbeddingReport:
    """Exhaustive re-check: injectivity, positive separation, and the
    two-sided inequality at k_measured against the step-scaled tree metric.
    k_raw records the constant against the unscaled tree metric."""
    injective = len(set(emb.images)) == len(emb.images)
    n = len(emb.images)
    k = emb.k_measured
    ok = True
    raw_pairs: list[tuple[int, int]] = []
    min_pair = 0 if n < 2 else None
    for i in range(n):
        row = g.distance_row(emb.images[i])
        tri = emb.tree.distance_row(i)
        for j in range(i + 1, n):
            d_g = int(row[emb.images[j]])
            d_t = int(tri[j]) * emb.d_step
            raw_pairs.append((int(tri[j]), d_g))
            if d_g > k * d_t + k or Fraction(d_t) / k - k > d_g:
                ok = False
            if min_pair is None or d_g < min_pair:
                min_pair = d_g
    k_raw = fit_k(raw_pairs) if raw_pairs else Fraction(1)
    passed = injective and ok and (n < 2 or min_pair > 0)
    return EmbeddingReport(
        injective=injective,
        min_pair_distance=int(min_pair),
        k_measured=k,
        scaled_inequality_holds=ok,
        k_raw=k_raw,
        passed=passed,
    )
