"""Metric graph bundles over the truncated ray [0, N].

A bundle is a stack of connected fibers F_0..F_N plus cross edges between
consecutive levels; every fiber vertex must have a cross edge both up and
down (where those levels exist). The total graph is the disjoint fiber
union plus cross edges; the level projection is 1-Lipschitz by
construction. Fiber path metrics are computed on the fiber subgraph alone.

The properness profile is empirical: profile(r) is the largest same-fiber
distance observed among pairs at total distance <= r, over all fibers.
Constants derived from it are always reported alongside the measured
profile.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    FiberDisconnected,
    InvalidParams,
    InvalidVertex,
    MissingCrossEdge,
    NoDirectionTriple,
    NotInjectiveOnBall,
    TotalDisconnected,
)
from .graphs import (
    MetricGraph,
    apply_endomorphism,
    free_group_ball,
    reduce_word,
)
from .hyperbolicity import fit_k

__all__ = [
    "BundleSpec",
    "GraphBundle",
    "QiSection",
    "FiberMap",
    "validate_bundle",
    "horoball_bundle",
    "product_bundle",
    "automorphism_bundle",
    "endomorphism_section",
    "fiber_map",
    "section_through",
    "good_section",
    "section_distance_profile",
]


@dataclass(frozen=True)
class BundleSpec:
    """Unvalidated bundle candidate: per-level vertex counts, per-level
    fiber edge lists, and per-gap cross edge lists (local ids)."""

    fiber_sizes: tuple[int, ...]
    fiber_edges: tuple[tuple[tuple[int, int], ...], ...]
    cross_edges: tuple[tuple[tuple[int, int], ...], ...]
    meta: dict | None = None


@dataclass(frozen=True)
class QiSection:
    """One fiber vertex per level (local ids) with its measured constant."""

    levels: tuple[int, ...]
    k_measured: Fraction


@dataclass(frozen=True)
class FiberMap:
    level: int
    assignment: tuple[int, ...]
    k_measured: Fraction


@dataclass
class GraphBundle:
    fibers: tuple[MetricGraph, ...]
    cross: tuple[frozenset[tuple[int, int]], ...]
    total: MetricGraph
    offsets: tuple[int, ...]
    meta: dict | None = None
    _profile: dict[int, int] = field(default_factory=dict, repr=False)

    @property
    def levels(self) -> int:
        """Top level index N (the bundle has N + 1 fibers)."""
        return len(self.fibers) - 1

    def global_id(self, level: int, local: int) -> int:
        return self.offsets[level] + local

    def level_of(self, vertex: int) -> int:
        self.total.check_vertex(vertex)
        return int(np.searchsorted(self.offsets, vertex, side="right")) - 1

    def local_id(self, vertex: int) -> tuple[int, int]:
        level = self.level_of(vertex)
        return level, vertex - self.offsets[level]

    def fiber_distance(self, level: int, u: int, v: int) -> int:
        return self.fibers[level].distance(u, v)

    def up_neighbors(self, level: int, local: int) -> list[int]:
        return sorted(w for (u, w) in self.cross[level] if u == local)

    def down_neighbors(self, level: int, local: int) -> list[int]:
        return sorted(u for (u, w) in self.cross[level - 1] if w == local)

    @property
    def max_fiber_valence(self) -> int:
        return max(f.max_valence for f in self.fibers)

    def properness_profile(self, r: int) -> int:
        """Largest same-fiber distance among pairs at total distance <= r."""
        if r not in self._profile:
            worst = 0
            D = self.total.distance_matrix
            for level, fiber in enumerate(self.fibers):
                off = self.offsets[level]
                n = fiber.vertex_count
                block = D[off : off + n, off : off + n]
                fd = fiber.distance_matrix
                mask = block <= r
                if mask.any():
                    worst = max(worst, int(fd[mask].max()))
            self._profile[r] = worst
        return self._profile[r]


def _connected(size: int, edges: Sequence[tuple[int, int]]) -> bool:
    if size <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(size)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * size
    seen[0] = True
    queue = deque([0])
    reached = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                reached += 1
                queue.append(v)
    return reached == size


def validate_bundle(spec: BundleSpec) -> GraphBundle:
    """Check the bundle axioms and assemble the total graph."""
    n_levels = len(spec.fiber_sizes)
    if n_levels < 1:
        raise InvalidParams("bundle needs at least one fiber")
    if len(spec.fiber_edges) != n_levels or len(spec.cross_edges) != n_levels - 1:
        raise InvalidParams("fiber/cross edge list lengths do not match fiber count")

    fibers = []
    for level, (size, edges) in enumerate(zip(spec.fiber_sizes, spec.fiber_edges)):
        for u, v in edges:
            if not (0 <= u < size and 0 <= v < size):
                raise InvalidVertex(f"fiber {level} edge ({u}, {v}) out of range")
        if not _connected(size, edges):
            raise FiberDisconnected(level)
        adj: list[set[int]] = [set() for _ in range(size)]
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        fibers.append(
            MetricGraph(adjacency=tuple(tuple(sorted(s)) for s in adj), meta={"level": level})
        )

    for gap, edges in enumerate(spec.cross_edges):
        lo, hi = spec.fiber_sizes[gap], spec.fiber_sizes[gap + 1]
        up_covered = [False] * lo
        down_covered = [False] * hi
        for u, w in edges:
            if not (0 <= u < lo and 0 <= w < hi):
                raise InvalidVertex(f"cross edge ({u}, {w}) at gap {gap} out of range")
            up_covered[u] = True
            down_covered[w] = True
        for u, ok in enumerate(up_covered):
            if not ok:
                raise MissingCrossEdge(gap, u, "up")
        for w, ok in enumerate(down_covered):
            if not ok:
                raise MissingCrossEdge(gap + 1, w, "down")

    offsets = [0]
    for size in spec.fiber_sizes:
        offsets.append(offsets[-1] + size)
    total_size = offsets[-1]
    adj_total: list[set[int]] = [set() for _ in range(total_size)]
    for level, edges in enumerate(spec.fiber_edges):
        off = offsets[level]
        for u, v in edges:
            adj_total[off + u].add(off + v)
            adj_total[off + v].add(off + u)
    for gap, edges in enumerate(spec.cross_edges):
        lo, hi = offsets[gap], offsets[gap + 1]
        for u, w in edges:
            adj_total[lo + u].add(hi + w)
            adj_total[hi + w].add(lo + u)
    total = MetricGraph(
        adjacency=tuple(tuple(sorted(s)) for s in adj_total),
        meta={"kind": "bundle_total", **(spec.meta or {})},
    )
    if total_size > 1 and (total.distance_row(0) < 0).any():
        raise TotalDisconnected("total graph is not connected")
    return GraphBundle(
        fibers=tuple(fibers),
        cross=tuple(frozenset((int(u), int(w)) for u, w in e) for e in spec.cross_edges),
        total=total,
        offsets=tuple(offsets[:-1]),
        meta=spec.meta,
    )


# ---------------------------------------------------------------------------
# constructors


def _vertical_cross(size: int) -> tuple[tuple[int, int], ...]:
    return tuple((u, u) for u in range(size))


def horoball_bundle(base_fiber: MetricGraph, n_levels: int) -> GraphBundle:
    """Level-i fiber adds shortcut edges between vertices at base distance
    in (1, 2**i]; cross edges are vertical. Level 0 is the base fiber."""
    if n_levels < 1:
        raise InvalidParams("need at least one level above the base")
    size = base_fiber.vertex_count
    D = base_fiber.distance_matrix
    base_edges = tuple(base_fiber.edges())
    fiber_edges = [base_edges]
    for i in range(1, n_levels + 1):
        reach = 2**i
        edges = [
            (u, v)
            for u in range(size)
            for v in range(u + 1, size)
            if 0 < D[u, v] <= reach
        ]
        fiber_edges.append(tuple(edges))
    spec = BundleSpec(
        fiber_sizes=tuple([size] * (n_levels + 1)),
        fiber_edges=tuple(fiber_edges),
        cross_edges=tuple(_vertical_cross(size) for _ in range(n_levels)),
        meta={"kind": "horoball", "base": base_fiber.meta, "levels": n_levels},
    )
    return validate_bundle(spec)


def product_bundle(base_fiber: MetricGraph, n_levels: int) -> GraphBundle:
    """Constant fibers with vertical edges only; the no-flaring control."""
    if n_levels < 0:
        raise InvalidParams("levels must be >= 0")
    size = base_fiber.vertex_count
    edges = tuple(base_fiber.edges())
    spec = BundleSpec(
        fiber_sizes=tuple([size] * (n_levels + 1)),
        fiber_edges=tuple(edges for _ in range(n_levels + 1)),
        cross_edges=tuple(_vertical_cross(size) for _ in range(n_levels)),
        meta={"kind": "product", "base": base_fiber.meta, "levels": n_levels},
    )
    return validate_bundle(spec)


_LETTERS = "abcdefgh"


def parse_word(text: str, rank: int) -> tuple[int, ...]:
    """Letters a..h are generators, upper case their inverses."""
    out = []
    for ch in text:
        low = ch.lower()
        idx = _LETTERS.find(low)
        if idx < 0 or idx >= rank:
            raise InvalidParams(f"letter {ch!r} not valid for rank {rank}")
        out.append(2 * idx + (1 if ch.isupper() else 0))
    return reduce_word(out)


def automorphism_bundle(
    rank: int,
    word_images: dict[str, str],
    n_levels: int,
    fiber_radius: int,
) -> GraphBundle:
    """Fibers are free-group balls; the cross edges realize a free-group
    endomorphism (images truncated back into the ball) plus vertical
    identity edges so both cross directions exist."""
    if n_levels < 1:
        raise InvalidParams("need at least one level above the base")
    fiber = free_group_ball(rank, fiber_radius)
    words: list[tuple[int, ...]] = fiber.meta["words"]
    index = {w: i for i, w in enumerate(words)}
    images = []
    for i in range(rank):
        letter = _LETTERS[i]
        if letter not in word_images:
            raise InvalidParams(f"missing image for generator {letter!r}")
        images.append(parse_word(word_images[letter], rank))

    mapped = [apply_endomorphism(w, images) for w in words]
    if len(set(mapped)) != len(mapped):
        raise NotInjectiveOnBall("generator images are not injective on the ball")
    truncated = 0
    phi: list[int] = []
    for img in mapped:
        if len(img) > fiber_radius:
            img = img[:fiber_radius]
            truncated += 1
        phi.append(index[img])
    cross = {(i, w) for i, w in enumerate(phi)}
    # identity verticals only where needed for down-coverage, so greedy
    # sections follow the endomorphism wherever it is defined
    hit = set(phi)
    for i in range(len(words)):
        if i not in hit:
            cross.add((i, i))
    cross_edges = tuple(sorted(cross))
    edges = tuple(fiber.edges())
    size = fiber.vertex_count
    spec = BundleSpec(
        fiber_sizes=tuple([size] * (n_levels + 1)),
        fiber_edges=tuple(edges for _ in range(n_levels + 1)),
        cross_edges=tuple(cross_edges for _ in range(n_levels)),
        meta={
            "kind": "automorphism",
            "rank": rank,
            "word_images": dict(word_images),
            "fiber_radius": fiber_radius,
            "levels": n_levels,
            "truncated_images": truncated,
            "phi": tuple(phi),
        },
    )
    return validate_bundle(spec)


def endomorphism_section(bundle: GraphBundle, start: int) -> QiSection:
    """Section of an automorphism bundle that follows the endomorphism
    upward from a base-fiber vertex."""
    if not bundle.meta or "phi" not in bundle.meta:
        raise InvalidParams("bundle does not carry an endomorphism")
    phi = bundle.meta["phi"]
    bundle.fibers[0].check_vertex(start)
    seq = [start]
    for _ in range(bundle.levels):
        seq.append(phi[seq[-1]])
    return QiSection(levels=tuple(seq), k_measured=_section_k(bundle, seq))


# ---------------------------------------------------------------------------
# fiber maps and sections


def fiber_map(bundle: GraphBundle, level: int, sample_cap: int = 150, seed: int = 0) -> FiberMap:
    """Lowest-id up-neighbor map F_level -> F_level+1 with a measured qi
    constant (exhaustive pair scan up to sample_cap vertices, seeded
    sampling above)."""
    if not 0 <= level < bundle.levels:
        raise InvalidParams(f"level {level} has no successor")
    size = bundle.fibers[level].vertex_count
    up: list[list[int]] = [[] for _ in range(size)]
    for u, w in bundle.cross[level]:
        up[u].append(w)
    assignment = tuple(min(ws) for ws in up)
    src = bundle.fibers[level]
    dst = bundle.fibers[level + 1]
    pairs: list[tuple[int, int]] = []
    if size <= sample_cap:
        it = ((u, v) for u in range(size) for v in range(u + 1, size))
    else:
        import random

        rng = random.Random(seed)
        it = ((rng.randrange(size), rng.randrange(size)) for _ in range(4 * sample_cap))
    for u, v in it:
        if u == v:
            continue
        pairs.append((src.distance(u, v), dst.distance(assignment[u], assignment[v])))
    k = fit_k(pairs) if pairs else Fraction(1)
    return FiberMap(level=level, assignment=assignment, k_measured=k)


def _section_k(bundle: GraphBundle, levels: Sequence[int]) -> Fraction:
    D = bundle.total.distance_matrix
    ids = [bundle.global_id(i, v) for i, v in enumerate(levels)]
    pairs = [
        (j - i, int(D[ids[i], ids[j]]))
        for i in range(len(ids))
        for j in range(i + 1, len(ids))
    ]
    return fit_k(pairs) if pairs else Fraction(1)


def section_through(bundle: GraphBundle, vertex: int, k_step: int = 1) -> QiSection:
    """Greedy section through a total-graph vertex: extend both ways, each
    step to the lowest-id vertex of the next fiber within total distance
    k_step (cross neighbors realize distance 1, so the step never fails)."""
    if k_step < 1:
        raise InvalidParams("k_step must be >= 1")
    level, local = bundle.local_id(vertex)
    levels = {level: local}
    D = bundle.total.distance_matrix
    cur = local
    for i in range(level, bundle.levels):
        cur = _greedy_step(bundle, D, i, cur, i + 1, k_step)
        levels[i + 1] = cur
    cur = local
    for i in range(level, 0, -1):
        cur = _greedy_step(bundle, D, i, cur, i - 1, k_step)
        levels[i - 1] = cur
    seq = tuple(levels[i] for i in range(bundle.levels + 1))
    return QiSection(levels=seq, k_measured=_section_k(bundle, seq))


def _greedy_step(
    bundle: GraphBundle, D: np.ndarray, level: int, local: int, target_level: int, k_step: int
) -> int:
    src = bundle.global_id(level, local)
    off = bundle.offsets[target_level]
    size = bundle.fibers[target_level].vertex_count
    block = D[src, off : off + size]
    candidates = np.flatnonzero(block <= k_step)
    if candidates.size == 0:
        if target_level > level:
            return min(bundle.up_neighbors(level, local))
        return min(bundle.down_neighbors(level, local))
    return int(candidates[0])


def good_section(bundle: GraphBundle, proxy_radius: int) -> QiSection:
    """Barycentric section: pick a direction triple on the base fiber
    (three sphere tips leaving the base vertex through distinct first
    steps), transport the tips with the natural fiber maps, and take the
    triangle center in every fiber."""
    from .embedding import triangle_center

    f0 = bundle.fibers[0]
    tips = _direction_triple(f0, proxy_radius)
    if tips is None:
        raise NoDirectionTriple(0)
    section = []
    current = tips
    for level in range(bundle.levels + 1):
        if len(set(current)) != 3:
            raise NoDirectionTriple(level)
        tc = triangle_center(bundle.fibers[level], *current)
        section.append(tc.center)
        if level < bundle.levels:
            assignment = fiber_map(bundle, level).assignment
            current = tuple(assignment[t] for t in current)
    seq = tuple(section)
    return QiSection(levels=seq, k_measured=_section_k(bundle, seq))


def _direction_triple(fiber: MetricGraph, radius: int) -> tuple[int, int, int] | None:
    n = fiber.vertex_count
    D = fiber.distance_matrix
    order = sorted(range(n), key=lambda v: (int(D[v].max()), v))
    from .graphs import geodesic

    for base in order:
        sphere = np.flatnonzero(D[base] == radius).tolist()
        if len(sphere) < 3:
            continue
        groups: dict[int, int] = {}
        for tip in sphere:
            first = geodesic(fiber, base, tip).vertices[1]
            if first not in groups:
                groups[first] = tip
        if len(groups) >= 3:
            chosen = [groups[k] for k in sorted(groups)][:3]
            return tuple(chosen)
    return None


def section_distance_profile(
    bundle: GraphBundle, s1: QiSection, s2: QiSection
) -> tuple[int, ...]:
    """Per-level distances measured inside each fiber's own path metric."""
    if len(s1.levels) != len(s2.levels) or len(s1.levels) != bundle.levels + 1:
        raise InvalidParams("sections do not match the bundle")
    return tuple(
        bundle.fiber_distance(i, u, v)
        for i, (u, v) in enumerate(zip(s1.levels, s2.levels))
    )
