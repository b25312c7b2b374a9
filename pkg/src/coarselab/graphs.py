"""Finite metric graphs: construction, generators, distances, geodesics.

All graphs are connected, undirected, loop-free, with unit edge lengths.
Vertex ids are dense integers 0..n-1. Distances are BFS shortest-path
lengths, cached per source row; the full matrix is materialized only on
demand (the quadruple scans need it, single-source operations do not).
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    EmptySet,
    InvalidParams,
    InvalidVertex,
    SelfLoop,
    TooLargeForExhaustive,
)

__all__ = [
    "MetricGraph",
    "Ball",
    "GeodesicPath",
    "build_graph",
    "path_graph",
    "cycle_graph",
    "regular_tree",
    "free_group_ball",
    "distance",
    "geodesic",
    "all_geodesics",
    "ball",
    "ball_members",
    "hausdorff_distance",
    "reduce_word",
    "word_inverse",
    "apply_endomorphism",
]

_UNREACHED = -1


@dataclass
class MetricGraph:
    """Immutable connected graph with unit edges and cached BFS distances.

    `meta` carries generator provenance (kind, params, root) so rooted
    generators can expose their rim cheaply; it never affects the metric.
    """

    adjacency: tuple[tuple[int, ...], ...]
    meta: dict | None = None
    _rows: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _matrix: np.ndarray | None = field(default=None, repr=False)
    _rim: frozenset[int] | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)

    @property
    def max_valence(self) -> int:
        return max(len(nb) for nb in self.adjacency)

    @property
    def edge_count(self) -> int:
        return sum(len(nb) for nb in self.adjacency) // 2

    def neighbors(self, u: int) -> tuple[int, ...]:
        self.check_vertex(u)
        return self.adjacency[u]

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, nbs in enumerate(self.adjacency):
            for v in nbs:
                if u < v:
                    yield (u, v)

    def check_vertex(self, u: int) -> None:
        if not isinstance(u, (int, np.integer)) or not 0 <= u < len(self.adjacency):
            raise InvalidVertex(f"vertex {u!r} not in 0..{len(self.adjacency) - 1}")

    # -- distances ----------------------------------------------------------

    def distance_row(self, u: int) -> np.ndarray:
        """All distances from u, via BFS. Rows are cached; recompute-and-store
        is idempotent so concurrent first calls are safe."""
        self.check_vertex(u)
        row = self._rows.get(u)
        if row is None:
            row = _bfs_row(self.adjacency, u)
            self._rows[u] = row
        return row

    def distance(self, u: int, v: int) -> int:
        self.check_vertex(v)
        return int(self.distance_row(u)[v])

    @property
    def distance_matrix(self) -> np.ndarray:
        """Full APSP matrix (int32). Materialized once, under a lock."""
        if self._matrix is None:
            with self._lock:
                if self._matrix is None:
                    n = self.vertex_count
                    mat = np.empty((n, n), dtype=np.int32)
                    for u in range(n):
                        mat[u] = self.distance_row(u)
                    self._matrix = mat
        return self._matrix

    def eccentricity(self, u: int) -> int:
        return int(self.distance_row(u).max())

    def diameter(self) -> int:
        return int(self.distance_matrix.max())

    def rim(self) -> frozenset[int]:
        """Boundary proxy: sphere of maximal radius around the generator root
        when known, otherwise the vertices of maximal eccentricity."""
        if self._rim is None:
            if self.meta and "root" in self.meta:
                row = self.distance_row(self.meta["root"])
                self._rim = frozenset(np.flatnonzero(row == row.max()).tolist())
            else:
                eccs = self.distance_matrix.max(axis=1)
                self._rim = frozenset(np.flatnonzero(eccs == eccs.max()).tolist())
        return self._rim

    def rim_distance_map(self) -> np.ndarray:
        """Distance to the rim for every vertex, via one multi-source BFS."""
        if self._rim_map is None:
            n = self.vertex_count
            dist = np.full(n, _UNREACHED, dtype=np.int32)
            queue = deque()
            for v in self.rim():
                dist[v] = 0
                queue.append(v)
            while queue:
                u = queue.popleft()
                du = dist[u] + 1
                for v in self.adjacency[u]:
                    if dist[v] == _UNREACHED:
                        dist[v] = du
                        queue.append(v)
            self._rim_map = dist
        return self._rim_map

    def rim_distance(self, u: int) -> int:
        self.check_vertex(u)
        return int(self.rim_distance_map()[u])


@dataclass(frozen=True)
class Ball:
    center: int
    radius: int
    members: frozenset[int]


@dataclass(frozen=True)
class GeodesicPath:
    vertices: tuple[int, ...]
    canonical: bool = True

    def __len__(self) -> int:
        return len(self.vertices) - 1


def _bfs_row(adjacency: Sequence[Sequence[int]], source: int) -> np.ndarray:
    n = len(adjacency)
    dist = np.full(n, _UNREACHED, dtype=np.int32)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in adjacency[u]:
            if dist[v] == _UNREACHED:
                dist[v] = du
                queue.append(v)
    return dist


def build_graph(edge_list: Iterable[tuple[int, int]], meta: dict | None = None) -> MetricGraph:
    """Validate an edge list into a MetricGraph.

    Rejects self-loops, duplicate (unordered) edges, and disconnected
    inputs; vertex ids must be dense 0..n-1.
    """
    edges = list(edge_list)
    if not edges:
        raise DisconnectedGraph("empty edge list")
    seen: set[tuple[int, int]] = set()
    n = 0
    for u, v in edges:
        u, v = int(u), int(v)
        if u < 0 or v < 0:
            raise InvalidVertex(f"negative vertex id in edge ({u}, {v})")
        if u == v:
            raise SelfLoop(f"self-loop at {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen.add(key)
        n = max(n, u + 1, v + 1)
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in seen:
        adj[u].append(v)
        adj[v].append(u)
    adjacency = tuple(tuple(sorted(nb)) for nb in adj)
    g = MetricGraph(adjacency=adjacency, meta=meta)
    if (g.distance_row(0) == _UNREACHED).any():
        raise DisconnectedGraph("graph is not connected")
    return g


def path_graph(n: int) -> MetricGraph:
    if n < 1:
        raise InvalidParams("path needs >= 1 vertex")
    if n == 1:
        return MetricGraph(adjacency=((),), meta={"kind": "path", "n": 1})
    return build_graph([(i, i + 1) for i in range(n - 1)], meta={"kind": "path", "n": n})


def cycle_graph(n: int) -> MetricGraph:
    if n < 3:
        raise InvalidParams("cycle needs >= 3 vertices")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return build_graph(edges, meta={"kind": "cycle", "n": n})


def regular_tree(valence: int, depth: int) -> MetricGraph:
    """Rooted tree: root and internal vertices have the given valence, all
    leaves sit at exactly `depth`. Ids are breadth-first."""
    if valence < 2:
        raise InvalidParams("valence must be >= 2")
    if depth < 0:
        raise InvalidParams("depth must be >= 0")
    meta = {"kind": "regular_tree", "valence": valence, "depth": depth, "root": 0}
    if depth == 0:
        return MetricGraph(adjacency=((),), meta=meta)
    edges: list[tuple[int, int]] = []
    next_id = 1
    frontier = [0]
    for level in range(depth):
        new_frontier = []
        for u in frontier:
            n_children = valence if level == 0 else valence - 1
            for _ in range(n_children):
                edges.append((u, next_id))
                new_frontier.append(next_id)
                next_id += 1
        frontier = new_frontier
    return build_graph(edges, meta=meta)


# -- free group words --------------------------------------------------------
# Letters are ints 0..2*rank-1; letter g and g^-1 are paired by XOR 1.


def _is_reduced(word: tuple[int, ...]) -> bool:
    return all(word[i] ^ 1 != word[i + 1] for i in range(len(word) - 1))


def reduce_word(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for g in letters:
        if out and out[-1] ^ 1 == g:
            out.pop()
        else:
            out.append(g)
    return tuple(out)


def word_inverse(word: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(g ^ 1 for g in reversed(word))


def apply_endomorphism(word: tuple[int, ...], images: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    """Apply a free-group endomorphism given by generator images.

    `images[i]` is the image word of generator 2i; inverses map to the
    inverted image.
    """
    out: list[int] = []
    for g in word:
        img = images[g // 2]
        out.extend(img if g % 2 == 0 else word_inverse(img))
    return reduce_word(out)


def free_group_words(rank: int, radius: int) -> list[tuple[int, ...]]:
    """Reduced words of length <= radius, ordered by (length, letters)."""
    words: list[tuple[int, ...]] = [()]
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for g in range(2 * rank):
                if w and w[-1] ^ 1 == g:
                    continue
                nxt.append(w + (g,))
        nxt.sort()
        words.extend(nxt)
        frontier = nxt
    return words


def free_group_ball(rank: int, radius: int) -> MetricGraph:
    """Ball in the Cayley graph of the free group of the given rank
    (reduced words, right multiplication by generators)."""
    if rank < 2:
        raise InvalidParams("rank must be >= 2")
    if radius < 1:
        raise InvalidParams("radius must be >= 1")
    words = free_group_words(rank, radius)
    index = {w: i for i, w in enumerate(words)}
    edges = []
    for w, i in index.items():
        for g in range(2 * rank):
            if w and w[-1] ^ 1 == g:
                continue
            wg = w + (g,)
            j = index.get(wg)
            if j is not None and i < j:
                edges.append((i, j))
    meta = {
        "kind": "free_group_ball",
        "rank": rank,
        "radius": radius,
        "root": 0,
        "words": words,
    }
    return build_graph(edges, meta=meta)


# -- metric operations -------------------------------------------------------


def distance(g: MetricGraph, u: int, v: int) -> int:
    return g.distance(u, v)


def geodesic(g: MetricGraph, u: int, v: int) -> GeodesicPath:
    """Canonical geodesic: BFS from u, each step to the lowest-id neighbor
    one unit closer to u. Deterministic across runs."""
    g.check_vertex(u)
    g.check_vertex(v)
    if u == v:
        return GeodesicPath(vertices=(u,))
    row = g.distance_row(u)
    path = [v]
    cur = v
    while cur != u:
        d = row[cur]
        cur = min(w for w in g.adjacency[cur] if row[w] == d - 1)
        path.append(cur)
    path.reverse()
    return GeodesicPath(vertices=tuple(path))


def all_geodesics(g: MetricGraph, u: int, v: int, cap: int = 4096) -> list[tuple[int, ...]]:
    """Every geodesic from u to v, via DFS on the shortest-path DAG.

    Raises TooLargeForExhaustive past `cap` paths.
    """
    g.check_vertex(u)
    g.check_vertex(v)
    row = g.distance_row(u)
    out: list[tuple[int, ...]] = []
    stack: list[int] = [v]

    def rec(cur: int) -> None:
        if cur == u:
            out.append(tuple(reversed(stack)))
            if len(out) > cap:
                raise TooLargeForExhaustive(f"more than {cap} geodesics for ({u}, {v})")
            return
        d = row[cur]
        for w in g.adjacency[cur]:
            if row[w] == d - 1:
                stack.append(w)
                rec(w)
                stack.pop()

    rec(v)
    return out


def ball_members(g: MetricGraph, u: int, radius: int) -> frozenset[int]:
    row = g.distance_row(u)
    return frozenset(np.flatnonzero(row <= radius).tolist())


def ball(g: MetricGraph, u: int, radius: int) -> Ball:
    return Ball(center=u, radius=radius, members=ball_members(g, u, radius))


def hausdorff_distance(g: MetricGraph, a: Iterable[int], b: Iterable[int]) -> int:
    """Hausdorff distance between two non-empty vertex sets."""
    sa = sorted(set(a))
    sb = sorted(set(b))
    if not sa or not sb:
        raise EmptySet("hausdorff_distance needs two non-empty sets")
    for v in sa + sb:
        g.check_vertex(v)
    mat_rows_a = np.stack([g.distance_row(u) for u in sa])
    sub = mat_rows_a[:, sb]
    return int(max(sub.min(axis=1).max(), sub.min(axis=0).max()))
