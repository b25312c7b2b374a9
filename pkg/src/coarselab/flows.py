"""Flows of fiber subsets, the exponential cardinality bound, flaring
certification, section divergence, and the shadowing experiment.

The flow is computed by stepwise cross-level relaxation: a vertex of
F_{i+1} is reached from x in F_i when their total distance is at most 2k.
Any k-qi section moves at most 2k per unit step, so the relaxation
over-approximates the union-of-sections flow; the only claims asserted on
flows here are upper bounds, which remain valid a fortiori. Every report
states this.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    EmptySet,
    HypothesisUnmet,
    InvalidParams,
    NoWitness,
    WindowTooLong,
)
from .bundles import GraphBundle, QiSection, section_through

__all__ = [
    "FlowFront",
    "FlowBoundReport",
    "FlaringReport",
    "DivergenceReport",
    "ShadowResult",
    "flow",
    "flow_bound_check",
    "flaring_check",
    "divergence_check",
    "shadow_search",
    "ball_flow_containment",
]

STEP_RULE = "relaxation: x in F_i reaches y in F_i+1 iff d_total(x, y) <= 2k (superset of the k-qi-section flow)"


@dataclass(frozen=True)
class FlowFront:
    base_set: frozenset[int]
    k: int
    fronts: tuple[frozenset[int], ...]
    step_rule: str = STEP_RULE


@dataclass(frozen=True)
class FlowBoundReport:
    k: int
    valence_bound: int
    f_hat_4k: int
    c: int
    rows: tuple[tuple[int, int, int, bool], ...]  # (level, front size, bound, pass)
    passed: bool
    step_rule: str = STEP_RULE


@dataclass(frozen=True)
class FlaringViolation:
    u: int
    v: int
    window_center: int
    middle: int
    left: int
    right: int


@dataclass(frozen=True)
class FlaringReport:
    k: int
    n_k: int
    lam: Fraction
    m_k: int
    samples: int
    windows_checked: int
    violations: tuple[FlaringViolation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class DivergenceReport:
    a: float
    b: float
    profile: tuple[int, ...]
    binding_level: int
    vacuous_weak: bool
    passed: bool


@dataclass(frozen=True)
class ShadowWitness:
    start: int
    section: QiSection
    meet_level: int
    meet_distance: int


@dataclass(frozen=True)
class ShadowResult:
    target: QiSection
    tolerance: int
    min_start_distance: int
    scanned: int
    witnesses: tuple[ShadowWitness, ...]


def flow(bundle: GraphBundle, base_set: Sequence[int], k: int) -> FlowFront:
    """k-flow of a base-fiber subset under the relaxation step rule."""
    if k < 1:
        raise InvalidParams("k must be >= 1")
    a = frozenset(int(v) for v in base_set)
    if not a:
        raise EmptySet("flow of the empty set")
    for v in a:
        bundle.fibers[0].check_vertex(v)
    D = bundle.total.distance_matrix
    fronts = [a]
    for level in range(bundle.levels):
        src_off = bundle.offsets[level]
        dst_off = bundle.offsets[level + 1]
        dst_size = bundle.fibers[level + 1].vertex_count
        rows = np.array([src_off + v for v in sorted(fronts[-1])])
        block = D[np.ix_(rows, range(dst_off, dst_off + dst_size))]
        reach = np.flatnonzero((block <= 2 * k).any(axis=0))
        fronts.append(frozenset(int(v) for v in reach))
    return FlowFront(base_set=a, k=k, fronts=tuple(fronts))


def flow_bound_check(bundle: GraphBundle, base_set: Sequence[int], k: int) -> FlowBoundReport:
    """Assert |front_i| <= |A| * c**i with c = D**(f_hat(4k) + 1), where D is
    the fiber valence bound and f_hat the measured properness profile."""
    valence = bundle.max_fiber_valence
    if valence < 2:
        raise InvalidParams("fiber valence bound must be >= 2")
    fr = flow(bundle, base_set, k)
    f4k = bundle.properness_profile(4 * k)
    c = valence ** (f4k + 1)
    rows = []
    passed = True
    for level, front in enumerate(fr.fronts):
        bound = len(fr.base_set) * c**level
        ok = len(front) <= bound
        passed = passed and ok
        rows.append((level, len(front), bound, ok))
    return FlowBoundReport(
        k=k, valence_bound=valence, f_hat_4k=f4k, c=c, rows=tuple(rows), passed=passed
    )


def _stratified_pairs(
    bundle: GraphBundle, sample_count: int, seed: int
) -> list[tuple[int, int]]:
    """Vertex pairs of F_0 drawn round-robin from fiber-distance buckets,
    deterministic in the seed."""
    f0 = bundle.fibers[0]
    n = f0.vertex_count
    buckets: dict[int, list[tuple[int, int]]] = {}
    D = f0.distance_matrix
    for u in range(n):
        for v in range(u + 1, n):
            buckets.setdefault(int(D[u, v]), []).append((u, v))
    rng = random.Random(seed)
    for d in buckets:
        rng.shuffle(buckets[d])
    order = sorted(buckets, reverse=True)
    out: list[tuple[int, int]] = []
    idx = 0
    while len(out) < sample_count and any(buckets[d] for d in order):
        d = order[idx % len(order)]
        idx += 1
        if buckets[d]:
            out.append(buckets[d].pop())
    return out


def flaring_check(
    bundle: GraphBundle,
    k: int,
    n_k: int,
    lam: Fraction | int,
    m_k: int,
    sample_count: int,
    seed: int = 0,
) -> FlaringReport:
    """Sample section pairs and test the flaring inequality on every window
    of half-width n_k: whenever the middle fiber distance exceeds m_k,
    lam * middle < max(left end, right end) must hold strictly."""
    lam = Fraction(lam)
    if lam <= 1:
        raise InvalidParams("lambda must be > 1")
    if 2 * n_k > bundle.levels:
        raise WindowTooLong(f"2*n_k = {2 * n_k} exceeds top level {bundle.levels}")
    pairs = _stratified_pairs(bundle, sample_count, seed)
    sections: dict[int, QiSection] = {}

    def sect(v: int) -> QiSection:
        if v not in sections:
            sections[v] = section_through(bundle, bundle.global_id(0, v), k_step=k)
        return sections[v]

    violations = []
    windows = 0
    for u, v in pairs:
        su, sv = sect(u), sect(v)
        profile = [
            bundle.fiber_distance(i, a, b)
            for i, (a, b) in enumerate(zip(su.levels, sv.levels))
        ]
        for m in range(n_k, bundle.levels - n_k + 1):
            middle = profile[m]
            if middle <= m_k:
                continue
            windows += 1
            left = profile[m - n_k]
            right = profile[m + n_k]
            if not lam * middle < max(left, right):
                violations.append(
                    FlaringViolation(
                        u=u, v=v, window_center=m, middle=middle, left=left, right=right
                    )
                )
    return FlaringReport(
        k=k,
        n_k=n_k,
        lam=lam,
        m_k=m_k,
        samples=len(pairs),
        windows_checked=windows,
        violations=tuple(violations),
    )


def divergence_check(
    bundle: GraphBundle,
    s1: QiSection,
    s2: QiSection,
    delta_total: Fraction | int,
    m_k: int,
    start_cap: int | None = None,
) -> DivergenceReport:
    """Fit the largest a with d_i >= a * b**i, b = 2**(1/(delta+1)).

    Requires d_i > m_k at every level (HypothesisUnmet otherwise) and
    d_0 <= start_cap when a cap is given. A fit whose binding level is the
    top level carries no real growth information and is flagged
    vacuous_weak.
    """
    from .bundles import section_distance_profile

    delta = Fraction(delta_total)
    profile = section_distance_profile(bundle, s1, s2)
    for i, d in enumerate(profile):
        if d <= m_k:
            raise HypothesisUnmet(f"level {i} distance {d} <= m_k = {m_k}")
    if start_cap is not None and profile[0] > start_cap:
        raise HypothesisUnmet(f"d_0 = {profile[0]} exceeds cap {start_cap}")
    b = 2.0 ** (1.0 / (float(delta) + 1.0))
    ratios = [d / b**i for i, d in enumerate(profile)]
    a = min(ratios)
    binding = ratios.index(a)
    return DivergenceReport(
        a=a,
        b=b,
        profile=profile,
        binding_level=binding,
        vacuous_weak=binding == len(profile) - 1,
        passed=a > 0,
    )


def shadow_search(
    bundle: GraphBundle,
    target: QiSection,
    tolerance: int,
    min_start_distance: int,
) -> ShadowResult:
    """Scan base-fiber starts at fiber distance >= min_start_distance from
    the target's base point; for each, follow the greedy section and record
    the first level where it comes within `tolerance` of the target in the
    fiber metric. Raises NoWitness when no start meets the target."""
    f0 = bundle.fibers[0]
    t0 = target.levels[0]
    row = f0.distance_row(t0)
    witnesses = []
    scanned = 0
    for p in range(f0.vertex_count):
        if int(row[p]) < min_start_distance:
            continue
        scanned += 1
        sec = section_through(bundle, bundle.global_id(0, p), k_step=1)
        for level in range(bundle.levels + 1):
            d = bundle.fiber_distance(level, sec.levels[level], target.levels[level])
            if d <= tolerance:
                witnesses.append(
                    ShadowWitness(start=p, section=sec, meet_level=level, meet_distance=d)
                )
                break
    if not witnesses:
        raise NoWitness(scanned, min_start_distance, tolerance)
    return ShadowResult(
        target=target,
        tolerance=tolerance,
        min_start_distance=min_start_distance,
        scanned=scanned,
        witnesses=tuple(witnesses),
    )


def ball_flow_containment(
    bundle: GraphBundle,
    section: QiSection,
    front: FlowFront,
    radii: Sequence[int],
) -> tuple[tuple[int, int, bool], ...]:
    """Finite form of the ball-in-flow inclusion: at each level i check that
    the fiber ball of the given radius around the section is contained in
    the relaxation flow front (valid a fortiori for the true flow)."""
    if len(radii) != bundle.levels + 1:
        raise InvalidParams("need one radius per level")
    rows = []
    for i, r in enumerate(radii):
        fiber = bundle.fibers[i]
        members = {
            v for v in range(fiber.vertex_count) if fiber.distance(section.levels[i], v) <= r
        }
        ok = members <= front.fronts[i]
        rows.append((i, int(r), ok))
    return tuple(rows)
