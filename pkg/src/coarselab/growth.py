"""Ball counting, exponential-growth fitting, and growth transfer along
quasiisometric embeddings.

The fitted base b is the minimum of consecutive count ratios over the fit
window, so a GrowthFit is a certified lower bound (counts[n] >= a * b**n
holds exactly on the window), not a regression. Transfer through a k-qi
embedding uses the closed forms

    a' = min(a * D**-(floor(k^2) + 2) * b**(-3k), b**(-3k)),   b' = b**(1/k),

evaluated in exact rational arithmetic whenever k is a positive integer
(b' stays exact only when b has an exact integer k-th root).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import (
    EmbeddingFailed,
    GrowthViolation,
    InvalidParams,
    NoBranchPair,
    NotExponential,
    WindowTooShort,
)
from .graphs import MetricGraph

__all__ = [
    "GrowthFit",
    "GrowthTransfer",
    "PipelineResult",
    "ball_counts",
    "growth_fit",
    "exact_root",
    "qi_growth_transfer",
    "barycenter_growth_pipeline",
]


@dataclass(frozen=True)
class GrowthFit:
    """Certified lower-bound parameters: counts[n] >= a * b**n on the window.

    min_ratio_slack = b - 1, the margin of the minimal consecutive ratio
    above the exponential threshold.
    """

    a: Fraction
    b: Fraction
    counts: tuple[int, ...]
    fit_window: tuple[int, int]
    min_ratio_slack: Fraction


@dataclass(frozen=True)
class GrowthTransfer:
    a_prime: Fraction
    b_prime: Fraction | float
    b_prime_exact: bool
    k: Fraction
    valence_bound: int


@dataclass(frozen=True)
class PipelineResult:
    root: int
    embed_k_scaled: Fraction
    transfer_k: int
    transfer: GrowthTransfer
    centers_checked: int
    max_n: int
    root_fit: GrowthFit | None
    passed: bool


def ball_counts(g: MetricGraph, u: int, n_max: int) -> tuple[int, ...]:
    """counts[n] = number of vertices within distance n of u, n = 0..n_max."""
    g.check_vertex(u)
    row = g.distance_row(u)
    ecc = int(row.max())
    if n_max > ecc:
        raise InvalidParams(f"n_max {n_max} exceeds eccentricity {ecc} of vertex {u}")
    import numpy as np

    hist = np.bincount(row, minlength=n_max + 1)
    return tuple(int(x) for x in np.cumsum(hist)[: n_max + 1])


def growth_fit(counts: Sequence[int], window: tuple[int, int]) -> GrowthFit:
    """Fit (a, b) with lower-bound semantics on counts[lo..hi]."""
    counts = tuple(int(c) for c in counts)
    lo, hi = window
    if not 0 <= lo < hi < len(counts):
        raise InvalidParams(f"window {window} out of range for {len(counts)} counts")
    if hi - lo + 1 < 3:
        raise WindowTooShort(f"window {window} has fewer than 3 entries")
    if any(c <= 0 for c in counts):
        raise InvalidParams("counts must be strictly positive")
    if any(a > b for a, b in zip(counts, counts[1:])):
        raise InvalidParams("counts must be non-decreasing")
    b = min(Fraction(counts[n + 1], counts[n]) for n in range(lo, hi))
    if b <= 1:
        raise NotExponential(f"minimal ratio {b} is not > 1")
    a = min(Fraction(counts[n]) / b**n for n in range(lo, hi + 1))
    return GrowthFit(
        a=a,
        b=b,
        counts=counts,
        fit_window=(lo, hi),
        min_ratio_slack=b - 1,
    )


def exact_root(x: Fraction, k: int) -> Fraction | None:
    """Exact k-th root of a positive rational, or None when irrational."""
    if x <= 0:
        return None
    p, q = x.numerator, x.denominator
    rp = round(p ** (1.0 / k))
    rq = round(q ** (1.0 / k))
    for cp in (rp - 1, rp, rp + 1):
        if cp > 0 and cp**k == p:
            for cq in (rq - 1, rq, rq + 1):
                if cq > 0 and cq**k == q:
                    return Fraction(cp, cq)
    return None


def qi_growth_transfer(
    a: Fraction | int, b: Fraction | int, k: Fraction | int, valence_bound: int
) -> GrowthTransfer:
    """Push growth parameters through a k-qi embedding of a graph whose
    valence is bounded by `valence_bound`."""
    a = Fraction(a)
    b = Fraction(b)
    k = Fraction(k)
    if b <= 1:
        raise NotExponential(f"b = {b} is not > 1")
    if a <= 0 or k < 1 or valence_bound < 2:
        raise InvalidParams(f"need a > 0, k >= 1, valence_bound >= 2; got {(a, k, valence_bound)}")
    m = math.floor(k * k) + 2
    if k.denominator == 1:
        kk = int(k)
        b_neg3k = b ** (-3 * kk)
        a_prime = min(a * Fraction(valence_bound) ** (-m) * b_neg3k, b_neg3k)
        root = exact_root(b, kk)
        if root is not None:
            return GrowthTransfer(a_prime, root, True, k, valence_bound)
        return GrowthTransfer(a_prime, float(b) ** (1.0 / kk), False, k, valence_bound)
    # non-integer k: the closed forms involve irrational powers of b
    kf = float(k)
    b_neg3k = Fraction(float(b) ** (-3.0 * kf)).limit_denominator(10**12)
    a_prime = min(a * Fraction(valence_bound) ** (-m) * b_neg3k, b_neg3k)
    return GrowthTransfer(a_prime, float(b) ** (1.0 / kf), False, k, valence_bound)


def _counts_dominate(counts: Sequence[int], a_prime: Fraction, b: Fraction, k: int, n_max: int) -> bool:
    """Exact check of counts[n] >= a' * b**(n/k) for n <= n_max.

    Both sides are positive, so the comparison is equivalent to
    counts[n]**k >= a'**k * b**n over the rationals.
    """
    ak = a_prime**k
    for n in range(1, n_max + 1):
        if Fraction(counts[n]) ** k < ak * b**n:
            return False
    return True


def barycenter_growth_pipeline(
    g: MetricGraph,
    surjectivity_constant: int,
    depth: int = 3,
    max_n: int = 4,
    root: int | None = None,
) -> PipelineResult:
    """Embed the trivalent tree, transfer its (3/2, 2) growth through the
    measured embedding constant, and verify counts[n] >= a' * b'**n at
    every interior center (vertices farther than max_n from the rim).

    `surjectivity_constant` is the caller-certified coarse-surjectivity
    constant; it is a precondition, not recomputed here. GrowthViolation
    must never fire on valid inputs.
    """
    from .embedding import default_embed_config, embed_t3

    if surjectivity_constant < 0:
        raise InvalidParams("surjectivity constant must be >= 0")
    if root is None:
        root = g.meta["root"] if g.meta and "root" in g.meta else 0
    cfg = default_embed_config(g, depth)
    try:
        emb = embed_t3(g, root, cfg)
    except NoBranchPair as exc:
        raise EmbeddingFailed(str(exc)) from exc

    # raw vertex-to-vertex qi constant: scaled constant times the step size
    k_raw = emb.k_measured * cfg.d_step
    k_int = math.ceil(k_raw)
    transfer = qi_growth_transfer(Fraction(3, 2), Fraction(2), k_int, 3)

    checked = 0
    for u in range(g.vertex_count):
        if g.rim_distance(u) <= max_n:
            continue
        counts = ball_counts(g, u, max_n)
        checked += 1
        if not _counts_dominate(counts, transfer.a_prime, Fraction(2), k_int, max_n):
            raise GrowthViolation(
                f"counts at center {u} fall below the transferred bound: {counts}"
            )
    root_fit = None
    if g.rim_distance(root) > max_n and max_n >= 2:
        try:
            root_fit = growth_fit(ball_counts(g, root, max_n), (0, max_n))
        except NotExponential:
            root_fit = None
    return PipelineResult(
        root=root,
        embed_k_scaled=emb.k_measured,
        transfer_k=k_int,
        transfer=transfer,
        centers_checked=checked,
        max_n=max_n,
        root_fit=root_fit,
        passed=True,
    )
