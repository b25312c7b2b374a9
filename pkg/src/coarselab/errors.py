"""Exception hierarchy for coarselab.

Every checked precondition or structural failure raises a subclass of
CoarselabError so the CLI can map library failures to exit codes uniformly.
Exceptions that signal a *property violation* (an experiment outcome, not a
usage bug) derive from PropertyViolation.
"""

from __future__ import annotations


class CoarselabError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# graph construction / lookup


class GraphError(CoarselabError):
    pass


class DisconnectedGraph(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class InvalidVertex(GraphError):
    pass


class EmptySet(GraphError):
    pass


# ---------------------------------------------------------------------------
# hyperbolicity toolkit


class TooLargeForExhaustive(CoarselabError):
    pass


class NotQuasigeodesic(CoarselabError):
    pass


class JunctionTooSharp(CoarselabError):
    def __init__(self, index: int, product, cap) -> None:
        super().__init__(f"junction {index} has product {product} > cap {cap}")
        self.index = index
        self.product = product
        self.cap = cap


class DetourEndpointsMismatch(CoarselabError):
    pass


class NotAPath(CoarselabError):
    pass


class NoDetour(CoarselabError):
    pass


# ---------------------------------------------------------------------------
# growth


class WindowTooShort(CoarselabError):
    pass


class NotExponential(CoarselabError):
    pass


class InvalidParams(CoarselabError):
    pass


class EmbeddingFailed(CoarselabError):
    pass


class PropertyViolation(CoarselabError):
    """An asserted finite-scale inequality failed; reported, never hidden."""


class GrowthViolation(PropertyViolation):
    pass


# ---------------------------------------------------------------------------
# barycenters and tree embedding


class DegenerateTriangle(CoarselabError):
    pass


class RadiusTooLarge(CoarselabError):
    pass


class NotInterior(CoarselabError):
    pass


class NoBranchPair(CoarselabError):
    def __init__(self, vertex: int, tree_vertex: int | None = None) -> None:
        msg = f"no branch pair at vertex {vertex}"
        if tree_vertex is not None:
            msg += f" (tree vertex {tree_vertex})"
        super().__init__(msg)
        self.vertex = vertex
        self.tree_vertex = tree_vertex


class DepthExceedsGraph(CoarselabError):
    pass


# ---------------------------------------------------------------------------
# bundles


class BundleError(CoarselabError):
    pass


class FiberDisconnected(BundleError):
    def __init__(self, level: int) -> None:
        super().__init__(f"fiber {level} is disconnected")
        self.level = level


class MissingCrossEdge(BundleError):
    def __init__(self, level: int, vertex: int, direction: str) -> None:
        super().__init__(f"fiber {level} vertex {vertex} has no {direction} cross edge")
        self.level = level
        self.vertex = vertex
        self.direction = direction


class TotalDisconnected(BundleError):
    pass


class NotInjectiveOnBall(BundleError):
    pass


class NoDirectionTriple(CoarselabError):
    def __init__(self, level: int) -> None:
        super().__init__(f"fiber {level} admits no direction triple")
        self.level = level


# ---------------------------------------------------------------------------
# flows / shadowing


class WindowTooLong(CoarselabError):
    pass


class HypothesisUnmet(CoarselabError):
    pass


class NoWitness(PropertyViolation):
    """Shadow search scanned every admissible start without a meeting level."""

    def __init__(self, scanned: int, min_start_distance: int, tolerance: int) -> None:
        super().__init__(
            f"no shadow witness among {scanned} starts at distance >= "
            f"{min_start_distance} with tolerance {tolerance}"
        )
        self.scanned = scanned
        self.min_start_distance = min_start_distance
        self.tolerance = tolerance


# ---------------------------------------------------------------------------
# discretization


class MetricAxiomViolation(CoarselabError):
    pass


class DisconnectedNetGraph(CoarselabError):
    pass


class BadPathFamily(CoarselabError):
    pass


# ---------------------------------------------------------------------------
# CLI


class ConfigInvalid(CoarselabError):
    pass
