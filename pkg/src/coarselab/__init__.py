"""coarselab: finite-scale experiments in coarse geometry.

Hyperbolicity estimation, ideal-triangle barycenter proxies, trivalent
tree embeddings, growth transfer, metric graph bundles over a truncated
ray, flows, flaring, shadowing, and a discretization pipeline from
sampled metrics, with a deterministic experiment CLI.
"""

from . import bundles, embedding, errors, flows, graphs, growth, hyperbolicity, nets

__version__ = "0.1.0"

__all__ = [
    "bundles",
    "embedding",
    "errors",
    "flows",
    "graphs",
    "growth",
    "hyperbolicity",
    "nets",
    "__version__",
]
