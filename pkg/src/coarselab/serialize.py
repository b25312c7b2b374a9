"""Interchange formats: edge-list files, JSON manifests, generator specs.

Edge-list text format: one `u v` pair per line, 0-based ids, `#` starts a
comment. Graph manifests reference an edges file or a generator spec;
bundle manifests carry per-level edge lists and cross edges inline.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .bundles import (
    BundleSpec,
    GraphBundle,
    automorphism_bundle,
    horoball_bundle,
    product_bundle,
    validate_bundle,
)
from .errors import ConfigInvalid
from .graphs import (
    MetricGraph,
    build_graph,
    cycle_graph,
    free_group_ball,
    path_graph,
    regular_tree,
)
from .nets import SampledSpace, line_sample, sampled_space, scaled_graph_space

__all__ = [
    "save_edge_list",
    "load_edge_list",
    "graph_from_spec",
    "bundle_from_spec",
    "space_from_spec",
    "fiber_sampler_from_spec",
    "save_bundle_manifest",
    "load_bundle_manifest",
    "embedding_payload",
]


def save_edge_list(path: str | Path, g: MetricGraph, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.extend(f"{u} {v}" for u, v in g.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path: str | Path) -> MetricGraph:
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigInvalid(f"bad edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph(edges, meta={"kind": "file", "path": str(path)})


def graph_from_spec(spec: dict) -> MetricGraph:
    kind = spec.get("kind")
    if kind == "path":
        return path_graph(int(spec["n"]))
    if kind == "cycle":
        return cycle_graph(int(spec["n"]))
    if kind == "regular_tree":
        return regular_tree(int(spec["valence"]), int(spec["depth"]))
    if kind == "free_group_ball":
        return free_group_ball(int(spec["rank"]), int(spec["radius"]))
    if kind == "edges":
        return build_graph([(int(u), int(v)) for u, v in spec["edges"]])
    if kind == "file":
        return load_edge_list(spec["path"])
    raise ConfigInvalid(f"unknown graph kind {kind!r}")


def bundle_from_spec(spec: dict) -> GraphBundle:
    kind = spec.get("kind")
    if kind == "horoball":
        return horoball_bundle(graph_from_spec(spec["fiber"]), int(spec["levels"]))
    if kind == "product":
        return product_bundle(graph_from_spec(spec["fiber"]), int(spec["levels"]))
    if kind == "automorphism":
        return automorphism_bundle(
            int(spec["rank"]),
            dict(spec["word_images"]),
            int(spec["levels"]),
            int(spec["fiber_radius"]),
        )
    if kind == "manifest":
        return load_bundle_manifest(spec["path"])
    raise ConfigInvalid(f"unknown bundle kind {kind!r}")


def space_from_spec(spec: dict) -> SampledSpace:
    kind = spec.get("kind")
    if kind == "line":
        return line_sample(int(spec["count"]), Fraction(str(spec["spacing"])))
    if kind == "scaled_graph":
        return scaled_graph_space(
            graph_from_spec(spec["graph"]), Fraction(str(spec.get("scale", 1)))
        )
    if kind == "explicit":
        rows = spec["metric"]
        n = len(rows)
        full = [[Fraction(0)] * n for _ in range(n)]
        for i, row in enumerate(rows):
            if len(row) != i + 1:
                raise ConfigInvalid("explicit metric must be dense lower-triangular")
            for j, x in enumerate(row):
                full[i][j] = full[j][i] = Fraction(str(x))
        return sampled_space(full)
    raise ConfigInvalid(f"unknown space kind {kind!r}")


def fiber_sampler_from_spec(spec: dict) -> Callable[[int], SampledSpace]:
    """Level-indexed fiber sampler. `halving_graph` scales a base graph's
    metric by ratio**level (the sampled shortcut-fiber model)."""
    kind = spec.get("kind")
    if kind == "halving_graph":
        g = graph_from_spec(spec["graph"])
        ratio = Fraction(str(spec.get("ratio", Fraction(1, 2))))
        return lambda level: scaled_graph_space(g, ratio**level)
    if kind == "constant":
        space = space_from_spec(spec["space"])
        return lambda level: space
    raise ConfigInvalid(f"unknown fiber sampler kind {kind!r}")


def save_bundle_manifest(path: str | Path, bundle: GraphBundle) -> None:
    payload = {
        "fibers": [
            {"size": f.vertex_count, "edges": [list(e) for e in f.edges()]}
            for f in bundle.fibers
        ],
        "cross_edges": [sorted([list(e) for e in cross]) for cross in bundle.cross],
        "generator": (bundle.meta or {}).get("kind"),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_bundle_manifest(path: str | Path) -> GraphBundle:
    payload = json.loads(Path(path).read_text())
    spec = BundleSpec(
        fiber_sizes=tuple(int(f["size"]) for f in payload["fibers"]),
        fiber_edges=tuple(
            tuple((int(u), int(v)) for u, v in f["edges"]) for f in payload["fibers"]
        ),
        cross_edges=tuple(
            tuple((int(u), int(w)) for u, w in cross) for cross in payload["cross_edges"]
        ),
        meta={"kind": payload.get("generator") or "manifest"},
    )
    return validate_bundle(spec)


def embedding_payload(emb) -> dict:
    return {
        "tree_edges": [list(e) for e in emb.tree.edges()],
        "images": list(emb.images),
        "d_step": emb.d_step,
        "k_measured": str(emb.k_measured),
        "min_pair_distance": emb.min_pair_distance,
    }
