"""Reproducible experiment runner.

Every subcommand reads a JSON config (--config) and emits a deterministic
JSON report (--out, default stdout). Exit codes: 0 pass, 2 property
violation (including expected-failure controls), 1 usage or config error.
`suite` runs a config matrix, honoring per-entry expectation flags, with
optional thread parallelism (--threads, or COARSELAB_THREADS).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import jsonschema

from . import embedding, flows, growth, hyperbolicity, nets
from .bundles import endomorphism_section, fiber_map, section_through
from .errors import CoarselabError, ConfigInvalid, NoDetour, PropertyViolation
from .graphs import geodesic, hausdorff_distance
from .report import render_json, to_jsonable, write_csv
from .serialize import (
    bundle_from_spec,
    embedding_payload,
    fiber_sampler_from_spec,
    graph_from_spec,
    save_bundle_manifest,
    save_edge_list,
    space_from_spec,
)

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "op": {"type": "string"},
        "seed": {"type": "integer"},
        "out": {"type": "string"},
        "csv": {"type": "string"},
        "params": {"type": "object"},
    },
    "required": ["params"],
    "additionalProperties": False,
}

OPS = {}


def op(name):
    def deco(fn):
        OPS[name] = fn
        return fn

    return deco


def _frac(x) -> Fraction:
    return Fraction(str(x))


@op("gen")
def op_gen(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    out_edges = params["out_edges"]
    save_edge_list(out_edges, g, comment=params["graph"].get("kind"))
    manifest = {
        "name": params.get("name", params["graph"].get("kind", "graph")),
        "edges_file": str(out_edges),
        "generator": params["graph"],
    }
    manifest_path = params.get("out_manifest")
    if manifest_path:
        Path(manifest_path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return {"vertices": g.vertex_count, "edges": g.edge_count, "manifest": manifest}, False


@op("delta")
def op_delta(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    with_slim = params.get("slim", g.vertex_count <= 60)
    est = hyperbolicity.hyperbolicity_estimate(g, with_slim=with_slim)
    return {"estimate": est}, False


@op("gromov")
def op_gromov(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    value = hyperbolicity.gromov_product(g, params["base"], params["y"], params["z"])
    return {"value": value}, False


@op("chain")
def op_chain(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    chain = hyperbolicity.make_chain(g, params["anchors"])
    cert = hyperbolicity.chain_certify(
        chain, g, _frac(params["cap"]), int(params.get("leg_threshold", 1))
    )
    return {"chain": chain, "cert": cert}, False


@op("detour")
def op_detour(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    geo = geodesic(g, params["u"], params["v"])
    center = params.get("center", geo.vertices[len(geo.vertices) // 2])
    delta = hyperbolicity.delta_four_point(g).delta_four_point
    try:
        detours = hyperbolicity.sample_detours(
            g, geo, center, int(params.get("count", 100)), seed=seed
        )
    except NoDetour:
        return {"no_detour": True, "delta": delta}, False
    rows = [hyperbolicity.detour_check(g, geo, center, d, delta) for d in detours]
    failed = [r for r in rows if not r.passed]
    return (
        {"delta": delta, "sampled": len(rows), "failures": len(failed), "reports": rows},
        bool(failed),
    )


@op("growth")
def op_growth(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    center = params.get("center", (g.meta or {}).get("root", 0))
    counts = growth.ball_counts(g, center, int(params["n_max"]))
    lo, hi = params.get("window", [0, len(counts) - 1])
    fit = growth.growth_fit(counts, (int(lo), int(hi)))
    return {"counts": counts, "fit": fit}, False


@op("growth-pipeline")
def op_growth_pipeline(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    result = growth.barycenter_growth_pipeline(
        g,
        int(params.get("surjectivity_constant", 0)),
        depth=int(params.get("depth", 3)),
        max_n=int(params.get("max_n", 4)),
    )
    return {"pipeline": result}, not result.passed


@op("embed-t3")
def op_embed(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    root = params.get("root", (g.meta or {}).get("root", 0))
    depth = int(params["depth"])
    if "d_step" in params or "cap" in params:
        cfg = embedding.EmbedConfig(
            junction_cap=_frac(params.get("cap", 0)),
            d_step=int(params.get("d_step", 2)),
            depth=depth,
            proxy_radius=int(params.get("proxy_radius", 2 * int(params.get("d_step", 2)) * depth)),
        )
    else:
        cfg = embedding.default_embed_config(g, depth)
    emb = embedding.embed_t3(g, root, cfg)
    report = embedding.verify_embedding(g, emb)
    return {"embedding": embedding_payload(emb), "verify": report}, not report.passed


@op("surj-const")
def op_surj(params: dict, seed: int) -> tuple[dict, bool]:
    g = graph_from_spec(params["graph"])
    value = embedding.coarse_surjectivity_constant(g, int(params["radius"]))
    return {"constant": value, "unbounded": value is None}, False


@op("bundle")
def op_bundle(params: dict, seed: int) -> tuple[dict, bool]:
    b = bundle_from_spec(params["bundle"])
    if params.get("out_manifest"):
        save_bundle_manifest(params["out_manifest"], b)
    profile = {r: b.properness_profile(r) for r in range(1, int(params.get("profile_max", 8)) + 1)}
    return {
        "levels": b.levels,
        "fiber_sizes": [f.vertex_count for f in b.fibers],
        "total_vertices": b.total.vertex_count,
        "max_fiber_valence": b.max_fiber_valence,
        "properness_profile": profile,
        "fiber_map_k": [fiber_map(b, i).k_measured for i in range(b.levels)],
    }, False


@op("flow")
def op_flow(params: dict, seed: int) -> tuple[dict, bool]:
    b = bundle_from_spec(params["bundle"])
    report = flows.flow_bound_check(b, params["base_set"], int(params["k"]))
    return {"flow_bound": report}, not report.passed


@op("flare")
def op_flare(params: dict, seed: int) -> tuple[dict, bool]:
    b = bundle_from_spec(params["bundle"])
    report = flows.flaring_check(
        b,
        int(params["k"]),
        int(params["n_k"]),
        _frac(params["lambda"]),
        int(params["m_k"]),
        int(params.get("samples", 50)),
        seed=seed,
    )
    return {"flaring": report}, not report.passed


@op("diverge")
def op_diverge(params: dict, seed: int) -> tuple[dict, bool]:
    b = bundle_from_spec(params["bundle"])
    mode = params.get("mode", "greedy")
    if mode == "endo":
        s1 = endomorphism_section(b, int(params["start1"]))
        s2 = endomorphism_section(b, int(params["start2"]))
    else:
        s1 = section_through(b, b.global_id(0, int(params["start1"])))
        s2 = section_through(b, b.global_id(0, int(params["start2"])))
    if "delta" in params:
        delta = _frac(params["delta"])
    else:
        delta = hyperbolicity.delta_four_point(b.total).delta_four_point
    report = flows.divergence_check(
        b, s1, s2, delta, int(params["m_k"]), params.get("start_cap")
    )
    return {"divergence": report, "delta": delta}, not report.passed


@op("shadow")
def op_shadow(params: dict, seed: int) -> tuple[dict, bool]:
    b = bundle_from_spec(params["bundle"])
    target = section_through(b, b.global_id(0, int(params.get("target_start", 0))))
    result = flows.shadow_search(
        b, target, int(params["tolerance"]), int(params["min_start_distance"])
    )
    return {"shadow": result}, False


@op("net")
def op_net(params: dict, seed: int) -> tuple[dict, bool]:
    space = space_from_spec(params["space"])
    net = nets.separated_net(space)
    g, mapping = nets.net_graph(net, space)
    audit = nets.qi_audit(list(mapping), g, space, params.get("pair_samples"), seed=seed)
    return {
        "net": net,
        "graph_vertices": g.vertex_count,
        "graph_max_valence": g.max_valence,
        "audit": audit,
    }, audit.failed


@op("approx-bundle")
def op_approx_bundle(params: dict, seed: int) -> tuple[dict, bool]:
    base = space_from_spec(params["base"])
    sampler = fiber_sampler_from_spec(params["fiber_sampler"])
    c = _frac(params.get("c", 1))
    b = nets.approx_bundle(base, sampler, c)
    report: dict = {
        "levels": b.levels,
        "fiber_sizes": [f.vertex_count for f in b.fibers],
        "nets": b.meta["nets"],
    }
    violation = False
    if params.get("reference"):
        ref = bundle_from_spec(params["reference"])
        mapping = []
        for level in range(b.levels + 1):
            for p in b.meta["nets"][level]:
                mapping.append(ref.global_id(level, p))
        audit = nets.qi_audit(mapping, b.total, nets.scaled_graph_space(ref.total))
        bound = 6 * c + 4
        ok = (not audit.failed) and audit.multiplicative <= bound
        report["audit"] = audit
        report["audit_bound"] = bound
        report["audit_pass"] = ok
        violation = not ok
    return report, violation


@op("bowditch")
def op_bowditch(params: dict, seed: int) -> tuple[dict, bool]:
    if "fiber" in params:
        b = bundle_from_spec(params["fiber"]["bundle"])
        level = int(params["fiber"]["level"])
        g = b.fibers[level]
    else:
        g = graph_from_spec(params["graph"])
    fam_spec = params.get("family", {"kind": "geodesic"})
    if fam_spec["kind"] == "geodesic":
        family = lambda u, v: geodesic(g, u, v).vertices  # noqa: E731
    elif fam_spec["kind"] == "waypoints":
        base = graph_from_spec(fam_spec["base"])
        family = nets.spaced_waypoint_family(base, int(fam_spec["spacing"]))
    else:
        raise ConfigInvalid(f"unknown family kind {fam_spec['kind']!r}")
    report = nets.bowditch_check(g, family, int(params["bound"]))
    return {"bowditch": report}, not report.passed


def _csv_rows(name: str, result: dict) -> tuple[list[str], list[tuple]] | None:
    if name == "flow":
        rep = result["flow_bound"]
        return ["level", "front_size", "bound", "pass"], [tuple(r) for r in rep.rows]
    if name == "growth":
        counts = result["counts"]
        return ["n", "count"], [(i, c) for i, c in enumerate(counts)]
    if name == "detour" and "reports" in result:
        return (
            ["n", "length", "bound", "pass"],
            [(r.n, r.length, r.bound, r.passed) for r in result["reports"]],
        )
    return None


def execute_config(config: dict, default_op: str | None = None) -> tuple[dict, int]:
    """Run one config; returns (record, exit_code)."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigInvalid(str(exc)) from exc
    name = config.get("op", default_op)
    if name not in OPS:
        raise ConfigInvalid(f"unknown op {name!r}")
    seed = int(config.get("seed", 0))
    try:
        result, violation = OPS[name](config["params"], seed)
        record = {
            "op": name,
            "seed": seed,
            "inputs": config["params"],
            "result": to_jsonable(result),
            "pass": not violation,
        }
        code = 2 if violation else 0
    except PropertyViolation as exc:
        record = {
            "op": name,
            "seed": seed,
            "inputs": config["params"],
            "result": {"violation": type(exc).__name__, "detail": str(exc)},
            "pass": False,
        }
        code = 2
        result = None
    if result is not None and config.get("csv"):
        rows = _csv_rows(name, result)
        if rows:
            write_csv(config["csv"], rows[0], rows[1])
    return record, code


def run_suite(matrix: dict, threads: int) -> tuple[dict, int]:
    entries = matrix.get("configs")
    if entries is None:
        raise ConfigInvalid("matrix must carry a 'configs' list")

    def load_entry(entry: dict) -> dict:
        if "file" in entry:
            return json.loads(Path(entry["file"]).read_text())
        if "config" in entry:
            return entry["config"]
        raise ConfigInvalid("matrix entry needs 'config' or 'file'")

    def run_one(idx_entry):
        idx, entry = idx_entry
        expect = entry.get("expect", "pass")
        try:
            record, code = execute_config(load_entry(entry))
            outcome = "pass" if code == 0 else "violation"
        except CoarselabError as exc:
            record = {"error": type(exc).__name__, "detail": str(exc)}
            outcome = "error"
        matched = outcome == expect
        return idx, {
            "name": entry.get("name", f"config-{idx}"),
            "expect": expect,
            "outcome": outcome,
            "expectation_met": matched,
            "record": record,
        }

    results = [None] * len(entries)
    if threads > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for idx, rec in pool.map(run_one, enumerate(entries)):
                results[idx] = rec
    else:
        for idx, rec in map(run_one, enumerate(entries)):
            results[idx] = rec
    all_met = all(r["expectation_met"] for r in results)
    summary = {
        "total": len(results),
        "expectations_met": sum(r["expectation_met"] for r in results),
        "all_met": all_met,
        "results": results,
    }
    return summary, 0 if all_met else 2


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="coarselab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = sorted(OPS) + ["run", "suite"]
    for name in commands:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="report path (default stdout)")
        p.add_argument("--csv", default=None, help="CSV output path where supported")
        p.add_argument(
            "--threads",
            type=int,
            default=int(os.environ.get("COARSELAB_THREADS", "1")),
            help="suite parallelism (or COARSELAB_THREADS)",
        )
    args = parser.parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "suite":
            report, code = run_suite(config, max(1, args.threads))
        else:
            if args.seed is not None:
                config["seed"] = args.seed
            if args.csv is not None:
                config["csv"] = args.csv
            default_op = None if args.command == "run" else args.command
            report, code = execute_config(config, default_op=default_op)
        text = render_json(report)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return code
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CoarselabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
