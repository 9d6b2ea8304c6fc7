"""Command line entry points: cluster, generate, bench."""

import argparse
import json
import os
import sys

from . import bench as bench_mod
from . import graph as graph_mod
from .layout_io import ConstraintKind, generate_synthetic, parse_layout, write_layout, write_report
from .pipeline import IterationConfig, run_full, verify_clusterset
from .prescreen import PrescreenParams, build_candidates
from .geometry import extract_pattern


def _add_cluster_parser(sub):
    p = sub.add_parser("cluster", help="partition a layout's markers into pattern clusters")
    p.add_argument("--input", required=True, help="layout file")
    p.add_argument("--output", required=True, help="cluster report CSV (use - for stdout)")
    p.add_argument("--constraint", choices=["cosine", "edgemove"], help="override the file header")
    p.add_argument("--threshold", type=float, help="override the file header")
    p.add_argument("--radius", type=int, help="override the file header")
    p.add_argument("--grid", type=int, default=64, help="raster side in pixels (default 64)")
    p.add_argument("--dct-k", type=int, default=32, help="feature block size (default 32)")
    p.add_argument("--aligner", choices=["geo", "fft"], default="geo",
                   help="cosine-mode refinement aligner (default geo)")
    p.add_argument("--solver", choices=["lazy", "eager"], default="lazy")
    p.add_argument("--max-iters", type=int, default=3)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0,
                   help="accepted for interface parity; clustering is deterministic")
    p.add_argument("--report", help="write a JSON run report here")
    p.add_argument("--dump-graph", help="write first-iteration 'i j dx dy' edges here")
    p.add_argument("--prescreen-slack", type=float, default=0.05,
                   help="thumbnail threshold slack below the relaxed threshold")
    p.add_argument("--quantum", type=int, default=8, help="signature quantization in nm")
    p.add_argument("--no-prescreen", action="store_true", help="evaluate all pairs (slow)")
    p.add_argument("--verify", action="store_true", help="re-check every assignment before writing")


def _add_generate_parser(sub):
    p = sub.add_parser("generate", help="write a synthetic benchmark layout")
    p.add_argument("--output", required=True)
    p.add_argument("--templates", type=int, default=5)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=int, default=512)
    p.add_argument("--constraint", choices=["cosine", "edgemove"], default="cosine")
    p.add_argument("--threshold", type=float, help="default: 0.9 cosine, 10 edgemove")


def _add_bench_parser(sub):
    p = sub.add_parser("bench", help="run a scenario matrix with ablation variants")
    p.add_argument("--matrix", required=True, help="scenario config file")
    p.add_argument("--out", required=True, help="output directory for records.csv and table.txt")


def _apply_overrides(doc, args):
    changed = False
    radius = doc.pattern_radius
    kind = doc.constraint_kind
    threshold = doc.threshold
    if args.radius is not None and args.radius != radius:
        radius, changed = args.radius, True
    if args.constraint is not None and ConstraintKind(args.constraint) is not kind:
        kind, changed = ConstraintKind(args.constraint), True
    if args.threshold is not None and args.threshold != threshold:
        threshold, changed = args.threshold, True
    if not changed:
        return doc
    return type(doc)(
        radius, kind, threshold,
        doc.design_polygons, doc.polygon_ids, doc.markers, doc.marker_ids,
    )


def _cmd_cluster(args) -> int:
    doc = parse_layout(args.input)
    doc = _apply_overrides(doc, args)
    cfg = IterationConfig(
        max_iterations=args.max_iters,
        grid=args.grid,
        dct_k=args.dct_k,
        aligner=args.aligner,
        solver=args.solver,
        threads=args.threads,
        prescreen=PrescreenParams(quantum=args.quantum, cosine_slack=args.prescreen_slack),
        use_prescreen=not args.no_prescreen,
    )
    if args.dump_graph:
        _dump_first_graph(doc, cfg, args.dump_graph)
    clusters, report, stats = run_full(doc, cfg)
    if args.verify:
        verdict = verify_clusterset(clusters, doc, cfg)
        if not verdict:
            print(f"verification failed: {verdict.message}", file=sys.stderr)
            return 1
    data = write_report(report, None if args.output == "-" else args.output, doc)
    if args.output == "-":
        sys.stdout.write(data.decode("utf-8"))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(stats.to_json(), fh, indent=2)
            fh.write("\n")
    print(
        f"markers={stats.marker_count} clusters={stats.cluster_count} "
        f"iterations={stats.iterations_used} compression={stats.compression:.6f}",
        file=sys.stderr,
    )
    return 0


def _dump_first_graph(doc, cfg: IterationConfig, path: str):
    """Debug aid: rebuild the first-iteration relaxed graph and dump its edges."""
    from .graph import assemble, evaluate_pair_relaxed
    from . import raster

    slack = cfg.slack_for(doc, 0)
    cosine = doc.constraint_kind is ConstraintKind.COSINE
    patterns = [extract_pattern(doc, m.center()) for m in doc.markers]
    if cfg.use_prescreen:
        cand = build_candidates(
            patterns, doc.constraint_kind,
            doc.threshold - slack if cosine else doc.threshold, cfg.prescreen,
        )
        pairs = cand.pairs
    else:
        pairs = tuple((i, j) for i in range(len(patterns)) for j in range(i + 1, len(patterns)))
    feats = [raster.pattern_features(p, cfg.grid, cfg.dct_k) for p in patterns] if cosine else None
    results = [
        evaluate_pair_relaxed(
            patterns[i], patterns[j], doc, slack, grid=cfg.grid, dct_k=cfg.dct_k,
            fa=feats[i] if cosine else None, fb=feats[j] if cosine else None,
        )
        for i, j in pairs
    ]
    g = assemble(len(patterns), pairs, results)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(graph_mod.dump_edges(g))


def _cmd_generate(args) -> int:
    doc = generate_synthetic(
        args.templates, args.instances, args.jitter, args.seed,
        radius=args.radius,
        constraint=ConstraintKind(args.constraint),
        threshold=args.threshold,
    )
    write_layout(doc, args.output)
    print(
        f"wrote {args.output}: {len(doc.markers)} markers, {len(doc.design_polygons)} polygons",
        file=sys.stderr,
    )
    return 0


def _cmd_bench(args) -> int:
    scenarios = bench_mod.parse_matrix(args.matrix)
    os.makedirs(args.out, exist_ok=True)
    records, table = bench_mod.run_matrix(scenarios)
    with open(os.path.join(args.out, "records.csv"), "w", encoding="utf-8") as fh:
        fh.write(bench_mod.records_csv(records))
    with open(os.path.join(args.out, "table.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pattern-forge",
        description="cluster layout pattern markers under a cosine or edge-displacement constraint",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_cluster_parser(sub)
    _add_generate_parser(sub)
    _add_bench_parser(sub)
    args = parser.parse_args(argv)
    try:
        if args.command == "cluster":
            return _cmd_cluster(args)
        if args.command == "generate":
            return _cmd_generate(args)
        return _cmd_bench(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
