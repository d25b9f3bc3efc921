"""Command line front end.

Every subcommand runs the same pipeline the TCP broker serves, so `birs
build` followed by `birs serve` answers queries identically to the
in-process calls. Output is line oriented with stable field order;
repeated runs over the same inputs emit byte-identical text.

Exit codes: 0 on success, 1 for module errors (one machine-readable
`error: <Kind>: <detail>` line on stderr), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import sys
from pathlib import Path

from . import pipeline, service
from .building_model import ModelError
from .gis_ingest import GisError
from .grid_map import (FREE, OCCUPIED, UNKNOWN, GridError, cluster_diff,
                       diff_grids, export_map)
from .ontology import Iri, OntologyError, Var, export_ntriples
from .progress import ProgressError, format_findings
from .step_parser import StepError, parse_spf
from .topo_map import TopoError, export_topo, plan_path, resolve_space

# Failures a user can cause; anything else is a bug and keeps its traceback.
MODULE_ERRORS = (StepError, ModelError, GisError, OntologyError, TopoError,
                 GridError, ProgressError, service.BindFailureError,
                 OSError, ValueError)


def _fmt(value: float) -> str:
    return format(value, "g")


def _load_config(args) -> pipeline.Config:
    config = (pipeline.load_config(args.config)
              if getattr(args, "config", None) else pipeline.Config())
    overrides = {
        key: getattr(args, key)
        for key in ("resolution", "padding", "bounds", "min_cluster_area")
        if getattr(args, key, None) is not None
    }
    if overrides.get("bounds") is not None:
        overrides["bounds"] = tuple(overrides["bounds"])
    return dataclasses.replace(config, **overrides) if overrides else config


# ------------------------------------------------------------ subcommands


def cmd_parse(args) -> int:
    graph = parse_spf(Path(args.file).read_text(encoding="utf-8"))
    print(f"entities {len(graph.entities)}")
    print(f"types {len(graph.type_index)}")
    print(f"dangling {len(graph.dangling)}")
    for name in sorted(graph.type_index):
        print(f"{name} {len(graph.type_index[name])}")
    return 0


def cmd_build(args) -> int:
    artifacts = pipeline.build_artifacts(_load_config(args))
    model = artifacts.model
    print(f"project {model.project_name}")
    print(f"storeys {len(model.storeys)}")
    print(f"spaces {len(model.spaces)}")
    print(f"landmarks {len(model.landmarks)}")
    print(f"doors {len(model.doors)}")
    print(f"boundaries {len(model.boundaries)}")
    print(f"obstacles {len(artifacts.site.obstacles)}")
    print(f"topo_nodes {len(artifacts.topo.nodes)}")
    print(f"topo_edges {len(artifacts.topo.edges)}")
    print(f"triples {len(artifacts.store)}")
    print(f"issues {len(artifacts.issues)}")
    for issue in artifacts.issues:
        where = issue.global_id or f"#{issue.entity_id}"
        print(f"issue {issue.error} {where} {issue.detail}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        triples_path = out / "ontology.nt"
        topo_path = out / "topo_map.txt"
        triples_path.write_text(export_ntriples(artifacts.store),
                                encoding="utf-8")
        topo_path.write_text(export_topo(artifacts.topo), encoding="utf-8")
        print(f"wrote {triples_path}")
        print(f"wrote {topo_path}")
    return 0


def cmd_grid(args) -> int:
    config = _load_config(args)
    artifacts = pipeline.build_artifacts(config)
    grid = artifacts.grid
    if grid is None:
        raise GridError("nothing to rasterize: empty site and no bounds")
    origin = grid.origin
    print(f"grid {grid.width}x{grid.height} resolution {_fmt(grid.resolution)}"
          f" origin {_fmt(origin.x)} {_fmt(origin.y)} {_fmt(origin.theta)}")
    print(f"cells occupied {int((grid.cells == OCCUPIED).sum())}"
          f" free {int((grid.cells == FREE).sum())}"
          f" unknown {int((grid.cells == UNKNOWN).sum())}")
    out = args.out if args.out is not None else config.map_out
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        image_path = out.with_suffix(".pgm")
        meta_path = out.with_suffix(".yaml")
        export_map(grid, image_path, meta_path)
        print(f"wrote {image_path}")
        print(f"wrote {meta_path}")
    return 0


def cmd_diff(args) -> int:
    config = _load_config(args)
    planned = pipeline.load_map_file(args.planned)
    built = pipeline.load_map_file(args.built)
    diff = diff_grids(planned, built)
    clusters = cluster_diff(diff, min_area=config.min_cluster_area)
    print(f"clusters {len(clusters)}")
    for cl in clusters:
        x, y = cl.centroid
        bbox = " ".join(_fmt(v) for v in cl.bbox)
        print(f"cluster {cl.cluster_id} {cl.kind} cells {len(cl.cells)}"
              f" area {_fmt(cl.area)} centroid {_fmt(x)} {_fmt(y)}"
              f" bbox {bbox}")
    return 0


def cmd_report(args) -> int:
    artifacts = pipeline.build_artifacts(_load_config(args))
    as_of = (datetime.date.fromisoformat(args.as_of)
             if args.as_of is not None else None)
    findings = pipeline.progress_findings(
        artifacts, as_of=as_of,
        planned_path=args.planned, built_path=args.built,
        min_area=args.min_cluster_area)
    sys.stdout.write(format_findings(findings))
    return 0


def cmd_plan(args) -> int:
    artifacts = pipeline.build_artifacts(_load_config(args))
    start = resolve_space(artifacts.model, args.frm)
    goal = resolve_space(artifacts.model, args.to)
    route = plan_path(artifacts.topo, start, goal)
    print(f"route {start} -> {goal}")
    print(f"nodes {' '.join(route.nodes)}")
    print(f"cost {_fmt(route.total_cost)}")
    for w in route.waypoints:
        x, y = w.point
        if w.kind == "room":
            print(f"waypoint room {w.room} at {_fmt(x)} {_fmt(y)}")
        else:
            trust = "yes" if w.grid_trust else "no"
            print(f"waypoint door {w.via} at {_fmt(x)} {_fmt(y)}"
                  f" width {_fmt(w.width)} height {_fmt(w.height)}"
                  f" grid_trust {trust}")
    return 0


def _tuplify(value):
    return tuple(_tuplify(v) for v in value) if isinstance(value, list) else value


def _term(text: str):
    """One query term: ?var, JSON literal, prefix:local IRI, or bare string."""
    if text.startswith("?") and len(text) > 1:
        return Var(text[1:])
    try:
        return _tuplify(json.loads(text))
    except json.JSONDecodeError:
        pass
    if ":" in text:
        prefix, local = text.split(":", 1)
        return Iri(prefix, local)
    return text


def _render(value) -> str:
    if isinstance(value, Iri):
        return str(value)
    if isinstance(value, tuple):
        return json.dumps(list(value))
    return json.dumps(value)


def cmd_query(args) -> int:
    artifacts = pipeline.build_artifacts(_load_config(args))
    pattern = tuple(_term(t) for t in args.terms)
    rows = artifacts.store.query([pattern])
    print(f"bindings {len(rows)}")
    for row in rows:
        print(" ".join(f"?{name}={_render(value)}"
                       for name, value in sorted(row.items())))
    return 0


def cmd_serve(args) -> int:
    artifacts = pipeline.build_artifacts(_load_config(args))
    server = service.serve(artifacts, args.addr, map_out=args.map_out)
    host, port = server.server_address[:2]
    print(f"listening {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ------------------------------------------------------------ wiring


def _add_config_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", type=Path, metavar="FILE",
                        help="YAML configuration file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="birs",
        description="Building-information maps, queries, and progress checks.")
    parser.add_argument(
        "--deterministic", action=argparse.BooleanOptionalAction, default=True,
        help="outputs are reproducible byte for byte (always on; flag kept "
             "so callers can state the expectation)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="print an entity census of a STEP file")
    p.add_argument("file", type=Path)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("build",
                       help="extract the model, ontology, and topological map")
    _add_config_option(p)
    p.add_argument("--out", type=Path, metavar="DIR",
                   help="also write ontology.nt and topo_map.txt here")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("grid", help="rasterize the site to an occupancy grid")
    _add_config_option(p)
    p.add_argument("--resolution", type=float, metavar="M")
    p.add_argument("--padding", type=float, metavar="M")
    p.add_argument("--bounds", type=float, nargs=4,
                   metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--out", type=Path, metavar="PREFIX",
                   help="write PREFIX.pgm and PREFIX.yaml")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("diff",
                       help="cluster the differences between two grids")
    _add_config_option(p)
    p.add_argument("--planned", type=Path, required=True, metavar="YAML")
    p.add_argument("--built", type=Path, required=True, metavar="YAML")
    p.add_argument("--min-area", dest="min_cluster_area", type=float,
                   metavar="M2")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("report",
                       help="classify grid differences against the schedule")
    _add_config_option(p)
    p.add_argument("--as-of", dest="as_of", metavar="DATE",
                   help="inspection date, ISO format")
    p.add_argument("--planned", type=Path, metavar="YAML",
                   help="as-planned grid (default: derived from the model)")
    p.add_argument("--built", type=Path, metavar="YAML")
    p.add_argument("--min-area", dest="min_cluster_area", type=float,
                   metavar="M2")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plan", help="plan a route between two rooms")
    _add_config_option(p)
    p.add_argument("--from", dest="frm", required=True, metavar="ROOM",
                   help="long name or GlobalId")
    p.add_argument("--to", dest="to", required=True, metavar="ROOM")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("query", help="match one triple pattern")
    _add_config_option(p)
    p.add_argument("terms", nargs=3, metavar="TERM",
                   help="subject predicate object; ?var binds, "
                        "prefix:local is an IRI, anything else a literal")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", help="run the TCP query broker")
    _add_config_option(p)
    p.add_argument("--addr", metavar="HOST:PORT",
                   help="listen address (beats BIRS_ADDR and the config)")
    p.add_argument("--map-out", dest="map_out", type=Path, metavar="PREFIX",
                   help="export the grid here for grid_meta consumers")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MODULE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
