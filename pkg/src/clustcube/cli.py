"""Command-line interface: every engine capability behind one executable.

Subcommands: generate, ingest, validate, objects, lattice, select, build,
rollup, cluster, regress, export, serve.  ``--json`` switches stdout to
machine-readable JSON.  Exit codes: 0 success, 1 domain error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import csv as _csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codq import compose_global, load_codq_file, materialize_objects, parse_codq
from .cube import build, CubeConfig, cell_sizes, export_cube, roll_up, rollup_key_mapping
from .errors import ClustCubeError
from .lattice import (BalancedOccupancy, CuboidId, DimensionSpec, enumerate_lattice,
                      format_cuboid, parse_cuboid, Pinned, select_cuboids, occupancy_entropy)
from .mdclust import FeatureMatrix, kmeans, silhouette
from .mdregress import accumulate, fit, merge_all, RegressionStats
from .star_store import load_star_data, StarData, validate_star
from .tourism import GenConfig, generate, preset_by_name, presets, SCALES


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(text if text is not None else json.dumps(payload, indent=2))


def _load(args) -> StarData:
    if not args.data_dir:
        raise ClustCubeError("--data-dir is required for this command")
    return load_star_data(args.data_dir)


def _preset_objects(data: StarData, preset_name: str) -> tuple:
    preset = preset_by_name(preset_name)
    spec = parse_codq(preset.codq_text)
    objects = materialize_objects(compose_global([spec]), data.tables)
    return preset, objects


def _cuboid_for(preset, args) -> CuboidId:
    if getattr(args, "apex", False):
        return CuboidId(tuple(None for _ in preset.dimensions))
    if getattr(args, "at", None):
        return parse_cuboid(preset.dimensions, args.at)
    return preset.default_cuboid


def _config_from(args, preset=None) -> CubeConfig:
    return CubeConfig(
        k=args.k if getattr(args, "k", None) is not None else (preset.default_k if preset else 3),
        seed=getattr(args, "seed", None) or 0,
        min_cell_size=getattr(args, "min_cell_size", None) or 3,
        lam=getattr(args, "l2", None) or 0.0,
        target=getattr(args, "target", None),
        workers=getattr(args, "workers", None) or 1,
    )


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_generate(args) -> int:
    counts = generate(GenConfig(seed=args.seed, scale=args.scale, out_dir=args.out))
    _emit(args, {"out": str(args.out), "seed": args.seed, "scale": args.scale, "tables": counts},
          f"wrote {sum(counts.values())} rows across {len(counts)} tables to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    data = _load(args)
    counts = {name: len(t.rows) for name, t in data.tables.items()}
    _emit(args, {"fact": data.schema.fact, "tables": counts},
          "\n".join(f"{name}: {n} rows" for name, n in counts.items()))
    return 0


def cmd_validate(args) -> int:
    data = _load(args)
    report = validate_star(data.schema, data.tables)
    _emit(args, report.to_dict(),
          "star is valid" if report.ok else f"{len(report.violations)} violations:\n"
          + "\n".join(f"  [{v.kind}] {v.table}: {v.detail}" for v in report.violations))
    return 0


def cmd_objects(args) -> int:
    data = _load(args)
    if args.codq:
        specs = [load_codq_file(p) for p in args.codq]
        objects = materialize_objects(compose_global(specs), data.tables)
        name = ",".join(args.codq)
    else:
        if not args.preset:
            raise ClustCubeError("objects needs --preset or --codq")
        _, objects = _preset_objects(data, args.preset)
        name = args.preset
    limit = args.limit if args.limit is not None else len(objects.objects)
    payload = {
        "source": name,
        "count": len(objects.objects),
        "schema": [{"name": a.name, "type": a.type.value, "role": a.role,
                    "source": f"{a.source_table}.{a.source_column}"} for a in objects.schema.attributes],
        "objects": [list(o) for o in objects.objects[:limit]],
    }
    _emit(args, payload, f"{payload['count']} objects with {len(payload['schema'])} attributes")
    return 0


def _parse_levels(text: str) -> list[DimensionSpec]:
    dims = []
    for i, part in enumerate(text.split(",")):
        n = int(part)
        if n < 1:
            raise ClustCubeError("every dimension needs at least one level")
        dims.append(DimensionSpec(f"d{i}", tuple(f"l{j}" for j in range(n))))
    return dims


def cmd_lattice(args) -> int:
    if args.dims is not None or args.levels:
        if args.levels:
            dims = _parse_levels(args.levels)
        else:
            dims = [DimensionSpec(f"d{i}", ("l0",)) for i in range(args.dims)]
        lat = enumerate_lattice(dims)
        _emit(args, {"cuboids": lat.size}, f"{lat.size} cuboids")
        return 0
    data = _load(args)
    wanted = [preset_by_name(args.preset)] if args.preset else presets()
    info = []
    for p in wanted:
        lat = enumerate_lattice(p.dimensions)
        info.append({"name": p.name,
                     "dimensions": [d.name for d in p.dimensions],
                     "levels": {d.name: list(d.levels) for d in p.dimensions},
                     "cuboids": lat.size,
                     "default_cuboid": format_cuboid(p.dimensions, p.default_cuboid),
                     "default_k": p.default_k,
                     "target": p.target})
    _emit(args, {"presets": info},
          "\n".join(f"{i['name']}: {len(i['dimensions'])} dimensions, {i['cuboids']} cuboids" for i in info))
    return 0


def cmd_select(args) -> int:
    data = _load(args)
    preset, objects = _preset_objects(data, args.preset)
    lat = enumerate_lattice(preset.dimensions)
    coord_tables = {a.source_table for a in objects.schema.attributes if a.role == "coordinate"}
    candidates = [c for c in lat.cuboids
                  if all(ch is None or d.name in coord_tables
                         for d, ch in zip(lat.dimensions, c.choices))]
    occupancy = {c: cell_sizes(c, preset.dimensions, objects, data) for c in candidates}
    if args.pin:
        policy = Pinned(tuple(parse_cuboid(preset.dimensions, p) for p in args.pin))
    else:
        policy = BalancedOccupancy()
    chosen = select_cuboids(lat, occupancy, policy, args.k)
    payload = {"preset": args.preset,
               "selected": [{"cuboid": format_cuboid(preset.dimensions, c),
                             "level": c.level(),
                             "entropy": occupancy_entropy(occupancy.get(c, []))} for c in chosen]}
    _emit(args, payload, "\n".join(s["cuboid"] or "(apex)" for s in payload["selected"]))
    return 0


def cmd_build(args) -> int:
    data = _load(args)
    preset, objects = _preset_objects(data, args.cuboid)
    cc = build(_cuboid_for(preset, args), preset.dimensions, objects, data, _config_from(args, preset))
    payload = export_cube(cc)
    if args.out:
        Path(args.out).write_text(json.dumps(payload), encoding="utf-8")
    _emit(args, payload,
          f"built {args.cuboid} at {payload['cuboid'] or '(apex)'}: {len(payload['cells'])} cells, "
          f"{payload['unplaced_count']} unplaced of {payload['total_objects']} objects")
    return 0


def cmd_rollup(args) -> int:
    data = _load(args)
    preset, objects = _preset_objects(data, args.cuboid)
    child = build(_cuboid_for(preset, args), preset.dimensions, objects, data, _config_from(args, preset))
    mapping = rollup_key_mapping(child, args.dim)
    parent = roll_up(child, args.dim, args.mode)
    payload = export_cube(parent)
    key_names = [d.name for d, c in zip(parent.dimensions, parent.cuboid.choices) if c is not None]
    children_of = {}
    child_names = [d.name for d, c in zip(child.dimensions, child.cuboid.choices) if c is not None]
    for pk, child_keys in mapping.items():
        if pk is None:
            continue
        children_of[json.dumps(dict(zip(key_names, pk)))] = [
            {"key": dict(zip(child_names, ck)), "count": child.cells[ck].count} for ck in child_keys]
    payload["children"] = children_of
    if args.out:
        Path(args.out).write_text(json.dumps(payload), encoding="utf-8")
    _emit(args, payload,
          f"rolled up {args.dim} ({args.mode}): {len(parent.cells)} cells from {len(child.cells)}")
    return 0


def _matrix_from_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for record in _csv.reader(f):
            if record:
                rows.append([float(v) for v in record])
    if not rows:
        raise ClustCubeError(f"matrix file {path} is empty")
    return np.asarray(rows)


def cmd_cluster(args) -> int:
    if args.matrix:
        m = FeatureMatrix.from_array(_matrix_from_csv(args.matrix))
        cl = kmeans(m, args.k, args.seed, max_iter=args.max_iter, tol=args.tol)
        payload = cl.to_dict()
        if cl.k >= 2:
            payload["silhouette"] = silhouette(m, cl)
        _emit(args, payload, f"k={cl.k} sse={cl.sse:.6g} iterations={cl.iterations}")
        return 0
    data = _load(args)
    preset, objects = _preset_objects(data, args.cuboid)
    cc = build(_cuboid_for(preset, args), preset.dimensions, objects, data, _config_from(args, preset))
    cells = []
    from .codq import subset
    from .mdclust import featurize
    for key in sorted(cc.cells):
        cell = cc.cells[key]
        entry = {"key": list(key), "count": cell.count}
        if cell.clustering is not None:
            entry["k"] = cell.clustering.k
            entry["sizes"] = cell.clustering.sizes()
            entry["sse"] = cell.clustering.sse
            if cell.clustering.k >= 2:
                fm = featurize(subset(objects, cell.object_indices), impute=True)
                entry["silhouette"] = silhouette(fm, cell.clustering)
        cells.append(entry)
    _emit(args, {"cuboid": format_cuboid(preset.dimensions, cc.cuboid), "cells": cells},
          f"{len(cells)} cells clustered")
    return 0


def _regress_csv(args) -> int:
    with open(args.csv, newline="", encoding="utf-8") as f:
        reader = _csv.reader(f)
        header = next(reader)
        records = [[float(v) for v in row] for row in reader if row]
    if args.target not in header:
        raise ClustCubeError(f"target column {args.target!r} not in {header}")
    t = header.index(args.target)
    names = ["intercept"] + [h for i, h in enumerate(header) if i != t]
    rows = [[1.0] + [r[i] for i in range(len(header)) if i != t] for r in records]
    ys = [r[t] for r in records]
    parts = max(1, args.parts or 1)
    bounds = [round(i * len(rows) / parts) for i in range(parts + 1)]
    stats = []
    for lo, hi in zip(bounds, bounds[1:]):
        s = RegressionStats.zeros(len(names))
        for x, y in zip(rows[lo:hi], ys[lo:hi]):
            s = accumulate(s, x, y)
        stats.append(s)
    merged = merge_all(stats)
    result = fit(merged, args.l2 or 0.0, predictor_names=names)
    payload = result.to_dict()
    payload["parts"] = parts
    _emit(args, payload, f"beta={result.beta.tolist()} r2={result.r2:.6f} rmse={result.rmse:.6g}")
    return 0


def cmd_regress(args) -> int:
    if args.csv:
        return _regress_csv(args)
    data = _load(args)
    preset, objects = _preset_objects(data, args.cuboid)
    config = _config_from(args, preset)
    cc = build(_cuboid_for(preset, args), preset.dimensions, objects, data, config)
    cells = []
    all_stats = []
    for key in sorted(cc.cells):
        cell = cc.cells[key]
        entry = {"key": list(key), "count": cell.count}
        if cell.regression is not None:
            entry["regression"] = cell.regression.to_dict()
        if cell.insufficient_rows:
            entry["insufficient_rows"] = True
        if cell.reg_stats is not None:
            all_stats.append(cell.reg_stats)
        cells.append(entry)
    payload = {"cuboid": format_cuboid(preset.dimensions, cc.cuboid),
               "target": cc.encoding.target if cc.encoding else None,
               "cells": cells}
    if all_stats:
        pooled = merge_all(all_stats)
        if pooled.n >= pooled.d:
            payload["overall"] = fit(pooled, config.lam,
                                     predictor_names=cc.encoding.names).to_dict()
    _emit(args, payload, f"{len(cells)} cells regressed on {payload['target']}")
    return 0


def cmd_export(args) -> int:
    doc = json.loads(Path(args.cube).read_text(encoding="utf-8"))
    if args.format == "csv":
        buf = io.StringIO()
        writer = _csv.writer(buf)
        key_names = [d["name"] for d in doc["dimensions"] if d["at"] is not None]
        writer.writerow(key_names + ["count", "k", "sse", "r2", "rmse", "fit_n"])
        for cell in doc["cells"]:
            cl = cell.get("clustering") or {}
            rg = cell.get("regression") or {}
            writer.writerow([cell["key"][n] for n in key_names]
                            + [cell["count"], cl.get("k", ""), cl.get("sse", ""),
                               rg.get("r2", ""), rg.get("rmse", ""), rg.get("n", "")])
        sys.stdout.write(buf.getvalue())
        return 0
    _emit(args, doc, None)
    return 0


def cmd_serve(args) -> int:
    import secrets

    import uvicorn

    from .service import create_app

    token = args.auth_token
    if token is None:
        import os
        token = os.environ.get("CLUSTCUBE_TOKEN") or secrets.token_hex(16)
        print(f"auth token: {token}", file=sys.stderr)
    host, _, port = args.bind.partition(":")
    app = create_app(args.data_dir, auth_token=token, ui_dir=args.ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustcube",
                                     description="OLAP cubes with clustered complex objects in their cells")
    parser.add_argument("--version", action="version", version=f"clustcube {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data_dir=True):
        p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
        if data_dir:
            p.add_argument("--data-dir", help="directory with schema.json and table CSVs")

    p = sub.add_parser("generate", help="write a seeded synthetic tourism dataset")
    common(p, data_dir=False)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scale", choices=sorted(SCALES), default="tiny")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="load all tables and report row counts")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("validate", help="check foreign keys, hierarchies and measures")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("objects", help="materialize complex objects for a preset or query file")
    common(p)
    p.add_argument("--preset")
    p.add_argument("--codq", action="append", help="query file; repeat to compose")
    p.add_argument("--limit", type=int, help="cap the number of objects printed")
    p.set_defaults(func=cmd_objects)

    p = sub.add_parser("lattice", help="count or describe cuboid lattices")
    common(p)
    p.add_argument("--dims", type=int, help="N flat dimensions")
    p.add_argument("--levels", help="comma-separated level counts, e.g. 3,1,2")
    p.add_argument("--preset")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("select", help="pick interesting cuboids for a preset")
    common(p)
    p.add_argument("--preset", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--pin", action="append", help="pin an exact cuboid (dim=level,...); repeatable")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("build", help="build a cube: group, cluster and regress per cell")
    common(p)
    p.add_argument("--cuboid", required=True, help="preset cuboid name")
    p.add_argument("--at", help="consolidation spec dim=level,... (default: preset base)")
    p.add_argument("--apex", action="store_true", help="build at the apex (single cell)")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-cell-size", type=int, dest="min_cell_size")
    p.add_argument("--l2", type=float, help="ridge strength for the per-cell fits")
    p.add_argument("--target", help="regression target attribute")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="write the cube export JSON here")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("rollup", help="roll a built cube one step up along a dimension")
    common(p)
    p.add_argument("--cuboid", required=True)
    p.add_argument("--at")
    p.add_argument("--apex", action="store_true")
    p.add_argument("--dim", required=True)
    p.add_argument("--mode", choices=["recluster", "merge_stats"], default="recluster")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-cell-size", type=int, dest="min_cell_size")
    p.add_argument("--l2", type=float)
    p.add_argument("--target")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rollup)

    p = sub.add_parser("cluster", help="k-means over a preset cube's cells or a raw matrix")
    common(p)
    p.add_argument("--cuboid")
    p.add_argument("--at")
    p.add_argument("--apex", action="store_true")
    p.add_argument("--matrix", help="headerless numeric CSV; cluster it directly")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, dest="max_iter", default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--min-cell-size", type=int, dest="min_cell_size")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("regress", help="least-squares fits per cell, or over a raw CSV")
    common(p)
    p.add_argument("--cuboid")
    p.add_argument("--at")
    p.add_argument("--apex", action="store_true")
    p.add_argument("--csv", help="headered numeric CSV; non-target columns are predictors")
    p.add_argument("--target")
    p.add_argument("--l2", type=float)
    p.add_argument("--parts", type=int,
                   help="accumulate statistics in N shards and merge before fitting")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-cell-size", type=int, dest="min_cell_size")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("export", help="re-emit a cube file as JSON or a cell-summary CSV")
    common(p, data_dir=False)
    p.add_argument("--cube", required=True, help="cube JSON written by build/rollup --out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="run the HTTP JSON service")
    common(p)
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--auth-token")
    p.add_argument("--ui-dir", help="serve this directory as the web UI root")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ClustCubeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream consumer (head, etc.) closed the pipe; leave quietly
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
