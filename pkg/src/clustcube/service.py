"""HTTP JSON service over the engine: the backend of the explorer suite.

The service holds an immutable snapshot of (star data, materialized
objects, built cubes).  Reads never lock: they grab the current snapshot
reference and work against it.  Builds compute a new cube from the
current snapshot and swap in a fresh snapshot atomically, one build per
cuboid at a time (a second build request for the same cuboid returns 409
unless it asks to wait).  Every response carries the engine version and
the snapshot identifier it was served from.

Auth is a single bearer token: POST /api/login exchanges the configured
token for a session token; every other endpoint requires it.
"""

from __future__ import annotations

import datetime as _dt
import json
import secrets
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .codq import compose_global, materialize_objects, ObjectSet, parse_codq, subset
from .cube import (build, Cell, ClustCube, CubeConfig, dice_cube, export_cube,
                   roll_up, rollup_key_mapping)
from .errors import ClustCubeError
from .lattice import format_cuboid
from .mdclust import featurize, silhouette
from .mdregress import fit, merge_all
from .star_store import load_star_data, StarData
from .tourism import CuboidPreset, presets

SESSION_TTL = _dt.timedelta(hours=12)


class LoginBody(BaseModel):
    token: str


class BuildBody(BaseModel):
    k: Optional[int] = None
    seed: Optional[int] = None
    min_cell_size: Optional[int] = None
    target: Optional[str] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    at: Optional[str] = None
    wait: bool = True

    model_config = {"populate_by_name": True}


class ClusterBody(BaseModel):
    k: int
    seed: int
    wait: bool = True


class RegressBody(BaseModel):
    target: str
    lam: Optional[float] = Field(default=None, alias="lambda")

    model_config = {"populate_by_name": True}


class RollupBody(BaseModel):
    dim: str
    mode: str = "merge_stats"


@dataclass(frozen=True)
class Snapshot:
    id: int
    cubes: dict[str, ClustCube] = field(default_factory=dict)


class Engine:
    """Mutable shell around immutable snapshots."""

    def __init__(self, data_dir: str | Path, auth_token: str):
        self.data_dir = Path(data_dir)
        self.data: StarData = load_star_data(self.data_dir)
        self.presets: dict[str, CuboidPreset] = {p.name: p for p in presets()}
        self.auth_token = auth_token
        self.snapshot = Snapshot(id=1)
        self._objects: dict[str, ObjectSet] = {}
        self._objects_lock = threading.Lock()
        self._swap_lock = threading.Lock()
        self._build_locks: dict[str, threading.Lock] = {name: threading.Lock() for name in self.presets}
        self._sessions: dict[str, _dt.datetime] = {}
        self._sessions_lock = threading.Lock()

    # -- sessions -----------------------------------------------------------
    def login(self, token: str) -> tuple[str, str]:
        if token != self.auth_token:
            raise HTTPException(status_code=401, detail="invalid token")
        session = secrets.token_hex(16)
        expires = _dt.datetime.now(_dt.timezone.utc) + SESSION_TTL
        with self._sessions_lock:
            self._sessions[session] = expires
        return session, expires.isoformat()

    def check_session(self, session: str) -> None:
        with self._sessions_lock:
            expiry = self._sessions.get(session)
            if expiry is not None and expiry < _dt.datetime.now(_dt.timezone.utc):
                del self._sessions[session]
                expiry = None
        if expiry is None:
            raise HTTPException(status_code=401, detail="missing or expired session token")

    # -- data ---------------------------------------------------------------
    def preset(self, name: str) -> CuboidPreset:
        p = self.presets.get(name)
        if p is None:
            raise HTTPException(status_code=404, detail=f"unknown cuboid {name!r}")
        return p

    def objects_for(self, name: str) -> ObjectSet:
        with self._objects_lock:
            objs = self._objects.get(name)
            if objs is None:
                p = self.preset(name)
                spec = parse_codq(p.codq_text)
                objs = materialize_objects(compose_global([spec]), self.data.tables)
                self._objects[name] = objs
        return objs

    def built(self, snap: Snapshot, name: str) -> ClustCube:
        self.preset(name)
        cc = snap.cubes.get(name)
        if cc is None:
            raise ClustCubeError(f"cuboid {name!r} is not built yet; POST /api/cuboids/{name}/build first")
        return cc

    # -- mutation -----------------------------------------------------------
    def build_cube(self, name: str, config: CubeConfig, at: Optional[str], wait: bool) -> tuple[Snapshot, ClustCube]:
        p = self.preset(name)
        lock = self._build_locks[name]
        if not lock.acquire(blocking=wait):
            raise HTTPException(status_code=409, detail=f"a build for {name!r} is already in progress")
        try:
            from .lattice import parse_cuboid
            cuboid = parse_cuboid(p.dimensions, at) if at else p.default_cuboid
            objects = self.objects_for(name)
            cc = build(cuboid, p.dimensions, objects, self.data, config)
            with self._swap_lock:
                snap = Snapshot(id=self.snapshot.id + 1, cubes={**self.snapshot.cubes, name: cc})
                self.snapshot = snap
            return snap, cc
        finally:
            lock.release()


def _iso_member(v):
    return v if isinstance(v, (str, int, float, bool)) else str(v)


def _cell_brief(cube: ClustCube, cell: Cell) -> dict:
    key_names = [d.name for d, c in zip(cube.dimensions, cube.cuboid.choices) if c is not None]
    out = {"key": {n: _iso_member(v) for n, v in zip(key_names, cell.key)}, "count": cell.count}
    if cell.clustering is not None:
        out["k"] = cell.clustering.k
        out["sizes"] = cell.clustering.sizes()
        out["sse"] = cell.clustering.sse
    if cell.regression is not None:
        out["r2"] = cell.regression.r2
        out["rmse"] = cell.regression.rmse
        out["fit_n"] = cell.regression.n
    if cell.insufficient_rows:
        out["insufficient_rows"] = True
    return out


def create_app(data_dir: str | Path, auth_token: str, ui_dir: Optional[str | Path] = None) -> FastAPI:
    engine = Engine(data_dir, auth_token)
    app = FastAPI(title="clustcube", version=__version__)
    app.state.engine = engine
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ClustCubeError)
    async def _domain_error(_request: Request, exc: ClustCubeError):
        return JSONResponse(status_code=422, content={"detail": str(exc), "engine_version": __version__})

    @app.exception_handler(RequestValidationError)
    async def _malformed(_request: Request, exc: RequestValidationError):
        detail = json.loads(json.dumps(exc.errors(), default=str))
        return JSONResponse(status_code=400, content={"detail": detail, "engine_version": __version__})

    def auth(authorization: Optional[str] = Header(default=None)) -> None:
        if not authorization or not authorization.lower().startswith("bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        engine.check_session(authorization.split(" ", 1)[1].strip())

    def envelope(snap: Snapshot, payload: dict) -> dict:
        return {"engine_version": __version__, "snapshot": snap.id, **payload}

    @app.post("/api/login")
    def login(body: LoginBody):
        session, expires = engine.login(body.token)
        return envelope(engine.snapshot, {"session": session, "expires": expires})

    @app.get("/api/tree", dependencies=[Depends(auth)])
    def tree():
        snap = engine.snapshot
        tables = [{"label": name, "kind": "table", "children": []}
                  for name in sorted(engine.data.tables)]
        cuboid_nodes = [{"label": name, "kind": "cuboid", "children": []} for name in engine.presets]
        roots = [
            {"label": "TourismDB", "kind": "database",
             "children": [{"label": "Tables", "kind": "table", "children": tables}]},
            {"label": "TourismDC", "kind": "cube",
             "children": [
                 {"label": "Measures", "kind": "measures",
                  "children": [{"label": m, "kind": "measures", "children": []}
                               for m in engine.data.schema.measures]},
                 {"label": "Dimensions", "kind": "dimensions",
                  "children": [{"label": d.table, "kind": "dimensions", "children": []}
                               for d in engine.data.schema.dimensions]},
                 *cuboid_nodes,
             ]},
        ]
        return envelope(snap, {"tree": roots})

    @app.get("/api/cuboids", dependencies=[Depends(auth)])
    def cuboids():
        snap = engine.snapshot
        out = []
        for name, p in engine.presets.items():
            built = snap.cubes.get(name)
            entry = {"name": name,
                     "dimensions": [d.name for d in p.dimensions],
                     "levels": {d.name: list(d.levels) for d in p.dimensions},
                     "default_cuboid": format_cuboid(p.dimensions, p.default_cuboid),
                     "default_k": p.default_k,
                     "target": p.target,
                     "built": built is not None}
            if built is not None:
                entry["cuboid"] = format_cuboid(built.dimensions, built.cuboid)
                entry["cells"] = len(built.cells)
                entry["config"] = built.config.to_dict()
            out.append(entry)
        return envelope(snap, {"cuboids": out})

    @app.post("/api/cuboids/{name}/build", dependencies=[Depends(auth)])
    def build_endpoint(name: str, body: BuildBody):
        p = engine.preset(name)
        config = CubeConfig(k=body.k if body.k is not None else p.default_k,
                            seed=body.seed if body.seed is not None else 0,
                            min_cell_size=body.min_cell_size if body.min_cell_size is not None else 3,
                            lam=body.lam if body.lam is not None else 0.0,
                            target=body.target)
        snap, cc = engine.build_cube(name, config, body.at, body.wait)
        return envelope(snap, {"name": name,
                               "cuboid": format_cuboid(cc.dimensions, cc.cuboid),
                               "cells": len(cc.cells),
                               "unplaced_count": len(cc.unplaced),
                               "total_objects": len(cc.objects.objects),
                               "config": cc.config.to_dict()})

    def _parse_slices(slices: list[str]) -> list[tuple[str, str]]:
        out = []
        for s in slices:
            if ":" not in s:
                raise ClustCubeError(f"bad slice {s!r}, expected dim:member")
            dim, member = s.split(":", 1)
            out.append((dim, member))
        return out

    @app.get("/api/cuboids/{name}/cells", dependencies=[Depends(auth)])
    def cells(name: str, request: Request):
        snap = engine.snapshot
        cc = engine.built(snap, name)
        slices = _parse_slices(request.query_params.getlist("slice"))
        view = cc
        for dim, member in slices:
            pos = view.key_position(dim)
            matching = {k[pos] for k in view.cells if str(k[pos]) == member}
            view = dice_cube(view, [(dim, matching)])
        return envelope(snap, {
            "name": name,
            "cuboid": format_cuboid(cc.dimensions, cc.cuboid),
            "cells": [_cell_brief(view, view.cells[k]) for k in sorted(view.cells)],
            "unplaced_count": len(view.unplaced),
            "total_objects": len(view.objects.objects),
        })

    @app.post("/api/cuboids/{name}/cluster", dependencies=[Depends(auth)])
    def cluster(name: str, body: ClusterBody):
        cc = engine.built(engine.snapshot, name)
        config = replace(cc.config, k=body.k, seed=body.seed)
        at = format_cuboid(cc.dimensions, cc.cuboid)
        snap, rebuilt = engine.build_cube(name, config, at, body.wait)
        out_cells = []
        for key in sorted(rebuilt.cells):
            cell = rebuilt.cells[key]
            entry = _cell_brief(rebuilt, cell)
            if cell.clustering is not None:
                entry["assignment"] = list(cell.clustering.assignment)
                if cell.clustering.k >= 2:
                    fm = featurize(subset(rebuilt.objects, cell.object_indices), impute=True)
                    entry["silhouette"] = silhouette(fm, cell.clustering)
            out_cells.append(entry)
        return envelope(snap, {"name": name, "k": body.k, "seed": body.seed, "cells": out_cells})

    @app.post("/api/cuboids/{name}/regress", dependencies=[Depends(auth)])
    def regress(name: str, body: RegressBody):
        cc = engine.built(engine.snapshot, name)
        config = replace(cc.config, target=body.target, lam=body.lam if body.lam is not None else 0.0)
        at = format_cuboid(cc.dimensions, cc.cuboid)
        snap, rebuilt = engine.build_cube(name, config, at, True)
        out_cells = []
        stats = []
        for key in sorted(rebuilt.cells):
            cell = rebuilt.cells[key]
            entry = _cell_brief(rebuilt, cell)
            if cell.regression is not None:
                entry["regression"] = cell.regression.to_dict()
            if cell.reg_stats is not None:
                stats.append(cell.reg_stats)
            out_cells.append(entry)
        payload = {"name": name, "target": body.target, "cells": out_cells}
        if stats:
            pooled = merge_all(stats)
            if pooled.n >= pooled.d and rebuilt.encoding is not None:
                payload["overall"] = fit(pooled, config.lam, predictor_names=rebuilt.encoding.names).to_dict()
        return envelope(snap, payload)

    @app.post("/api/cuboids/{name}/rollup", dependencies=[Depends(auth)])
    def rollup(name: str, body: RollupBody):
        snap = engine.snapshot
        cc = engine.built(snap, name)
        mapping = rollup_key_mapping(cc, body.dim)
        parent = roll_up(cc, body.dim, body.mode)
        child_names = [d.name for d, c in zip(cc.dimensions, cc.cuboid.choices) if c is not None]
        parent_names = [d.name for d, c in zip(parent.dimensions, parent.cuboid.choices) if c is not None]
        cells_out = []
        for pk in sorted(parent.cells):
            cell = parent.cells[pk]
            entry = _cell_brief(parent, cell)
            if cell.cluster_summary:
                entry["cluster_summary"] = [s.to_dict() for s in cell.cluster_summary]
            entry["children"] = [
                {"key": {n: _iso_member(v) for n, v in zip(child_names, ck)},
                 "count": cc.cells[ck].count}
                for ck in mapping.get(pk, [])]
            if cell.regression is not None:
                entry["regression"] = cell.regression.to_dict()
            cells_out.append(entry)
        return envelope(snap, {"name": name, "dim": body.dim, "mode": body.mode,
                               "parent_cuboid": format_cuboid(parent.dimensions, parent.cuboid),
                               "cells": cells_out,
                               "unplaced_count": len(parent.unplaced)})

    @app.get("/api/export/{name}", dependencies=[Depends(auth)])
    def export(name: str):
        snap = engine.snapshot
        cc = engine.built(snap, name)
        return envelope(snap, {"cube": export_cube(cc)})

    @app.get("/api/ground-truth", dependencies=[Depends(auth)])
    def ground_truth():
        path = engine.data_dir / "ground_truth.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no ground_truth.json in the data directory")
        return envelope(engine.snapshot, {"ground_truth": json.loads(path.read_text(encoding="utf-8"))})

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
