"""Cube assembly and OLAP navigation over clustered complex objects.

A built cube fixes one cuboid (a per-dimension consolidation choice) and
groups the complex objects into cells by their coordinate attributes,
looked up through the dimension hierarchies at the chosen levels.  Every
non-empty cell then gets analysed: k-means over the encoded features
(cells below ``min_cell_size`` skip clustering) and a least-squares fit
over sufficient statistics whenever a regression target exists.

Navigation never loses objects.  Roll-up in ``recluster`` mode is simply
a rebuild at the parent cuboid; in ``merge_stats`` mode the child cells'
regression statistics are merged and refitted without touching raw rows,
and the child clusterings are summarized instead of recomputed.  Objects
whose coordinates are null (or fail the hierarchy lookup) sit in an
explicit ``unplaced`` set so cell counts always add up.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .codq import ObjectSet, subset
from .errors import CubeError
from .lattice import CuboidId, DimensionSpec, format_cuboid
from .mdclust import Clustering, featurize, kmeans
from .mdregress import (PredictorEncoding, RegressionFit, RegressionStats, fit,
                        merge_all, stats_for_objects)
from .star_store import StarData, Value

CellKey = tuple  # member values for the cuboid's non-ALL dimensions, in order

_MISSING = object()


@dataclass(frozen=True)
class CubeConfig:
    k: int = 3
    seed: int = 0
    min_cell_size: int = 3
    max_iter: int = 100
    tol: float = 1e-6
    lam: float = 0.0
    target: Optional[str] = None  # default: the first target-role attribute
    workers: int = 1

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "min_cell_size": self.min_cell_size,
                "max_iter": self.max_iter, "tol": self.tol, "lambda": self.lam,
                "target": self.target, "workers": self.workers}


@dataclass(frozen=True)
class ClusterGroupSummary:
    """Stand-in for a clustering after a merge-stats roll-up: one entry per
    child cell, with the size-weighted mean of its centroids decoded back to
    original feature units."""

    source_key: CellKey
    count: int
    k: int
    centroid: dict[str, float]

    def to_dict(self) -> dict:
        return {"source_key": list(self.source_key), "count": self.count, "k": self.k,
                "centroid": self.centroid}


@dataclass(frozen=True, eq=False)
class Cell:
    key: CellKey
    object_indices: tuple[int, ...]
    clustering: Optional[Clustering] = None
    feature_columns: Optional[tuple[str, ...]] = None
    encoding_report: Optional[dict] = None
    regression: Optional[RegressionFit] = None
    reg_stats: Optional[RegressionStats] = None
    insufficient_rows: bool = False
    cluster_summary: Optional[tuple[ClusterGroupSummary, ...]] = None

    @property
    def count(self) -> int:
        return len(self.object_indices)


@dataclass(frozen=True, eq=False)
class ClustCube:
    cuboid: CuboidId
    dimensions: tuple[DimensionSpec, ...]
    objects: ObjectSet
    cells: dict[CellKey, Cell]
    unplaced: tuple[int, ...]
    config: CubeConfig
    data: StarData
    encoding: Optional[PredictorEncoding] = None
    #: slice/dice provenance; when non-empty the partition invariant is scoped
    #: to the restricted members
    restriction: dict[str, frozenset] = field(default_factory=dict)

    @property
    def placed_count(self) -> int:
        return sum(len(c.object_indices) for c in self.cells.values())

    def dimension_index(self, name: str) -> int:
        for i, d in enumerate(self.dimensions):
            if d.name == name:
                return i
        raise CubeError(f"unknown dimension {name!r}")

    def key_position(self, name: str) -> int:
        """Position of a non-ALL dimension inside the cell keys."""
        di = self.dimension_index(name)
        if self.cuboid.choices[di] is None:
            raise CubeError(f"dimension {name!r} is rolled away in this cuboid")
        return sum(1 for c in self.cuboid.choices[:di] if c is not None)


# ---------------------------------------------------------------------------
# Coordinate bindings


@dataclass(frozen=True)
class _Binding:
    dim_index: int
    attr_index: int
    mapping: Optional[dict]  # None means the attribute value is the member


def _member_map(data: StarData, dim_table: str, from_col: str, to_col: str) -> dict:
    table = data.table(dim_table)
    try:
        fi, ci = table.column_index(from_col), table.column_index(to_col)
    except Exception:
        raise CubeError(f"hierarchy level missing: {dim_table}.{from_col} -> {to_col}") from None
    mapping: dict[Value, Value] = {}
    for row in table.rows:
        fv, cv = row[fi], row[ci]
        if fv in mapping and mapping[fv] != cv:
            raise CubeError(f"hierarchy of {dim_table!r} is not functional: "
                            f"{from_col}={fv!r} maps to both {mapping[fv]!r} and {cv!r}")
        mapping[fv] = cv
    return mapping


def _resolve_bindings(cuboid: CuboidId, dims: Sequence[DimensionSpec],
                      objects: ObjectSet, data: StarData) -> list[_Binding]:
    if len(cuboid.choices) != len(dims):
        raise CubeError(f"cuboid has {len(cuboid.choices)} choices for {len(dims)} dimensions")
    by_table: dict[str, list[tuple[int, str]]] = {}
    for i, a in enumerate(objects.schema.attributes):
        if a.role == "coordinate":
            by_table.setdefault(a.source_table, []).append((i, a.source_column))

    bindings = []
    for di, (dim, choice) in enumerate(zip(dims, cuboid.choices)):
        if choice is None:
            continue
        coords = by_table.get(dim.name)
        if not coords:
            raise CubeError(f"unresolvable coordinate attribute: no coordinate maps to dimension {dim.name!r}")
        attr_index, source_col = coords[0]
        level_col = dim.levels[choice]
        if source_col == level_col:
            bindings.append(_Binding(di, attr_index, None))
        else:
            bindings.append(_Binding(di, attr_index, _member_map(data, dim.name, source_col, level_col)))
    return bindings


def dimension_specs(objects: ObjectSet, data: StarData) -> list[DimensionSpec]:
    """Derive cube dimensions from the coordinate attributes of an object set.

    A coordinate whose source column starts a declared hierarchy gets the
    hierarchy levels from that column onward; anything else is flat.
    """
    out = []
    seen = set()
    for a in objects.schema.attributes:
        if a.role != "coordinate" or a.source_table in seen:
            continue
        seen.add(a.source_table)
        h = data.schema.hierarchy_for(a.source_table)
        if h is not None and a.source_column in h.levels:
            levels = h.levels[h.levels.index(a.source_column):]
        else:
            levels = (a.source_column,)
        out.append(DimensionSpec(a.source_table, tuple(levels)))
    return out


# ---------------------------------------------------------------------------
# Build


def _default_target(objects: ObjectSet) -> Optional[str]:
    for a in objects.schema.attributes:
        if a.role == "target":
            return a.name
    return None


def _analyse_cell(key: CellKey, indices: tuple[int, ...], objects: ObjectSet,
                  enc: Optional[PredictorEncoding], config: CubeConfig,
                  with_clustering: bool, has_features: bool) -> Cell:
    clustering = None
    feature_columns = None
    encoding_report = None
    if with_clustering and has_features and len(indices) >= config.min_cell_size:
        fm = featurize(subset(objects, indices), impute=True)
        clustering = kmeans(fm, min(config.k, len(indices)), config.seed,
                            config.max_iter, config.tol)
        feature_columns = fm.columns
        encoding_report = fm.encoding_report()

    regression = None
    reg_stats = None
    insufficient = False
    if enc is not None:
        reg_stats = stats_for_objects(enc, objects, indices)
        if reg_stats.n >= enc.d:
            regression = fit(reg_stats, config.lam, predictor_names=enc.names)
        else:
            insufficient = True
    return Cell(key=key, object_indices=indices, clustering=clustering,
                feature_columns=feature_columns, encoding_report=encoding_report,
                regression=regression, reg_stats=reg_stats, insufficient_rows=insufficient)


def _assemble(cuboid: CuboidId, dims: Sequence[DimensionSpec], objects: ObjectSet,
              data: StarData, config: CubeConfig, with_clustering: bool) -> ClustCube:
    bindings = _resolve_bindings(cuboid, dims, objects, data)
    grouped: dict[CellKey, list[int]] = {}
    unplaced: list[int] = []
    for i, obj in enumerate(objects.objects):
        members = []
        placeable = True
        for b in bindings:
            v = obj[b.attr_index]
            if v is not None and b.mapping is not None:
                v = b.mapping.get(v, _MISSING)
            if v is None or v is _MISSING:
                placeable = False
                break
            members.append(v)
        if placeable:
            grouped.setdefault(tuple(members), []).append(i)
        else:
            unplaced.append(i)

    target = config.target if config.target is not None else _default_target(objects)
    enc = PredictorEncoding.from_objects(objects, target) if target is not None else None
    has_features = any(a.role == "feature" for a in objects.schema.attributes)

    keys = sorted(grouped)
    def run(key: CellKey) -> Cell:
        return _analyse_cell(key, tuple(grouped[key]), objects, enc, config,
                             with_clustering, has_features)

    if config.workers > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            analysed = list(pool.map(run, keys))
    else:
        analysed = [run(key) for key in keys]

    cells = {cell.key: cell for cell in analysed}
    return ClustCube(cuboid=cuboid, dimensions=tuple(dims), objects=objects, cells=cells,
                     unplaced=tuple(unplaced), config=config, data=data, encoding=enc)


def build(cuboid: CuboidId, dims: Sequence[DimensionSpec], objects: ObjectSet,
          data: StarData, config: CubeConfig) -> ClustCube:
    """Group objects into cells at the cuboid's levels and analyse each cell."""
    return _assemble(cuboid, dims, objects, data, config, with_clustering=True)


def cell_sizes(cuboid: CuboidId, dims: Sequence[DimensionSpec], objects: ObjectSet,
               data: StarData) -> list[int]:
    """Cell occupancy counts at a cuboid without running any analysis."""
    bindings = _resolve_bindings(cuboid, dims, objects, data)
    counts: dict[CellKey, int] = {}
    for obj in objects.objects:
        members = []
        placeable = True
        for b in bindings:
            v = obj[b.attr_index]
            if v is not None and b.mapping is not None:
                v = b.mapping.get(v, _MISSING)
            if v is None or v is _MISSING:
                placeable = False
                break
            members.append(v)
        if placeable:
            key = tuple(members)
            counts[key] = counts.get(key, 0) + 1
    return [counts[k] for k in sorted(counts)]


# ---------------------------------------------------------------------------
# Roll-up / drill-down


def _parent_choice(dim: DimensionSpec, choice: int) -> Optional[int]:
    return choice + 1 if choice + 1 < len(dim.levels) else None


def rollup_key_mapping(cube: ClustCube, dim: str) -> dict[CellKey, list[CellKey]]:
    """Parent cell key -> child cell keys for a one-step roll-up of ``dim``.

    Child cells whose member cannot be mapped to the parent level (a lookup
    miss or a null at the coarser level) map to the key ``None`` and become
    unplaced in the parent cube.
    """
    di = cube.dimension_index(dim)
    choice = cube.cuboid.choices[di]
    if choice is None:
        raise CubeError(f"dimension {dim!r} is already fully consolidated")
    pos = cube.key_position(dim)
    parent = _parent_choice(cube.dimensions[di], choice)
    vm = None
    if parent is not None:
        vm = _member_map(cube.data, dim, cube.dimensions[di].levels[choice],
                         cube.dimensions[di].levels[parent])

    out: dict[Optional[CellKey], list[CellKey]] = {}
    for child_key in sorted(cube.cells):
        if parent is None:
            pk: Optional[CellKey] = child_key[:pos] + child_key[pos + 1:]
        else:
            member = vm.get(child_key[pos], _MISSING)
            pk = None if member is _MISSING or member is None \
                else child_key[:pos] + (member,) + child_key[pos + 1:]
        out.setdefault(pk, []).append(child_key)
    return out


def roll_up(cube: ClustCube, dim: str, mode: str = "recluster") -> ClustCube:
    """Move one dimension one step coarser.

    ``recluster`` rebuilds at the parent cuboid (fresh k-means per merged
    cell, same seed).  ``merge_stats`` merges the child cells' regression
    statistics, refits, and summarizes child clusterings without rerunning
    them.  Object membership per parent cell is the exact union of its
    children either way.
    """
    if mode not in ("recluster", "merge_stats"):
        raise CubeError(f"unknown roll-up mode {mode!r}")
    di = cube.dimension_index(dim)
    choice = cube.cuboid.choices[di]
    if choice is None:
        raise CubeError(f"dimension {dim!r} is already fully consolidated")
    parent = _parent_choice(cube.dimensions[di], choice)
    parent_cuboid = CuboidId(cube.cuboid.choices[:di] + (parent,) + cube.cuboid.choices[di + 1:])

    if mode == "recluster":
        return _assemble(parent_cuboid, cube.dimensions, cube.objects, cube.data,
                         cube.config, with_clustering=True)

    mapping = rollup_key_mapping(cube, dim)
    cells: dict[CellKey, Cell] = {}
    unplaced = list(cube.unplaced)
    for pk in sorted(k for k in mapping if k is not None):
        child_cells = [cube.cells[ck] for ck in mapping[pk]]
        indices = tuple(sorted(i for c in child_cells for i in c.object_indices))
        stats_parts = [c.reg_stats for c in child_cells if c.reg_stats is not None]
        reg_stats = merge_all(stats_parts) if stats_parts else None
        regression = None
        insufficient = False
        if reg_stats is not None and cube.encoding is not None:
            if reg_stats.n >= cube.encoding.d:
                regression = fit(reg_stats, cube.config.lam, predictor_names=cube.encoding.names)
            else:
                insufficient = True
        summary = tuple(_summarize_clustering(c) for c in child_cells if c.clustering is not None)
        cells[pk] = Cell(key=pk, object_indices=indices, regression=regression,
                         reg_stats=reg_stats, insufficient_rows=insufficient,
                         cluster_summary=summary or None)
    if None in mapping:
        for ck in mapping[None]:
            unplaced.extend(cube.cells[ck].object_indices)
    return ClustCube(cuboid=parent_cuboid, dimensions=cube.dimensions, objects=cube.objects,
                     cells=cells, unplaced=tuple(sorted(unplaced)), config=cube.config,
                     data=cube.data, encoding=cube.encoding)


def _summarize_clustering(cell: Cell) -> ClusterGroupSummary:
    """Size-weighted mean of a cell's centroids, decoded to source units."""
    cl = cell.clustering
    sizes = cl.sizes()
    total = sum(sizes)
    weighted = sum(s * cl.centroids[j] for j, s in enumerate(sizes)) / total
    decoded: dict[str, float] = {}
    for name, value in zip(cell.feature_columns, weighted):
        source = name.split("=", 1)[0]
        enc = (cell.encoding_report or {}).get(source)
        if enc and enc.get("kind") == "zscore":
            decoded[name] = float(value * enc["std"] + enc["mean"])
        else:
            decoded[name] = float(value)  # one-hot columns read as category shares
    return ClusterGroupSummary(source_key=cell.key, count=total, k=cl.k, centroid=decoded)


def drill_down(cube: ClustCube, dim: str, mode: str = "recluster") -> ClustCube:
    """Move one dimension one step finer, regrouping from the raw objects.

    Statistics cannot be un-merged, so both modes recompute from rows;
    ``merge_stats`` skips the per-cell clustering just as its roll-up
    counterpart does not recluster.
    """
    if mode not in ("recluster", "merge_stats"):
        raise CubeError(f"unknown drill-down mode {mode!r}")
    di = cube.dimension_index(dim)
    choice = cube.cuboid.choices[di]
    if choice == 0:
        raise CubeError(f"dimension {dim!r} is already at its finest level")
    child = len(cube.dimensions[di].levels) - 1 if choice is None else choice - 1
    child_cuboid = CuboidId(cube.cuboid.choices[:di] + (child,) + cube.cuboid.choices[di + 1:])
    return _assemble(child_cuboid, cube.dimensions, cube.objects, cube.data,
                     cube.config, with_clustering=(mode == "recluster"))


# ---------------------------------------------------------------------------
# Slice / dice


def slice_cube(cube: ClustCube, dim: str, member: Value) -> ClustCube:
    """Restrict to cells whose key holds ``member`` for ``dim``; analyses carry over."""
    pos = cube.key_position(dim)
    cells = {k: c for k, c in cube.cells.items() if k[pos] == member}
    restriction = dict(cube.restriction)
    allowed = restriction.get(dim, None)
    restriction[dim] = frozenset([member]) if allowed is None else (allowed & {member})
    return replace(cube, cells=cells, restriction=restriction)


def dice_cube(cube: ClustCube, predicate: Sequence[tuple[str, Sequence[Value]]]) -> ClustCube:
    """Conjunctive member-set restriction across several dimensions."""
    out = cube
    for dim, members in predicate:
        pos = out.key_position(dim)
        allowed = frozenset(members)
        cells = {k: c for k, c in out.cells.items() if k[pos] in allowed}
        restriction = dict(out.restriction)
        prev = restriction.get(dim)
        restriction[dim] = allowed if prev is None else (prev & allowed)
        out = replace(out, cells=cells, restriction=restriction)
    return out


# ---------------------------------------------------------------------------
# Export


def cell_to_dict(cube: ClustCube, cell: Cell, include_assignment: bool = True) -> dict:
    key_names = [d.name for d, c in zip(cube.dimensions, cube.cuboid.choices) if c is not None]
    entry: dict = {"key": dict(zip(key_names, cell.key)), "count": cell.count}
    if cell.clustering is not None:
        cl = cell.clustering.to_dict(encoding_report=cell.encoding_report)
        cl["feature_columns"] = list(cell.feature_columns or ())
        if not include_assignment:
            cl.pop("assignment", None)
        entry["clustering"] = cl
    if cell.regression is not None:
        entry["regression"] = cell.regression.to_dict()
    if cell.insufficient_rows:
        entry["insufficient_rows"] = True
    if cell.cluster_summary:
        entry["cluster_summary"] = [s.to_dict() for s in cell.cluster_summary]
    return entry


def export_cube(cube: ClustCube, include_assignment: bool = True) -> dict:
    dims = []
    for d, choice in zip(cube.dimensions, cube.cuboid.choices):
        dims.append({"name": d.name, "levels": list(d.levels),
                     "at": None if choice is None else d.levels[choice]})
    return {
        "cuboid": format_cuboid(cube.dimensions, cube.cuboid),
        "dimensions": dims,
        "cells": [cell_to_dict(cube, cube.cells[k], include_assignment) for k in sorted(cube.cells)],
        "unplaced_count": len(cube.unplaced),
        "total_objects": len(cube.objects.objects),
        "config": cube.config.to_dict(),
        "restriction": {d: sorted(map(str, m)) for d, m in cube.restriction.items()} or None,
    }


def export_cells_csv(cube: ClustCube) -> str:
    """One summary row per cell: key members, count, clustering and fit quality."""
    import csv as _csv
    import io

    key_names = [d.name for d, c in zip(cube.dimensions, cube.cuboid.choices) if c is not None]
    buf = io.StringIO()
    writer = _csv.writer(buf)
    writer.writerow(key_names + ["count", "k", "sse", "r2", "rmse", "fit_n"])
    for key in sorted(cube.cells):
        cell = cube.cells[key]
        cl, rg = cell.clustering, cell.regression
        writer.writerow(list(key)
                        + [cell.count,
                           cl.k if cl else "", cl.sse if cl else "",
                           rg.r2 if rg else "", rg.rmse if rg else "", rg.n if rg else ""])
    return buf.getvalue()
