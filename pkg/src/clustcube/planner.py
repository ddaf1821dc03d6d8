"""Deterministic scheduling of analysis elements with dependency closure.

Elements are opaque identifiers (cuboid materializations, cell analyses,
model refreshes); an edge ``(before, after)`` says ``after`` depends on
``before``.  Plans either run sequentially or concurrently with a bound,
``auto`` meaning the platform's reported parallelism.  The emitted order
is a topological sort with ties broken by input position, so identical
inputs always give identical plans, and sequential plans keep independent
elements in their request order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import PlanError

MODES = ("sequential", "concurrent")


@dataclass(frozen=True)
class ProcessingPlan:
    elements: tuple[str, ...]  # the closed element set, in request-then-discovery order
    order: tuple[str, ...]     # a valid topological order over `elements`
    mode: str
    limit: int                 # 1 for sequential; the concurrency bound otherwise

    def to_dict(self) -> dict:
        return {"elements": list(self.elements), "order": list(self.order),
                "mode": self.mode, "limit": self.limit}


def _find_cycle(nodes: Sequence[str], after: dict[str, list[str]]) -> list[str]:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(u: str) -> Optional[list[str]]:
        state[u] = 1
        stack.append(u)
        for v in after.get(u, ()):  # noqa: B023
            if state.get(v, 0) == 1:
                return stack[stack.index(v):] + [v]
            if state.get(v, 0) == 0:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        state[u] = 2
        return None

    for node in nodes:
        if state.get(node, 0) == 0:
            found = visit(node)
            if found:
                return found
    return []


def plan_processing(elements: Sequence[str],
                    dependencies: Sequence[tuple[str, str]],
                    mode: str = "sequential",
                    limit: Optional[int] = None,
                    include_dependents: bool = False) -> ProcessingPlan:
    """Build an execution plan for the requested elements.

    Without ``include_dependents`` every dependency endpoint must be a
    requested element.  With it, all transitive dependents of the request
    (elements reachable through ``before -> after`` edges) join the plan.
    ``limit=None`` with concurrent mode means auto: the platform's
    available parallelism, recorded in the plan.
    """
    if mode not in MODES:
        raise PlanError(f"unknown processing mode {mode!r}")
    requested = list(dict.fromkeys(elements))
    if not requested:
        raise PlanError("no elements to plan")

    registry = dict.fromkeys(requested)
    for before, then in dependencies:
        if not include_dependents and (before not in registry or then not in registry):
            missing = before if before not in registry else then
            raise PlanError(f"dependency references unlisted element {missing!r}")
        registry.setdefault(before, None)
        registry.setdefault(then, None)

    dependents: dict[str, list[str]] = {}
    for before, then in dependencies:
        dependents.setdefault(before, []).append(then)

    planned = list(requested)
    if include_dependents:
        seen = set(planned)
        frontier = list(planned)
        while frontier:
            nxt = []
            for e in frontier:
                for dep in dependents.get(e, ()):
                    if dep not in seen:
                        seen.add(dep)
                        planned.append(dep)
                        nxt.append(dep)
            frontier = nxt

    position = {e: i for i, e in enumerate(planned)}
    in_plan = set(planned)
    indegree = dict.fromkeys(planned, 0)
    out_edges: dict[str, list[str]] = {e: [] for e in planned}
    for before, then in dependencies:
        if before in in_plan and then in in_plan:
            out_edges[before].append(then)
            indegree[then] += 1

    ready = sorted((e for e in planned if indegree[e] == 0), key=position.__getitem__)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for nxt in out_edges[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort(key=position.__getitem__)
    if len(order) != len(planned):
        cycle = _find_cycle(planned, out_edges)
        raise PlanError("dependency cycle: " + " -> ".join(cycle))

    if mode == "sequential":
        resolved = 1
    else:
        resolved = limit if limit is not None else (os.cpu_count() or 1)
        if resolved < 1:
            raise PlanError("concurrency limit must be at least 1")
    return ProcessingPlan(elements=tuple(planned), order=tuple(order), mode=mode, limit=resolved)
