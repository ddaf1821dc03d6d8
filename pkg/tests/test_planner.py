import os

import pytest

from clustcube.errors import PlanError
from clustcube.planner import plan_processing


def test_no_dependencies_sequential_keeps_input_order():
    plan = plan_processing(["c", "a", "b"], [], mode="sequential")
    assert plan.order == ("c", "a", "b")
    assert plan.limit == 1


def test_chain_orders_dependency_first():
    for mode, limit in (("sequential", None), ("concurrent", 2), ("concurrent", None)):
        plan = plan_processing(["b", "a"], [("a", "b")], mode=mode, limit=limit)
        assert plan.order.index("a") < plan.order.index("b")


def test_include_dependents_closure():
    deps = [("a", "b"), ("b", "c"), ("x", "y")]
    plan = plan_processing(["a"], deps, include_dependents=True)
    assert set(plan.elements) == {"a", "b", "c"}
    assert plan.order == ("a", "b", "c")


def test_unlisted_edge_endpoint_rejected_without_closure():
    with pytest.raises(PlanError, match="unlisted"):
        plan_processing(["a"], [("a", "b")])


def test_cycle_reported():
    with pytest.raises(PlanError, match="cycle"):
        plan_processing(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])


def test_concurrent_auto_limit_is_platform_parallelism():
    plan = plan_processing(["a"], [], mode="concurrent")
    assert plan.limit == (os.cpu_count() or 1)
    assert plan.mode == "concurrent"


def test_explicit_limit_recorded():
    plan = plan_processing(["a", "b"], [], mode="concurrent", limit=3)
    assert plan.limit == 3


def test_order_stable_across_runs():
    deps = [("a", "c"), ("b", "c"), ("c", "d")]
    first = plan_processing(["b", "a", "d", "c"], deps)
    for _ in range(5):
        assert plan_processing(["b", "a", "d", "c"], deps).order == first.order


def test_independent_elements_keep_request_order_between_chains():
    deps = [("a", "b")]
    plan = plan_processing(["z", "a", "b", "m"], deps)
    assert plan.order == ("z", "a", "b", "m")


def test_unknown_mode():
    with pytest.raises(PlanError):
        plan_processing(["a"], [], mode="warp")
