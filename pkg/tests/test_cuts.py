import math
import pytest
from fractions import Fraction

from monoflow.core import FlowNetworkException
from monoflow.cuts import (
    all_maximizer_unions_maximal, capacity_between, cut_value, enumerate_violations, max_violation_maxflow,
    maximal_cut, maxflow_report, min_cut_capacity, union_identity,
)
from monoflow.graph import Cut, Link, Network
from monoflow.networks import random_network
from monoflow.util import INF

from support_modules.test_tools.fixtures import chain


def test_motivating_best_value(motivating):
    report = enumerate_violations(motivating)
    assert report.best_value == -1
    assert report.exact
    assert set(report.maximizers) == {Cut.of("a"), Cut.of("a", "b")}
    assert report.u_star == Cut.of("a", "b")
    assert not report.violated


def test_overloaded_inflow(motivating):
    report = enumerate_violations(motivating, {"a": 4})
    assert report.best_value == 1
    assert report.violated
    assert report.u_star == Cut.of("a", "b")
    cut = maximal_cut(motivating, {"a": 4})
    assert cut.violating and cut.exact
    assert cut.value == 1


def test_records(motivating):
    report = enumerate_violations(motivating, records=True)
    assert len(report.records) == 7
    by_cut = {r.cut: r for r in report.records}
    record = by_cut[Cut.of("a", "b")]
    assert record.inflow == 2 and record.capacity == 3 and record.value == -1
    assert by_cut[Cut.of("b")].value == -2
    data = report.asdict()
    assert data["best_value"] == -1
    assert data["u_star"] == ["a", "b"]
    assert len(data["records"]) == 7


def test_enumeration_limit(motivating):
    with pytest.raises(FlowNetworkException) as exc:
        enumerate_violations(motivating, limit=2)
    assert exc.value.code == FlowNetworkException.FLOW_PRECONDITION_NOT_MET


def test_maxflow_matches(motivating):
    assert max_violation_maxflow(motivating) == -1
    assert max_violation_maxflow(motivating, {"a": 4}) == 1
    report = maxflow_report(motivating)
    assert report.partial
    assert report.maximizers[0] in (Cut.of("a"), Cut.of("a", "b"))
    assert report.asdict()["u_star"] is None


@pytest.mark.parametrize("seed", range(8))
def test_maxflow_agrees_with_enumeration(seed):
    network = random_network(seed, n_nodes=6)
    enumerated = enumerate_violations(network)
    assert float(max_violation_maxflow(network)) == pytest.approx(float(enumerated.best_value))
    assert maximal_cut(network).cut == enumerated.u_star


@pytest.mark.parametrize("seed", range(8))
def test_maximizers_close_under_union_when_overloaded(seed):
    network = random_network(seed, n_nodes=6)
    # more inflow at the origin than every link together can carry
    inflows = dict(network.inflows)
    inflows["v0"] = sum((link.capacity for link in network.links), Fraction(0)) + 1
    report = enumerate_violations(network, inflows)
    assert report.best_value > 0
    assert all_maximizer_unions_maximal(report, network.with_inflows(inflows))
    union_value = cut_value(network.with_inflows(inflows), report.u_star)
    assert float(maximal_cut(network, inflows).value) == pytest.approx(float(union_value))


def two_sources():
    links = (
        Link("1", "a", "d", capacity=2, buffer=INF),
        Link("2", "b", "d", capacity=2, buffer=INF),
    )
    return Network(nodes=("a", "b", "d"), links=links, inflows={"a": 1, "b": 1})


def test_disjoint_maximizers_below_zero():
    network = two_sources()
    report = enumerate_violations(network)
    assert report.best_value == -1
    assert set(report.maximizers) == {Cut.of("a"), Cut.of("b")}
    assert cut_value(network, report.u_star) == -2
    cut = maximal_cut(network)
    assert cut.cut == Cut.of("a", "b")
    assert cut.value == -1
    assert not cut.violating
    assert all_maximizer_unions_maximal(report, network)


def test_disjoint_maximizers_above_zero():
    network = two_sources().with_inflows({"a": 2, "b": 2})
    report = enumerate_violations(network)
    assert report.best_value == 0
    assert set(report.maximizers) == {Cut.of("a"), Cut.of("b"), Cut.of("a", "b")}
    assert all_maximizer_unions_maximal(report, network)
    cut = maximal_cut(network)
    assert cut.cut == Cut.of("a", "b")
    assert cut.value == 0 and cut.violating


def test_min_cut_capacity(motivating):
    value, cut = min_cut_capacity(motivating)
    assert value == 3
    assert "a" in cut.nodes
    assert cut_value(motivating, cut) == Fraction(2) - 3


def test_unbounded_link_leaving():
    network = chain(capacities=("inf", 2))
    assert cut_value(network, Cut.of("v0")) == -math.inf
    assert cut_value(network, Cut.of("v0", "v1")) == -1
    report = enumerate_violations(network)
    assert report.best_value == -1


def test_union_identity(motivating):
    lhs, rhs = union_identity(motivating, {"a"}, {"b"})
    assert lhs == rhs == -1
    lhs, rhs = union_identity(motivating, {"a", "c"}, {"b", "c"})
    assert lhs == rhs == cut_value(motivating, Cut.of("a", "b", "c"))


def test_capacity_between(motivating):
    assert capacity_between(motivating, {"a"}, {"b", "c"}) == 3
    assert capacity_between(motivating, {"b"}, {"d"}) == 1
    with pytest.raises(FlowNetworkException):
        capacity_between(motivating, {"z"}, {"a"})
