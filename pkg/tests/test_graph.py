import pytest
from fractions import Fraction

from monoflow.core import FlowNetworkException
from monoflow.graph import Cut, Link, Network, augment, cut_capacity, cut_inflow, cut_sets, split_nodes, validate
from monoflow.networks import motivating_network, random_network
from monoflow.util import INF

from support_modules.test_tools.fixtures import chain


def test_motivating_network_valid(motivating):
    report = validate(motivating)
    assert report.valid
    assert motivating.destinations == ("d",)
    assert motivating.origins == ("a",)
    assert motivating.total_inflow == 2


def test_self_loop_without_destination():
    net = Network(nodes=("v",), links=(Link("1", "v", "v", capacity=1),), inflows={"v": 1})
    assert {"self_loop", "empty_destinations"} <= validate(net).kinds


def test_disconnected_chain_invalid():
    net = Network(
        nodes=("o1", "d1", "o2", "d2"),
        links=(Link("1", "o1", "d1", capacity=1), Link("2", "o2", "d2", capacity=1)),
        inflows={"o1": 1},
    )
    assert "not_strongly_connected" in validate(net).kinds


def test_inflow_on_destination_and_bad_capacity():
    net = Network(nodes=("o", "d"), links=(Link("1", "o", "d", capacity=0),), inflows={"o": 1, "d": 1})
    kinds = validate(net).kinds
    assert "inflow_on_destination" in kinds
    assert "non_positive_capacity" in kinds
    assert validate(net.with_inflows({"o": 1}), allow_zero_capacity=True).valid


def test_construction_rejects_unknown_node():
    with pytest.raises(FlowNetworkException) as exc:
        Network(nodes=("o",), links=(Link("1", "o", "d"),), inflows={"o": 1})
    assert exc.value.code == FlowNetworkException.FLOW_VALIDATION_ERROR
    assert exc.value.details["node"] == "d"


def test_augment(motivating):
    aug = augment(motivating)
    assert [link.id for link in aug.origin_links] == ["@in:a"]
    assert [link.id for link in aug.destination_links] == ["@out:d"]
    assert all(link.capacity is INF for link in aug.origin_links + aug.destination_links)
    assert len(aug.links) == 7
    assert aug.world_node in aug.nodes


def test_augment_two_origins_two_destinations():
    net = Network(
        nodes=("o1", "o2", "d1", "d2"),
        links=(
            Link("1", "o1", "d1", capacity=1), Link("2", "o2", "d2", capacity=1),
            Link("3", "o1", "o2", capacity=1), Link("4", "o2", "o1", capacity=1),
        ),
        inflows={"o1": 1, "o2": 1},
    )
    aug = augment(net)
    assert len(aug.origin_links) == 2 and len(aug.destination_links) == 2


def test_augment_rejects_zero_inflow(motivating):
    with pytest.raises(FlowNetworkException) as exc:
        augment(motivating.with_inflows({"a": 0}))
    assert exc.value.code == FlowNetworkException.FLOW_VALIDATION_ERROR


def test_cut_sets(motivating):
    sets = cut_sets(motivating, Cut.of("a", "b"))
    assert sets.boundary_out == frozenset({"2", "3", "4"})
    assert sets.boundary_in == frozenset()
    assert sets.out_links == frozenset({"1", "2", "3", "4"})
    assert sets.in_links == frozenset({"1"})


def test_cut_capacity_and_inflow(motivating):
    assert cut_capacity(motivating, Cut.of("a")) == 3
    assert cut_inflow(motivating, Cut.of("a")) == 2
    assert cut_inflow(motivating, Cut.of("b", "c")) == 0
    assert cut_capacity(motivating, Cut.of("a", "b", "c")) == 4


def test_cut_rejects_destination(motivating):
    with pytest.raises(FlowNetworkException) as exc:
        cut_sets(motivating, Cut.of("a", "d"))
    assert exc.value.code == FlowNetworkException.FLOW_BAD_PARAMETER
    with pytest.raises(FlowNetworkException):
        Cut(frozenset())


def test_unbounded_cut_capacity():
    net = chain(capacities=("inf", 2))
    assert cut_capacity(net, Cut.of("v0")) is INF


def test_with_capacities(motivating):
    perturbed = motivating.with_capacities({"3": "1/6"})
    assert perturbed.link("3").capacity == Fraction(1, 6)
    assert motivating.link("3").capacity == 1
    with pytest.raises(FlowNetworkException) as exc:
        motivating.with_capacities({"3": 2})
    assert exc.value.details["link"] == "3"
    with pytest.raises(FlowNetworkException):
        motivating.with_capacities({"9": 0})


def test_roundtrip(motivating):
    net = motivating.with_capacities({"3": "1/3"}).with_buffers({"4": 5})
    again = Network.fromdict(net.asdict())
    assert again == net
    assert again.asdict() == net.asdict()


def test_fromdict_missing_field():
    with pytest.raises(FlowNetworkException) as exc:
        Network.fromdict({"links": [{"id": "1", "tail": "o"}]})
    assert exc.value.code == FlowNetworkException.FLOW_PARSE_ERROR


def test_split_nodes(motivating):
    net = split_nodes(motivating, {"b": 1})
    assert "b:in" in net.nodes and "b:out" in net.nodes
    assert net.link("1").head == "b:in"
    assert net.link("3").tail == "b:out"
    assert net.link("b").capacity == 1
    assert validate(net).valid
    assert cut_capacity(net, Cut.of("a", "b:in")) == 2


def test_split_origin_keeps_inflow(motivating):
    net = split_nodes(motivating, {"a": 3})
    assert net.inflows == {"a:in": 2}
    with pytest.raises(FlowNetworkException):
        split_nodes(motivating, {"d": 1})


@pytest.mark.parametrize("seed", range(10))
def test_random_networks_valid(seed):
    net = random_network(seed, n_nodes=3 + seed % 5)
    assert validate(net).valid
    assert net == random_network(seed, n_nodes=3 + seed % 5)


def test_motivating_buffers():
    net = motivating_network(buffers=1)
    assert net.finite_buffers.all()
    assert motivating_network(buffers={"3": 2}).finite_buffers.tolist() == [False, False, True, False, False]
