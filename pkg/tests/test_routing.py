import pytest
import numpy as np

from monoflow.core import FlowNetworkException, FlowNetworkWarning
from monoflow.networks import motivating_network, random_network
from monoflow.routing import (
    Section2Policy, SoftmaxPolicy, build_policy, check_axioms, check_monotonicity, register_policy, sample_interior
)

from support_modules.planted import HerdingPolicy
from support_modules.test_tools.fixtures import chain, density, diamond


def test_r1_origin_row(motivating):
    policy = Section2Policy("R1", motivating)
    for rho in (np.zeros(5), np.full(5, 3.0)):
        flows = policy.flows(rho)
        assert flows.entry[motivating.link_index["1"]] == pytest.approx(4 / 3)
        assert flows.entry[motivating.link_index["2"]] == pytest.approx(2 / 3)


def test_evaluate_origin_link(motivating):
    split = Section2Policy("R1", motivating).evaluate("@in:a", {})
    assert split.flows == pytest.approx({"1": 4 / 3, "2": 2 / 3})
    assert split.total == pytest.approx(2)


def test_empty_network_has_no_internal_flow(motivating):
    for variant in ("R1", "R2", "R3"):
        flows = Section2Policy(variant, motivating).flows(np.zeros(5))
        assert flows.outflow == pytest.approx(np.zeros(5))
        assert flows.entry.sum() == pytest.approx(2)


def test_r3_scales_split_at_b(motivating):
    rho = density(motivating, {"1": 1.0, "3": 0.5, "4": 2.0})
    (r2_13, r2_14), _ = Section2Policy("R2", motivating).matrix(rho)
    (r3_13, r3_14), _ = Section2Policy("R3", motivating).matrix(rho)
    e1, e3, e4 = np.exp(-1.0), np.exp(-0.5), np.exp(-2.0)
    h = (e3 + e4) / (e1 + e3 + e4)
    assert r3_13 == pytest.approx(r2_13 * h)
    assert r3_14 == pytest.approx(r2_14 * h)
    assert r2_13 + r2_14 == pytest.approx(1.0)


def test_softmax_equal_split():
    net = diamond()
    flows = SoftmaxPolicy(net).flows(np.zeros(4))
    assert flows.entry == pytest.approx([1.0, 1.0, 0.0, 0.0])


def test_softmax_destination_outflow():
    net = chain(capacities=(2, 3))
    policy = SoftmaxPolicy(net, beta=2.0)
    split = policy.evaluate("2", {"2": 0.5})
    assert split.flows == pytest.approx({"@out:v2": 3 * (1 - np.exp(-1.0))})


def test_softmax_finite_buffer_potential():
    net = diamond(buffer=4)
    policy = SoftmaxPolicy(net)
    assert policy.potential(np.array([2.0, 0.0, 0.0, 0.0])) == pytest.approx([1.0, 0.0, 0.0, 0.0])
    flows = policy.flows(np.array([4.0, 0.0, 0.0, 0.0]))
    # at its buffer a link releases its full capacity downstream and takes nothing in
    assert flows.outflow[0] == pytest.approx(2.0)
    assert flows.internal[0, 2] == pytest.approx(2.0)
    assert flows.entry == pytest.approx([0.0, 2.0, 0.0, 0.0])


def test_softmax_finite_buffer_link_split():
    net = chain(capacities=(2, 2), buffers=(4, 4))
    split = SoftmaxPolicy(net).link_split(0, np.array([4.0, 0.0]))
    assert split == pytest.approx([2.0])


def test_domain_error_when_blocked():
    net = chain(capacities=(2, 2), buffers=(1, 1))
    with pytest.raises(FlowNetworkException) as exc:
        SoftmaxPolicy(net).flows(np.array([1.0, 1.0]))
    assert exc.value.code == FlowNetworkException.FLOW_DOMAIN_ERROR
    assert exc.value.details["link"] == "1"
    with pytest.raises(FlowNetworkException):
        SoftmaxPolicy(net).evaluate("1", {"1": 1.0, "2": 1.0})


@pytest.mark.parametrize("seed", range(5))
def test_softmax_axioms(seed):
    net = random_network(seed, 5, finite_buffers=bool(seed % 2))
    report = check_axioms(SoftmaxPolicy(net), n_samples=20, seed=seed)
    assert report.passed, report.asdict()


def test_single_out_link_origin_is_not_blocked():
    # the origin of a chain has one out-link; blocking it leaves no admissible split
    report = check_axioms(SoftmaxPolicy(chain(capacities=(2, 2))), n_samples=20)
    assert report.passed, report.asdict()
    report = check_axioms(SoftmaxPolicy(diamond()), n_samples=20)
    assert "congested_downstream" not in report.failed


@pytest.mark.parametrize("variant", ["R1", "R2", "R3"])
def test_section2_axioms(motivating, variant):
    report = check_axioms(Section2Policy(variant, motivating), n_samples=30)
    for axiom in ("origin", "empty_link", "congested_self", "capacity_feasibility"):
        assert axiom not in report.failed


def test_softmax_strongly_monotone(motivating):
    report = check_monotonicity(SoftmaxPolicy(motivating), n_samples=10)
    assert report.monotone
    assert report.strongly_monotone
    assert not report.violations


@pytest.mark.parametrize("variant", ["R1", "R2", "R3"])
def test_section2_monotone(motivating, variant):
    report = check_monotonicity(Section2Policy(variant, motivating), n_samples=10)
    assert report.monotone
    assert not report.strongly_monotone


def test_planted_policy_not_monotone(motivating):
    report = check_monotonicity(HerdingPolicy(motivating), n_samples=5)
    assert not report.monotone
    assert any(v.kind == "flow" for v in report.violations)
    assert report.asdict()["violation_count"] == len(report.violations)


def test_section2_needs_motivating_topology():
    with pytest.raises(FlowNetworkException) as exc:
        Section2Policy("R3", diamond())
    assert exc.value.code == FlowNetworkException.FLOW_VALIDATION_ERROR
    with pytest.raises(FlowNetworkException):
        Section2Policy("R7", motivating_network())


def test_section2_warns_on_finite_buffers():
    with pytest.warns(FlowNetworkWarning):
        Section2Policy("R2", motivating_network(buffers=1))


def test_build_policy(motivating):
    policy = build_policy({"type": "section2", "variant": "r2"}, motivating)
    assert policy.to_spec() == {"type": "section2", "variant": "R2"}
    assert build_policy(policy.to_spec(), motivating).to_spec() == policy.to_spec()
    assert isinstance(build_policy({"type": "softmax"}, motivating), SoftmaxPolicy)
    with pytest.raises(FlowNetworkException) as exc:
        build_policy({"type": "nope"}, motivating)
    assert exc.value.code == FlowNetworkException.FLOW_PARSE_ERROR


def test_register_policy(motivating):
    register_policy("herding", lambda spec, network: HerdingPolicy(network))
    policy = build_policy({"type": "herding"}, motivating)
    assert isinstance(policy, HerdingPolicy)


def test_rebind_keeps_parameters(motivating):
    policy = SoftmaxPolicy(motivating, beta={"1": 2.0})
    rebound = policy.rebind(motivating.with_capacities({"3": 0}))
    assert rebound.to_spec() == policy.to_spec()
    assert rebound.network.link("3").capacity == 0


def test_softmax_rejects_bad_beta(motivating):
    with pytest.raises(FlowNetworkException):
        SoftmaxPolicy(motivating, beta={"9": 1.0})


def test_sample_interior_in_domain():
    net = chain(capacities=(1, 1), buffers=(2, "inf"))
    rho = sample_interior(net, np.random.default_rng(1), size=100)
    assert rho.shape == (100, 2)
    assert (rho[:, 0] <= 1.6).all() and (rho[:, 0] >= 0.1).all()
    assert (rho[:, 1] <= 5.0).all()
