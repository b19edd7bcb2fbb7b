import io
import json
import pytest
import numpy as np
from dataclasses import replace

from monoflow.analysis import ClassificationThresholds, classify_links
from monoflow.core import FlowNetworkException, FlowNetworkWarning
from monoflow.dynamics import (
    DensityState, FailureCascade, FailureEvent, IntegrationConfig, Stage, Termination, cut_off_origins,
    destination_outflow, failed_flows, integrate, integrate_cascade, integrate_pair, integrate_schedule, rhs,
    throughput,
)
from monoflow.scenario import Scenario
from monoflow.networks import motivating_network
from monoflow.routing import Section2Policy, SoftmaxPolicy, build_policy

from support_modules.test_tools.fixtures import chain


def test_rhs_at_zero_r1(motivating):
    value = rhs(motivating, Section2Policy("R1", motivating), np.zeros(5))
    assert value == pytest.approx([4 / 3, 2 / 3, 0, 0, 0])
    assert value.sum() == pytest.approx(2)


def test_rhs_conserves_mass_inside(motivating):
    policy = SoftmaxPolicy(motivating)
    rho = np.array([0.3, 1.2, 0.1, 2.0, 0.7])
    flows = policy.flows(rho)
    value = rhs(motivating, policy, DensityState(rho))
    assert value.sum() == pytest.approx(2 - flows.exit.sum())


def test_zero_inflow_stays_zero():
    net = chain(capacities=(2, 2), inflow=0)
    traj = integrate(net, SoftmaxPolicy(net), np.zeros(2), IntegrationConfig(t_max=10))
    assert traj.termination is Termination.EQUILIBRIUM
    assert np.all(traj.states == 0)
    assert throughput(traj, net) == 0


def test_softmax_reaches_equilibrium(motivating):
    traj = integrate(motivating, SoftmaxPolicy(motivating), np.zeros(5), IntegrationConfig(t_max=300))
    assert traj.termination is Termination.EQUILIBRIUM
    assert np.abs(rhs(motivating, SoftmaxPolicy(motivating), traj.final_state)).max() < 1e-6
    assert traj.outflow[-1, motivating.terminal].sum() == pytest.approx(2, abs=1e-6)
    assert (traj.states >= 0).all()
    assert np.all(np.diff(traj.times) > 0)


def test_r3_throughput_matches_demand(motivating):
    traj = integrate(motivating, Section2Policy("R3", motivating), np.zeros(5), IntegrationConfig(t_max=200))
    assert throughput(traj, motivating, window=min(50.0, traj.t_end / 2)) == pytest.approx(2, abs=1e-3)


def test_buffer_hit_within_bound():
    net = motivating_network(buffers=1).with_capacities({"3": 0, "4": "1/2"})
    traj = integrate(net, SoftmaxPolicy(net), np.zeros(5), IntegrationConfig(t_max=50))
    assert traj.termination is Termination.BUFFER_HIT
    t_lo, t_hi = traj.kappa_interval
    assert t_lo <= t_hi <= 8.0
    assert t_hi - t_lo <= 1e-6 * max(t_hi, 1.0)
    assert traj.hit_links
    assert (traj.final_state <= 1.0).all()


def test_deterministic(motivating):
    config = IntegrationConfig(t_max=5)
    a = integrate(motivating, SoftmaxPolicy(motivating), np.full(5, 0.5), config)
    b = integrate(motivating, SoftmaxPolicy(motivating), np.full(5, 0.5), config)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)


def test_sample_grid(motivating):
    traj = integrate(motivating, SoftmaxPolicy(motivating), np.zeros(5),
                     IntegrationConfig(t_max=4, sample_dt=0.5, detect_equilibrium=False))
    assert traj.times == pytest.approx(np.arange(0, 4.5, 0.5))


def test_invalid_initial_state():
    net = chain(capacities=(1, 1), buffers=(1, 1))
    policy = SoftmaxPolicy(net)
    with pytest.raises(FlowNetworkException) as exc:
        integrate(net, policy, np.array([1.0, 0.0]))
    assert exc.value.code == FlowNetworkException.FLOW_BAD_PARAMETER
    assert exc.value.details["link"] == "1"
    with pytest.raises(FlowNetworkException):
        integrate(net, policy, np.zeros(3))
    with pytest.raises(FlowNetworkException):
        integrate(net, policy, np.array([-0.1, 0.0]))


def test_config_validation():
    with pytest.raises(FlowNetworkException) as exc:
        IntegrationConfig(t_max=0)
    assert exc.value.code == FlowNetworkException.FLOW_BAD_PARAMETER
    with pytest.raises(FlowNetworkException) as exc:
        IntegrationConfig.fromdict({"t_mx": 3})
    assert exc.value.code == FlowNetworkException.FLOW_PARSE_ERROR
    config = IntegrationConfig.fromdict({"t_max": 3, "sample_dt": 0.1})
    assert IntegrationConfig.fromdict(config.asdict()) == config


def test_throughput_window_too_long(motivating):
    traj = integrate(motivating, SoftmaxPolicy(motivating), np.zeros(5), IntegrationConfig(t_max=2, detect_equilibrium=False))
    with pytest.raises(FlowNetworkException) as exc:
        throughput(traj, motivating, window=10)
    assert exc.value.code == FlowNetworkException.FLOW_PRECONDITION_NOT_MET


def test_trajectory_artifacts(tmp_path, motivating):
    traj = integrate(motivating, SoftmaxPolicy(motivating), np.zeros(5), IntegrationConfig(t_max=1, detect_equilibrium=False))
    buffer = io.StringIO()
    traj.to_csv(buffer)
    lines = buffer.getvalue().splitlines()
    assert lines[0].split(",")[:3] == ["t", "rho_1", "rho_2"]
    assert lines[0].split(",")[-1] == "fout_5"
    assert len(lines) == len(traj.times) + 1

    traj.write(tmp_path, throughput=1.5)
    data = json.loads((tmp_path / "termination.json").read_text())
    assert data["termination"] == "reached_t_max"
    assert data["throughput"] == 1.5
    assert data["t_end"] == pytest.approx(1.0)
    assert (tmp_path / "trajectory.csv").exists()


def test_integrate_pair_grid(motivating):
    times, a, b, termination = integrate_pair(motivating, SoftmaxPolicy(motivating), np.zeros(5), np.full(5, 1.0), 5.0, samples=50)
    assert times == pytest.approx(np.linspace(0, 5, 51))
    assert a.shape == b.shape == (51, 5)
    assert termination is Termination.REACHED_T_MAX


def test_schedule_switches(motivating):
    schedule = [Stage(0.0, motivating), Stage(5.0, motivating.with_capacities({"3": "1/6"})), Stage(10.0, motivating.with_capacities({"3": 0}))]

    def make_policy(network):
        return build_policy({"type": "section2", "variant": "R3"}, network)

    traj = integrate_schedule(schedule, make_policy, np.zeros(5),
                              IntegrationConfig(t_max=15, detect_equilibrium=False))
    assert traj.stage_starts == (0.0, 5.0, 10.0)
    assert np.all(np.diff(traj.times) > 0)
    assert 5.0 in traj.times and 10.0 in traj.times
    assert traj.t_end == pytest.approx(15)
    late = traj.times > 10.0
    outflow_3 = traj.outflow[late, motivating.link_index["3"]]
    assert outflow_3 == pytest.approx(np.zeros(late.sum()))


def test_schedule_must_start_at_zero(motivating):
    with pytest.raises(FlowNetworkException):
        integrate_schedule([Stage(1.0, motivating)], lambda n: SoftmaxPolicy(n), np.zeros(5))
    with pytest.raises(FlowNetworkException):
        integrate_schedule([Stage(0.0, motivating), Stage(200.0, motivating)], lambda n: SoftmaxPolicy(n), np.zeros(5))


def test_failed_flows_reroute(motivating):
    flows = Section2Policy("R1", motivating).flows(np.ones(5))
    i = motivating.link_index
    failed = np.zeros(5, dtype=bool)
    failed[i["3"]] = True
    masked = failed_flows(flows, motivating, failed)
    assert masked.internal[i["1"], i["4"]] == pytest.approx(flows.outflow[i["1"]])
    assert masked.inflow[i["3"]] == 0 and masked.outflow[i["3"]] == 0
    assert masked.internal[i["2"]] == pytest.approx(flows.internal[i["2"]])
    assert masked.entry == pytest.approx(flows.entry)

    failed[:] = False
    failed[i["1"]] = True
    masked = failed_flows(flows, motivating, failed)
    assert masked.entry[i["2"]] == pytest.approx(2.0)
    assert masked.entry[i["1"]] == 0

    failed[:] = False
    failed[[i["3"], i["4"]]] = True
    assert failed_flows(flows, motivating, failed).outflow[i["1"]] == 0


def test_cut_off_origins(motivating):
    i = motivating.link_index
    failed = np.zeros(5, dtype=bool)
    failed[i["1"]] = True
    assert cut_off_origins(motivating, failed) == ()
    failed[i["2"]] = True
    assert cut_off_origins(motivating, failed) == ("a",)


def test_cascade_cuts_off_overloaded_chain():
    net = chain(capacities=(2, 1), inflow=1.5, buffers=(2, 2))
    cascade = integrate_cascade(net, SoftmaxPolicy(net), np.zeros(2), IntegrationConfig(t_max=100))
    traj = cascade.trajectory
    assert traj.termination is Termination.ORIGIN_CUT_OFF
    assert cascade.cut_off == ("v0",)
    assert "1" in cascade.failed_links
    assert set(cascade.failed_links) <= {"1", "2"}
    assert traj.kappa_interval == (cascade.events[0].t_lo, cascade.events[0].t_hi)
    assert np.all(np.diff(traj.times) >= 0)
    for link in cascade.failed_links:
        assert traj.final_state[net.link_index[link]] == pytest.approx(2.0, abs=1e-3)
    data = cascade.asdict()
    assert data["termination"] == "origin_cut_off"
    assert data["cut_off_origins"] == ["v0"]


def test_cascade_without_overload():
    net = chain(capacities=(2, 2), inflow=1, buffers=(3, 3))
    cascade = integrate_cascade(net, SoftmaxPolicy(net), np.zeros(2), IntegrationConfig(t_max=500))
    assert cascade.trajectory.termination is Termination.EQUILIBRIUM
    assert cascade.events == ()
    assert cascade.cut_off == ()
    assert cascade.sequence() == []


def test_failure_sequence_grouping():
    events = (FailureEvent(1.0, 1.1, ("3",)), FailureEvent(1.2, 1.3, ("4",)), FailureEvent(5.0, 5.1, ("2", "1")))
    cascade = FailureCascade(None, events)
    assert cascade.failed_links == ("3", "4", "2", "1")
    assert cascade.sequence() == [("3",), ("4",), ("1", "2")]
    assert cascade.sequence(window=0.5) == [("3", "4"), ("1", "2")]
    assert events[0].asdict() == {"interval": [1.0, 1.1], "links": ["3"]}


def run_cascade(path):
    scenario = Scenario.load(path)
    network = scenario.effective_network()
    with pytest.warns(FlowNetworkWarning):
        policy = scenario.make_policy(network)
    return integrate_cascade(network, policy, scenario.initial_state(network), scenario.integration)


@pytest.mark.slow
def test_cascade_r1_fails_one_link_at_a_time(scenario_file):
    cascade = run_cascade(scenario_file("cascade_R1.json"))
    assert cascade.trajectory.termination is Termination.ORIGIN_CUT_OFF
    assert cascade.failed_links == ("3", "4", "1", "2")
    assert cascade.sequence() == [("3",), ("4",), ("1",), ("2",)]
    assert cascade.cut_off == ("a",)


@pytest.mark.slow
def test_cascade_r2_fails_in_pairs(scenario_file):
    cascade = run_cascade(scenario_file("cascade_R2.json"))
    failed = cascade.failed_links
    assert len(failed) == 4
    assert set(failed[:2]) == {"3", "4"}
    assert set(failed[2:]) == {"1", "2"}
    assert cascade.cut_off == ("a",)


@pytest.mark.slow
def test_cascade_r3_leaves_link_5(scenario_file):
    cascade = run_cascade(scenario_file("cascade_R3.json"))
    failed = set(cascade.failed_links)
    assert {"1", "2"} <= failed <= {"1", "2", "3", "4"}
    assert cascade.cut_off == ("a",)


def nearest(traj, t):
    return int(np.argmin(np.abs(traj.times - t)))


@pytest.mark.slow
def test_staged_r3_settles_then_overloads(scenario_file):
    scenario = Scenario.load(scenario_file("staged_R3.json"))
    traj = integrate_schedule(scenario.schedule(), scenario.make_policy, scenario.initial_state(),
                              scenario.integration)
    assert traj.stage_starts == (0.0, 50.0, 300.0)
    network = scenario.final_network()
    # the intermediate capacities are still feasible: the run settles before the second switch
    drift = traj.states[nearest(traj, 300.0)] - traj.states[nearest(traj, 250.0)]
    assert np.abs(drift).max() < 1e-2
    assert destination_outflow(traj, network)[nearest(traj, 300.0)] == pytest.approx(2.0, abs=1e-2)
    classification = classify_links(traj, network, ClassificationThresholds(window_fraction=0.25))
    assert classification.B == {"1", "2", "3", "4"}
    assert "5" not in classification.B


@pytest.mark.slow
def test_staged_r2_loses_links_3_and_4(scenario_file):
    scenario = Scenario.load(scenario_file("staged_R2.json"))
    schedule = scenario.schedule()[:2]
    traj = integrate_schedule(schedule, scenario.make_policy, scenario.initial_state(),
                              replace(scenario.integration, t_max=300.0))
    classification = classify_links(traj, schedule[1].network)
    assert classification.B == {"3", "4"}
    assert classification.W == {"1", "2", "5"}
