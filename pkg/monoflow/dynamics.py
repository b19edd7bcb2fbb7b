"""
 * Copyright(c) 2026 monoflow contributors
 *
 * This program and the accompanying materials are made available under the
 * terms of the Eclipse Public License v. 2.0 which is available at
 * http://www.eclipse.org/legal/epl-2.0, or the Eclipse Distribution License
 * v. 1.0 which is available at
 * http://www.eclipse.org/org/documents/edl-v10.php.
 *
 * SPDX-License-Identifier: EPL-2.0 OR BSD-3-Clause
"""

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import IO, Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .core import FlowNetworkException
from .graph import Network
from .routing import LinkFlows, RoutingPolicy
from .util import time_average


logger = logging.getLogger(__name__)

# Components in (-NEGATIVE_ROUNDOFF, 0) are round-off and get projected onto 0.
NEGATIVE_ROUNDOFF = 1e-12


@dataclass(frozen=True)
class IntegrationConfig:
    """Settings of the adaptive integrator.

    Attributes
    ----------
    t_max: float
        Final time.
    dt_init: float
        First trial step.
    dt_max: float
        Largest step; also bounds the spacing of recorded samples when ``sample_dt`` is unset.
    dt_min: float
        Smallest step before the run aborts as too stiff.
    tol_step: float
        Relative and absolute local error tolerance; also the relative precision of buffer-hit times.
    tol_buffer: float
        A finite-buffer density within ``tol_buffer`` of its buffer terminates the run.
    tol_equilibrium: float, optional
        Threshold on the sup norm of the right-hand side; default 1e-8 max(1, total inflow).
    equilibrium_window: int
        Number of consecutive accepted steps below ``tol_equilibrium`` that count as an equilibrium.
    detect_equilibrium: bool
        Stop once an equilibrium is detected.
    sample_dt: float, optional
        Record samples on a uniform grid of this spacing instead of at every step.
    max_steps: int
        Upper bound on accepted plus rejected steps.
    """

    t_max: float = 100.0
    dt_init: float = 1e-3
    dt_max: float = 1.0
    dt_min: float = 1e-12
    tol_step: float = 1e-9
    tol_buffer: float = 1e-4
    tol_equilibrium: Optional[float] = None
    equilibrium_window: int = 10
    detect_equilibrium: bool = True
    sample_dt: Optional[float] = None
    max_steps: int = 2_000_000

    def __post_init__(self) -> None:
        if not self.t_max > 0:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "t_max must be positive.")
        for name in ("dt_init", "dt_max", "dt_min", "tol_step", "tol_buffer"):
            if not getattr(self, name) > 0:
                raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, f"{name} must be positive.")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "sample_dt must be positive.")

    def equilibrium_threshold(self, network: Network) -> float:
        if self.tol_equilibrium is not None:
            return self.tol_equilibrium
        return 1e-8 * max(1.0, float(network.total_inflow))

    def asdict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def fromdict(cls, data: Mapping[str, Any]) -> "IntegrationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FlowNetworkException(
                FlowNetworkException.FLOW_PARSE_ERROR, "Unknown integration settings.", keys=sorted(unknown)
            )
        return cls(**data)


class Termination(enum.Enum):
    REACHED_T_MAX = "reached_t_max"
    BUFFER_HIT = "buffer_hit"
    EQUILIBRIUM = "equilibrium_detected"
    ORIGIN_CUT_OFF = "origin_cut_off"


@dataclass
class DensityState:
    """Link densities at time ``t``, indexed like ``network.links``."""

    rho: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.rho = np.asarray(self.rho, dtype=float)

    def check(self, network: Network) -> None:
        if self.rho.shape != (len(network.links),):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER,
                f"Expected {len(network.links)} densities, got shape {self.rho.shape}."
            )
        if not np.all(np.isfinite(self.rho)) or (self.rho < 0).any():
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "Densities must be finite and non-negative.")
        over = self.rho >= network.buffers
        if over.any():
            link = network.links[int(np.argmax(over))].id
            raise FlowNetworkException(
                FlowNetworkException.FLOW_BAD_PARAMETER, f"Initial density of link {link} is not below its buffer.",
                link=link
            )


@dataclass
class Trajectory:
    """Sampled solution of the flow dynamics.

    Attributes
    ----------
    link_ids: tuple of str
    times: np.ndarray
        Strictly increasing sample times, shape (n,).
    states: np.ndarray
        Densities, shape (n, m).
    inflow, outflow: np.ndarray
        f^in and f^out at every sample, shape (n, m).
    termination: Termination
    kappa_interval: tuple of float, optional
        Bracket [t_lo, t_hi] of the buffer-hit time.
    hit_links: tuple of str
        Links within ``tol_buffer`` of their buffer at termination.
    stage_starts: tuple of float
        Switch times of a staged (piecewise constant capacity) run.
    """

    link_ids: Tuple[str, ...]
    times: np.ndarray
    states: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray
    termination: Termination
    kappa_interval: Optional[Tuple[float, float]] = None
    hit_links: Tuple[str, ...] = ()
    stage_starts: Tuple[float, ...] = ()
    steps: int = 0
    rejected: int = 0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def trailing(self, fraction: float) -> np.ndarray:
        """Mask of the samples in the trailing ``fraction`` of the time span."""
        start = self.times[0] + (1.0 - fraction) * (self.times[-1] - self.times[0])
        return self.times >= start

    def density(self, link_id: str) -> np.ndarray:
        return self.states[:, self.link_ids.index(link_id)]

    def termination_dict(self, throughput: Optional[float] = None) -> Dict[str, Any]:
        return {
            "termination": self.termination.value,
            "t_end": self.t_end,
            "kappa_interval": list(self.kappa_interval) if self.kappa_interval else None,
            "hit_links": list(self.hit_links),
            "throughput": throughput,
            "samples": int(len(self.times)),
            "steps": self.steps,
            "rejected_steps": self.rejected,
            "stage_starts": list(self.stage_starts),
        }

    def to_csv(self, target: Union[str, Path, IO[str]]) -> None:
        """Write ``t, rho_<id>..., fin_<id>..., fout_<id>...`` rows with 17 significant digits."""
        header = ",".join(
            ["t"] + [f"rho_{e}" for e in self.link_ids] + [f"fin_{e}" for e in self.link_ids]
            + [f"fout_{e}" for e in self.link_ids]
        )
        table = np.column_stack([self.times, self.states, self.inflow, self.outflow])
        np.savetxt(target, table, fmt="%.17g", delimiter=",", header=header, comments="")

    def write(self, out_dir: Union[str, Path], throughput: Optional[float] = None) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.to_csv(out_dir / "trajectory.csv")
        with open(out_dir / "termination.json", "w", encoding="utf-8") as f:
            json.dump(self.termination_dict(throughput), f, indent=2, sort_keys=True)
            f.write("\n")


def rhs(network: Network, policy: RoutingPolicy, state: Union[DensityState, np.ndarray]) -> np.ndarray:
    """Right-hand side of the flow dynamics, rho_dot_e = f^in_e - f^out_e.

    Raises
    ------
    FlowNetworkException
        ``FLOW_DOMAIN_ERROR`` naming the offending link when some link has its whole local
        density vector at the buffers.
    """
    rho = state.rho if isinstance(state, DensityState) else np.asarray(state, dtype=float)
    flows = policy.flows(rho)
    return flows.inflow - flows.outflow


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


@dataclass
class _RawRun:
    times: List[float]
    states: List[np.ndarray]
    termination: Termination
    kappa_interval: Optional[Tuple[float, float]] = None
    hit: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    steps: int = 0
    rejected: int = 0


class _StepRejected(Exception):
    pass


class DormandPrince:
    """Embedded Runge-Kutta 5(4) integrator with PI step control and buffer-band events.

    ``field`` maps a state vector to its time derivative. A ``FLOW_DOMAIN_ERROR`` raised while
    evaluating a trial stage rejects the step instead of aborting the run.
    """

    def __init__(self, field: Callable[[np.ndarray], np.ndarray], buffers: np.ndarray, config: IntegrationConfig,
                 equilibrium_threshold: float) -> None:
        self.field = field
        self.buffers = buffers
        self.finite = np.isfinite(buffers)
        self.band = np.where(self.finite, buffers - config.tol_buffer, np.inf)
        self.config = config
        self.equilibrium_threshold = equilibrium_threshold

    def _evaluate(self, y: np.ndarray, trial: bool = True) -> np.ndarray:
        try:
            ydot = self.field(y)
        except FlowNetworkException as e:
            if trial and e.code == FlowNetworkException.FLOW_DOMAIN_ERROR:
                raise _StepRejected() from e
            raise
        if not np.all(np.isfinite(ydot)):
            raise FlowNetworkException(
                FlowNetworkException.FLOW_NUMERICAL_ABORT, "Non-finite value in the routing policy evaluation."
            )
        return ydot

    def _step(self, y: np.ndarray, k1: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], k) if a != 0.0)
            k.append(self._evaluate(yi))
        ynew = y + h * sum(b * kj for b, kj in zip(_B, k) if b != 0.0)
        err = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        return ynew, err, k[6]

    def _error_norm(self, y: np.ndarray, ynew: np.ndarray, err: np.ndarray) -> float:
        tol = self.config.tol_step
        scale = tol + tol * np.maximum(np.abs(y), np.abs(ynew))
        return float(np.sqrt(np.mean((err / scale) ** 2))) if y.size else 0.0

    def _bracket_hit(self, t: float, y: np.ndarray, k1: np.ndarray, h: float) -> Tuple[float, float, np.ndarray]:
        """Bisect the step length until the first entry into the buffer band is bracketed."""
        lo, hi = 0.0, h
        y_hi, _, _ = self._step(y, k1, h)
        while hi - lo > self.config.tol_step * max(t + hi, 1e-300):
            mid = 0.5 * (lo + hi)
            try:
                y_mid, _, _ = self._step(y, k1, mid)
            except _StepRejected:
                hi = mid
                continue
            if (y_mid >= self.band).any():
                hi, y_hi = mid, y_mid
            else:
                lo = mid
        return t + lo, t + hi, y_hi

    def run(self, y0: np.ndarray, t_end: float, *, grid: Optional[np.ndarray] = None) -> _RawRun:
        config = self.config
        t = 0.0
        y = np.array(y0, dtype=float)
        k1 = self._evaluate(y, trial=False)
        h = min(config.dt_init, config.dt_max, t_end)
        err_prev = 1.0
        quiet = 0
        run = _RawRun([t], [y.copy()], Termination.REACHED_T_MAX, hit=np.zeros(y.size, dtype=bool))
        next_grid = 1 if grid is not None else None

        while t < t_end:
            if run.steps + run.rejected >= config.max_steps:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_NUMERICAL_ABORT, "Maximum number of steps exceeded.", t=t
                )
            h = min(h, config.dt_max, t_end - t)
            if next_grid is not None and next_grid < len(grid):
                h = min(h, grid[next_grid] - t)
            if h < config.dt_min and t_end - t > config.dt_min:
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_NUMERICAL_ABORT, "Step size underflow.", t=t, step=h
                )

            try:
                ynew, err, k7 = self._step(y, k1, h)
                norm = self._error_norm(y, ynew, err)
            except _StepRejected:
                run.rejected += 1
                h *= 0.25
                continue

            if norm > 1.0 or (ynew < -NEGATIVE_ROUNDOFF).any():
                run.rejected += 1
                factor = _SAFETY * norm ** -0.2 if norm > 1.0 else 0.5
                h *= max(_MIN_FACTOR, min(factor, 0.5))
                continue

            if (ynew >= self.band).any():
                t_lo, t_hi, y_hit = self._bracket_hit(t, y, k1, h)
                y_hit = np.clip(np.where(y_hit < 0, 0.0, y_hit), 0.0, self.buffers)
                run.steps += 1
                run.times.append(t_hi)
                run.states.append(y_hit)
                run.termination = Termination.BUFFER_HIT
                run.kappa_interval = (t_lo, t_hi)
                run.hit = y_hit >= self.band
                logger.info("buffer hit in [%.12g, %.12g]", t_lo, t_hi)
                return run

            ynew = np.where(ynew < 0, 0.0, ynew)
            t_new = t + h
            if next_grid is not None and next_grid < len(grid) and math.isclose(t_new, grid[next_grid], rel_tol=1e-13):
                t_new = float(grid[next_grid])
            run.steps += 1
            t, y, k1 = t_new, ynew, self._evaluate(ynew, trial=False)

            if grid is None:
                run.times.append(t)
                run.states.append(y.copy())
            elif next_grid < len(grid) and t >= grid[next_grid]:
                run.times.append(t)
                run.states.append(y.copy())
                next_grid += 1

            if config.detect_equilibrium:
                quiet = quiet + 1 if np.abs(k1).max(initial=0.0) < self.equilibrium_threshold else 0
                if quiet >= config.equilibrium_window:
                    if run.times[-1] != t:
                        run.times.append(t)
                        run.states.append(y.copy())
                    run.termination = Termination.EQUILIBRIUM
                    logger.info("equilibrium detected at t=%.6g", t)
                    return run

            factor = _SAFETY * max(norm, 1e-10) ** -_ALPHA * err_prev ** _BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(norm, 1e-4)

        if run.times[-1] != t:
            run.times.append(t)
            run.states.append(y.copy())
        return run


def _record_flows(policy: RoutingPolicy, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    inflow = np.empty_like(states)
    outflow = np.empty_like(states)
    for i, rho in enumerate(states):
        flows: LinkFlows = policy.flows(rho)
        inflow[i] = flows.inflow
        outflow[i] = flows.outflow
    return inflow, outflow


def _sample_grid(config: IntegrationConfig, t_end: float) -> Optional[np.ndarray]:
    if config.sample_dt is None:
        return None
    grid = np.arange(0.0, t_end, config.sample_dt)
    return np.append(grid, t_end) if grid[-1] < t_end else grid


def integrate(
    network: Network,
    policy: RoutingPolicy,
    rho0: Union[DensityState, np.ndarray, Sequence[float]],
    config: Optional[IntegrationConfig] = None,
) -> Trajectory:
    """Integrate the flow dynamics from ``rho0``.

    The run ends at ``config.t_max``, when a finite-buffer density enters the band
    [B_e - tol_buffer, B_e] (the hit time is bracketed to relative precision ``tol_step``), or
    when the right-hand side stays below the equilibrium threshold for
    ``equilibrium_window`` consecutive steps.

    Raises
    ------
    FlowNetworkException
        ``FLOW_NUMERICAL_ABORT`` on step size underflow or non-finite policy values,
        ``FLOW_BAD_PARAMETER`` for initial densities outside the domain.
    """
    config = config or IntegrationConfig()
    state = rho0 if isinstance(rho0, DensityState) else DensityState(np.asarray(rho0, dtype=float))
    state.check(network)

    def field(y: np.ndarray) -> np.ndarray:
        return rhs(network, policy, y)

    stepper = DormandPrince(field, network.buffers, config, config.equilibrium_threshold(network))
    raw = stepper.run(state.rho, config.t_max, grid=_sample_grid(config, config.t_max))
    states = np.array(raw.states)
    inflow, outflow = _record_flows(policy, states)
    times = np.array(raw.times) + state.t
    kappa = tuple(k + state.t for k in raw.kappa_interval) if raw.kappa_interval else None
    hit = tuple(network.links[i].id for i in np.flatnonzero(raw.hit)) if raw.hit.size else ()
    logger.debug("integration finished: %s after %d steps (%d rejected)", raw.termination.value, raw.steps, raw.rejected)
    return Trajectory(network.link_ids, times, states, inflow, outflow, raw.termination, kappa, hit,
                      steps=raw.steps, rejected=raw.rejected)


def integrate_pair(
    network: Network,
    policy: RoutingPolicy,
    rho_a: np.ndarray,
    rho_b: np.ndarray,
    horizon: float,
    config: Optional[IntegrationConfig] = None,
    samples: int = 200,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Termination]:
    """Integrate two initial states as one stacked system on a shared uniform time grid.

    Returns the grid times, both state histories and the termination (a buffer hit of either
    copy truncates both).
    """
    config = replace(config or IntegrationConfig(), t_max=horizon, detect_equilibrium=False, sample_dt=None)
    m = len(network.links)
    for rho in (rho_a, rho_b):
        DensityState(rho).check(network)

    def field(y: np.ndarray) -> np.ndarray:
        return np.concatenate([rhs(network, policy, y[:m]), rhs(network, policy, y[m:])])

    stepper = DormandPrince(field, np.concatenate([network.buffers, network.buffers]), config, 0.0)
    grid = np.linspace(0.0, horizon, samples + 1)
    raw = stepper.run(np.concatenate([rho_a, rho_b]), horizon, grid=grid)
    states = np.array(raw.states)
    return np.array(raw.times), states[:, :m], states[:, m:], raw.termination


@dataclass(frozen=True)
class Stage:
    """A piece of a staged run: from ``start`` on, the dynamics use ``network``."""

    start: float
    network: Network


def integrate_schedule(
    schedule: Sequence[Stage],
    make_policy: Callable[[Network], RoutingPolicy],
    rho0: Union[np.ndarray, Sequence[float]],
    config: Optional[IntegrationConfig] = None,
) -> Trajectory:
    """Integrate piecewise-constant capacity schedules, restarting at every switch time.

    Each stage runs from its start to the next stage's start (the last one to ``config.t_max``),
    continuing from the current state. Only the last stage may stop at an equilibrium; a buffer
    hit ends the whole schedule.
    """
    config = config or IntegrationConfig()
    if not schedule or schedule[0].start != 0:
        raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "The first stage must start at t=0.")
    starts = [s.start for s in schedule]
    if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= config.t_max:
        raise FlowNetworkException(
            FlowNetworkException.FLOW_BAD_PARAMETER, "Stage start times must increase and precede t_max.", starts=starts
        )

    rho = np.asarray(rho0, dtype=float)
    pieces: List[Trajectory] = []
    for i, stage in enumerate(schedule):
        end = schedule[i + 1].start if i + 1 < len(schedule) else config.t_max
        last = i + 1 == len(schedule)
        stage_config = replace(config, t_max=end - stage.start, detect_equilibrium=config.detect_equilibrium and last)
        logger.info("stage %d: t in [%g, %g]", i, stage.start, end)
        piece = integrate(stage.network, make_policy(stage.network), DensityState(rho, stage.start), stage_config)
        pieces.append(piece)
        rho = piece.final_state
        if piece.termination is not Termination.REACHED_T_MAX:
            break

    first = pieces[0]
    keep = [first] + [replace(p, times=p.times[1:], states=p.states[1:], inflow=p.inflow[1:], outflow=p.outflow[1:])
                      for p in pieces[1:]]
    final = pieces[-1]
    return Trajectory(
        first.link_ids,
        np.concatenate([p.times for p in keep]),
        np.concatenate([p.states for p in keep]),
        np.concatenate([p.inflow for p in keep]),
        np.concatenate([p.outflow for p in keep]),
        final.termination,
        final.kappa_interval,
        final.hit_links,
        stage_starts=tuple(starts[:len(pieces)]),
        steps=sum(p.steps for p in pieces),
        rejected=sum(p.rejected for p in pieces),
    )


def _reroute(row: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    total = row.sum()
    kept = np.where(allowed, row, 0.0)
    if total <= 0 or not allowed.any():
        return kept
    share = kept.sum()
    if share > 0:
        return kept * (total / share)
    return allowed * (total / allowed.sum())


def failed_flows(flows: LinkFlows, network: Network, failed: np.ndarray) -> LinkFlows:
    """Remove the ``failed`` links from the flows of a policy.

    A failed link neither receives nor releases flow. What a surviving link or an origin would
    have routed onto failed links goes to its surviving alternatives, in proportion to the
    flow they already receive (evenly when they receive none). A link whose downstream links
    have all failed releases nothing.
    """
    failed = np.asarray(failed, dtype=bool)
    if not failed.any():
        return flows
    alive = ~failed
    internal = flows.internal.copy()
    exit_ = flows.exit.copy()
    entry = flows.entry.copy()
    internal[failed] = 0.0
    exit_[failed] = 0.0
    for e in np.flatnonzero(alive & ~network.terminal):
        internal[e] = _reroute(internal[e], network.adjacency[e] & alive)
    for out in network.origin_adjacency:
        entry[out] = _reroute(entry[out], alive[out])
    return LinkFlows(internal, exit_, entry)


def cut_off_origins(network: Network, failed: np.ndarray) -> Tuple[str, ...]:
    """Origins all of whose outgoing links have failed."""
    alive = ~np.asarray(failed, dtype=bool)
    return tuple(node for node, out in zip(network.origins, network.origin_adjacency) if not (out & alive).any())


@dataclass(frozen=True)
class FailureEvent:
    """Links that reached their buffer within the bracket ``[t_lo, t_hi]`` and were removed."""

    t_lo: float
    t_hi: float
    links: Tuple[str, ...]

    def asdict(self) -> Dict[str, Any]:
        return {"interval": [self.t_lo, self.t_hi], "links": list(self.links)}


@dataclass
class FailureCascade:
    """A run in which links fail irreversibly the first time they reach their buffer.

    Attributes
    ----------
    trajectory: Trajectory
        The whole run; failed links keep the density they failed at.
    events: tuple of FailureEvent
        In order of time.
    cut_off: tuple of str
        Origins left without a surviving outgoing link; the run stops as soon as there is one.
    """

    trajectory: Trajectory
    events: Tuple[FailureEvent, ...]
    cut_off: Tuple[str, ...] = ()

    @property
    def failed_links(self) -> Tuple[str, ...]:
        return tuple(link for event in self.events for link in event.links)

    def sequence(self, window: float = 0.0) -> List[Tuple[str, ...]]:
        """Failed links grouped into simultaneous failures.

        An event joins the current group when its bracket ends within ``window`` time units
        of the end of the group's first event.
        """
        groups: List[List[str]] = []
        start = -math.inf
        for event in self.events:
            if groups and event.t_hi - start <= window:
                groups[-1].extend(event.links)
            else:
                groups.append(list(event.links))
                start = event.t_hi
        return [tuple(sorted(group)) for group in groups]

    def asdict(self, window: float = 0.0) -> Dict[str, Any]:
        return {
            "termination": self.trajectory.termination.value,
            "t_end": self.trajectory.t_end,
            "events": [event.asdict() for event in self.events],
            "failed_links": list(self.failed_links),
            "sequence": [list(group) for group in self.sequence(window)],
            "cut_off_origins": list(self.cut_off),
        }


# Failed links are evaluated just below their buffer; the policy itself never sees the excluded point.
_FAILED_FILL = 1.0 - 1e-9


def integrate_cascade(
    network: Network,
    policy: RoutingPolicy,
    rho0: Union[DensityState, np.ndarray, Sequence[float]],
    config: Optional[IntegrationConfig] = None,
) -> FailureCascade:
    """Integrate the flow dynamics with irreversible link failures at buffer hits.

    Every time finite-buffer links enter their buffer band they are removed (see
    :func:`failed_flows`) and the integration restarts from the current densities with the
    remaining time. The run ends at ``config.t_max``, at an equilibrium, or once some origin
    has lost all its outgoing links.

    Raises
    ------
    FlowNetworkException
        As :func:`integrate`.
    """
    config = config or IntegrationConfig()
    state = rho0 if isinstance(rho0, DensityState) else DensityState(np.asarray(rho0, dtype=float))
    state.check(network)
    buffers = network.buffers
    failed = np.zeros(len(network.links), dtype=bool)
    events: List[FailureEvent] = []
    pieces: List[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
    steps = rejected = 0
    t0, rho = state.t, state.rho
    termination = Termination.REACHED_T_MAX
    cut_off: Tuple[str, ...] = ()

    while True:
        mask = failed.copy()

        def evaluate(y: np.ndarray, mask: np.ndarray = mask) -> LinkFlows:
            y = np.where(mask, buffers * _FAILED_FILL, y)
            return failed_flows(policy.flows(y), network, mask)

        def field(y: np.ndarray, evaluate: Callable[[np.ndarray], LinkFlows] = evaluate) -> np.ndarray:
            flows = evaluate(y)
            return flows.inflow - flows.outflow

        remaining = config.t_max - (t0 - state.t)
        piece_config = replace(config, t_max=remaining)
        stepper = DormandPrince(field, np.where(mask, np.inf, buffers), piece_config,
                                config.equilibrium_threshold(network))
        raw = stepper.run(rho, remaining, grid=_sample_grid(piece_config, remaining))
        steps, rejected = steps + raw.steps, rejected + raw.rejected
        states = np.array(raw.states)
        recorded = [evaluate(y) for y in states]
        pieces.append((np.array(raw.times) + t0, states,
                       np.array([f.inflow for f in recorded]), np.array([f.outflow for f in recorded])))
        termination = raw.termination
        if raw.termination is not Termination.BUFFER_HIT:
            break

        hit = raw.hit & ~mask
        links = tuple(network.links[i].id for i in np.flatnonzero(hit))
        event = FailureEvent(raw.kappa_interval[0] + t0, raw.kappa_interval[1] + t0, links)
        events.append(event)
        failed |= hit
        logger.info("links %s failed in [%.12g, %.12g]", ",".join(links), event.t_lo, event.t_hi)
        t0, rho = event.t_hi, states[-1]
        cut_off = cut_off_origins(network, failed)
        if cut_off:
            termination = Termination.ORIGIN_CUT_OFF
            logger.info("origins %s cut off", ",".join(cut_off))
            break
        if config.t_max - (t0 - state.t) <= 0:
            termination = Termination.REACHED_T_MAX
            break

    keep = [pieces[0]] + [tuple(part[1:] for part in piece) for piece in pieces[1:]]
    times, states, inflow, outflow = (np.concatenate([piece[i] for piece in keep]) for i in range(4))
    trajectory = Trajectory(
        network.link_ids, times, states, inflow, outflow,
        termination,
        (events[0].t_lo, events[0].t_hi) if events else None,
        tuple(link for event in events for link in event.links),
        steps=steps,
        rejected=rejected,
    )
    return FailureCascade(trajectory, tuple(events), cut_off)


def destination_outflow(trajectory: Trajectory, network: Network) -> np.ndarray:
    """Total flow into the destinations at every sample."""
    return trajectory.outflow[:, network.terminal].sum(axis=1)


def throughput(trajectory: Trajectory, network: Network, window: Optional[float] = None) -> float:
    """Time average of the total destination inflow over the trailing ``window``.

    ``window`` defaults to the trailing half of the trajectory. A trajectory with a single
    sample yields its instantaneous destination inflow.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PRECONDITION_NOT_MET`` when the window is longer than the trajectory.
    """
    flow = destination_outflow(trajectory, network)
    span = trajectory.t_end - float(trajectory.times[0])
    if window is None:
        window = 0.5 * span
    if window < 0 or window > span * (1 + 1e-12):
        raise FlowNetworkException(
            FlowNetworkException.FLOW_PRECONDITION_NOT_MET,
            f"Throughput window {window} exceeds the trajectory span {span}.", window=window, span=span
        )
    if window == 0 or len(trajectory.times) < 2:
        return float(flow[-1])
    start = trajectory.t_end - window
    mask = trajectory.times >= start
    t = trajectory.times[mask]
    f = flow[mask]
    if t[0] > start:
        # interpolate the left edge of the window
        i = int(np.argmax(mask))
        t0, t1 = trajectory.times[i - 1], trajectory.times[i]
        w = (start - t0) / (t1 - t0)
        t = np.concatenate([[start], t])
        f = np.concatenate([[(1 - w) * flow[i - 1] + w * flow[i]], f])
    return time_average(f, t)
