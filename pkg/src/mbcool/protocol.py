"""Two-step cooling protocol: Fock-state preparation, then stepwise transfer to |0>."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fock import (
    PhysicalParams,
    ResonatorPopulations,
    average_occupation,
    embed,
    fidelity,
    protocol_cutoff,
    thermal_occupation,
    thermal_state,
)
from .jc import cooling_coeffs
from .lindblad import GAMMA_0_RATIO, Diagnostics, LindbladConfig, measured_evolution
from .maps import (
    conditional_map,
    min_first_reserved,
    optimal_conditional_interval,
    reserved_interval,
    unconditional_map,
)
from .schedule.env import CoolingEnv, MeasurementSchedule
from .schedule.search import beam_search

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything needed to reproduce one protocol run.

    ``schedule`` is "equal", "beam", "train" or a path to a schedule JSON.
    ``step2`` selects the conditional interval: "adaptive" retunes it to
    pi / (2 Omega_n) for the level currently being lowered, "fixed" keeps
    pi / (2 Omega_{n_r}) for every round. ``step2_detuning_ratio`` (in units
    of omega_b) overrides the qubit detuning during step 2 only; None keeps
    the step-1 value.
    """

    params: PhysicalParams = field(default_factory=PhysicalParams.from_ratios)
    n_r: int = 10
    rounds: int = 30
    n_actions: int = 5
    schedule: str = "beam"
    beam_width: int = 64
    step2: str = "adaptive"
    open_system: bool = False
    steps_per_tau_r: int = 2000
    strict: bool = False
    seed: int = 0
    train_updates: int = 500
    step2_detuning_ratio: float | None = None

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.n_r < 0:
            raise ValueError("n_r must be non-negative")
        if self.step2 not in ("adaptive", "fixed"):
            raise ValueError(f"unknown step-2 mode {self.step2!r}")

    @property
    def thermal(self):
        return thermal_occupation(self.params)

    def resolved_params(self) -> PhysicalParams:
        """Parameters with a Fock cutoff large enough for the whole run."""
        n_c = max(self.params.n_c, protocol_cutoff(self.thermal, self.rounds), self.n_r + 1)
        return self.params.with_cutoff(n_c)

    def step2_params(self, params: PhysicalParams | None = None) -> PhysicalParams:
        params = params or self.params
        if self.step2_detuning_ratio is None:
            return params
        return replace(params, detuning=self.step2_detuning_ratio * params.omega_b)

    @property
    def tau_r(self) -> float:
        return reserved_interval(self.params, self.n_r)

    def lindblad(self) -> LindbladConfig:
        return LindbladConfig(
            gamma=self.params.gamma,
            n_bar_th=self.thermal.n_bar_th,
            dt=self.tau_r / self.steps_per_tau_r,
        )


@dataclass
class ProtocolResult:
    snapshots: list  # ResonatorPopulations after each measurement, initial first
    fidelity: float  # <0|rho_b|0> of the normalized final state
    n_bar: float
    success_prob: float
    step_probs: list
    reserved_fidelity: float  # F_r after step 1
    schedule: MeasurementSchedule
    step2_intervals: list
    elapsed: float = 0.0
    diagnostics: Diagnostics | None = None

    @property
    def final_state(self) -> ResonatorPopulations:
        return self.snapshots[-1]


def check_reserved_bound(config: ProtocolConfig) -> None:
    bound = min_first_reserved(config.params, config.thermal)
    if config.n_r < math.ceil(bound):
        msg = f"n_r={config.n_r} is below the thermal lower bound {bound:.2f}"
        if config.strict:
            raise ValueError(msg)
        log.warning(msg)


def resolve_schedule(config: ProtocolConfig, params: PhysicalParams | None = None) -> MeasurementSchedule:
    params = params or config.resolved_params()
    src = config.schedule
    if src == "equal":
        return MeasurementSchedule.equal_spacing(config.rounds, config.tau_r, config.n_r)
    if config.rounds == 0:
        return MeasurementSchedule((), config.tau_r, config.n_r, src)
    env = CoolingEnv(params, config.n_r, config.rounds, config.n_actions)
    if src == "beam":
        return beam_search(env, config.beam_width)
    if src == "train":
        # torch is only imported when a schedule is actually trained
        from .schedule.dppo import TrainConfig, train

        tc = TrainConfig(
            n_r=config.n_r,
            rounds=config.rounds,
            n_actions=config.n_actions,
            updates=config.train_updates,
            seed=config.seed,
        )
        return train(tc, env).schedule
    sched = MeasurementSchedule.load(src)
    if sched.n_r != config.n_r:
        raise ValueError(f"schedule file targets n_r={sched.n_r}, config has n_r={config.n_r}")
    if not math.isclose(sched.tau_r, config.tau_r, rel_tol=1e-12):
        raise ValueError("schedule file was built for a different tau_r")
    return sched


def step2_intervals(config: ProtocolConfig) -> list:
    if config.n_r == 0:
        return []
    params = config.step2_params()
    if config.step2 == "fixed":
        return [optimal_conditional_interval(params, config.n_r)] * config.n_r
    return [optimal_conditional_interval(params, n) for n in range(config.n_r, 0, -1)]


def run_protocol(
    config: ProtocolConfig,
    schedule: MeasurementSchedule | None = None,
    initial: ResonatorPopulations | None = None,
) -> ProtocolResult:
    """Step 1: ``rounds`` unconditional maps; step 2: ``n_r`` conditional maps.

    The reported success probability is the product of the conditional
    outcome probabilities. ``initial`` replaces the thermal start state.
    """
    t0 = time.perf_counter()
    check_reserved_bound(config)
    params = config.resolved_params()
    if schedule is None:
        schedule = resolve_schedule(config, params)
    if len(schedule) != config.rounds:
        raise ValueError(f"schedule has {len(schedule)} rounds, config expects {config.rounds}")
    if initial is None:
        initial = thermal_state(config.thermal, params.n_c)
    elif initial.n_c != params.n_c:
        p = np.zeros(params.n_c + 1)
        k = min(initial.n_c, params.n_c) + 1
        p[:k] = initial.p[:k]
        initial = ResonatorPopulations(p)
    taus2 = step2_intervals(config)
    if config.open_system:
        result = _run_open(config, params, schedule, taus2, initial)
    else:
        result = _run_closed(config, params, schedule, taus2, initial)
    result.elapsed = time.perf_counter() - t0
    return result


def _finish(snapshots, probs, reserved_f, schedule, taus2, diagnostics=None) -> ProtocolResult:
    final = snapshots[-1].normalized()
    return ProtocolResult(
        snapshots=snapshots,
        fidelity=fidelity(final, 0),
        n_bar=average_occupation(final),
        success_prob=float(np.prod(probs)) if probs else 1.0,
        step_probs=list(probs),
        reserved_fidelity=reserved_f,
        schedule=schedule,
        step2_intervals=list(taus2),
        diagnostics=diagnostics,
    )


def _run_closed(config, params, schedule, taus2, initial) -> ProtocolResult:
    n_r = config.n_r
    state = initial
    snapshots = [state]
    for tau in schedule.intervals:
        state = unconditional_map(state, params, tau).state
        snapshots.append(state)
    reserved_f = fidelity(state.normalized(), n_r)
    probs = []
    params2 = config.step2_params(params)
    for tau in taus2:
        out = conditional_map(state, params2, tau)
        probs.append(out.success_prob)
        state = out.state
        snapshots.append(state)
    return _finish(snapshots, probs, reserved_f, schedule, taus2)


def _run_open(config, params, schedule, taus2, initial) -> ProtocolResult:
    lind = config.lindblad()
    diag = Diagnostics()
    rho = embed(initial, "e")
    snapshots = [initial]
    intervals = schedule.intervals
    for i, tau in enumerate(intervals):
        prep = "g" if i == len(intervals) - 1 else "e"
        out = measured_evolution(rho, params, lind, tau, "unconditional", prep, diag)
        rho = out.rho
        snapshots.append(out.populations)
    if not len(intervals):
        rho = embed(initial, "g")
    reserved_f = fidelity(snapshots[-1].normalized(), config.n_r)
    probs = []
    params2 = config.step2_params(params)
    for tau in taus2:
        out = measured_evolution(rho, params2, lind, tau, "conditional", "g", diag)
        probs.append(out.success_prob)
        rho = out.rho
        snapshots.append(out.populations)
    return _finish(snapshots, probs, reserved_f, schedule, taus2, diag)


# --- sweeps ------------------------------------------------------------------------------


def _sweep_point(args):
    config, schedule = args
    r = run_protocol(config, schedule)
    return r.fidelity, r.success_prob, r.reserved_fidelity


def sweep_reserved_state(
    config: ProtocolConfig,
    n_r_values,
    gamma_ratios,
    workers: int = 1,
) -> list[dict]:
    """Final F and P_s on the (n_r, gamma) grid, rows ordered by n_r then gamma.

    One step-1 schedule per n_r is resolved on the closed system and reused
    for every damping rate. ``gamma_ratios`` are in units of gamma_0.
    """
    jobs, keys = [], []
    for n_r in n_r_values:
        base = replace(config, n_r=int(n_r), open_system=False)
        sched = resolve_schedule(base)
        for gr in gamma_ratios:
            params = replace(config.params, gamma=gr * GAMMA_0_RATIO * config.params.omega_b)
            cfg = replace(base, params=params, open_system=gr > 0)
            jobs.append((cfg, sched))
            keys.append((int(n_r), float(gr)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    return [
        {"n_r": n_r, "gamma_ratio": gr, "fidelity": f, "success_prob": ps, "reserved_fidelity": fr}
        for (n_r, gr), (f, ps, fr) in zip(keys, results)
    ]


def analytic_step2_probability(params: PhysicalParams, n_r: int, intervals) -> float:
    """Success probability of step 2 on a pure |n_r>: prod_n |beta_n(tau_n)|^2."""
    prob = 1.0
    for k, tau in enumerate(intervals):
        prob *= cooling_coeffs(params, n_r - k, tau).transfer
    return prob
