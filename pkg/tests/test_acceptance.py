"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one PASS/FAIL line (also collected into the terminal
summary). Extra INFO lines carry diagnostics and never affect the outcome.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mbcool.fock import PhysicalParams, ResonatorPopulations, embed, resonator_populations, thermal_occupation
from mbcool.jc import cooling_coeffs, full_propagator, rabi_frequency
from mbcool.lindblad import GAMMA_0_RATIO, LindbladConfig, evolve
from mbcool.maps import conditional_map, higher_reserved_states, optimal_conditional_interval, reserved_interval
from mbcool.protocol import (
    ProtocolConfig,
    analytic_step2_probability,
    resolve_schedule,
    run_protocol,
    step2_intervals,
    sweep_reserved_state,
)
from mbcool.schedule import CoolingEnv, beam_search, exhaustive_search

P = PhysicalParams.from_ratios()
BASE = ProtocolConfig()
GAMMAS = (0.5, 1.0, 1.5)


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def info(text):
    line = f"INFO  {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def ref_schedule():
    return resolve_schedule(BASE)


@pytest.fixture(scope="module")
def open_runs(ref_schedule):
    runs = {}
    for gr in GAMMAS:
        params = replace(BASE.params, gamma=gr * GAMMA_0_RATIO * BASE.params.omega_b)
        runs[gr] = run_protocol(replace(BASE, params=params, open_system=True), ref_schedule)
    return runs


@pytest.fixture(scope="module")
def trained():
    from mbcool.schedule.dppo import TrainConfig, train

    env = CoolingEnv.for_protocol(P, 10, 30, 5)
    t0 = time.perf_counter()
    res = train(TrainConfig(), env)
    return res, env, time.perf_counter() - t0


def test_criterion_01_reserved_table():
    t = higher_reserved_states(P, 5, 4)
    ok = all(abs(t[k] - ref) <= 1 for k, ref in ((2, 23), (3, 53), (4, 95)))
    report(1, ok, f"n_r^(2,3,4) = {t[2]}, {t[3]}, {t[4]} (exact {t.exact[2]:.4g}, {t.exact[3]:.4g}, {t.exact[4]:.4g}); target 23/53/95 +-1")


def test_criterion_02_thermal_occupation():
    n = thermal_occupation(P).n_bar_th
    report(2, abs(n - 3.06) <= 0.02, f"n_th = {n:.5f}; target 3.06 +- 0.02")


def test_criterion_03_coefficient_identity():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for n, x in zip(rng.integers(0, 1000, 10_000), rng.uniform(0, 200, 10_000)):
        det = rng.uniform(-0.1, 0.1)
        params = PhysicalParams.from_ratios(detuning_ratio=det)
        c = cooling_coeffs(params, int(n), float(x) / params.omega_b)
        worst = max(worst, abs(c.retention + c.transfer - 1))
    fixed = cooling_coeffs(P, 6, reserved_interval(P, 5)).retention
    ok = worst <= 1e-12 and abs(fixed - 1) <= 1e-12
    report(3, ok, f"max ||a|^2+|b|^2-1| = {worst:.2e} over 1e4 draws; |a_6(tau_r)|^2 - 1 = {fixed - 1:.2e}")


def test_criterion_04_ground_retention():
    r = cooling_coeffs(P, 1, reserved_interval(P, 5)).retention
    report(4, abs(r - 0.12) <= 0.005, f"|a_1(tau_r)|^2 = {r:.5f}; target 0.12 +- 0.005")


def test_criterion_05_single_transfer():
    params = P.with_cutoff(12)
    tau = optimal_conditional_interval(params, 10)
    out = conditional_map(ResonatorPopulations.fock(10, 12), params, tau)
    analytic = params.g**2 * 10 / rabi_frequency(params, 10) ** 2
    U = full_propagator(params, tau)
    d = params.n_c + 1
    oracle = abs(U[d + 9, 10]) ** 2  # <e,9|U|g,10>
    ok = abs(out.success_prob - analytic) <= 1e-12 and abs(oracle - analytic) <= 1e-12 and out.normalized_state.p[9] == 1
    report(5, ok, f"P(10->9) = {out.success_prob:.12f}, analytic {analytic:.12f}, propagator {oracle:.12f}")


def test_criterion_06_closed_protocol(ref_schedule):
    r = run_protocol(BASE, ref_schedule)
    taus = step2_intervals(BASE)
    bound = analytic_step2_probability(P, 10, taus)
    pure = run_protocol(replace(BASE, rounds=0), initial=ResonatorPopulations.fock(10, BASE.resolved_params().n_c))
    bound_ok = abs(pure.success_prob - bound) <= 1e-12
    res = run_protocol(replace(BASE, step2_detuning_ratio=0.0), ref_schedule)
    info(f"criterion  6 step-2-only product prod|b_n|^2 = {bound:.6f}, simulated {pure.success_prob:.6f} (match to 1e-12: {bound_ok})")
    info(f"criterion  6 with a resonant step 2 (not the stated model): P_s = {res.success_prob:.4f}, F = {res.fidelity:.7f}")
    ok = r.fidelity >= 0.9999 and r.n_bar <= 1e-4 and r.success_prob >= 0.90 and bound_ok
    report(
        6,
        ok,
        f"F = {r.fidelity:.7f} (>= 0.9999), n_bar = {r.n_bar:.3g} (<= 1e-4), P_s = {r.success_prob:.4f} (>= 0.90), "
        f"F_r = {r.reserved_fidelity:.4f}",
    )


def test_criterion_07_fock_milestone():
    env = CoolingEnv.for_protocol(P, 10, 20, 5)
    f = env.final_fidelity(beam_search(env, 64).actions)
    report(7, f >= 0.90, f"F_r after M = 20 optimized maps = {f:.4f}; target >= 0.90")


def test_criterion_08_open_limits(ref_schedule):
    closed = run_protocol(BASE, ref_schedule)
    opened = run_protocol(replace(BASE, open_system=True), ref_schedule)
    diff = max(np.max(np.abs(a.p - b.p)) for a, b in zip(closed.snapshots, opened.snapshots))
    dps = abs(closed.success_prob - opened.success_prob)
    # bare resonator relaxation, g = 0; the cutoff keeps the truncated bath within 1e-10 of the infinite one
    params = PhysicalParams(omega_b=P.omega_b, detuning=P.detuning, g=0.0, temperature=0.1, n_c=100)
    n_th = thermal_occupation(params).n_bar_th
    gamma = 1e-3 * P.omega_b
    config = LindbladConfig(gamma, n_th, 0.5 / P.omega_b)
    rho = embed(ResonatorPopulations.fock(8, 100), "g")
    worst, t = 0.0, 0.0
    for _ in range(6):
        rho = evolve(rho, params, config, 400 / P.omega_b)
        t += 400 / P.omega_b
        n = resonator_populations(rho) @ np.arange(101)
        worst = max(worst, abs(n - (n_th + (8 - n_th) * math.exp(-gamma * t))))
    ok = diff <= 1e-6 and dps <= 1e-6 and worst <= 1e-6
    report(8, ok, f"gamma=0 vs closed maps: max |dp| = {diff:.2e}, |dP_s| = {dps:.2e}; g=0 relaxation max |d<n>| = {worst:.2e}")


def test_criterion_09_decoherence_trends(open_runs):
    closed = sweep_reserved_state(BASE, range(5, 13), [0.0])
    ps = [r["success_prob"] for r in closed]
    peak = int(np.argmax(ps))
    rising = all(a < b for a, b in zip(ps[: peak + 1], ps[1 : peak + 1]))
    plateau = all(ps[peak] - x <= 0.02 for x in ps[peak:])
    f15 = open_runs[1.5].fidelity
    thresholds = {0.5: 0.70, 1.0: 0.50, 1.5: 0.40}
    ps_ok = all(open_runs[g].success_prob >= thr for g, thr in thresholds.items())
    for g in GAMMAS:
        info(f"criterion  9 gamma = {g} gamma_0: F = {open_runs[g].fidelity:.4f}, P_s = {open_runs[g].success_prob:.4f}")
    info("criterion  9 closed P_s over n_r = 5..12: " + ", ".join(f"{x:.3f}" for x in ps))
    ok = f15 >= 0.85 and rising and plateau and ps_ok
    detail = (
        f"F(1.5 gamma_0) = {f15:.4f} (>= 0.85); P_s rises to n_r = {5 + peak} then plateaus: {rising and plateau}; "
        f"P_s(n_r=10) = " + " / ".join(f"{open_runs[g].success_prob:.3f}" for g in GAMMAS) + " (>= 0.70 / 0.50 / 0.40)"
    )
    report(9, ok, detail)


def test_criterion_10_optimizer(trained, ref_schedule):
    toy = CoolingEnv.for_protocol(P, 10, 6, 2)
    from mbcool.schedule.dppo import TrainConfig, train

    toy_rl = train(TrainConfig(n_r=10, rounds=6, n_actions=2, updates=100), toy).schedule.actions
    toy_ok = toy_rl == exhaustive_search(toy).actions
    res, env, wall = trained
    f_beam = env.final_fidelity(ref_schedule.actions)
    f_eq = env.final_fidelity((1,) * 30)
    ok = toy_ok and abs(res.best_fidelity - f_beam) <= 0.01 and res.best_fidelity > f_eq and wall <= 3 * 3600
    report(
        10,
        ok,
        f"toy RL == exhaustive: {toy_ok}; RL F_r = {res.best_fidelity:.4f}, beam {f_beam:.4f}, "
        f"equal spacing {f_eq:.4f}; training {wall:.0f} s",
    )


def test_criterion_11_determinism(ref_schedule):
    from mbcool.schedule.dppo import TrainConfig, train

    a, b = run_protocol(BASE), run_protocol(BASE)
    same_run = a.schedule == b.schedule and all(np.array_equal(x.p, y.p) for x, y in zip(a.snapshots, b.snapshots))
    same_run = same_run and a.success_prob == b.success_prob and a.fidelity == b.fidelity
    env = CoolingEnv.for_protocol(P, 10, 30, 5)
    cfg = TrainConfig(updates=10, eval_every=2, seed=7)
    h1, h2 = train(cfg, env).history, train(cfg, env).history
    strip = lambda h: [(r["update"], r["mean_reward"], r["best_fr"]) for r in h]  # noqa: E731
    same_train = strip(h1) == strip(h2)
    report(11, same_run and same_train, f"protocol bit-identical: {same_run}; training metrics bit-identical (W = 4): {same_train}")
