"""Data tables behind the four figures, written as CSV."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .fock import PhysicalParams, protocol_cutoff, thermal_occupation, thermal_state
from .io import write_csv
from .jc import cooling_weights
from .maps import reserved_interval, transfer_ratios, unconditional_map
from .protocol import ProtocolConfig, ProtocolResult, resolve_schedule, run_protocol, sweep_reserved_state


@dataclass(frozen=True)
class Fig1Config:
    """Fixed-interval dynamics from a hot thermal state."""

    temperature: float = 1.0
    n_r1: int = 5
    measurements: tuple = (1, 2, 5, 10, 20, 50)
    tau_multiples: tuple = (1, 2, 3, 4, 5)
    n_max: int = 120


def fixed_interval_history(params: PhysicalParams, fc: Fig1Config) -> list:
    """Population snapshots under repeated measurements at tau_r."""
    hot = replace(params, temperature=fc.temperature)
    spec = thermal_occupation(hot)
    rounds = max(fc.measurements)
    n_c = max(protocol_cutoff(spec, rounds), fc.n_max)
    hot = hot.with_cutoff(n_c)
    tau = reserved_interval(hot, fc.n_r1)
    states = [thermal_state(spec, n_c)]
    for _ in range(rounds):
        states.append(unconditional_map(states[-1], hot, tau).state)
    return states


def fig1_tables(params: PhysicalParams, fc: Fig1Config = Fig1Config()):
    states = fixed_interval_history(params, fc)
    eta = transfer_ratios(states)
    ns = range(fc.n_max + 1)
    rows_a = [(m, n, eta[m - 1, n]) for m in fc.measurements for n in ns]
    rows_b = [(m, n, states[m].p[n]) for m in (0, *fc.measurements) for n in ns]
    tau_r = reserved_interval(params, fc.n_r1)
    rows_c = []
    for j in fc.tau_multiples:
        ret, _ = cooling_weights(params, fc.n_max + 1, j * tau_r)
        rows_c.extend((j, n, ret[n + 1]) for n in ns)
    return rows_a, rows_b, rows_c


def write_fig1(out_dir, params: PhysicalParams, fc: Fig1Config = Fig1Config()) -> list:
    a, b, c = fig1_tables(params, fc)
    out = Path(out_dir)
    return [
        write_csv(out / "fig1a.csv", ["m", "n", "eta"], a),
        write_csv(out / "fig1b.csv", ["m", "n", "p_n"], b),
        write_csv(out / "fig1c.csv", ["tau_over_tau_r", "n", "alpha_sq"], c),
    ]


def write_fig2(out_dir, config: ProtocolConfig, n_r_values=(6, 8, 10, 12)) -> tuple[list, dict]:
    """One (step, action) table per reserved state."""
    paths, schedules = [], {}
    for n_r in n_r_values:
        sched = resolve_schedule(replace(config, n_r=int(n_r), open_system=False))
        schedules[int(n_r)] = list(sched.actions)
        rows = [(i + 1, a) for i, a in enumerate(sched.actions)]
        paths.append(write_csv(Path(out_dir) / f"fig2_nr{n_r:02d}.csv", ["step", "action"], rows))
    return paths, schedules


def fig3_rows(result: ProtocolResult, n_max: int = 40) -> list:
    n_max = min(n_max, result.final_state.n_c)
    return [(i, n, s.p[n]) for i, s in enumerate(result.snapshots) for n in range(n_max + 1)]


def write_fig3(out_dir, result: ProtocolResult, n_max: int = 40) -> Path:
    return write_csv(Path(out_dir) / "fig3.csv", ["measurement", "n", "p_n"], fig3_rows(result, n_max))


def write_fig4(out_dir, rows: list) -> Path:
    """``rows`` from sweep_reserved_state; gamma is in units of gamma_0."""
    table = [(r["n_r"], r["gamma_ratio"], r["fidelity"], r["success_prob"]) for r in rows]
    return write_csv(Path(out_dir) / "fig4.csv", ["n_r", "gamma", "F", "P_s"], table)


def all_figures(out_dir, config: ProtocolConfig, n_r_values=range(5, 13), gamma_ratios=(0.0, 0.5, 1.0, 1.5), workers=1):
    """Write every figure table; returns (paths, summary)."""
    paths = write_fig1(out_dir, config.params)
    p2, schedules = write_fig2(out_dir, config)
    paths += p2
    result = run_protocol(replace(config, open_system=False))
    paths.append(write_fig3(out_dir, result))
    rows = sweep_reserved_state(config, n_r_values, gamma_ratios, workers)
    paths.append(write_fig4(out_dir, rows))
    summary = {
        "fig2_schedules": schedules,
        "fig3": {"F": result.fidelity, "n_bar": result.n_bar, "P_s": result.success_prob},
        "fig4_rows": len(rows),
    }
    return paths, summary
