"""Command line entry point: simulate, train, sweep, figures, check."""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
from dataclasses import asdict
from pathlib import Path

from .fock import PhysicalParams
from .io import config_from_dict, config_to_dict, load_manifest, write_csv, write_manifest
from .protocol import ProtocolConfig, run_protocol, sweep_reserved_state

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("mbcool")

DEFAULTS = {
    "omega_b": 3.7e9,
    "temp": 0.1,
    "g_ratio": 0.04,
    "detuning_ratio": 0.02,
    "gamma_ratio": 0.0,
    "n_r": 10,
    "rounds": 30,
    "n_actions": 5,
    "schedule": "beam",
    "beam_width": 64,
    "step2": "adaptive",
    "open_system": False,
    "steps_per_tau_r": 2000,
    "strict": False,
    "seed": 0,
    "out": "runs",
    # training
    "updates": 500,
    "workers": 4,
    "episodes_per_worker": 8,
    "lr": 3e-4,
    # sweeps and figures
    "n_r_list": [5, 6, 7, 8, 9, 10, 11, 12],
    "gamma0_multiples": [0.0, 0.5, 1.0, 1.5],
    "sweep_workers": 1,
}


def load_config_file(path) -> dict:
    """Flatten a TOML (or JSON) file with nested sections into flag keys."""
    path = Path(path)
    raw = json.loads(path.read_text()) if path.suffix == ".json" else tomllib.loads(path.read_text())
    flat = {}

    def walk(d):
        for k, v in d.items():
            if isinstance(v, dict):
                walk(v)
            else:
                key = k.replace("-", "_")
                if key not in DEFAULTS:
                    raise ValueError(f"{path}: unknown config key {k!r}")
                if key in flat:
                    raise ValueError(f"{path}: key {k!r} set twice")
                flat[key] = v

    walk(raw)
    return flat


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML file with the same keys as the flags")
    p.add_argument("--omega-b", type=float, help="resonator frequency (rad/s)")
    p.add_argument("--temp", type=float, help="bath temperature (K)")
    p.add_argument("--g-ratio", type=float, help="coupling g / omega_b")
    p.add_argument("--detuning-ratio", type=float, help="detuning / omega_b")
    p.add_argument("--gamma-ratio", type=float, help="resonator damping gamma / omega_b")
    p.add_argument("--n-r", type=int, help="first reserved Fock state")
    p.add_argument("--rounds", type=int, help="number of unconditional measurements M")
    p.add_argument("--n-actions", type=int, help="interval multiples available to the optimizer")
    p.add_argument("--schedule", help="path to a schedule JSON, or equal | beam | train")
    p.add_argument("--beam-width", type=int)
    p.add_argument("--step2", choices=["adaptive", "fixed"])
    p.add_argument("--open-system", action="store_const", const=True, help="integrate the master equation")
    p.add_argument("--steps-per-tau-r", type=int)
    p.add_argument("--strict", action="store_const", const=True, help="reject n_r below the thermal bound")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--updates", type=int, help="PPO updates when training")
    p.add_argument("--workers", type=int, help="rollout workers when training")
    p.add_argument("--episodes-per-worker", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbcool", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the two-step protocol once")
    _add_common(p)
    p.add_argument("--from-manifest", help="re-run the config stored in a manifest")

    p = sub.add_parser("train", help="learn a step-1 schedule with distributed PPO")
    _add_common(p)

    for name, helptext in (("sweep", "final F and P_s over (n_r, gamma)"), ("figures", "write every figure table")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--n-r-list", type=int, nargs="+")
        p.add_argument("--gamma0-multiples", type=float, nargs="+", help="damping rates in units of gamma_0")
        p.add_argument("--sweep-workers", type=int)

    p = sub.add_parser("check", help="run the acceptance suite")
    p.add_argument("pytest_args", nargs="*")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults, then flags, then the config file."""
    opts = dict(DEFAULTS)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    if getattr(args, "config", None):
        opts.update(load_config_file(args.config))
    return opts


def protocol_config(opts: dict) -> ProtocolConfig:
    params = PhysicalParams.from_ratios(
        omega_b=opts["omega_b"],
        temperature=opts["temp"],
        g_ratio=opts["g_ratio"],
        detuning_ratio=opts["detuning_ratio"],
        gamma_ratio=opts["gamma_ratio"],
    )
    return ProtocolConfig(
        params=params,
        n_r=opts["n_r"],
        rounds=opts["rounds"],
        n_actions=opts["n_actions"],
        schedule=str(opts["schedule"]),
        beam_width=opts["beam_width"],
        step2=opts["step2"],
        open_system=bool(opts["open_system"]),
        steps_per_tau_r=opts["steps_per_tau_r"],
        strict=bool(opts["strict"]),
        seed=opts["seed"],
        train_updates=opts["updates"],
    )


def result_summary(result) -> dict:
    out = {
        "F": result.fidelity,
        "n_bar": result.n_bar,
        "P_s": result.success_prob,
        "F_r": result.reserved_fidelity,
        "step_probs": result.step_probs,
        "schedule": list(result.schedule.actions),
        "schedule_source": result.schedule.source,
        "elapsed_s": result.elapsed,
    }
    if result.diagnostics is not None:
        d = result.diagnostics
        out["diagnostics"] = {"clipped": d.clipped, "min_eigenvalue": d.min_eigenvalue, "steps": d.steps}
    return out


def cmd_simulate(args, opts) -> int:
    from .figures import write_fig3

    if args.from_manifest:
        config = config_from_dict(load_manifest(args.from_manifest)["config"])
    else:
        config = protocol_config(opts)
    out = Path(opts["out"])
    result = run_protocol(config)
    paths = [
        write_fig3(out, result),
        write_csv(out / "fig2.csv", ["step", "action"], [(i + 1, a) for i, a in enumerate(result.schedule.actions)]),
    ]
    result.schedule.save(out / "schedule.json")
    paths.append(out / "schedule.json")
    summary = result_summary(result)
    write_manifest(out, "simulate", config_to_dict(config), paths, summary)
    print(f"F = {result.fidelity:.12g}  n_bar = {result.n_bar:.6g}  P_s = {result.success_prob:.6g}  F_r = {result.reserved_fidelity:.6g}")
    return 0


def cmd_train(args, opts) -> int:
    from .schedule.dppo import TrainConfig, default_env, train

    config = protocol_config(opts)
    tc = TrainConfig(
        n_r=config.n_r,
        rounds=config.rounds,
        n_actions=config.n_actions,
        workers=opts["workers"],
        episodes_per_worker=opts["episodes_per_worker"],
        updates=opts["updates"],
        lr=opts["lr"],
        seed=config.seed,
    )
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    env = default_env(tc, config.params)
    res = train(tc, env, log_path=out / "train_log.csv", checkpoint_path=out / "policy.pt")
    res.schedule.save(out / "schedule.json")
    fig2 = write_csv(out / "fig2.csv", ["step", "action"], [(i + 1, a) for i, a in enumerate(res.schedule.actions)])
    cfg = {"protocol": config_to_dict(config), "train": asdict(tc)}
    summary = {
        "best_fr": res.best_fidelity,
        "equal_spacing_fr": res.baseline_fidelity,
        "failed": res.failed,
        "schedule": list(res.schedule.actions),
    }
    write_manifest(out, "train", cfg, [out / "train_log.csv", out / "policy.pt", out / "schedule.json", fig2], summary)
    print(f"F_r = {res.best_fidelity:.6g} (equal spacing {res.baseline_fidelity:.6g}); schedule {list(res.schedule.actions)}")
    return 1 if res.failed else 0


def cmd_sweep(args, opts) -> int:
    from .figures import write_fig4

    config = protocol_config(opts)
    rows = sweep_reserved_state(config, opts["n_r_list"], opts["gamma0_multiples"], opts["sweep_workers"])
    out = Path(opts["out"])
    path = write_fig4(out, rows)
    cfg = {"protocol": config_to_dict(config), "n_r_list": opts["n_r_list"], "gamma0_multiples": opts["gamma0_multiples"]}
    write_manifest(out, "sweep", cfg, [path], {"rows": rows})
    for r in rows:
        print(f"n_r={r['n_r']:3d} gamma={r['gamma_ratio']:.2f} gamma_0  F={r['fidelity']:.6f}  P_s={r['success_prob']:.6f}")
    return 0


def cmd_figures(args, opts) -> int:
    from .figures import all_figures

    config = protocol_config(opts)
    out = Path(opts["out"])
    paths, summary = all_figures(out, config, opts["n_r_list"], opts["gamma0_multiples"], opts["sweep_workers"])
    cfg = {"protocol": config_to_dict(config), "n_r_list": opts["n_r_list"], "gamma0_multiples": opts["gamma0_multiples"]}
    write_manifest(out, "figures", cfg, paths, summary)
    for p in paths:
        print(p)
    return 0


def cmd_check(args) -> int:
    tests = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    return subprocess.call([sys.executable, "-m", "pytest", "-s", "-q", str(tests), *args.pytest_args])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        return cmd_check(args)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    opts = resolve_options(args)
    handler = {"simulate": cmd_simulate, "train": cmd_train, "sweep": cmd_sweep, "figures": cmd_figures}[args.command]
    return handler(args, opts)


if __name__ == "__main__":
    sys.exit(main())
