"""Command-line entry point.

    jointcbm generate   simulate training signals (sparse / abundant presets)
    jointcbm fit        fit per-type priors from a generated dataset
    jointcbm snapshot   write a wind-farm planning instance plus remaining-life samples
    jointcbm solve      plan one instance, verify it, write solution + report
    jointcbm verify     re-check a written solution
    jointcbm study      studies: training (data volume), sequential (vs joint), sampling (exact vs sampled)
    jointcbm bench      model sizes and solve times against fleet size
    jointcbm report     render figures and a text table from a study directory
    jointcbm calibrate  re-run the Phase-I window calibration

Every option may also come from a JSON file given with ``--config``;
command-line flags win. Each command echoes the resolved configuration
into its output directory as ``config.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, harness, milp, presets
from .baselines import Policy, run_policy
from .degradation import (DatasetManifest, ComponentTypeParams, generate_dataset,
                          read_signals_csv, write_signals_csv)
from .dro import PrecomputedParams
from .milp import SolverOptions
from .model import ProblemInstance, Solution, verify_solution
from .prognostics import fit_priors, read_rlds, write_priors, write_rlds

log = logging.getLogger("jointcbm")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY_FAILED = 4
EXIT_BACKEND_MISSING = 5
EXIT_EXACT_VIOLATED = 6  # sampled solution that breaks the exact failure-count constraint
EXIT_CELL_FAILED = 7

CONFIG_SCHEMA_VERSION = 1
TRAINING_PRESETS = {"sparse": 5, "abundant": 50}


class UsageError(Exception):
    pass


# -- config plumbing -------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    cfg = json.loads(p.read_text())
    ver = cfg.pop("schema_version", CONFIG_SCHEMA_VERSION)
    if ver != CONFIG_SCHEMA_VERSION:
        raise UsageError(f"config schema_version {ver} is not supported (expected {CONFIG_SCHEMA_VERSION})")
    return cfg


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Flag value if given, else config value, else the built-in default."""
    cfg = _load_config(getattr(args, "config", None))
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, default)
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys for '{args.command}': {sorted(unknown)}")
    return out


def _out_dir(path) -> Path:
    if path is None:
        raise UsageError("--out is required")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _echo(out: Path, command: str, cfg: dict) -> None:
    data = {"schema_version": CONFIG_SCHEMA_VERSION, "command": command, "version": __version__, **cfg}
    (out / "config.json").write_text(json.dumps(data, indent=2, default=str))


def _existing(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} {p} does not exist")
    return p


def _solver_options(cfg: dict) -> SolverOptions:
    return SolverOptions(backend=cfg["backend"], time_limit=float(cfg["time_limit"]),
                         mip_gap=float(cfg["gap"]), seed=int(cfg["seed"]))


def _types(cfg: dict) -> list[ComponentTypeParams]:
    if cfg.get("types"):
        raw = json.loads(_existing(cfg["types"], "--types").read_text())
        return [ComponentTypeParams.from_dict(d) for d in raw]
    return presets.default_component_types()


def _policy(cfg: dict) -> Policy:
    pol = Policy.parse(cfg["policy"])
    if cfg.get("delta") is not None:
        if pol.kind == "saa" and float(cfg["delta"]) != 0:
            pol = Policy("drcc", float(cfg["delta"]))
        elif pol.kind != "saa":
            pol = Policy(pol.kind, float(cfg["delta"]))
    return pol


SOLVER_DEFAULTS = dict(backend="auto", time_limit=600.0, gap=1e-6, seed=0)


# -- commands --------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _resolve(args, dict(preset="sparse", signals=None, seed=0, out=None, types=None))
    n = cfg["signals"] if cfg["signals"] is not None else TRAINING_PRESETS.get(cfg["preset"])
    if n is None:
        raise UsageError(f"unknown preset {cfg['preset']!r}; choose from {sorted(TRAINING_PRESETS)}")
    out = _out_dir(cfg["out"])
    types = _types(cfg)
    signals = []
    for p in types:
        signals += generate_dataset(p, int(n), seed=int(cfg["seed"]) * 1000 + p.type_id)
    write_signals_csv(signals, out / "signals.csv")
    DatasetManifest(name=cfg["preset"], seed=int(cfg["seed"]), signals_per_type=int(n),
                    types=[p.to_dict() for p in types], files={"signals": "signals.csv"}
                    ).write(out / "manifest.json")
    _echo(out, "generate", cfg)
    print(f"wrote {len(signals)} signals ({n} per type) to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _resolve(args, dict(data=None, out=None))
    data = _existing(cfg["data"], "--data")
    man = DatasetManifest.read(data / "manifest.json")
    types = {d["type_id"]: ComponentTypeParams.from_dict(d) for d in man.types}
    signals = read_signals_csv(data / man.files["signals"])
    out = _out_dir(cfg["out"])
    priors = {}
    for l, p in sorted(types.items()):
        priors[l] = fit_priors([s for s in signals if s.type_id == l], p.failure_threshold)
    write_priors(priors, out / "priors.json")
    _echo(out, "fit", cfg)
    for l, pr in priors.items():
        print(f"type {l}: drift {pr.drift_prior[0]:.5g} (var {pr.drift_prior[1]:.3g}), "
              f"sigma {pr.bm_sigma_hat:.4g}, phase I {pr.phase1_stats[0]:.1f}-{pr.phase1_stats[1]:.1f}")
    return EXIT_OK


def cmd_snapshot(args) -> int:
    cfg = _resolve(args, dict(turbines=5, seed=0, train=50, samples=200, out=None, regression=None))
    out = _out_dir(cfg["out"])
    if cfg["regression"] is not None:
        inst, rlds = presets.tight_regression_case(int(cfg["regression"]))
    else:
        inst, rlds = harness.snapshot_case(int(cfg["turbines"]), int(cfg["seed"]),
                                           n_train=int(cfg["train"]), n_samples=int(cfg["samples"]))
    inst.write(out / "instance.json")
    write_rlds(rlds, out / "rlds.json")
    _echo(out, "snapshot", cfg)
    print(f"wrote instance ({inst.J} components, T={inst.t_max}) and remaining-life samples to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _resolve(args, dict(instance=None, rlds=None, policy="DRCC:0", delta=None, z2="exact",
                              S=500, out=None, **SOLVER_DEFAULTS))
    inst = ProblemInstance.read(_existing(cfg["instance"], "--instance"))
    rlds = read_rlds(_existing(cfg["rlds"], "--rlds"))
    if len(rlds) != inst.J:
        raise UsageError(f"{len(rlds)} remaining-life entries for {inst.J} components")
    pol = _policy(cfg)
    out = _out_dir(cfg["out"])
    res = run_policy(pol, inst, rlds, cfg["z2"], _solver_options(cfg),
                     n_scenarios=int(cfg["S"]) if cfg["z2"] == "sample" else 0, seed=int(cfg["seed"]))
    sol = res.solution
    sol.write(out / "solution.json")
    res.params.write(out / "params.json")
    _echo(out, "solve", {**cfg, "policy": pol.label})
    print(f"policy {pol.label}  z2 {cfg['z2']}  status {sol.status}  objective {sol.objective}")
    if not sol.feasible:
        (out / "verification.json").write_text(json.dumps({"ok": False, "status": sol.status,
                                                           "message": sol.message}, indent=2))
        print(f"infeasible: {sol.message}" if sol.message else "infeasible")
        return EXIT_INFEASIBLE
    rep = verify_solution(inst, res.params, sol)
    (out / "verification.json").write_text(json.dumps(rep.to_dict(), indent=2))
    print(f"repair epochs {sol.repair_epochs()}")
    print(f"failure-count probability {rep.z2_probability:.6f} (need >= {1 - inst.beta:g})")
    if not rep.ok:
        for v in rep.violations:
            print(f"VIOLATION {v}")
        return EXIT_VERIFY_FAILED
    if not rep.z2_feasible and cfg["z2"] == "sample":
        print("sampled solution violates the exact failure-count constraint")
        return EXIT_EXACT_VIOLATED
    if not rep.z2_feasible:
        print("failure-count constraint was omitted (--z2 off) and does not hold")
    print("verification passed")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _resolve(args, dict(instance=None, params=None, solution=None))
    inst = ProblemInstance.read(_existing(cfg["instance"], "--instance"))
    params = PrecomputedParams.read(_existing(cfg["params"], "--params"))
    sol = Solution.read(_existing(cfg["solution"], "--solution"))
    rep = verify_solution(inst, params, sol)
    for v in rep.violations:
        print(f"VIOLATION {v}")
    if rep.z2_probability is not None:
        print(f"failure-count probability {rep.z2_probability:.6f}")
    if not rep.ok:
        return EXIT_VERIFY_FAILED
    if rep.z2_feasible is False:
        return EXIT_EXACT_VIOLATED
    print("verification passed")
    return EXIT_OK


def _progress(result) -> None:
    p, n, seed, ep, err = result
    if ep is None:
        print(f"  {p} train={n} seed={seed}: FAILED {err.splitlines()[0]}", flush=True)
    else:
        k = ep.kpis()
        print(f"  {p} train={n} seed={seed}: %PM {_fmt(k['pct_pm'])} cost/day {_fmt(k['cost_per_day'])} "
              f"cc {_fmt(k['avg_cc_violation'])}", flush=True)


def _run_z2_study(cfg: dict, out: Path) -> int:
    sizes = [int(s) for s in str(cfg["sizes"]).split(",")] if cfg["sizes"] else [50, 100, 200, 400]
    n = int(cfg["replications"]) if cfg["replications"] is not None else 50
    cases = [presets.tight_regression_case(int(cfg["seed"]) + i) for i in range(n)]
    rows = harness.run_z2_comparison(cases, sizes, delta=float(cfg["delta"] or 0.0),
                                     options=_solver_options(cfg), seed=int(cfg["seed"]))
    harness.write_rows(rows, out / "z2_rows.csv")
    rates = harness.violation_rates(rows)
    summary = []
    for (method, S), rate in sorted(rates.items(), key=lambda kv: (kv[0][0] != "exact", kv[0][1])):
        rts = [r["runtime"] for r in rows if r["method"] == method and r["S"] == S]
        summary.append({"method": method, "S": S, "instances": len(rts), "violation_rate": rate,
                        "mean_runtime": float(np.mean(rts))})
    harness.write_rows(summary, out / "summary.csv")
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    _print_table(summary)
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _resolve(args, dict(preset="training", replications=None, workers=1, seed=0, out=None,
                              sim_days=None, sizes=None, spec=None, delta=None, **{
                                  k: v for k, v in SOLVER_DEFAULTS.items() if k != "seed"}))
    out = _out_dir(cfg["out"])
    _echo(out, "study", cfg)
    if cfg["preset"] == "sampling":
        return _run_z2_study(cfg, out)
    if cfg["spec"]:
        spec = harness.StudySpec.from_dict(json.loads(_existing(cfg["spec"], "--spec").read_text()))
    else:
        spec = harness.study_preset(cfg["preset"], replications=int(cfg["replications"] or 20),
                                    base_seed=int(cfg["seed"]))
    spec.workers = int(cfg["workers"])
    if cfg["replications"] is not None:
        spec.replications = int(cfg["replications"])
    if cfg["sim_days"] is not None:
        spec.episode.sim_days = int(cfg["sim_days"])
    spec.episode.backend = cfg["backend"]
    spec.episode.time_limit = float(cfg["time_limit"])
    spec.episode.mip_gap = float(cfg["gap"])
    (out / "study_spec.json").write_text(json.dumps(spec.to_dict(), indent=2))
    result = harness.run_study(spec, progress=_progress)
    rows = result.summary_rows()
    harness.write_rows(rows, out / "summary.csv")
    harness.write_rows(result.replication_rows(), out / "replications.csv")
    (out / "summary.json").write_text(json.dumps({"study": spec.name, "cells": rows,
                                                  "failures": result.failures}, indent=2))
    harness.write_events([e for eps in result.episodes.values() for e in eps], out / "events.jsonl")
    _print_table(rows)
    bad = result.fully_failed_cells()
    if bad:
        print(f"cells with no successful replication: {bad}")
        return EXIT_CELL_FAILED
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _resolve(args, dict(sizes="1,2,5", repeats=3, seed=0, out=None, delta=0.2,
                              **{k: v for k, v in SOLVER_DEFAULTS.items() if k != "seed"}))
    out = _out_dir(cfg["out"])
    sizes = [int(s) for s in str(cfg["sizes"]).split(",")]
    rows = harness.run_bench(sizes, repeats=int(cfg["repeats"]), seed=int(cfg["seed"]),
                             options=SolverOptions(backend=cfg["backend"], time_limit=float(cfg["time_limit"]),
                                                   mip_gap=float(cfg["gap"])),
                             delta=float(cfg["delta"]))
    harness.write_rows(rows, out / "bench.csv")
    _echo(out, "bench", cfg)
    summary = []
    for n in sizes:
        sel = [r for r in rows if r["turbines"] == n]
        summary.append({"turbines": n, "components": sel[0]["components"],
                        "continuous": sel[0].get("continuous"), "integer": sel[0].get("integer"),
                        "binary": sel[0].get("binary"), "constraints": sel[0].get("constraints"),
                        "mean_time": float(np.mean([r["solve_time"] for r in sel])),
                        "max_time": float(np.max([r["solve_time"] for r in sel])),
                        "time_limit_hits": sum(r["time_limit_hit"] for r in sel)})
    harness.write_rows(summary, out / "summary.csv")
    _print_table(summary)
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _resolve(args, dict(study=None, out=None))
    src = _existing(cfg["study"], "--study")
    out = _out_dir(cfg["out"] or src)
    figures: list[Path] = []
    table: list[dict] = []
    kind = None
    if (src / "z2_rows.csv").exists():
        kind, rows = "z2", harness.read_rows(src / "z2_rows.csv")
        table = harness.read_rows(src / "summary.csv")
    elif (src / "bench.csv").exists():
        kind, rows = "bench", harness.read_rows(src / "bench.csv")
        table = harness.read_rows(src / "summary.csv")
    elif (src / "summary.csv").exists():
        kind = "study"
        rows = table = harness.read_rows(src / "summary.csv")
    else:
        raise UsageError(f"{src} holds no study, comparison or benchmark tables")
    try:
        from . import plotting
        draw = {"z2": plotting.plot_violation_rates, "bench": plotting.plot_bench,
                "study": plotting.plot_study}[kind]
        figures = draw(rows, out)
    except ImportError:
        log.warning("matplotlib is not installed; skipping figures (pip install 'artifact[plot]')")
    _write_tsv(table, out / "report.tsv")
    _echo(out, "report", cfg)
    print(f"----- {kind} report: {src} -----")
    _print_table(table)
    print("----- end -----")
    for f in figures:
        print(f"figure {f}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _resolve(args, dict(n=1000, seed=0, out=None))
    out = _out_dir(cfg["out"])
    types = presets.calibrate_component_types(n=int(cfg["n"]), seed=int(cfg["seed"]))
    (out / "types.json").write_text(json.dumps([p.to_dict() for p in types], indent=2))
    _echo(out, "calibrate", cfg)
    for p in types:
        print(f"type {p.type_id}: phase I window {p.tau_range[0]:.1f}-{p.tau_range[1]:.1f}")
    return EXIT_OK


# -- output helpers --------------------------------------------------------

def _fmt(v) -> str:
    if v is None or v == "":
        return "-"
    if isinstance(v, (bool, int)):
        return str(v)
    if isinstance(v, float):
        return f"{v:.4g}"
    text = str(v)
    try:
        f = float(text)
    except ValueError:
        return text
    return text if text.lstrip("-").isdigit() else f"{f:.4g}"


def _print_table(rows: list[dict]) -> None:
    if not rows:
        print("(no rows)")
        return
    keys = list(rows[0])
    cells = [[_fmt(r.get(k)) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    print("  ".join(k.ljust(w) for k, w in zip(keys, widths)))
    for c in cells:
        print("  ".join(v.ljust(w) for v, w in zip(c, widths)))


def _write_tsv(rows: list[dict], path: Path) -> None:
    keys = list(rows[0]) if rows else []
    lines = ["\t".join(keys)] + ["\t".join(_fmt(r.get(k)) for k in keys) for r in rows]
    path.write_text("\n".join(lines) + "\n")


# -- parser ----------------------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--backend", help="highs, scipy or auto")
    p.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per solve")
    p.add_argument("--gap", type=float, help="relative MIP gap")
    if seed:
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointcbm", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with default values for this command")
        p.add_argument("--out", help="output directory")
        return p

    p = cmd("generate", "simulate run-to-failure training signals")
    p.add_argument("--preset", help="sparse (5 per type) or abundant (50 per type)")
    p.add_argument("--signals", type=int, help="signals per type; overrides the preset")
    p.add_argument("--seed", type=int)
    p.add_argument("--types", help="JSON list of component-type parameters")

    p = cmd("fit", "fit priors from a generated dataset")
    p.add_argument("--data", help="directory written by 'generate'")

    p = cmd("snapshot", "write a planning instance and remaining-life samples")
    p.add_argument("--turbines", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train", type=int, help="training signals per type")
    p.add_argument("--samples", type=int, help="remaining-life samples per component")
    p.add_argument("--regression", type=int, help="write tight regression case N instead")

    p = cmd("solve", "solve and verify one planning instance")
    p.add_argument("--instance")
    p.add_argument("--rlds", help="remaining-life samples (JSON from 'snapshot')")
    p.add_argument("--policy", help="SAA, DRCC:<delta>, Robust or Sequential:<delta>")
    p.add_argument("--delta", type=float, help="normalized Wasserstein radius")
    p.add_argument("--z2", choices=["exact", "sample", "off"])
    p.add_argument("--S", type=int, help="scenarios for --z2 sample")
    _solver_flags(p)

    p = cmd("verify", "re-check a written solution")
    p.add_argument("--instance")
    p.add_argument("--params")
    p.add_argument("--solution")

    p = cmd("study", "closed-loop or exact-vs-sampled studies")
    p.add_argument("--preset", help="training, sequential or sampling")
    p.add_argument("--spec", help="JSON study specification (overrides --preset)")
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--sim-days", dest="sim_days", type=int)
    p.add_argument("--sizes", help="comma-separated S values for the sampling study")
    p.add_argument("--delta", type=float, help="radius for the sampling study")
    _solver_flags(p)

    p = cmd("bench", "model sizes and solve times by fleet size")
    p.add_argument("--sizes", help="comma-separated turbine counts, e.g. 25,50,75,100")
    p.add_argument("--repeats", type=int)
    p.add_argument("--delta", type=float)
    _solver_flags(p)

    p = cmd("report", "figures and a text table from a study directory")
    p.add_argument("--study", help="directory written by 'study' or 'bench'")

    p = cmd("calibrate", "calibrate Phase-I windows to the target lifetimes")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    return ap


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "snapshot": cmd_snapshot, "solve": cmd_solve,
            "verify": cmd_verify, "study": cmd_study, "bench": cmd_bench, "report": cmd_report,
            "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except milp.ConfigurationError as exc:
        print(f"solver configuration error: {exc}", file=sys.stderr)
        return EXIT_BACKEND_MISSING
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
