"""Command-line front end: ``anchor-sim run | verify | scenario``.

Exit codes: 0 success, 1 configuration error, 2 solver infeasibility,
3 I/O error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, verify
from .anchor import AnchorParams
from .errors import InfeasibleError, ScenarioError
from .freq_alloc import AnnealParams
from .power_time import AscentParams
from .scenario import (Scenario, desk_scenario, dumps_scenario, generate_random_scenario,
                       load_scenario, paper_scenario, scenario_from_dict, scenario_to_dict)
from .tracking import METHODS, STREAMS, CampaignResult, run_campaign

log = logging.getLogger("anchor_sim")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4
BUILTIN_SCENARIOS = {"paper": paper_scenario, "desk3": desk_scenario}

RESULT_COLUMNS = [
    "trial", "interval", "method", "target", "time",
    "est_x", "est_vx", "est_y", "est_vy", "true_x", "true_vx", "true_y", "true_vy",
    "sq_err", "sq_err_position", "sq_err_velocity", "objective", "min_margin", "margins",
]
TRACE_COLUMNS = ["trial", "interval", "method", "outer_iter", "objective"]
SUMMARY_COLUMNS = ["method", "interval", "crmse", "crmse_position", "crmse_velocity",
                   "mean_objective"]


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def fmt(x: Any) -> str:
    """Numbers with 12 significant digits; everything else as str."""
    if isinstance(x, (float, np.floating)):
        return "%.12g" % float(x)
    return str(x)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="anchor-sim", description="Radar/communications allocation inside a tracking loop.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a Monte Carlo tracking campaign")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="scenario TOML path, or a builtin name (paper, desk3)")
    src.add_argument("--gen-seed", type=int, help="generate a random scenario from this seed")
    src.add_argument("--manifest", help="re-run the configuration stored in a manifest.json")
    run.add_argument("--counts", default="3,3,2,2,6",
                     help="N_c,N_p,N_m,Q,J for --gen-seed (default 3,3,2,2,6)")
    run.add_argument("--methods", default=",".join(METHODS))
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--intervals", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="results")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--fast-mode", action="store_true",
                     help="draw composite measures from the CRB instead of running the ILS fuser")
    run.add_argument("--anchor.tol", dest="anchor_tol", type=float)
    run.add_argument("--anchor.max-iters", dest="anchor_max_iters", type=int)
    run.add_argument("--anneal.tmax", dest="anneal_tmax", type=float)
    run.add_argument("--anneal.tmin", dest="anneal_tmin", type=float)
    run.add_argument("--anneal.dt", dest="anneal_dt", type=float)
    run.add_argument("--ascent.step", dest="ascent_step", type=float)
    run.add_argument("--ascent.max-iters", dest="ascent_max_iters", type=int)
    run.add_argument("--ascent.tol", dest="ascent_tol", type=float)
    run.add_argument("--ascent.growth", dest="ascent_growth", type=float)

    ver = sub.add_parser("verify", help="run the built-in oracle checks")
    ver.add_argument("level", nargs="?", choices=("fast", "full"), default="fast")

    scn = sub.add_parser("scenario", help="write a builtin or generated scenario as TOML")
    scn.add_argument("name", nargs="?", choices=sorted(BUILTIN_SCENARIOS), default="paper")
    scn.add_argument("--gen-seed", type=int)
    scn.add_argument("--counts", default="3,3,2,2,6")
    scn.add_argument("--out", help="output path (stdout if omitted)")
    return p


def parse_counts(text: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--counts must be 5 comma-separated integers, got {text!r}") from exc
    if len(counts) != 5 or min(counts) < 0 or counts[3] < 1:
        raise ConfigError(f"--counts must be N_c,N_p,N_m,Q,J with Q >= 1, got {text!r}")
    return counts


def resolve_scenario(args: argparse.Namespace) -> tuple[Scenario, dict[str, Any]]:
    if args.gen_seed is not None:
        counts = parse_counts(args.counts)
        return generate_random_scenario(args.gen_seed, counts), {
            "generator_seed": args.gen_seed, "counts": list(counts)}
    name = getattr(args, "scenario", None) or "paper"
    if name in BUILTIN_SCENARIOS and not Path(name).exists():
        return BUILTIN_SCENARIOS[name](), {"builtin": name}
    return load_scenario(name), {"path": str(name)}


def resolve_params(args: argparse.Namespace) -> AnchorParams:
    a, s, o = AnnealParams(), AscentParams(), AnchorParams()
    try:
        anneal = AnnealParams(
            t_max=a.t_max if args.anneal_tmax is None else args.anneal_tmax,
            t_min=a.t_min if args.anneal_tmin is None else args.anneal_tmin,
            delta_t=a.delta_t if args.anneal_dt is None else args.anneal_dt)
        ascent = AscentParams(
            step_size=args.ascent_step,
            max_iters=s.max_iters if args.ascent_max_iters is None else args.ascent_max_iters,
            tol=s.tol if args.ascent_tol is None else args.ascent_tol,
            growth=s.growth if args.ascent_growth is None else args.ascent_growth)
        return AnchorParams(
            outer_tol=o.outer_tol if args.anchor_tol is None else args.anchor_tol,
            max_outer_iters=o.max_outer_iters if args.anchor_max_iters is None else args.anchor_max_iters,
            anneal=anneal, ascent=ascent)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def params_from_dict(d: dict[str, Any]) -> AnchorParams:
    return AnchorParams(outer_tol=d["outer_tol"], max_outer_iters=d["max_outer_iters"],
                        anneal=AnnealParams(**d["anneal"]), ascent=AscentParams(**d["ascent"]))


def resolve_run_config(args: argparse.Namespace) -> dict[str, Any]:
    """Everything a run depends on, in plain types."""
    if args.manifest:
        try:
            m = json.loads(Path(args.manifest).read_text())
        except OSError:
            raise
        except ValueError as exc:
            raise ConfigError(f"manifest {args.manifest} is not valid JSON: {exc}") from exc
        try:
            cfg = {k: m[k] for k in ("methods", "trials", "intervals", "seed", "fast_mode")}
            cfg["scenario"] = scenario_from_dict(m["scenario"])
            cfg["scenario_source"] = m.get("scenario_source", {"manifest": args.manifest})
            cfg["params"] = params_from_dict(m["params"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"manifest {args.manifest} is missing {exc}") from exc
        cfg["jobs"] = args.jobs
        cfg["out"] = args.out
        return cfg
    sc, source = resolve_scenario(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if not methods:
        raise ConfigError("--methods must name at least one method")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    if len(set(methods)) != len(methods):
        raise ConfigError("--methods lists a method twice")
    if args.trials < 1 or args.intervals < 1 or args.jobs < 1:
        raise ConfigError("--trials, --intervals and --jobs must be >= 1")
    return {"scenario": sc, "scenario_source": source, "methods": list(methods),
            "trials": args.trials, "intervals": args.intervals, "seed": args.seed,
            "fast_mode": bool(args.fast_mode), "params": resolve_params(args),
            "jobs": args.jobs, "out": args.out}


# ---------------------------------------------------------------------------
# output


def manifest_dict(cfg: dict[str, Any]) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "scenario_source": cfg["scenario_source"],
        "scenario": scenario_to_dict(cfg["scenario"]),
        "methods": list(cfg["methods"]),
        "trials": cfg["trials"],
        "intervals": cfg["intervals"],
        "seed": cfg["seed"],
        "fast_mode": cfg["fast_mode"],
        "params": asdict(cfg["params"]),
        "random_streams": {"key": "SeedSequence([seed, trial, stream, interval, target])",
                           "streams": STREAMS},
        "jobs": cfg["jobs"],
        "outputs": ["results.csv", "summary.csv", "trace.csv", "allocation.json", "manifest.json"],
    }


def _sorted_records(result: CampaignResult):
    order = {m: k for k, m in enumerate(result.methods)}
    return sorted(result.records, key=lambda r: (r.trial, r.interval, order[r.method]))


def write_outputs(result: CampaignResult, sc: Scenario, cfg: dict[str, Any], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    lam = np.diag(sc.normalizer)
    t0 = sc.fusion_period
    recs = _sorted_records(result)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in recs:
            margins = np.asarray(r.margins if r.margins is not None else [], dtype=float)
            min_margin = float(margins.min()) if margins.size else float("nan")
            for q, tgt in enumerate(sc.targets):
                err = (r.estimates[q] - r.truth[q]) * lam
                sq = err * err
                w.writerow([fmt(v) for v in (
                    r.trial, r.interval, r.method, tgt.id, float((r.interval + 1) * t0),
                    *map(float, r.estimates[q]), *map(float, r.truth[q]),
                    float(sq.sum()), float(sq[0] + sq[2]), float(sq[1] + sq[3]),
                    float(r.objective), min_margin,
                    ";".join(fmt(float(m)) for m in margins))])
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in recs:
            for it, g in enumerate(r.objective_trace):
                w.writerow([fmt(v) for v in (r.trial, r.interval, r.method, it, float(g))])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for m in result.methods:
            for k in range(result.intervals):
                w.writerow([fmt(v) for v in (
                    m, k, result.crmse(m, k), result.crmse(m, k, "position"),
                    result.crmse(m, k, "velocity"), result.mean_objective(m, k))])
    alloc = [{"trial": r.trial, "interval": r.interval, "method": r.method,
              "objective": float(r.objective), "z": [float(v) for v in r.z],
              "blocks": [int(b) for b in r.blocks]} for r in recs]
    (out / "allocation.json").write_text(json.dumps(
        {"schema_version": SCHEMA_VERSION, "variable_order": variable_order(sc),
         "allocations": alloc}, indent=1) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest_dict(cfg), indent=2) + "\n")


def variable_order(sc: Scenario) -> list[str]:
    """Names of the entries of z, in order."""
    n_c, n_p, _ = sc.kind_counts
    names = [f"P[radar {r.id}, target {t.id}]" for r in sc.radars[:n_c] for t in sc.targets]
    names += [f"T[radar {r.id}, target {t.id}]" for r in sc.radars[n_c:n_c + n_p] for t in sc.targets]
    names += [f"Pc[user {u.id}]" for u in sc.macro_users]
    return names


# ---------------------------------------------------------------------------
# commands


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_run_config(args)
    sc = cfg["scenario"]
    log.info("scenario %s: %d radars, %d targets, %d macro users, %d blocks",
             sc.name, sc.num_radars, sc.num_targets, sc.num_macro, sc.num_blocks)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    t = time.perf_counter()
    result = run_campaign(sc, cfg["intervals"], cfg["trials"], cfg["methods"], cfg["seed"],
                          cfg["params"], cfg["fast_mode"], cfg["jobs"])
    log.info("campaign finished in %.1f s", time.perf_counter() - t)
    write_outputs(result, sc, cfg, out)
    k = cfg["intervals"] - 1
    for m in result.methods:
        print(f"{m:8s} final-interval CRMSE {result.crmse(m, k):.6g}  mean g {result.mean_objective(m, k):.6g}")
    print(f"wrote {out}/results.csv, summary.csv, trace.csv, allocation.json, manifest.json")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = verify.run_checks(args.level)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_scenario(args: argparse.Namespace) -> int:
    if args.gen_seed is not None:
        sc = generate_random_scenario(args.gen_seed, parse_counts(args.counts))
    else:
        sc = BUILTIN_SCENARIOS[args.name]()
    text = dumps_scenario(sc)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "scenario": cmd_scenario}


def setup_logging() -> None:
    level = os.environ.get("ANCHOR_SIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioError as exc:
        print(f"config error: scenario {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
