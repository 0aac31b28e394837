"""Command-line pipeline: assign -> cycle -> simulate, plus toy-size oracles.

    python -m wardrop_cycles --out out assign --city SiouxFalls
    python -m wardrop_cycles --out out cycle
    python -m wardrop_cycles --out out simulate --horizon 50
    python -m wardrop_cycles oracle restricted --values 4,4,1,-3,-3,-3

``--config FILE`` reads ``key = value`` lines (``#`` comments) whose keys are
option names of the chosen subcommand; flags on the command line win.
``WARDROP_DATA_DIR`` points ``--city`` at a directory of TNTP files.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import logging
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cycles, oracle, rules, tntp_io, traffic_core
from .pathset import PathSet, load_archive, save_archive
from .tntp_io import ReportTable, write_report

log = logging.getLogger("wardrop_cycles")

DATA_ENV = "WARDROP_DATA_DIR"
ARCHIVE = "pathsets.json"
REPORT_DAYS = (1, 5, 10, 20, 50)


def data_dir() -> Path:
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path(str(importlib.resources.files("wardrop_cycles") / "data"))


def city_files(city: str) -> tuple[Path, Path]:
    d = data_dir()
    return d / f"{city}_net.tntp", d / f"{city}_trips.tntp"


# -- pipeline steps (also used directly by tests) -------------------------------


@dataclass
class AssignOutput:
    pathsets: dict
    ue: traffic_core.AssignmentResult
    so: traffic_core.AssignmentResult
    tables: list


def run_assign(net_path, trips_path, city: str, cfg: traffic_core.SolverConfig) -> AssignOutput:
    net = traffic_core.Network.from_raw(tntp_io.read_network(net_path))
    demand = tntp_io.read_trips(trips_path)
    if not demand.assignable():
        warnings.warn("trips file has no assignable demand; archive will be empty", stacklevel=2)
    ue = traffic_core.solve_assignment(net, demand, traffic_core.Objective.UE, cfg)
    so = traffic_core.solve_assignment(net, demand, traffic_core.Objective.SO, cfg)
    ue_times = traffic_core.od_mean_times(ue)
    pathsets = traffic_core.build_pathsets(so, ue_times)
    poa = traffic_core.price_of_anarchy(ue.total_time, so.total_time) if so.total_time > 0 else None
    poa_row = {
        "city": city,
        "total_ue_minutes": ue.total_time,
        "total_so_minutes": so.total_time,
        "poa": None if poa is None else round(poa, 2),
    }
    rows = []
    if pathsets:
        fair, _ = traffic_core.od_fairness_report(pathsets, {od: ue_times[od] for od in pathsets})
        for r in fair:
            ps = pathsets[r.od]
            rows.append({
                "origin": r.od[0], "destination": r.od[1], "q": ps.Q, "n_paths": ps.K,
                "t_hat_so": r.t_hat_so, "t_ue": r.t_ue, "violated": r.violated,
            })
    return AssignOutput(pathsets, ue, so, [ReportTable("poa_summary", [poa_row]), ReportTable("od_summary", rows)])


def select_ods(pathsets, min_q: int = 2, min_paths: int = 2) -> list[PathSet]:
    """ODs with at least ``min_q`` drivers and ``min_paths`` distinct path times."""
    out = [ps for ps in pathsets if ps.Q >= min_q and len(set(ps.times.tolist())) >= min_paths]
    return sorted(out, key=lambda ps: ps.od)


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    if not len(v):
        return {"count": 0, "max": None, "mean": None, "median": None, "std": None, "p75": None, "p95": None}
    return {
        "count": len(v),
        "max": float(v.max()),
        "mean": float(v.mean()),
        "median": float(np.median(v)),
        "std": float(v.std(ddof=1)) if len(v) > 1 else 0.0,
        "p75": float(np.percentile(v, 75)),
        "p95": float(np.percentile(v, 95)),
    }


def run_cycle(pathsets: list[PathSet], methods=("full", "gcd", "partition"), depth: int = 4) -> list[ReportTable]:
    rows = []
    lengths: dict[str, list[int]] = {m: [] for m in methods}
    for ps in pathsets:
        row = {"origin": ps.od[0], "destination": ps.od[1], "q": ps.Q, "n_paths": ps.K,
               "full": None, "gcd": None, "partition_max": None}
        worst, ok = 0.0, True
        scheds = []
        if "full" in methods:
            s = cycles.full_cycle(ps)
            row["full"] = s.length
            scheds.append(s)
        if "gcd" in methods:
            s = cycles.gcd_cycle(ps)
            row["gcd"] = s.length
            scheds.append(s)
        if "partition" in methods:
            _, s = cycles.partition_cycles(ps, cycles.PartitionMode.HEURISTIC, depth)
            row["partition_max"] = max(s.group_lengths)
            scheds.append(s)
        for s in scheds:
            rep = cycles.validate_cycle(s, ps)
            worst = max(worst, rep.max_abs_residual)
            ok = ok and rep.ok
        row["residual"] = worst
        row["wardropian"] = ok
        for m, key in (("full", "full"), ("gcd", "gcd"), ("partition", "partition_max")):
            if m in methods:
                lengths[m].append(row[key])
        rows.append(row)
    stats = [{"method": m, **_stats(lengths[m])} for m in methods]
    return [ReportTable("cycle_lengths", rows), ReportTable("cycle_length_stats", stats)]


@dataclass
class SimulateOutput:
    traces: dict
    sums: np.ndarray
    tables: list


def run_simulate(pathsets: list[PathSet], horizon: int, city: str, rule: str = "greedy", seed: int = 0) -> SimulateOutput:
    traces = {}
    for ps in pathsets:
        r = rules.Greedy() if rule == "greedy" else rules.RandomRule(seed + len(traces))
        traces[ps.od] = rules.simulate(ps, r, horizon)
    sums = np.zeros(horizon)
    for tr in traces.values():
        sums += tr.I
    dist_rows = []
    days = [d for d in REPORT_DAYS if d <= horizon]
    names = (("Max", "max"), ("Mean", "mean"), ("Median", "median"), ("Std Dev", "std"), ("75th %ile", "p75"), ("95th %ile", "p95"))
    for label, key in names:
        for d in days:
            st = _stats([tr.I_bar[d - 1] for tr in traces.values()])
            dist_rows.append({"metric": label, "day": d, "I_bar": st[key]})
    base = sums[0] if horizon and traces else 0.0
    ratio_row = {"city": city, "sum_I1": float(base) if traces else None}
    for d in REPORT_DAYS[1:]:
        ratio_row[f"ratio_{d}"] = float(sums[d - 1] / base) if d <= horizon and base > 0 else None
    tables = rules.trace_tables(traces)
    tables += [ReportTable("inequity_distribution", dist_rows), ReportTable("inequity_ratios", [ratio_row])]
    return SimulateOutput(traces, sums, tables)


# -- argument handling ------------------------------------------------------------


def _solver_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs and solver")
    g.add_argument("--city", help="look up <city>_net.tntp and <city>_trips.tntp in the data directory")
    g.add_argument("--net", type=Path, help="TNTP network file")
    g.add_argument("--trips", type=Path, help="TNTP trips file")
    g.add_argument("--gap", type=float, default=1e-4, help="relative gap target")
    g.add_argument("--max-iter", type=int, default=2000)
    g.add_argument("--polish-factor", type=float, default=1e-2,
                   help="path equilibration target as a fraction of --gap (0 disables)")


def _filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--archive", type=Path, help=f"path set archive (default OUT/{ARCHIVE})")
    p.add_argument("--min-q", type=int, default=2, help="minimum drivers per OD")
    p.add_argument("--min-paths", type=int, default=2, help="minimum distinct path times per OD")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wardrop-cycles", description=__doc__.split("\n")[0])
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--config", type=Path, help="key = value defaults for the subcommand")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assign", help="solve UE and SO, write path sets and PoA")
    _solver_args(p)

    p = sub.add_parser("cycle", help="cycle lengths and validation per OD")
    _filter_args(p)
    p.add_argument("--methods", default="full,gcd,partition")
    p.add_argument("--partition-depth", type=int, default=4)
    p.add_argument("--rota", help="also write the gcd-cycle rota of OD 'o-d'")

    p = sub.add_parser("simulate", help="run a daily rule per OD and report inequity decay")
    _filter_args(p)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--rule", choices=("greedy", "random"), default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--city-name", default=None, help="label for the ratio row (default from archive)")
    p.add_argument("--detail", action="store_true", help="also write per-driver rows")

    p = sub.add_parser("oracle", help="exact toy-size references")
    p.add_argument("problem", choices=("restricted", "compatible", "partition", "next-day"))
    p.add_argument("--values", required=True, help="comma-separated times (or deviations)")
    p.add_argument("--flows", help="comma-separated drivers per value (default 1 each)")
    p.add_argument("--ledger", help="comma-separated cumulative deviations (next-day)")

    p = sub.add_parser("report", help="assign, cycle and simulate in one go")
    _solver_args(p)
    p.add_argument("--min-q", type=int, default=2)
    p.add_argument("--min-paths", type=int, default=2)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--methods", default="full,gcd,partition")
    p.add_argument("--partition-depth", type=int, default=4)
    return ap


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("_", "-")] = v.strip("\"'")
    return out


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Insert config entries as flags right after the subcommand so explicit flags override them."""
    pre, _ = ap.parse_known_args(argv)
    if not pre.config:
        return argv
    conf = read_config(pre.config)
    sub = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction)).choices[pre.command]
    known = {s: a for a in sub._actions for s in a.option_strings}
    extra = []
    for k, v in conf.items():
        a = known.get(f"--{k}")
        if a is None:
            log.warning("config key %r is not an option of %s; ignored", k, pre.command)
        elif a.nargs == 0:
            if v.lower() in ("1", "true", "yes", "on"):
                extra.append(f"--{k}")
        else:
            extra += [f"--{k}", v]
    i = argv.index(pre.command)
    return argv[: i + 1] + extra + argv[i + 1:]


def _inputs(args) -> tuple[Path, Path, str]:
    if args.city:
        net, trips = city_files(args.city)
        net = args.net or net
        trips = args.trips or trips
        return net, trips, args.city
    if not (args.net and args.trips):
        raise ValueError("give --city or both --net and --trips")
    name = args.net.name.replace("_net.tntp", "")
    return args.net, args.trips, name


def _solver_cfg(args) -> traffic_core.SolverConfig:
    return traffic_core.SolverConfig(
        relative_gap_target=args.gap, max_iterations=args.max_iter, polish_factor=args.polish_factor
    )


def _settings(args) -> dict:
    keep = {}
    for k, v in sorted(vars(args).items()):
        if k in ("out", "verbose"):
            continue
        keep[k] = str(v) if isinstance(v, Path) else v
    return keep


def _cmd_assign(args) -> int:
    net, trips, city = _inputs(args)
    res = run_assign(net, trips, city, _solver_cfg(args))
    args.out.mkdir(parents=True, exist_ok=True)
    meta = {
        "city": city, "relative_gap_target": args.gap,
        "ue": {"total": res.ue.total_time, "gap": res.ue.relative_gap, "iterations": res.ue.iterations},
        "so": {"total": res.so.total_time, "gap": res.so.relative_gap, "iterations": res.so.iterations},
    }
    save_archive([res.pathsets[od] for od in sorted(res.pathsets)], args.out / ARCHIVE, meta)
    write_report(res.tables, args.out, _settings(args), "manifest_assign.json")
    row = res.tables[0].rows[0]
    print(f"{city}: UE {row['total_ue_minutes']:.0f} min, SO {row['total_so_minutes']:.0f} min, PoA {row['poa']}")
    print(f"{len(res.pathsets)} OD path sets written to {args.out / ARCHIVE}")
    return 0


def _load(args):
    path = args.archive or args.out / ARCHIVE
    pathsets, meta = load_archive(path)
    sel = select_ods(pathsets, args.min_q, args.min_paths)
    print(f"{len(sel)} of {len(pathsets)} ODs pass the filter (Q >= {args.min_q}, distinct times >= {args.min_paths})")
    return sel, meta


def _cmd_cycle(args) -> int:
    sel, _ = _load(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    tables = run_cycle(sel, methods, args.partition_depth)
    if args.rota:
        od = tuple(int(x) for x in args.rota.split("-"))
        ps = next((p for p in sel if p.od == od), None)
        if ps is None:
            raise ValueError(f"OD {args.rota} not in the filtered archive")
        tables.append(cycles.rota_table(cycles.gcd_cycle(ps), name=f"rota_{od[0]}_{od[1]}"))
    write_report(tables, args.out, _settings(args), "manifest_cycle.json")
    for r in tables[1].rows:
        if r["count"]:
            print(f"{r['method']:>9}: median {r['median']:g}, mean {r['mean']:.2f}, max {r['max']:g}")
    bad = sum(1 for r in tables[0].rows if not r["wardropian"])
    if bad:
        log.error("%d ODs failed cycle validation", bad)
        return 1
    return 0


def _cmd_simulate(args) -> int:
    if args.horizon < 1:
        raise ValueError("horizon must be at least 1")
    sel, meta = _load(args)
    city = args.city_name or meta.get("city", "")
    out = run_simulate(sel, args.horizon, city, args.rule, args.seed)
    tables = out.tables
    if args.detail:
        tables = rules.trace_tables(out.traces, {ps.od: ps for ps in sel}, detail=True) + tables[1:]
    write_report(tables, args.out, _settings(args), "manifest_simulate.json")
    row = tables[-1].rows[0]
    parts = [f"I5/I1 {row['ratio_5']:.3f}" if row["ratio_5"] is not None else ""]
    print(f"sum I_1 = {row['sum_I1']}; " + " ".join(p for p in parts if p))
    return 0


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _cmd_oracle(args) -> int:
    values = _floats(args.values)
    if args.problem == "restricted":
        val, seq = oracle.exact_restricted_cycle(values)
        result = {"value": val, "order": list(seq)}
    elif args.problem == "compatible":
        val, mat = oracle.exact_compatible_schedule(values)
        result = {"value": val, "schedule": mat.tolist()}
    else:
        flows = [int(x) for x in _floats(args.flows)] if args.flows else [1] * len(values)
        inst = oracle.SmallInstance(tuple(values), tuple(flows))
        if args.problem == "partition":
            groups = oracle.exact_mean_partition(inst)
            result = {"groups": groups and [list(g) for g in groups]}
        else:
            ledger = _floats(args.ledger) if args.ledger else [0.0] * inst.Q
            val, wit = oracle.brute_next_day(ledger, inst)
            result = {"inequity": str(val), "inequity_float": float(val), "assignment": list(wit)}
    print(json.dumps(result))
    return 0


def _cmd_report(args) -> int:
    args.archive = None
    if _cmd_assign(args):
        return 1
    rc = _cmd_cycle(argparse.Namespace(**{**vars(args), "rota": None}))
    args.rule, args.seed, args.city_name, args.detail = "greedy", 0, None, False
    return rc or _cmd_simulate(args)


COMMANDS = {"assign": _cmd_assign, "cycle": _cmd_cycle, "simulate": _cmd_simulate,
            "oracle": _cmd_oracle, "report": _cmd_report}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config(ap, argv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (tntp_io.TNTPError, traffic_core.DisconnectedOD, tntp_io.SinkWriteFailure, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
