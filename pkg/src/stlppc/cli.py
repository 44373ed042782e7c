"""Command-line entry points and log serialization.

    stlppc run <scenario.json> [--out DIR] [--seed S] [--dt D]
    stlppc check <scenario.json>
    stlppc eval --trace traj.csv --formula "F[5,15] dist(1,[9,9]) <= 5" [--t0 T]

Exit codes: 0 success / satisfied, 1 completed with violations, 2 errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import StlppcError
from .formulas import StateLayout
from .parser import parse_task
from .robustness import trace_robustness
from .scenario import Scenario, load_scenario
from .sim import RunResult


def _fmt_float(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return format(float(v), ".17g")


def write_trajectory_csv(result: RunResult, path: Path) -> None:
    """One row per (sample, agent); state/input columns padded to the widest agent."""
    traj = result.traj
    agents = sorted(traj.agents)
    n_max = max((traj.layout.dim(i) for i in agents), default=0)
    m_max = max((len(traj.agents[i].u[0]) for i in agents if traj.agents[i].u), default=0)
    cols = (
        ["t", "agent"]
        + [f"x{k + 1}" for k in range(n_max)]
        + [f"u{k + 1}" for k in range(m_max)]
        + ["rho_psi", "rho_max", "funnel_lo", "xi", "eps",
           "n_repairs", "collab", "unit_index"]
    )
    lines = [",".join(cols)]
    for s, t in enumerate(traj.times):
        for i in agents:
            tr = traj.agents[i]
            x = tr.x[s]
            u = tr.u[s]
            row = [_fmt_float(t), str(i)]
            row += [_fmt_float(v) for v in x] + [""] * (n_max - len(x))
            row += [_fmt_float(v) for v in u] + [""] * (m_max - len(u))
            row += [
                _fmt_float(tr.rho_psi[s]),
                _fmt_float(tr.rho_max[s]),
                _fmt_float(tr.funnel_lo[s]),
                _fmt_float(tr.xi[s]),
                _fmt_float(tr.eps[s]),
                str(tr.n_repairs[s]),
                str(tr.collab[s]),
                str(tr.unit_index[s]),
            ]
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_events_jsonl(result: RunResult, path: Path) -> None:
    lines = [json.dumps(e, sort_keys=True) for e in result.events]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def write_summary_json(result: RunResult, path: Path) -> None:
    path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")


def read_trajectory_csv(path: Path) -> tuple[np.ndarray, np.ndarray, StateLayout]:
    """(times, stacked states, layout) recovered from a trajectory CSV."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise StlppcError(f"{path} is empty")
    header = text[0].split(",")
    try:
        xcols = [k for k, c in enumerate(header) if c.startswith("x") and c[1:].isdigit()]
        t_col = header.index("t")
        a_col = header.index("agent")
    except ValueError as exc:
        raise StlppcError(f"{path} missing required columns: {exc}") from exc
    per_agent: dict[int, list[list[float]]] = {}
    times: list[float] = []
    seen_times: dict[float, int] = {}
    for line in text[1:]:
        parts = line.split(",")
        t = float(parts[t_col])
        agent = int(parts[a_col])
        coords = [parts[k] for k in xcols]
        state = [float(v) for v in coords if v != ""]
        if t not in seen_times:
            seen_times[t] = len(times)
            times.append(t)
        per_agent.setdefault(agent, []).append(state)
    n = len(times)
    dims = {}
    for agent, states in per_agent.items():
        if len(states) != n:
            raise StlppcError(f"agent {agent} has {len(states)} rows, expected {n}")
        dims[agent] = len(states[0])
    layout = StateLayout(dims)
    stacked = np.zeros((n, layout.total_dim))
    for agent, states in per_agent.items():
        stacked[:, layout.slice_of(agent)] = np.asarray(states)
    return np.asarray(times), stacked, layout


# -- commands -------------------------------------------------------------------


def cmd_check(path: str) -> int:
    scenario = load_scenario(path)
    parts = scenario.cluster_partition()
    print(f"scenario {scenario.name}: {len(scenario.agents)} agents, {len(parts)} clusters")
    all_feasible = True
    for i in sorted(scenario.plans):
        plan = scenario.plans[i]
        if plan.task.trivial:
            print(f"  agent {i}: trivial task")
            continue
        for uix, unit in enumerate(plan.task.units):
            peak = plan.rho_opts[uix]
            feasible = peak > 0.0
            all_feasible &= feasible
            verdict = "feasible" if feasible else "INFEASIBLE"
            print(f"  agent {i} unit {uix} [{unit.op} {unit.a},{unit.b}]: "
                  f"peak robustness {peak:.6g} -> {verdict}")
    for c in parts:
        flags = []
        flags.append("case-A" if c.case_a else "mixed tasks")
        flags.append("comm ok" if c.comm_ok else "COMM MISSING")
        print(f"  cluster {list(c.agents)}: {', '.join(flags)}")
        if not c.case_a:
            print(f"    warning: tasks differ inside cluster {list(c.agents)}; "
                  "the repair scheme will govern")
    if all_feasible or scenario.cfg.relaxed:
        return 0
    return 2


def cmd_run(path: str, out_dir: str, seed: int | None, dt: float | None) -> int:
    scenario = load_scenario(path)
    if seed is not None or dt is not None:
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if dt is not None:
            changes["dt"] = dt
        scenario.sim = dataclasses.replace(scenario.sim, **changes)
    result = scenario.run()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(result, out / "traj.csv")
    write_events_jsonl(result, out / "events.jsonl")
    write_summary_json(result, out / "summary.json")
    summary = result.summary
    for aid, a in sorted(summary["agents"].items(), key=lambda kv: int(kv[0])):
        if a["task_trivial"]:
            print(f"agent {aid}: trivial task")
            continue
        verdict = "satisfied" if a["task_satisfied"] else "violated"
        rob = a["task_robustness"]
        print(f"agent {aid}: {verdict} (robustness {rob:.6g}, final r {a['final_r']:.6g}, "
              f"jumps {a['jump_total']})")
    print(f"wrote {out / 'traj.csv'}, {out / 'events.jsonl'}, {out / 'summary.json'}")
    if scenario.cfg.relaxed:
        return 0
    return 0 if summary["all_satisfied"] else 1


def cmd_eval(trace: str, formula: str, t0: float) -> int:
    times, states, layout = read_trajectory_csv(Path(trace))
    task = parse_task(formula)
    value = trace_robustness(task, times, states, layout, t0)
    verdict = "satisfied" if value > 0 else "violated"
    print(f"robustness {value:.12g}: {verdict}")
    return 0 if value > 0 else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="stlppc",
        description="Funnel control of multi-agent systems under timed reach/hold tasks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write logs")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out", help="output directory (default ./out)")
    p_run.add_argument("--seed", type=int, default=None, help="override the noise seed")
    p_run.add_argument("--dt", type=float, default=None, help="override the step size")

    p_check = sub.add_parser("check", help="validate a scenario and report feasibility")
    p_check.add_argument("scenario")

    p_eval = sub.add_parser("eval", help="evaluate a formula on a stored trajectory")
    p_eval.add_argument("--trace", required=True)
    p_eval.add_argument("--formula", required=True)
    p_eval.add_argument("--t0", type=float, default=0.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.scenario, args.out, args.seed, args.dt)
        if args.command == "check":
            return cmd_check(args.scenario)
        if args.command == "eval":
            return cmd_eval(args.trace, args.formula, args.t0)
    except StlppcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
