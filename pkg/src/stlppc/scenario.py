"""Scenario files: schema, validation, and preparation for simulation.

A scenario is a JSON document:

    {
      "name": "...",
      "comment": "optional free text",
      "agents": [{"id": 1, "model": {"type": "single_integrator", "n": 2} |
                                    {"type": "omni", "R": 2.0, "L": 0.2},
                  "x0": [..], "u_max": 8.0, "noise": [..]}],
      "tasks": [{"agent": 1, "formula": "F[5,15] dist(1,[9,9]) <= 5"}],
      "comm_edges": null | [[1,2], ...],
      "coupling": null | {"type": "saturated_consensus",
                           "gain": g, "bound": b, "edges": [[1,2], ...]},
      "controller": {"r": 0.5, "delta": 1.5, "sigma": 0.1, "N": 1, ...},
      "sim": {"dt": 0.005, "t_end": 15.0, "seed": 0, "max_jumps_per_step": 4}
    }

Agents without a task entry default to the trivial task "true".
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormulaSyntaxError, ScenarioParseError, ValidationError
from .formulas import StateLayout, TaskFormula
from .funnel import ControllerConfig
from .hybrid import AgentPlan
from .parser import parse_task
from .robustness import rho_opt
from .sim import RunResult, SimConfig, Simulation
from .topology import Cluster, CommGraph, clusters
from .world import (
    CouplingModel,
    DynamicsModel,
    NoCoupling,
    NoiseModel,
    OmniRobot,
    SaturatedConsensus,
    SingleIntegrator,
)


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    model: DynamicsModel
    x0: tuple[float, ...]
    u_max: Optional[float] = None
    noise: tuple[float, ...] = ()


@dataclass
class Scenario:
    name: str
    agents: dict[int, AgentSpec]
    tasks: dict[int, TaskFormula]
    task_texts: dict[int, str]
    comm: CommGraph
    coupling: CouplingModel
    cfg: ControllerConfig
    sim: SimConfig
    layout: StateLayout = field(init=False)
    plans: dict[int, AgentPlan] = field(init=False)

    def __post_init__(self):
        self.layout = StateLayout(
            {i: a.model.state_dim for i, a in self.agents.items()}
        )
        self.plans = {}
        for i, task in self.tasks.items():
            parts = task.participants(i)
            sub = self.layout.restrict(parts)
            rho_opts = tuple(
                rho_opt(u.psi, sub).value if u.psi.conjuncts() else math.inf
                for u in task.units
            )
            self.plans[i] = AgentPlan(i, task, parts, rho_opts)

    def cluster_partition(self) -> list[Cluster]:
        return clusters(self.tasks, self.comm)

    def noise_model(self) -> NoiseModel:
        widths = {
            i: a.noise for i, a in self.agents.items() if a.noise and any(a.noise)
        }
        return NoiseModel(widths, seed=self.sim.seed)

    def simulation(self) -> Simulation:
        return Simulation(
            models={i: a.model for i, a in self.agents.items()},
            x0={i: np.asarray(a.x0) for i, a in self.agents.items()},
            plans=self.plans,
            cfg=self.cfg,
            sim_cfg=self.sim,
            coupling_model=self.coupling,
            noise=self.noise_model(),
            u_max={i: a.u_max for i, a in self.agents.items()},
        )

    def run(self) -> RunResult:
        return self.simulation().run()


def _model_from_dict(d: dict, where: str) -> DynamicsModel:
    kind = d.get("type")
    if kind == "single_integrator":
        n = d.get("n", 2)
        if not isinstance(n, int) or n < 1:
            raise ValidationError(f"{where}.n", "state dimension must be a positive integer")
        return SingleIntegrator(n)
    if kind == "omni":
        R = float(d.get("R", 0.02))
        L = float(d.get("L", 0.2))
        if R <= 0 or L <= 0:
            raise ValidationError(f"{where}", "omni radii must be positive")
        return OmniRobot(wheel_radius=R, body_radius=L)
    raise ValidationError(f"{where}.type", f"unknown model type {kind!r}")


def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a JSON object")
    agents: dict[int, AgentSpec] = {}
    raw_agents = doc.get("agents")
    if not raw_agents:
        raw_agents = []
    for k, a in enumerate(raw_agents):
        where = f"agents[{k}]"
        try:
            aid = int(a["id"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{where}.id", "missing or non-integer agent id") from None
        if aid in agents:
            raise ValidationError(f"{where}.id", f"duplicate agent id {aid}")
        model = _model_from_dict(a.get("model", {"type": "single_integrator"}), f"{where}.model")
        x0 = tuple(float(v) for v in a.get("x0", ()))
        if len(x0) != model.state_dim:
            raise ValidationError(
                f"{where}.x0", f"expected {model.state_dim} coordinates, got {len(x0)}"
            )
        u_max = a.get("u_max")
        if u_max is not None:
            u_max = float(u_max)
            if u_max <= 0:
                raise ValidationError(f"{where}.u_max", "input bound must be positive")
        noise = tuple(float(v) for v in a.get("noise", ()))
        if noise and len(noise) != model.state_dim:
            raise ValidationError(
                f"{where}.noise", f"expected {model.state_dim} half-widths, got {len(noise)}"
            )
        if any(v < 0 for v in noise):
            raise ValidationError(f"{where}.noise", "half-widths must be non-negative")
        agents[aid] = AgentSpec(aid, model, x0, u_max, noise)
    if not agents:
        pass  # an empty scenario is legal: it runs to an empty log

    tasks: dict[int, TaskFormula] = {}
    task_texts: dict[int, str] = {}
    for k, tsk in enumerate(doc.get("tasks", [])):
        where = f"tasks[{k}]"
        try:
            owner = int(tsk["agent"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{where}.agent", "missing or non-integer agent id") from None
        if owner not in agents:
            raise ValidationError(f"{where}.agent", f"unknown agent {owner}")
        if owner in tasks:
            raise ValidationError(f"{where}.agent", f"duplicate task for agent {owner}")
        text = tsk.get("formula", "")
        try:
            task = parse_task(text)
        except FormulaSyntaxError as exc:
            raise ValidationError(f"{where}.formula", str(exc)) from exc
        for p in task.participants(owner):
            if p not in agents:
                raise ValidationError(
                    f"{where}.formula", f"formula reads undeclared agent {p}"
                )
        tasks[owner] = task
        task_texts[owner] = text
    for aid in agents:
        if aid not in tasks:
            tasks[aid] = parse_task("true")
            task_texts[aid] = "true"

    raw_edges = doc.get("comm_edges")
    if raw_edges is None:
        comm = CommGraph(agents)
    else:
        edges = []
        for k, e in enumerate(raw_edges):
            a, b = int(e[0]), int(e[1])
            if a not in agents or b not in agents:
                raise ValidationError(f"comm_edges[{k}]", "edge references unknown agent")
            if a == b:
                raise ValidationError(f"comm_edges[{k}]", "self-loops are not allowed")
            edges.append((a, b))
        comm = CommGraph(agents, edges)

    raw_coupling = doc.get("coupling")
    if raw_coupling is None:
        coupling: CouplingModel = NoCoupling()
    else:
        if raw_coupling.get("type") != "saturated_consensus":
            raise ValidationError("coupling.type", f"unknown coupling {raw_coupling.get('type')!r}")
        try:
            coupling = SaturatedConsensus(
                gain=float(raw_coupling["gain"]),
                bound=float(raw_coupling["bound"]),
                edges=tuple((int(a), int(b)) for a, b in raw_coupling.get("edges", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("coupling", str(exc)) from exc
        if coupling.bound <= 0:
            raise ValidationError("coupling.bound", "saturation bound must be positive")

    ctl = dict(doc.get("controller", {}))
    if "N" in ctl:
        ctl["n_stage1"] = ctl.pop("N")
    if "idle" in ctl:
        ctl["idle_policy"] = ctl.pop("idle")
    if "eta_detect" in ctl:
        ctl["eta_detect"] = float(ctl["eta_detect"])
    try:
        cfg = ControllerConfig(**ctl)
    except (TypeError, ValueError) as exc:
        raise ValidationError("controller", str(exc)) from exc

    try:
        sim = SimConfig(**doc.get("sim", {}))
    except (TypeError, ValueError) as exc:
        raise ValidationError("sim", str(exc)) from exc

    # mixing trivial and constraining units inside one sequence is not runnable
    for owner, task in tasks.items():
        if task.units and not task.trivial:
            for uix, unit in enumerate(task.units):
                if not unit.psi.conjuncts():
                    raise ValidationError(
                        f"tasks.{owner}.units[{uix}]",
                        "a unit sequence may not mix 'true' units with real ones",
                    )

    return Scenario(
        name=doc.get("name", name),
        agents=dict(sorted(agents.items())),
        tasks=tasks,
        task_texts=task_texts,
        comm=comm,
        coupling=coupling,
        cfg=cfg,
        sim=sim,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load and fully validate a scenario file."""
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{p} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, name=p.stem)
