"""Fixed-step closed-loop simulation: one jump pass per step, then one
classical fourth-order flow step for all agents simultaneously with inputs
and noise held constant over the step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .controller import ControlContext, control_and_diag, idle_control
from .errors import JumpStormError, NonFiniteStateError
from .formulas import StateLayout
from .funnel import ControllerConfig, FunnelParams, select_initial_params
from .hybrid import (
    AgentPlan,
    HybridState,
    RepairState,
    Satisfied,
    Stage2Join,
    detect,
    jump,
    jump_bound,
)
from .robustness import smooth_robustness, trace_robustness
from .world import CouplingModel, DynamicsModel, NoCoupling, NoiseModel, coupling


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.005
    t_end: float = 15.0
    seed: int = 0
    max_jumps_per_step: int = 4

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")


@dataclass
class AgentTrace:
    """Per-agent sampled records (one entry per log sample)."""

    x: list = field(default_factory=list)
    u: list = field(default_factory=list)
    rho_psi: list = field(default_factory=list)
    rho_max: list = field(default_factory=list)
    funnel_lo: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    n_repairs: list = field(default_factory=list)
    collab: list = field(default_factory=list)
    unit_index: list = field(default_factory=list)


@dataclass
class TrajectoryLog:
    times: np.ndarray
    states: np.ndarray  # (n_samples, total_dim)
    agents: dict[int, AgentTrace]
    layout: StateLayout


@dataclass
class RunResult:
    traj: TrajectoryLog
    events: list[dict]
    summary: dict


def step(
    models: Mapping[int, DynamicsModel],
    coupling_model: CouplingModel,
    layout: StateLayout,
    x: np.ndarray,
    u: Mapping[int, np.ndarray],
    w: Mapping[int, np.ndarray],
    dt: float,
) -> np.ndarray:
    """One RK4 step of the stacked dynamics with frozen inputs and noise."""

    def rate(xs: np.ndarray) -> np.ndarray:
        out = np.empty_like(xs)
        for i, model in models.items():
            sl = layout.slice_of(i)
            xi = xs[sl]
            out[sl] = (
                model.drift(xi)
                + coupling(coupling_model, xs, layout, i)
                + model.actuation(xi) @ u[i]
                + w[i]
            )
        return out

    k1 = rate(x)
    k2 = rate(x + 0.5 * dt * k1)
    k3 = rate(x + 0.5 * dt * k2)
    k4 = rate(x + dt * k3)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteStateError("integration produced a non-finite state")
    return x_new


def _funnel_snapshot(fp: Optional[FunnelParams]) -> Optional[dict]:
    if fp is None:
        return None
    return {
        "t_star": fp.t_star,
        "rho_max": fp.rho_max,
        "r": fp.r,
        "gamma0": fp.gamma.gamma0,
        "gamma_inf": fp.gamma.gamma_inf,
        "l": fp.gamma.l,
    }


def _state_snapshot(z: HybridState) -> dict:
    return {
        "funnel": _funnel_snapshot(z.funnel),
        "n_repairs": z.repair.n_repairs,
        "collab": z.repair.collab,
        "unit_index": z.unit_index,
    }


class Simulation:
    """Owns the mutable closed-loop state of one run."""

    def __init__(
        self,
        models: Mapping[int, DynamicsModel],
        x0: Mapping[int, np.ndarray],
        plans: Mapping[int, AgentPlan],
        cfg: ControllerConfig,
        sim_cfg: SimConfig,
        coupling_model: CouplingModel = NoCoupling(),
        noise: Optional[NoiseModel] = None,
        u_max: Optional[Mapping[int, Optional[float]]] = None,
    ):
        self.models = dict(sorted(models.items()))
        self.plans = dict(plans)
        self.cfg = cfg
        self.sim_cfg = sim_cfg
        self.coupling_model = coupling_model
        self.noise = noise or NoiseModel(seed=sim_cfg.seed)
        self.u_max = dict(u_max or {})
        self.layout = StateLayout({i: m.state_dim for i, m in self.models.items()})
        self.x = np.zeros(self.layout.total_dim)
        for i, xi in x0.items():
            self.x[self.layout.slice_of(i)] = np.asarray(xi, dtype=float)
        self.hyb: dict[int, HybridState] = {}
        for i in self.models:
            plan = self.plans[i]
            xi = self.x[self.layout.slice_of(i)].copy()
            if plan.task.trivial:
                self.hyb[i] = HybridState(
                    xi, 0.0, None, RepairState(0, -1), unit_index=len(plan.task.units)
                )
            else:
                unit = plan.task.units[0]
                rho0 = smooth_robustness(unit.psi, self.x, self.layout)
                fp = select_initial_params(unit, rho0, plan.rho_opts[0], cfg)
                self.hyb[i] = HybridState(xi, 0.0, fp, RepairState(0, 0))
        self.events: list[dict] = []
        self.last_r = {i: (z.funnel.r if z.funnel else None) for i, z in self.hyb.items()}
        self.sat_times: dict[tuple[int, int], float] = {}
        self._jump_index = 0

    # -- jump pass ------------------------------------------------------------

    def _jump_pass(self, t: float) -> None:
        jumped: set[int] = set()
        sweeps = 0
        while True:
            any_jump = False
            for i in sorted(self.models):
                if i in jumped:
                    continue
                kind = detect(i, self.hyb, self.plans, self.x, self.layout, self.cfg,
                              self.sim_cfg.dt)
                if kind is None:
                    continue
                z = self.hyb[i]
                before = _state_snapshot(z)
                if isinstance(kind, Satisfied):
                    c = z.repair.collab
                    obj = (i, z.unit_index) if c in (0, i) else (c, z.collab_unit)
                    self.sat_times.setdefault(obj, t)
                new = jump(i, kind, self.hyb, self.plans, self.x, self.layout, self.cfg)
                self.hyb[i] = new
                if new.funnel is not None:
                    self.last_r[i] = new.funnel.r
                event = {
                    "t": t,
                    "jump_index": self._jump_index,
                    "agent": i,
                    "kind": kind.name,
                    "before": before,
                    "after": _state_snapshot(new),
                }
                if isinstance(kind, Stage2Join):
                    event["initiator"] = kind.initiator
                self.events.append(event)
                self._jump_index += 1
                jumped.add(i)
                any_jump = True
            sweeps += 1
            if not any_jump:
                break
            if sweeps > self.sim_cfg.max_jumps_per_step:
                raise JumpStormError(
                    f"jump pass at t={t:.6g} did not settle within "
                    f"{self.sim_cfg.max_jumps_per_step} sweeps"
                )

    # -- control --------------------------------------------------------------

    def _objective(self, i: int):
        """(psi, funnel) the agent currently drives, or None when idle."""
        z = self.hyb[i]
        c = z.repair.collab
        if c == -1 or z.funnel is None:
            return None
        if c in (0, i):
            unit = self.plans[i].unit(z.unit_index)
        else:
            unit = self.plans[c].unit(z.collab_unit if z.collab_unit is not None else 0)
        if unit is None or not unit.psi.conjuncts():
            return None
        return unit.psi, z.funnel

    def _controls(self, t: float):
        us: dict[int, np.ndarray] = {}
        diag: dict[int, tuple[float, float, float]] = {}
        for i, model in self.models.items():
            obj = self._objective(i)
            if obj is None:
                us[i] = idle_control(model, self.x[self.layout.slice_of(i)],
                                     self.cfg.idle_policy)
                diag[i] = (math.nan, math.nan, math.nan)
            else:
                psi, fp = obj
                ctx = ControlContext(
                    agent=i, model=model, psi=psi, funnel=fp, t=t, x=self.x,
                    layout=self.layout, cfg=self.cfg, u_max=self.u_max.get(i),
                )
                u, rho, xi, eps = control_and_diag(ctx)
                us[i] = u
                diag[i] = (rho, xi, eps)
        return us, diag

    # -- main loop ------------------------------------------------------------

    def run(self) -> RunResult:
        dt = self.sim_cfg.dt
        n_steps = int(round(self.sim_cfg.t_end / dt))
        times = []
        rows = []
        agent_traces = {i: AgentTrace() for i in self.models}
        for k in range(n_steps + 1):
            t = k * dt
            for i, z in self.hyb.items():
                self.hyb[i] = replace(
                    z, clock=t, x=self.x[self.layout.slice_of(i)].copy()
                )
            self._jump_pass(t)
            us, diag = self._controls(t)
            times.append(t)
            rows.append(self.x.copy())
            for i in self.models:
                z = self.hyb[i]
                tr = agent_traces[i]
                tr.x.append(self.x[self.layout.slice_of(i)].copy())
                tr.u.append(us[i].copy())
                rho, xi, eps = diag[i]
                tr.rho_psi.append(rho)
                if z.funnel is not None:
                    tr.rho_max.append(z.funnel.rho_max)
                    tr.funnel_lo.append(z.funnel.floor(t))
                else:
                    tr.rho_max.append(math.nan)
                    tr.funnel_lo.append(math.nan)
                tr.xi.append(xi)
                tr.eps.append(eps)
                tr.n_repairs.append(z.repair.n_repairs)
                tr.collab.append(z.repair.collab)
                tr.unit_index.append(z.unit_index)
            if k == n_steps:
                break
            w = {
                i: self.noise.sample(k, i, dim=m.state_dim)
                for i, m in self.models.items()
            }
            self.x = step(self.models, self.coupling_model, self.layout, self.x, us, w, dt)
        traj = TrajectoryLog(
            times=np.asarray(times),
            states=np.asarray(rows),
            agents=agent_traces,
            layout=self.layout,
        )
        return RunResult(traj=traj, events=self.events, summary=self._summary(traj))

    # -- summary ---------------------------------------------------------------

    def _summary(self, traj: TrajectoryLog) -> dict:
        agents_summary = {}
        jump_kinds = ("stage1", "stage2_initiate", "stage2_join", "stage3_lower",
                      "stage3_upper", "satisfied")
        for i in self.models:
            plan = self.plans[i]
            counts = {k: 0 for k in jump_kinds}
            for e in self.events:
                if e["agent"] == i:
                    counts[e["kind"]] += 1
            units = []
            for uix, unit in enumerate(plan.task.units):
                if unit.psi.conjuncts():
                    rob = trace_robustness(unit, traj.times, traj.states, self.layout, 0.0)
                else:
                    rob = math.inf
                units.append({
                    "formula": unit.text(),
                    "robustness": rob,
                    "satisfied": bool(rob > 0.0),
                    "satisfied_at": self.sat_times.get((i, uix)),
                })
            task_rob = min((u["robustness"] for u in units), default=math.inf)
            rho_hist = [v for v in traj.agents[i].rho_psi if not math.isnan(v)]
            rho_bound = max((abs(v) for v in rho_hist), default=0.0) + self.cfg.delta
            r0 = None
            for e in self.events:
                if e["agent"] == i and e["before"]["funnel"]:
                    r0 = e["before"]["funnel"]["r"]
                    break
            if r0 is None:
                r0 = self.last_r[i] if self.last_r[i] is not None else self.cfg.r
            bound = jump_bound(plan, self.cfg, r0=max(r0, self.cfg.r), rho_bound=rho_bound)
            agents_summary[str(i)] = {
                "final_r": self.last_r[i],
                "final_collab": self.hyb[i].repair.collab,
                "n_repairs": self.hyb[i].repair.n_repairs,
                "jumps": counts,
                "jump_total": sum(counts.values()),
                "jump_bound": bound,
                "units": units,
                "task_robustness": None if math.isinf(task_rob) else task_rob,
                "task_trivial": plan.task.trivial,
                "task_satisfied": bool(task_rob > 0.0),
                "promise_met": (
                    None
                    if self.last_r[i] is None or math.isinf(task_rob)
                    else bool(task_rob >= self.last_r[i] - 1e-9)
                ),
            }
        nontrivial = [a for a in agents_summary.values() if not a["task_trivial"]]
        return {
            "t_end": self.sim_cfg.t_end,
            "dt": self.sim_cfg.dt,
            "seed": self.sim_cfg.seed,
            "agents": agents_summary,
            "all_satisfied": all(a["task_satisfied"] for a in nontrivial),
            "total_jumps": len(self.events),
        }
