"""Per-agent hybrid logic: critical-event detection and the repair jumps.

Each agent carries a clock (never reset), its funnel, and a repair record
(n_repairs, collab).  collab is -1 when free, 0 when pursuing its own task,
and k > 0 while collaborating on agent k's task.  Detection resolves, in
priority order: joining a requested collaboration, funnel-boundary exits
(repair stages 1 to 3), and task satisfaction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from .errors import DegenerateWindowError
from .formulas import PhiFormula, StateLayout, TaskFormula
from .funnel import (
    ControllerConfig,
    FunnelParams,
    GammaParams,
    _pick_gamma_inf,
    funnel_side,
    normalized_error,
    post_sat_params,
    recompute_gamma,
)
from .robustness import smooth_robustness
from .topology import stage2_timing_ok

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class RepairState:
    n_repairs: int = 0
    collab: int = 0


@dataclass(frozen=True)
class HybridState:
    """Hybrid state of one agent.

    collab_unit pins the initiator's unit index at join time so helpers keep
    evaluating the objective they actually signed up for.
    """

    x: np.ndarray
    clock: float
    funnel: Optional[FunnelParams]
    repair: RepairState
    unit_index: int = 0
    collab_unit: Optional[int] = None


# -- jump kinds ---------------------------------------------------------------


@dataclass(frozen=True)
class Stage1:
    name = "stage1"


@dataclass(frozen=True)
class Stage2Initiate:
    name = "stage2_initiate"


@dataclass(frozen=True)
class Stage2Join:
    initiator: int
    name = "stage2_join"


@dataclass(frozen=True)
class Stage3:
    side: str  # "lower" | "upper"

    @property
    def name(self) -> str:
        return f"stage3_{self.side}"


@dataclass(frozen=True)
class Satisfied:
    name = "satisfied"


JumpKind = Stage1 | Stage2Initiate | Stage2Join | Stage3 | Satisfied


@dataclass(frozen=True)
class AgentPlan:
    """Static per-agent task data resolved at scenario load."""

    agent: int
    task: TaskFormula
    participants: tuple[int, ...]
    rho_opts: tuple[float, ...]  # peak smooth robustness per unit

    def unit(self, index: int) -> Optional[PhiFormula]:
        if 0 <= index < len(self.task.units):
            return self.task.units[index]
        return None


def active_unit(plan: AgentPlan, z: HybridState) -> Optional[PhiFormula]:
    """The unit the agent itself is pursuing (None when free/exhausted)."""
    if z.repair.collab != 0 and z.repair.collab != plan.agent:
        return None
    return plan.unit(z.unit_index)


def advance_theta(plan: AgentPlan, z: HybridState) -> Optional[PhiFormula]:
    """Unit that follows the one just satisfied, if any."""
    return plan.unit(z.unit_index + 1)


# -- detection ----------------------------------------------------------------


def detect(
    agent: int,
    hyb: Mapping[int, HybridState],
    plans: Mapping[int, AgentPlan],
    x: np.ndarray,
    layout: StateLayout,
    cfg: ControllerConfig,
    dt: float,
) -> Optional[JumpKind]:
    """Jump kind applicable to ``agent`` in the current configuration, if any.

    Priority makes the jump sets effectively non-intersecting: a pending
    collaboration request wins over everything, then funnel exits on the own
    task, then satisfaction of the pursued objective.
    """
    z = hyb[agent]
    t = z.clock
    c = z.repair.collab

    # (1) asked to join a collaboration
    if c in (-1, 0):
        for k in sorted(plans):
            if k == agent:
                continue
            zk = hyb.get(k)
            if zk is not None and zk.repair.collab == k and agent in plans[k].participants:
                return Stage2Join(k)

    # (2) funnel exit while pursuing the own task
    if c == 0:
        unit = active_unit(plans[agent], z)
        if unit is not None and z.funnel is not None and unit.psi.conjuncts():
            rho = smooth_robustness(unit.psi, x, layout)
            _, xi = normalized_error(rho, z.funnel, t)
            side = funnel_side(xi, cfg.eta_detect)
            if side is not None:
                if z.repair.n_repairs < cfg.n_stage1:
                    return Stage1()
                flags = {j: hyb[j].repair.collab for j in hyb if j != agent}
                units = {j: active_unit(plans[j], hyb[j]) for j in hyb if j != agent}
                if stage2_timing_ok(agent, unit, plans[agent].participants, flags, units):
                    return Stage2Initiate()
                return Stage3(side)

    # (3) satisfaction of the pursued objective
    if c >= 0:
        nu = c if c > 0 else agent
        if nu == agent:
            unit = plans[agent].unit(z.unit_index)
        else:
            unit = plans[nu].unit(z.collab_unit if z.collab_unit is not None else 0)
        if unit is None or z.funnel is None:
            return None
        if unit.op == "F":
            in_window = unit.a - _TIME_EPS <= t <= unit.b + _TIME_EPS
        else:
            in_window = abs(t - unit.b) <= dt + _TIME_EPS
        if not in_window:
            return None
        rho = smooth_robustness(unit.psi, x, layout)
        if z.funnel.r <= rho <= z.funnel.rho_max:
            return Satisfied()
    return None


# -- jump maps ----------------------------------------------------------------


def _zeta_u(cfg: ControllerConfig, rho_opt_val: float, rho_max: float) -> float:
    """Ceiling relaxation, capped so the new ceiling stays below the peak."""
    gap = rho_opt_val - rho_max
    if not math.isfinite(gap) or gap <= 0.0:
        return 0.0
    base = cfg.zeta_u if cfg.zeta_u is not None else 0.5 * gap
    return min(base, 0.5 * gap)


def _zeta_l(cfg: ControllerConfig, current: FunnelParams) -> float:
    return cfg.zeta_l if cfg.zeta_l is not None else 0.1 * current.gamma.gamma0


def _rebuild(
    gamma_r: float,
    rho_max_hat: float,
    r_hat: float,
    t_now: float,
    t_star_hat: float,
    cfg: ControllerConfig,
) -> tuple[float, GammaParams]:
    """Gamma after a repair; lowers the floor target when the window is spent."""
    t_star_eff = max(t_star_hat, t_now)
    try:
        return r_hat, recompute_gamma(gamma_r, rho_max_hat, r_hat, t_now, t_star_eff, cfg)
    except DegenerateWindowError:
        r_eff = min(r_hat, rho_max_hat - gamma_r)
        gamma_inf = _pick_gamma_inf(cfg, gamma_r, rho_max_hat - r_eff)
        return r_eff, GammaParams(max(gamma_r, gamma_inf), gamma_inf, 0.0)


def _relaxed_funnel(
    z: HybridState,
    unit: PhiFormula,
    rho: float,
    rho_opt_val: float,
    cfg: ControllerConfig,
    relax_t_star: bool,
) -> FunnelParams:
    fp = z.funnel
    assert fp is not None
    t = z.clock
    t_star_hat = (unit.b if unit.op == "F" else fp.t_star) if relax_t_star else fp.t_star
    rho_max_hat = fp.rho_max + _zeta_u(cfg, rho_opt_val, fp.rho_max)
    r_hat = 0.5 * fp.r if fp.r > 0.0 else fp.r
    gamma_r = rho_max_hat - rho + _zeta_l(cfg, fp)
    r_eff, gamma = _rebuild(gamma_r, rho_max_hat, r_hat, t, t_star_hat, cfg)
    return FunnelParams(max(t_star_hat, t), rho_max_hat, r_eff, gamma)


def _stage3_funnel(
    z: HybridState,
    rho: float,
    rho_opt_val: float,
    side: str,
    cfg: ControllerConfig,
) -> FunnelParams:
    fp = z.funnel
    assert fp is not None
    rho_max_hat = rho_opt_val + cfg.sigma
    r_hat = fp.r - cfg.delta if side == "lower" else fp.r
    gamma_r = rho_max_hat - rho + cfg.delta
    r_eff, gamma = _rebuild(gamma_r, rho_max_hat, r_hat, z.clock, fp.t_star, cfg)
    return FunnelParams(max(fp.t_star, z.clock), rho_max_hat, r_eff, gamma)


def jump(
    agent: int,
    kind: JumpKind,
    hyb: Mapping[int, HybridState],
    plans: Mapping[int, AgentPlan],
    x: np.ndarray,
    layout: StateLayout,
    cfg: ControllerConfig,
) -> HybridState:
    """Apply one jump; the state and clock pass through unchanged."""
    z = hyb[agent]
    plan = plans[agent]
    t = z.clock

    if isinstance(kind, (Stage1, Stage2Initiate, Stage3)):
        unit = active_unit(plan, z)
        assert unit is not None and z.funnel is not None
        rho = smooth_robustness(unit.psi, x, layout)
        rho_opt_val = plan.rho_opts[z.unit_index]
        if isinstance(kind, Stage1):
            fp = _relaxed_funnel(z, unit, rho, rho_opt_val, cfg, relax_t_star=True)
            new = replace(
                z, funnel=fp, repair=replace(z.repair, n_repairs=z.repair.n_repairs + 1)
            )
        elif isinstance(kind, Stage2Initiate):
            fp = _relaxed_funnel(z, unit, rho, rho_opt_val, cfg, relax_t_star=False)
            new = replace(z, funnel=fp, repair=replace(z.repair, collab=agent))
        else:
            fp = _stage3_funnel(z, rho, rho_opt_val, kind.side, cfg)
            new = replace(z, funnel=fp)
        if __debug__:
            _, xi_new = normalized_error(rho, fp, t)
            assert -1.0 + cfg.eta_detect < xi_new < -cfg.eta_detect, (
                f"repair jump left xi={xi_new:.6g} outside the funnel interior"
            )
        return new

    if isinstance(kind, Stage2Join):
        zk = hyb[kind.initiator]
        assert zk.funnel is not None and zk.repair.collab == kind.initiator
        return replace(
            z,
            funnel=zk.funnel,
            repair=replace(z.repair, collab=kind.initiator),
            collab_unit=zk.unit_index,
        )

    assert isinstance(kind, Satisfied)
    c = z.repair.collab
    if c in (0, agent):
        next_index = z.unit_index + 1
        nxt = advance_theta(plan, z)
        if nxt is None or not nxt.psi.conjuncts():
            return replace(
                z,
                funnel=None,
                repair=replace(z.repair, collab=-1),
                unit_index=next_index,
                collab_unit=None,
            )
        rho_next = smooth_robustness(nxt.psi, x, layout)
        fp = post_sat_params(nxt, rho_next, plan.rho_opts[next_index], t, cfg)
        return replace(
            z,
            funnel=fp,
            repair=replace(z.repair, collab=0),
            unit_index=next_index,
            collab_unit=None,
        )
    # collaborated on someone else's task: resume the own pending unit
    own = plan.unit(z.unit_index)
    if own is None or not own.psi.conjuncts():
        return replace(
            z, funnel=None, repair=replace(z.repair, collab=-1), collab_unit=None
        )
    rho_own = smooth_robustness(own.psi, x, layout)
    fp = post_sat_params(own, rho_own, plan.rho_opts[z.unit_index], t, cfg)
    return replace(
        z, funnel=fp, repair=replace(z.repair, collab=0), collab_unit=None
    )


def jump_bound(plan: AgentPlan, cfg: ControllerConfig, r0: float, rho_bound: float) -> int:
    """Worst-case jump count for one agent over one run.

    Stage-1 repairs are budgeted by cfg, stage 2 adds one initiation, the
    floor staircase is bounded once the running robustness is bounded below
    by -rho_bound, the ceiling lift can fire once, and each unit satisfies
    at most once.
    """
    stair = max(0, math.ceil((r0 + rho_bound) / cfg.delta))
    return cfg.n_stage1 + 1 + stair + 1 + max(1, len(plan.task.units))
