"""Continuous feedback laws: the funnel gain law, its collaborative variant,
and the idle policies used by agents without an active objective.

The law is u = -eps * g(x)^T * d(rho)/d(x_i), with eps the transformed
normalized error.  eps is clamped before the input-norm saturation so the
sign logic of the transform survives saturation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import ParamMismatchError
from .formulas import PsiFormula, StateLayout
from .funnel import ControllerConfig, FunnelParams, clamped_gain
from .robustness import smooth_robustness, smooth_robustness_grad
from .world import DynamicsModel, actuation


@dataclass
class ControlContext:
    """Inputs for one control evaluation of one agent."""

    agent: int
    model: DynamicsModel
    psi: PsiFormula
    funnel: FunnelParams
    t: float
    x: np.ndarray
    layout: StateLayout
    cfg: ControllerConfig
    u_max: Optional[float] = None


def saturate(u: np.ndarray, u_max: Optional[float]) -> np.ndarray:
    """Norm-rescale u onto the input ball, preserving direction."""
    if u_max is None:
        return u
    norm = float(np.linalg.norm(u))
    if norm > u_max:
        return u * (u_max / norm)
    return u


def control_and_diag(ctx: ControlContext) -> tuple[np.ndarray, float, float, float]:
    """(u, rho, xi, eps) of one funnel-feedback evaluation.

    xi is the true normalized error (it drives event detection); eps is the
    clamped gain actually fed into the law.
    """
    rho = smooth_robustness(ctx.psi, ctx.x, ctx.layout)
    xi, eps = clamped_gain(rho, ctx.funnel, ctx.t, ctx.cfg.eps_max)
    grad = smooth_robustness_grad(ctx.psi, ctx.x, ctx.layout)
    own = grad[ctx.layout.slice_of(ctx.agent)]
    x_own = ctx.x[ctx.layout.slice_of(ctx.agent)]
    g = actuation(ctx.model, x_own)
    u = -eps * (g.T @ own)
    if __debug__ and eps < 0.0:
        # below the midline the law's own contribution cannot lower robustness
        assert -eps * float(own @ (g @ g.T @ own)) >= -1e-12
    return saturate(u, ctx.u_max), rho, xi, eps


def ppc_control(ctx: ControlContext) -> np.ndarray:
    """Funnel feedback for the agent's own block of the robustness gradient."""
    return control_and_diag(ctx)[0]


def collaborative_control(ctx: ControlContext, own_funnel: FunnelParams) -> np.ndarray:
    """Same law under the initiator's objective and shared funnel.

    The caller passes the agent's local copy of the funnel; it must equal the
    shared one in ctx (copied at the join jump), otherwise the collaboration
    precondition is broken.
    """
    if own_funnel != ctx.funnel:
        raise ParamMismatchError(
            f"agent {ctx.agent} holds funnel {own_funnel}, initiator has {ctx.funnel}"
        )
    return ppc_control(ctx)


def idle_control(
    model: DynamicsModel,
    x: np.ndarray,
    policy: Literal["zero", "stabilize"] = "zero",
) -> np.ndarray:
    """Input for a free agent: nothing, or the norm-contracting -g^T x."""
    if policy == "zero":
        return np.zeros(model.input_dim)
    return -(actuation(model, np.asarray(x, dtype=float)).T @ np.asarray(x, dtype=float))
