"""Performance funnels: the decaying bound, the error transform, and every
parameter-selection rule used at start-up, after repairs, and after task
satisfaction.

A funnel prescribes -gamma(t) + rho_max < rho(t) < rho_max.  The normalized
error xi = (rho - rho_max)/gamma(t) lives in (-1, 0) while the bound holds,
and the transform S(xi) = ln(-(xi+1)/xi) turns it into an unbounded gain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

from .errors import (
    BadInitialError,
    DegenerateWindowError,
    FunnelExit,
    InfeasibleTaskError,
)
from .formulas import PhiFormula


@dataclass(frozen=True)
class GammaParams:
    """Exponential performance function (g0 - ginf) * exp(-l t) + ginf."""

    gamma0: float
    gamma_inf: float
    l: float

    def __post_init__(self):
        if not (self.gamma0 >= self.gamma_inf > 0.0):
            raise ValueError(
                f"need gamma0 >= gamma_inf > 0, got {self.gamma0}, {self.gamma_inf}"
            )
        if self.l < 0.0:
            raise ValueError(f"decay rate must be non-negative, got {self.l}")

    def value(self, t: float) -> float:
        return (self.gamma0 - self.gamma_inf) * math.exp(-self.l * t) + self.gamma_inf


def gamma_eval(gp: GammaParams, t: float) -> float:
    """Funnel width at time t >= 0."""
    return gp.value(t)


@dataclass(frozen=True)
class FunnelParams:
    """Everything defining one funnel: target time, ceiling, floor target, width."""

    t_star: float
    rho_max: float
    r: float
    gamma: GammaParams

    def __post_init__(self):
        if not self.r < self.rho_max:
            raise ValueError(f"need r < rho_max, got r={self.r}, rho_max={self.rho_max}")

    def floor(self, t: float) -> float:
        return self.rho_max - self.gamma.value(t)


def transform(xi: float) -> float:
    """S(xi) = ln(-(xi+1)/xi) for xi in (-1, 0)."""
    return math.log(-(xi + 1.0) / xi)


def transform_inv(eps: float) -> float:
    """Algebraic inverse of S: xi = -1/(exp(eps) + 1)."""
    return -1.0 / (math.exp(eps) + 1.0)


def normalized_error(rho_psi: float, fp: FunnelParams, t: float) -> tuple[float, float]:
    """(e, xi) without any interiority check."""
    e = rho_psi - fp.rho_max
    return e, e / fp.gamma.value(t)


def transform_error(
    rho_psi: float, fp: FunnelParams, t: float, eta_detect: float = 0.0
) -> tuple[float, float, float]:
    """(e, xi, eps) of the funnel at time t.

    Raises FunnelExit('lower'|'upper') when xi leaves
    (-1 + eta_detect, -eta_detect); the margin is what makes boundary
    detection reachable on a sampled trajectory.
    """
    e, xi = normalized_error(rho_psi, fp, t)
    if xi >= -eta_detect:
        raise FunnelExit("upper", xi)
    if xi <= -1.0 + eta_detect:
        raise FunnelExit("lower", xi)
    return e, xi, transform(xi)


_XI_CLIP = 1e-12


def clamped_gain(rho_psi: float, fp: FunnelParams, t: float, eps_max: float) -> tuple[float, float]:
    """(xi, eps) with eps usable in the flow even at or past the boundary.

    xi is the true normalized error; eps comes from S on xi clipped into the
    open interval and is then saturated to |eps| <= eps_max.
    """
    _, xi = normalized_error(rho_psi, fp, t)
    xi_c = min(max(xi, -1.0 + _XI_CLIP), -_XI_CLIP)
    eps = transform(xi_c)
    eps = min(max(eps, -eps_max), eps_max)
    return xi, eps


@dataclass(frozen=True)
class ControllerConfig:
    """Scenario-wide knobs for funnel construction and repair.

    Interval-valued rules pick a point via the *_frac fields; zeta_u/zeta_l
    default to the adaptive choices documented in the selection helpers.
    """

    r: float = 0.5
    rho_max_frac: float = 0.9
    tstar_frac: float = 1.0
    gamma0_scale: float = 1.1
    gamma_inf_frac: float = 0.5
    zeta_u: Optional[float] = None
    zeta_l: Optional[float] = None
    delta: float = 1.5
    sigma: float = 0.1
    n_stage1: int = 1
    eta_detect: float = 1e-3
    eps_max: float = 1e3
    idle_policy: Literal["zero", "stabilize"] = "zero"
    relaxed: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.n_stage1 < 0:
            raise ValueError("stage-1 budget must be >= 0")
        if not 0 < self.rho_max_frac < 1:
            raise ValueError("rho_max_frac must be in (0,1)")
        if not 0 <= self.tstar_frac <= 1:
            raise ValueError("tstar_frac must be in [0,1]")
        if self.gamma0_scale <= 1:
            raise ValueError("gamma0_scale must exceed 1")
        if not 0 < self.gamma_inf_frac <= 1:
            raise ValueError("gamma_inf_frac must be in (0,1]")


def solve_gamma(
    gamma_r: float,
    rho_max: float,
    r: float,
    gamma_inf: float,
    t_now: float,
    t_star: float,
) -> GammaParams:
    """Closed-form gamma passing through gamma_r at t_now with floor r at t_star.

    The decay rate is zero when the width gamma_r already keeps the floor
    above r; otherwise it is solved so the floor reaches r exactly at t_star.
    gamma0 is back-propagated so gamma(t_now) = gamma_r despite the clock not
    being reset.
    """
    if gamma_r <= 0:
        raise ValueError(f"gamma_r must be positive, got {gamma_r}")
    if gamma_inf <= 0:
        raise ValueError("gamma_inf must be positive")
    if -gamma_r + rho_max >= r:
        return GammaParams(max(gamma_r, gamma_inf), gamma_inf, 0.0)
    if t_star <= t_now:
        raise DegenerateWindowError(
            f"floor must reach {r} by t*={t_star} but the clock is already {t_now}"
        )
    num = r + gamma_inf - rho_max
    den = -(gamma_r - gamma_inf)
    if num / den <= 0 or num / den >= 1:
        raise ValueError(
            f"no admissible decay rate for gamma_r={gamma_r}, rho_max={rho_max}, "
            f"r={r}, gamma_inf={gamma_inf}"
        )
    l = -math.log(num / den) / (t_star - t_now)
    gamma0 = (gamma_r - gamma_inf) * math.exp(l * t_now) + gamma_inf
    return GammaParams(gamma0, gamma_inf, l)


def _pick_gamma_inf(cfg: ControllerConfig, gamma_r: float, width: float) -> float:
    """Point choice inside (0, min(gamma_r, width)]."""
    return cfg.gamma_inf_frac * min(gamma_r, width)


def select_initial_params(
    phi: PhiFormula,
    rho0: float,
    rho_opt_val: float,
    cfg: ControllerConfig,
) -> FunnelParams:
    """Initial funnel for one unit given the robustness at the start state.

    Unless cfg.relaxed, the unit must be feasible (peak robustness positive)
    and the target robustness ends up in (0, rho_max).  In relaxed mode the
    ceiling interval opens to (rho0, peak) and r may be negative.
    """
    if not cfg.relaxed and rho_opt_val <= 0.0:
        raise InfeasibleTaskError(
            f"peak smooth robustness {rho_opt_val:.6g} is not positive"
        )
    t_star = phi.a if phi.op == "G" else phi.a + cfg.tstar_frac * (phi.b - phi.a)
    lo = rho0 if cfg.relaxed else max(0.0, rho0)
    if rho_opt_val <= lo:
        raise BadInitialError(
            f"no admissible ceiling: start robustness {rho0:.6g} already at the peak"
        )
    rho_max = lo + cfg.rho_max_frac * (rho_opt_val - lo)
    if cfg.relaxed:
        r = min(cfg.r, rho_max - 1e-9)
    else:
        r = cfg.r if 0.0 < cfg.r < rho_max else 0.5 * rho_max
    gap0 = rho_max - rho0
    gamma0 = cfg.gamma0_scale * gap0
    if t_star <= 0.0:
        # The width must already keep the floor above r at t = 0.
        if rho0 <= r:
            raise BadInitialError(
                f"t*=0 requires start robustness above r={r:.6g}, got {rho0:.6g}"
            )
        gamma0 = min(gamma0, rho_max - r)
    gamma_inf = _pick_gamma_inf(cfg, gamma0, rho_max - r)
    gamma = solve_gamma(gamma0, rho_max, r, gamma_inf, 0.0, t_star)
    return FunnelParams(t_star, rho_max, r, gamma)


def recompute_gamma(
    gamma_r: float,
    rho_max_hat: float,
    r_hat: float,
    t_now: float,
    t_star_hat: float,
    cfg: ControllerConfig,
) -> GammaParams:
    """Rebuild gamma after a repair so the new funnel has width gamma_r now.

    gamma_inf is re-picked from the relaxed geometry; the width at t_now is
    preserved exactly (to rounding) by construction.
    """
    if gamma_r <= 0:
        raise ValueError(f"repair width must be positive, got {gamma_r}")
    if t_star_hat < t_now:
        raise ValueError(f"t*={t_star_hat} precedes the clock {t_now}")
    gamma_inf = _pick_gamma_inf(cfg, gamma_r, rho_max_hat - r_hat)
    return solve_gamma(gamma_r, rho_max_hat, r_hat, gamma_inf, t_now, t_star_hat)


def post_sat_params(
    phi: PhiFormula,
    rho_now: float,
    rho_opt_val: float,
    t_now: float,
    cfg: ControllerConfig,
) -> FunnelParams:
    """Fresh funnel for the unit pursued after a satisfaction event.

    Same selection rules as at start-up but evaluated at the current state
    and clock; the target time follows the unit type (deadline for
    eventually, window start for always) and never precedes the clock.
    """
    if not cfg.relaxed and rho_opt_val <= 0.0:
        raise InfeasibleTaskError(
            f"peak smooth robustness {rho_opt_val:.6g} is not positive"
        )
    t_star = max(phi.b if phi.op == "F" else phi.a, t_now)
    lo = rho_now if cfg.relaxed else max(0.0, rho_now)
    if rho_opt_val <= lo:
        raise BadInitialError("no admissible ceiling above the current robustness")
    rho_max = lo + cfg.rho_max_frac * (rho_opt_val - lo)
    if cfg.relaxed:
        r = min(cfg.r, rho_max - 1e-9)
    else:
        r = cfg.r if 0.0 < cfg.r < rho_max else 0.5 * rho_max
    gamma_r = cfg.gamma0_scale * (rho_max - rho_now)
    gamma_inf = _pick_gamma_inf(cfg, gamma_r, rho_max - r)
    try:
        gamma = solve_gamma(gamma_r, rho_max, r, gamma_inf, t_now, t_star)
    except DegenerateWindowError:
        # Window already spent: keep a constant width and lower the floor
        # target so the funnel stays well-formed.
        r = rho_max - gamma_r
        gamma = GammaParams(max(gamma_r, gamma_inf), gamma_inf, 0.0)
        return FunnelParams(t_star, rho_max, r, gamma)
    return FunnelParams(t_star, rho_max, r, gamma)


def funnel_side(xi: float, eta_detect: float) -> Optional[str]:
    """Which boundary xi has crossed, if any, under the detection margin."""
    if xi >= -eta_detect:
        return "upper"
    if xi <= -1.0 + eta_detect:
        return "lower"
    return None
