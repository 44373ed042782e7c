import math

import numpy as np
import pytest

from stlppc.controller import ControlContext, collaborative_control, idle_control, ppc_control, saturate
from stlppc.errors import ParamMismatchError
from stlppc.formulas import BallToPointAtom, LinearAtom, PsiAtom, StateLayout
from stlppc.funnel import ControllerConfig, FunnelParams, GammaParams
from stlppc.world import OmniRobot, SingleIntegrator

L1 = StateLayout({1: 2})
CFG = ControllerConfig(r=0.25)


def make_ctx(psi, rho_to_xi_half=True, x=None, funnel=None, u_max=None):
    fp = funnel or FunnelParams(1.0, 1.0, 0.25, GammaParams(2.0, 0.5, 0.0))
    return ControlContext(
        agent=1,
        model=SingleIntegrator(2),
        psi=psi,
        funnel=fp,
        t=0.0,
        x=np.zeros(2) if x is None else x,
        layout=L1,
        cfg=CFG,
        u_max=u_max,
    )


def test_midline_gives_zero_control():
    # rho at the funnel midline: eps = 0 so u = 0
    psi = PsiAtom(LinearAtom(((1, 0, 1.0),), 0.0))  # rho = x1
    fp = FunnelParams(1.0, 1.0, 0.25, GammaParams(2.0, 0.5, 0.0))
    x = np.array([fp.rho_max - 1.0, 0.0])  # rho = rho_max - gamma/2
    u = ppc_control(make_ctx(psi, x=x, funnel=fp))
    assert np.allclose(u, 0.0, atol=1e-12)


def test_affine_direct_substitution():
    # single integrator, affine gradient a, eps = -2  =>  u = 2 a
    a = np.array([0.6, -0.8])
    psi = PsiAtom(LinearAtom(((1, 0, a[0]), (1, 1, a[1])), 0.0))
    fp = FunnelParams(1.0, 1.0, 0.25, GammaParams(2.0, 0.5, 0.0))
    # choose rho so S(xi) = -2: xi = -1/(exp(-2)+1)
    xi = -1.0 / (math.exp(-2.0) + 1.0)
    rho = fp.rho_max + xi * 2.0
    # pick x along a so that a.x = rho
    x = a * (rho / float(a @ a))
    u = ppc_control(make_ctx(psi, x=x, funnel=fp))
    assert np.allclose(u, 2.0 * a, atol=1e-9)


def test_saturation_preserves_direction():
    psi = PsiAtom(BallToPointAtom(1, (10.0, 0.0), 1.0))
    fp = FunnelParams(1.0, 0.5, 0.25, GammaParams(20.0, 5.0, 0.0))
    ctx = make_ctx(psi, x=np.array([0.0, 0.0]), funnel=fp)
    raw = ppc_control(ctx)
    ctx.u_max = float(np.linalg.norm(raw)) / 10.0
    sat = ppc_control(ctx)
    assert np.linalg.norm(sat) == pytest.approx(ctx.u_max)
    c = sat @ raw / (np.linalg.norm(raw) * np.linalg.norm(sat))
    assert c == pytest.approx(1.0)


def test_zero_gradient_gives_zero_control():
    psi = PsiAtom(BallToPointAtom(1, (0.0, 0.0), 1.0))
    fp = FunnelParams(1.0, 0.5, 0.25, GammaParams(2.0, 0.5, 0.0))
    u = ppc_control(make_ctx(psi, x=np.zeros(2), funnel=fp))  # at singular center
    assert np.array_equal(u, np.zeros(2))


def test_collaborative_mirror_symmetry():
    layout = StateLayout({1: 2, 2: 2})
    from stlppc.formulas import BallPairAtom

    psi = PsiAtom(BallPairAtom(1, 2, 1.0))
    fp = FunnelParams(1.0, 0.5, 0.25, GammaParams(10.0, 2.0, 0.0))
    x = np.array([-2.0, 0.0, 2.0, 0.0])
    us = {}
    for agent in (1, 2):
        ctx = ControlContext(
            agent=agent, model=SingleIntegrator(2), psi=psi, funnel=fp,
            t=0.0, x=x, layout=layout, cfg=CFG,
        )
        us[agent] = collaborative_control(ctx, fp)
    assert np.allclose(us[1], -us[2])


def test_collaborative_param_mismatch_guard():
    psi = PsiAtom(BallToPointAtom(1, (1.0, 1.0), 1.0))
    fp = FunnelParams(1.0, 0.5, 0.25, GammaParams(10.0, 2.0, 0.0))
    other = FunnelParams(1.0, 0.6, 0.25, GammaParams(10.0, 2.0, 0.0))
    with pytest.raises(ParamMismatchError):
        collaborative_control(make_ctx(psi, funnel=fp), other)


def test_collaborative_zero_block():
    # agent 2 participates but the objective reads only agent 1's state
    layout = StateLayout({1: 2, 2: 2})
    psi = PsiAtom(BallToPointAtom(1, (5.0, 5.0), 1.0))
    fp = FunnelParams(1.0, 0.5, 0.25, GammaParams(20.0, 2.0, 0.0))
    ctx = ControlContext(
        agent=2, model=SingleIntegrator(2), psi=psi, funnel=fp,
        t=0.0, x=np.zeros(4), layout=layout, cfg=CFG,
    )
    assert np.allclose(collaborative_control(ctx, fp), 0.0)


def test_idle_policies():
    assert np.array_equal(idle_control(SingleIntegrator(2), np.array([1.0, 2.0])), np.zeros(2))
    u = idle_control(SingleIntegrator(2), np.array([1.0, 2.0]), policy="stabilize")
    assert np.allclose(u, [-1.0, -2.0])
    bot = OmniRobot()
    x = np.array([1.0, -1.0, 0.4])
    u = idle_control(bot, x, policy="stabilize")
    assert np.allclose(u, -(bot.actuation(x).T @ x))


def test_saturate_helper():
    u = np.array([3.0, 4.0])
    assert np.array_equal(saturate(u, None), u)
    assert np.linalg.norm(saturate(u, 1.0)) == pytest.approx(1.0)
    assert np.array_equal(saturate(u, 10.0), u)
