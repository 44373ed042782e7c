"""Robustness evaluation and maximization for the supported fragment.

Conjunctions are smoothed with a shifted log-sum-exp under-approximation of
the min; single-conjunct formulas pass the predicate value through exactly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NonFiniteError, WindowNotCoveredError
from .formulas import PhiFormula, PsiFormula, StateLayout, TaskFormula

log = logging.getLogger(__name__)

_TIME_EPS = 1e-9


def softmin(values: Sequence[float]) -> float:
    """Shift-stable -ln(sum(exp(-v))); exact passthrough for one value."""
    if len(values) == 0:
        return math.inf
    if len(values) == 1:
        return float(values[0])
    m = min(values)
    acc = 0.0
    for v in values:
        acc += math.exp(m - v)
    return m - math.log(acc)


def softmin_weights(values: Sequence[float]) -> np.ndarray:
    """Convex weights exp(-v_k)/sum exp(-v_j) of the smooth min."""
    arr = np.asarray(values, dtype=float)
    w = np.exp(arr.min() - arr)
    w /= w.sum()
    return w


def smooth_robustness(psi: PsiFormula, x: np.ndarray, layout: StateLayout) -> float:
    """Smoothed robustness of a non-temporal formula at stacked state x."""
    rows = psi.conjuncts()
    return softmin([row.value(x, layout) for row in rows])


def crisp_robustness(psi: PsiFormula, x: np.ndarray, layout: StateLayout) -> float:
    """Exact (unsmoothed) robustness: min over conjuncts."""
    rows = psi.conjuncts()
    if not rows:
        return math.inf
    return min(row.value(x, layout) for row in rows)


def smooth_robustness_grad(psi: PsiFormula, x: np.ndarray, layout: StateLayout) -> np.ndarray:
    """Gradient of the smoothed robustness over the full stacked state.

    Distance conjuncts sitting exactly on their singular center contribute a
    zero supergradient; such samples are flagged on the debug log.
    """
    rows = psi.conjuncts()
    out = np.zeros(layout.total_dim)
    if not rows:
        return out
    values = [row.value(x, layout) for row in rows]
    if len(rows) == 1:
        rows[0].add_grad(x, layout, 1.0, out)
        return out
    w = softmin_weights(values)
    assert np.all(w >= 0.0) and abs(float(w.sum()) - 1.0) < 1e-9, "softmin weights not convex"
    for row, wk in zip(rows, w):
        row.add_grad(x, layout, float(wk), out)
    if not np.any(out) and any(v != math.inf for v in values):
        log.debug("zero robustness gradient at a singular point")
    return out


# ---------------------------------------------------------------------------
# Trace evaluation.
# ---------------------------------------------------------------------------


def _window_indices(times: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if times[0] > lo + _TIME_EPS or times[-1] < hi - _TIME_EPS:
        raise WindowNotCoveredError(
            f"trace [{times[0]:.6g},{times[-1]:.6g}] does not cover [{lo:.6g},{hi:.6g}]"
        )
    idx = np.nonzero((times >= lo - _TIME_EPS) & (times <= hi + _TIME_EPS))[0]
    if idx.size == 0:
        raise WindowNotCoveredError(f"no samples inside [{lo:.6g},{hi:.6g}]")
    return idx


def trace_robustness(
    formula: PhiFormula | TaskFormula,
    times: np.ndarray,
    states: np.ndarray,
    layout: StateLayout,
    t0: float = 0.0,
    smooth: bool = True,
) -> float:
    """Temporal robustness of a sampled trace at time t0.

    Eventually takes the max, always the min, of the per-sample formula
    robustness over samples falling in the closed window [t0+a, t0+b]; unit
    sequences take the min over their units.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if isinstance(formula, TaskFormula):
        if not formula.units:
            return math.inf
        return min(
            trace_robustness(u, times, states, layout, t0, smooth) for u in formula.units
        )
    idx = _window_indices(times, t0 + formula.a, t0 + formula.b)
    ev = smooth_robustness if smooth else crisp_robustness
    vals = [ev(formula.psi, states[k], layout) for k in idx]
    return max(vals) if formula.op == "F" else min(vals)


# ---------------------------------------------------------------------------
# Peak robustness (gradient ascent with backtracking line search).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoOpt:
    value: float
    argmax: np.ndarray


def _seed_point(psi: PsiFormula, layout: StateLayout) -> np.ndarray:
    """Centroid of the conjuncts' reference coordinates, zeros elsewhere."""
    sums = np.zeros(layout.total_dim)
    counts = np.zeros(layout.total_dim)
    for row in psi.conjuncts():
        for idx, coord in row.reference(layout).items():
            sums[idx] += coord
            counts[idx] += 1
    seed = np.zeros(layout.total_dim)
    mask = counts > 0
    seed[mask] = sums[mask] / counts[mask]
    return seed


def _coincident_block_direction(
    psi: PsiFormula, x: np.ndarray, layout: StateLayout, g: np.ndarray
) -> Optional[np.ndarray]:
    """Ascent direction that moves coincident agent groups rigidly.

    At a kink where pair-distance conjuncts are singular (agents coincide),
    the zero supergradient hides the direction that translates the whole
    coincident group; moving the group together leaves the singular rows
    unchanged to first order while the remaining pulls still act on it.
    """
    from .formulas import BallPairConjunct

    groups: dict[int, set[int]] = {}

    def join(a: int, b: int) -> None:
        ga = groups.setdefault(a, {a})
        gb = groups.setdefault(b, {b})
        if ga is not gb:
            ga |= gb
            for m in gb:
                groups[m] = ga

    for row in psi.conjuncts():
        if isinstance(row, BallPairConjunct):
            d, _ = row._delta(x, layout)
            if float(np.linalg.norm(d)) < 1e-7:
                join(row.agent_i, row.agent_j)
    blocks = {id(s): s for s in groups.values() if len(s) > 1}
    if not blocks:
        return None
    d = g.copy()
    for block in blocks.values():
        dims = {layout.dim(a) for a in block}
        n = min(dims)
        total = np.zeros(n)
        for a in block:
            total += g[layout.offset(a):layout.offset(a) + n]
        for a in block:
            d[layout.offset(a):layout.offset(a) + n] = total
    return d


def rho_opt(
    psi: PsiFormula,
    layout: StateLayout,
    grad_tol: float = 1e-8,
    max_iter: int = 10_000,
) -> RhoOpt:
    """Supremum of the smoothed robustness over the stacked state.

    Concavity makes ascent with Armijo backtracking sufficient almost
    everywhere; where coincident distance atoms create a kink, a rigid
    block move supplies the ascent direction the supergradient hides.  The
    iterate starts at the centroid of the atoms' reference points.  Raises
    NonFiniteError when the iterates diverge, which signals an unbounded
    (ill-posed) formula.
    """
    if not psi.conjuncts():
        return RhoOpt(math.inf, _seed_point(psi, layout))
    x = _seed_point(psi, layout)
    f = smooth_robustness(psi, x, layout)
    step = 1.0

    def line_search(direction: np.ndarray, slope: float, t0: float):
        t = t0
        while t > 1e-14:
            x_new = x + t * direction
            f_new = smooth_robustness(psi, x_new, layout)
            # strict: a step too small to change x in floating point must fail,
            # so the kink fallback gets its turn
            if f_new > f + 1e-4 * t * slope:
                return x_new, f_new, t
            t *= 0.5
        return None

    for _ in range(max_iter):
        g = smooth_robustness_grad(psi, x, layout)
        gnorm = float(np.linalg.norm(g))
        if gnorm < grad_tol:
            break
        if not math.isfinite(f) or float(np.abs(x).max(initial=0.0)) > 1e9:
            raise NonFiniteError("robustness peak search diverged (unbounded formula?)")
        t0 = max(step * 2.0, 1e-12)
        hit = line_search(g, gnorm * gnorm, t0)
        if hit is None:
            d = _coincident_block_direction(psi, x, layout, g)
            if d is not None and not np.array_equal(d, g):
                slope = float(g @ d)
                if slope > 0.0:
                    hit = line_search(d, slope, t0)
        if hit is None:
            break
        x, f, step = hit
    if not math.isfinite(f) or float(np.abs(x).max(initial=0.0)) > 1e9:
        raise NonFiniteError("robustness peak search diverged (unbounded formula?)")
    return RhoOpt(f, x)
