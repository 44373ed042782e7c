"""AST for the supported STL fragment and the state layout it is read against.

The fragment is negation-limited: negation may only sit directly on an
affine atom, every temporal operator wraps a conjunction of atoms, and a
task is either one timed formula, an ordered sequence of them, or a
flattened eventually-nest.  All predicate functions are concave in the
stacked state by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import SelectorOutOfRangeError, TimeBoundOrderError

DEG_PER_RAD = 180.0 / math.pi


class StateLayout:
    """Maps agent ids to slices of a stacked state vector.

    Agents are laid out in ascending id order; this fixes the stacked-state
    ordering used by robustness gradients and the simulator.
    """

    def __init__(self, dims: Mapping[int, int]):
        self._dims = {int(a): int(n) for a, n in dims.items()}
        self.agents = tuple(sorted(self._dims))
        self._offsets = {}
        off = 0
        for a in self.agents:
            self._offsets[a] = off
            off += self._dims[a]
        self.total_dim = off

    def dim(self, agent: int) -> int:
        try:
            return self._dims[agent]
        except KeyError:
            raise SelectorOutOfRangeError(f"agent {agent} not in layout") from None

    def offset(self, agent: int) -> int:
        self.dim(agent)
        return self._offsets[agent]

    def slice_of(self, agent: int) -> slice:
        off = self.offset(agent)
        return slice(off, off + self._dims[agent])

    def index(self, agent: int, comp: int) -> int:
        """Flat index of 0-based component ``comp`` of ``agent``."""
        n = self.dim(agent)
        if not 0 <= comp < n:
            raise SelectorOutOfRangeError(
                f"component {comp} out of range for agent {agent} (dim {n})"
            )
        return self._offsets[agent] + comp

    def restrict(self, agents: Iterable[int]) -> "StateLayout":
        return StateLayout({a: self.dim(a) for a in agents})

    def __eq__(self, other):
        return isinstance(other, StateLayout) and self._dims == other._dims

    def __repr__(self):
        return f"StateLayout({self._dims!r})"


def _fmt(x: float) -> str:
    """Compact numeric literal for grammar round trips."""
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# Conjuncts: the smooth-min layer sees each predicate as one or two concave
# rows with a value and a gradient over the stacked state.
# ---------------------------------------------------------------------------


class Conjunct:
    def value(self, x: np.ndarray, layout: StateLayout) -> float:
        raise NotImplementedError

    def add_grad(self, x: np.ndarray, layout: StateLayout, weight: float, out: np.ndarray) -> None:
        raise NotImplementedError

    def reference(self, layout: StateLayout) -> dict[int, float]:
        """Flat-index -> suggested coordinate used to seed the peak search."""
        return {}


@dataclass(frozen=True)
class AffineConjunct(Conjunct):
    """h(x) = sum coeff * x[agent, comp] + const."""

    terms: tuple[tuple[int, int, float], ...]
    const: float

    def value(self, x, layout):
        v = self.const
        for agent, comp, coeff in self.terms:
            v += coeff * x[layout.index(agent, comp)]
        return v

    def add_grad(self, x, layout, weight, out):
        for agent, comp, coeff in self.terms:
            out[layout.index(agent, comp)] += weight * coeff

    def negated(self) -> "AffineConjunct":
        return AffineConjunct(
            tuple((a, c, -k) for a, c, k in self.terms), -self.const
        )


@dataclass(frozen=True)
class BallToPointConjunct(Conjunct):
    """h(x) = radius - ||p_agent - center|| over the first len(center) components."""

    agent: int
    center: tuple[float, ...]
    radius: float

    def _delta(self, x, layout):
        n = len(self.center)
        if layout.dim(self.agent) < n:
            raise SelectorOutOfRangeError(
                f"agent {self.agent} has fewer than {n} state components"
            )
        off = layout.offset(self.agent)
        return x[off:off + n] - np.asarray(self.center)

    def value(self, x, layout):
        return self.radius - float(np.linalg.norm(self._delta(x, layout)))

    def add_grad(self, x, layout, weight, out):
        d = self._delta(x, layout)
        dist = float(np.linalg.norm(d))
        if dist == 0.0:
            # Supergradient choice at the singular center: no pull.
            return
        off = layout.offset(self.agent)
        out[off:off + len(self.center)] += weight * (-d / dist)

    def reference(self, layout):
        off = layout.offset(self.agent)
        return {off + k: c for k, c in enumerate(self.center)}


@dataclass(frozen=True)
class BallPairConjunct(Conjunct):
    """h(x) = radius - ||p_i - p_j|| over the planar position block.

    The position block is the first min(2, dim_i, dim_j) components of each
    agent, so planar robots with an orientation state compare positions only.
    """

    agent_i: int
    agent_j: int
    radius: float

    def _block(self, layout):
        return min(2, layout.dim(self.agent_i), layout.dim(self.agent_j))

    def _delta(self, x, layout):
        n = self._block(layout)
        oi = layout.offset(self.agent_i)
        oj = layout.offset(self.agent_j)
        return x[oi:oi + n] - x[oj:oj + n], n

    def value(self, x, layout):
        d, _ = self._delta(x, layout)
        return self.radius - float(np.linalg.norm(d))

    def add_grad(self, x, layout, weight, out):
        d, n = self._delta(x, layout)
        dist = float(np.linalg.norm(d))
        if dist == 0.0:
            return
        u = d / dist
        oi = layout.offset(self.agent_i)
        oj = layout.offset(self.agent_j)
        out[oi:oi + n] += weight * (-u)
        out[oj:oj + n] += weight * u


# ---------------------------------------------------------------------------
# Atoms as written in the grammar.  Band and angle atoms expand into two
# affine conjuncts so concavity stays structural.
# ---------------------------------------------------------------------------


class PredicateAtom:
    kind = "abstract"

    def participants(self) -> frozenset[int]:
        raise NotImplementedError

    def conjuncts(self) -> tuple[Conjunct, ...]:
        raise NotImplementedError

    @property
    def affine(self) -> bool:
        """True when the atom is a single affine row (safe to negate)."""
        return False

    def text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearAtom(PredicateAtom):
    """lin(c1*comp(i,k) + ...) >= rhs, robustness sum(c*x) - rhs."""

    terms: tuple[tuple[int, int, float], ...]  # (agent, 0-based comp, coeff)
    rhs: float
    kind = "linear"

    def participants(self):
        return frozenset(a for a, _, _ in self.terms)

    def conjuncts(self):
        return (AffineConjunct(self.terms, -self.rhs),)

    @property
    def affine(self):
        return True

    def text(self):
        parts = []
        for n, (agent, comp, coeff) in enumerate(self.terms):
            mag = abs(coeff)
            term = f"{_fmt(mag)}*comp({agent},{comp + 1})"
            if n == 0:
                parts.append(term if coeff >= 0 else f"-{term}")
            else:
                parts.append(f" {'+' if coeff >= 0 else '-'} {term}")
        return f"lin({''.join(parts)}) >= {_fmt(self.rhs)}"


@dataclass(frozen=True)
class BallToPointAtom(PredicateAtom):
    """dist(i, [c...]) <= radius."""

    agent: int
    center: tuple[float, ...]
    radius: float
    kind = "ball_to_point"

    def participants(self):
        return frozenset({self.agent})

    def conjuncts(self):
        return (BallToPointConjunct(self.agent, self.center, self.radius),)

    def text(self):
        pt = ",".join(_fmt(c) for c in self.center)
        return f"dist({self.agent},[{pt}]) <= {_fmt(self.radius)}"


@dataclass(frozen=True)
class BallPairAtom(PredicateAtom):
    """dist(i, j) <= radius over planar positions."""

    agent_i: int
    agent_j: int
    radius: float
    kind = "ball_pair"

    def participants(self):
        return frozenset({self.agent_i, self.agent_j})

    def conjuncts(self):
        return (BallPairConjunct(self.agent_i, self.agent_j, self.radius),)

    def text(self):
        return f"dist({self.agent_i},{self.agent_j}) <= {_fmt(self.radius)}"


@dataclass(frozen=True)
class BandDiffAtom(PredicateAtom):
    """comp(i,a) - comp(j,b) in (lo, hi); two affine rows."""

    agent_i: int
    comp_i: int
    agent_j: int
    comp_j: int
    lo: float
    hi: float
    kind = "band_diff"

    def participants(self):
        return frozenset({self.agent_i, self.agent_j})

    def conjuncts(self):
        diff = ((self.agent_i, self.comp_i, 1.0), (self.agent_j, self.comp_j, -1.0))
        return (
            AffineConjunct(diff, -self.lo),
            AffineConjunct(tuple((a, c, -k) for a, c, k in diff), self.hi),
        )

    def text(self):
        return (
            f"comp({self.agent_i},{self.comp_i + 1}) - comp({self.agent_j},{self.comp_j + 1})"
            f" in ({_fmt(self.lo)},{_fmt(self.hi)})"
        )


@dataclass(frozen=True)
class AngleBandAtom(PredicateAtom):
    """angdeg(i) near target tol width: |deg(x_i3) - target| < tol.

    The orientation state is radians; the two affine rows are expressed in
    degrees so the robustness scale matches the other predicate families.
    Requires a 3-component agent state (orientation is component 3).
    """

    agent: int
    target_deg: float
    tol_deg: float
    kind = "angle_band"

    def participants(self):
        return frozenset({self.agent})

    def conjuncts(self):
        term = ((self.agent, 2, DEG_PER_RAD),)
        return (
            AffineConjunct(term, -(self.target_deg - self.tol_deg)),
            AffineConjunct(((self.agent, 2, -DEG_PER_RAD),), self.target_deg + self.tol_deg),
        )

    def text(self):
        return f"angdeg({self.agent}) near {_fmt(self.target_deg)} tol {_fmt(self.tol_deg)}"


# ---------------------------------------------------------------------------
# Formula layers.
# ---------------------------------------------------------------------------


class PsiFormula:
    def conjuncts(self) -> tuple[Conjunct, ...]:
        raise NotImplementedError

    def participants(self) -> frozenset[int]:
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class PsiTrue(PsiFormula):
    def conjuncts(self):
        return ()

    def participants(self):
        return frozenset()

    def text(self):
        return "true"


@dataclass(frozen=True)
class PsiAtom(PsiFormula):
    atom: PredicateAtom

    def conjuncts(self):
        return self.atom.conjuncts()

    def participants(self):
        return self.atom.participants()

    def text(self):
        return self.atom.text()


@dataclass(frozen=True)
class PsiNegAtom(PsiFormula):
    """Negated affine atom; construction is policed by the parser."""

    atom: PredicateAtom

    def conjuncts(self):
        (row,) = self.atom.conjuncts()
        return (row.negated(),)

    def participants(self):
        return self.atom.participants()

    def text(self):
        return f"!{self.atom.text()}"


@dataclass(frozen=True)
class PsiAnd(PsiFormula):
    children: tuple[PsiFormula, ...]

    def conjuncts(self):
        rows: list[Conjunct] = []
        for c in self.children:
            rows.extend(c.conjuncts())
        return tuple(rows)

    def participants(self):
        out: frozenset[int] = frozenset()
        for c in self.children:
            out |= c.participants()
        return out

    def text(self):
        return " && ".join(c.text() for c in self.children)


@dataclass(frozen=True)
class PhiFormula:
    """One timed unit: eventually or always over a conjunction."""

    op: Literal["F", "G"]
    a: float
    b: float
    psi: PsiFormula

    def __post_init__(self):
        if not (0.0 <= self.a <= self.b):
            raise TimeBoundOrderError(
                f"window [{self.a},{self.b}] must satisfy 0 <= a <= b"
            )

    def participants(self):
        return self.psi.participants()

    def text(self):
        body = self.psi.text()
        if isinstance(self.psi, PsiAnd):
            body = f"({body})"
        return f"{self.op}[{_fmt(self.a)},{_fmt(self.b)}] {body}"


@dataclass(frozen=True)
class TaskFormula:
    """Ordered unit sequence.

    ``from_nest`` marks tasks parsed from an eventually-nest: their windows
    were accumulated left to right and are printed back in nest form (plain
    sequences must keep ``b_(k) <= a_(k+1)``, nests need not).
    """

    units: tuple[PhiFormula, ...]
    from_nest: bool = False

    def __post_init__(self):
        if not self.from_nest:
            for u, v in zip(self.units, self.units[1:]):
                if u.b > v.a:
                    raise TimeBoundOrderError(
                        f"sequenced windows overlap: [{u.a},{u.b}] then [{v.a},{v.b}]"
                    )

    @property
    def trivial(self) -> bool:
        """True when nothing constrains the state (no units, or all-true)."""
        return all(not u.psi.conjuncts() for u in self.units)

    def participants(self, owner: int) -> tuple[int, ...]:
        """Ordered set of agents the task reads, always including the owner."""
        out = {owner}
        for u in self.units:
            out |= u.participants()
        return tuple(sorted(out))

    def text(self):
        if not self.units:
            return "true"
        if self.from_nest:
            opening = []
            prev_a = prev_b = 0.0
            for u in self.units:
                opening.append(
                    f"F[{_fmt(u.a - prev_a)},{_fmt(u.b - prev_b)}] ({u.psi.text()}"
                )
                prev_a, prev_b = u.a, u.b
            return " && ".join(opening) + ")" * len(self.units)
        return " && ".join(u.text() for u in self.units)


def participants(task: TaskFormula, owner: int) -> tuple[int, ...]:
    """Agents participating in ``task`` (its owner always participates)."""
    return task.participants(owner)
