"""Communication graph, task dependencies, and their maximal clusters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .formulas import PhiFormula, TaskFormula


class UnionFind:
    def __init__(self, items: Iterable[int] = ()):
        self.parent: dict[int, int] = {}
        for k in items:
            self.add(k)

    def add(self, k: int) -> None:
        self.parent.setdefault(k, k)

    def find(self, k: int) -> int:
        self.add(k)
        root = k
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[k] != root:
            self.parent[k], k = root, self.parent[k]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # deterministic representative: smaller id wins
            lo, hi = (ra, rb) if ra < rb else (rb, ra)
            self.parent[hi] = lo

    def groups(self) -> list[frozenset[int]]:
        by_root: dict[int, set[int]] = {}
        for k in self.parent:
            by_root.setdefault(self.find(k), set()).add(k)
        return [frozenset(v) for _, v in sorted(by_root.items())]


class CommGraph:
    """Static undirected communication topology; None edges = complete graph."""

    def __init__(self, agents: Iterable[int], edges: Optional[Iterable[tuple[int, int]]] = None):
        self.agents = frozenset(agents)
        if edges is None:
            self.complete = True
            self.edges = frozenset()
        else:
            self.complete = False
            es = set()
            for a, b in edges:
                if a == b:
                    raise ValueError(f"self-loop on agent {a}")
                es.add((min(a, b), max(a, b)))
            self.edges = frozenset(es)
        self._uf = UnionFind(self.agents)
        for a, b in self.edges:
            self._uf.union(a, b)

    def can_communicate(self, a: int, b: int) -> bool:
        if a == b:
            return True
        if self.complete:
            return a in self.agents and b in self.agents
        return self._uf.find(a) == self._uf.find(b)


@dataclass(frozen=True)
class Cluster:
    """One maximal dependency cluster with its classification flags."""

    agents: tuple[int, ...]
    case_a: bool
    comm_ok: bool


def clusters(tasks: Mapping[int, TaskFormula], comm: CommGraph) -> list[Cluster]:
    """Maximal dependency clusters of the task set.

    There is a dependency edge (i, j) whenever agent j participates in
    agent i's task; clusters are the connected components.  A cluster is
    case_a when all member tasks are structurally identical, and comm_ok
    when every member pair can communicate.
    """
    uf = UnionFind(tasks)
    for owner, task in tasks.items():
        for other in task.participants(owner):
            if other in tasks:
                uf.union(owner, other)
    out = []
    for group in uf.groups():
        members = tuple(sorted(group))
        first = tasks[members[0]]
        case_a = all(tasks[m] == first for m in members[1:])
        comm_ok = all(
            comm.can_communicate(a, b) for i, a in enumerate(members) for b in members[i + 1:]
        )
        out.append(Cluster(members, case_a, comm_ok))
    return out


def stage2_timing_ok(
    agent: int,
    own_unit: PhiFormula,
    participants: Iterable[int],
    collab_flags: Mapping[int, int],
    active_units: Mapping[int, Optional[PhiFormula]],
) -> bool:
    """Whether every co-participant can afford to postpone its own task.

    A participant qualifies if it is free, or if it is pursuing its own task
    whose effective deadline (deadline for eventually, window start for
    always) still leaves room after this agent's own deadline.
    """
    for j in participants:
        if j == agent:
            continue
        cj = collab_flags.get(j, -1)
        if cj == -1:
            continue
        if cj != 0:
            return False
        unit_j = active_units.get(j)
        if unit_j is None:
            return False
        cutoff = unit_j.b if unit_j.op == "F" else unit_j.a
        if not own_unit.b < cutoff:
            return False
    return True
