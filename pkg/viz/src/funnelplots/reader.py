"""Readers for the simulator's documented log formats.

Trajectory CSV: one row per (sample, agent) with columns
    t, agent, x1..xn, u1..um, rho_psi, rho_max, funnel_lo, xi, eps,
    n_repairs, collab, unit_index
(state/input columns are padded to the widest agent; absent cells are empty).

Event log: one JSON object per line with
    t, jump_index, agent, kind, before, after   (optionally initiator)
where before/after carry funnel snapshots
    {t_star, rho_max, r, gamma0, gamma_inf, l}  or null.

Nothing here imports the simulator; these are plain file-format readers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MissingColumn(Exception):
    """The trajectory CSV lacks a column the plot needs."""


REQUIRED_FUNNEL_COLUMNS = ("t", "agent", "rho_psi", "rho_max", "funnel_lo")
REQUIRED_PLANE_COLUMNS = ("t", "agent", "x1")


@dataclass
class AgentSeries:
    """Per-agent sampled columns, one entry per trajectory sample."""

    times: np.ndarray
    states: np.ndarray  # (n_samples, state_dim)
    rho_psi: np.ndarray
    rho_max: np.ndarray
    funnel_lo: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]


@dataclass
class Trajectory:
    agents: dict[int, AgentSeries] = field(default_factory=dict)


def _parse_float(cell: str) -> float:
    return math.nan if cell == "" else float(cell)


def read_trajectory(path: str | Path, required: tuple[str, ...]) -> Trajectory:
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        raise MissingColumn(f"{path} is empty")
    header = lines[0].split(",")
    for col in required:
        if col not in header:
            raise MissingColumn(f"{path} has no column {col!r}")
    idx = {c: k for k, c in enumerate(header)}
    xcols = [idx[c] for c in header if c.startswith("x") and c[1:].isdigit()]
    per: dict[int, dict[str, list]] = {}
    for line in lines[1:]:
        parts = line.split(",")
        agent = int(parts[idx["agent"]])
        rec = per.setdefault(
            agent, {"t": [], "x": [], "rho_psi": [], "rho_max": [], "funnel_lo": []}
        )
        rec["t"].append(float(parts[idx["t"]]))
        rec["x"].append([float(parts[k]) for k in xcols if parts[k] != ""])
        for col in ("rho_psi", "rho_max", "funnel_lo"):
            rec[col].append(_parse_float(parts[idx[col]]) if col in idx else math.nan)
    out = Trajectory()
    for agent, rec in per.items():
        out.agents[agent] = AgentSeries(
            times=np.asarray(rec["t"]),
            states=np.asarray(rec["x"]),
            rho_psi=np.asarray(rec["rho_psi"]),
            rho_max=np.asarray(rec["rho_max"]),
            funnel_lo=np.asarray(rec["funnel_lo"]),
        )
    return out


@dataclass(frozen=True)
class FunnelSnapshot:
    t_star: float
    rho_max: float
    r: float
    gamma0: float
    gamma_inf: float
    l: float

    def width(self, t: float) -> float:
        return (self.gamma0 - self.gamma_inf) * math.exp(-self.l * t) + self.gamma_inf

    def floor(self, t: float) -> float:
        return self.rho_max - self.width(t)


@dataclass(frozen=True)
class JumpEvent:
    t: float
    jump_index: int
    agent: int
    kind: str
    before: FunnelSnapshot | None
    after: FunnelSnapshot | None


def _snapshot(obj) -> FunnelSnapshot | None:
    if obj is None or obj.get("funnel") is None:
        return None
    f = obj["funnel"]
    return FunnelSnapshot(
        t_star=f["t_star"], rho_max=f["rho_max"], r=f["r"],
        gamma0=f["gamma0"], gamma_inf=f["gamma_inf"], l=f["l"],
    )


def read_events(path: str | Path) -> list[JumpEvent]:
    events = []
    text = Path(path).read_text().strip()
    if not text:
        return events
    for line in text.splitlines():
        e = json.loads(line)
        events.append(JumpEvent(
            t=float(e["t"]),
            jump_index=int(e["jump_index"]),
            agent=int(e["agent"]),
            kind=str(e["kind"]),
            before=_snapshot(e.get("before")),
            after=_snapshot(e.get("after")),
        ))
    events.sort(key=lambda e: e.jump_index)
    return events
