"""Figure builders: per-agent funnel panels and plane trajectories.

Funnel discontinuities are taken from the event log's before/after
snapshots, so the drawn curves break exactly where the simulator jumped
instead of being re-derived from samples.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reader import (
    AgentSeries,
    JumpEvent,
    MissingColumn,
    REQUIRED_FUNNEL_COLUMNS,
    REQUIRED_PLANE_COLUMNS,
    read_events,
    read_trajectory,
)

KIND_STYLE = {
    "stage1": ("o", "tab:orange"),
    "stage2_initiate": ("s", "tab:red"),
    "stage2_join": ("D", "tab:purple"),
    "stage3_lower": ("v", "tab:brown"),
    "stage3_upper": ("^", "tab:pink"),
    "satisfied": ("*", "tab:green"),
}


@dataclass
class PlotSpec:
    traj: str | Path
    out: str | Path
    events: Optional[str | Path] = None
    agents: Optional[Sequence[int]] = None
    figsize: tuple[float, float] = (9.0, 3.2)
    dpi: int = 130


@dataclass
class PiecewiseCurve:
    """Plotted polyline with NaN breaks at jump instants."""

    times: np.ndarray
    values: np.ndarray


@dataclass
class FunnelPanel:
    agent: int
    rho: PiecewiseCurve
    ceiling: PiecewiseCurve
    floor: PiecewiseCurve
    markers: list[JumpEvent] = field(default_factory=list)


def _piecewise(series: AgentSeries, events: list[JumpEvent], column: str) -> PiecewiseCurve:
    """Sampled column broken at jumps, with the pre-jump limit prepended.

    The CSV row at a jump instant already holds the post-jump value; the
    event snapshot supplies the value the funnel had just before.
    """
    ts: list[float] = []
    vs: list[float] = []
    samples = {"rho_max": series.rho_max, "funnel_lo": series.funnel_lo}[column]
    cuts = {e.t: e for e in events if e.before is not None}
    for t, v in zip(series.times, samples):
        e = cuts.get(t)
        if e is not None:
            before = e.before.rho_max if column == "rho_max" else e.before.floor(t)
            ts.extend([t, t])
            vs.extend([before, np.nan])
        ts.append(t)
        vs.append(v)
    return PiecewiseCurve(np.asarray(ts), np.asarray(vs))


def build_funnel_panel(agent: int, series: AgentSeries, events: list[JumpEvent]) -> FunnelPanel:
    own = [e for e in events if e.agent == agent]
    return FunnelPanel(
        agent=agent,
        rho=PiecewiseCurve(series.times.copy(), series.rho_psi.copy()),
        ceiling=_piecewise(series, own, "rho_max"),
        floor=_piecewise(series, own, "funnel_lo"),
        markers=own,
    )


def plot_funnel(spec: PlotSpec) -> list[FunnelPanel]:
    """Render one funnel panel per selected agent and write the image.

    Returns the plotted panels so callers can check the drawn series against
    the log data.  Raises MissingColumn for malformed input and ValueError
    when the agent selection is empty; no file is written on error.
    """
    traj = read_trajectory(spec.traj, REQUIRED_FUNNEL_COLUMNS)
    events = read_events(spec.events) if spec.events else []
    wanted = list(spec.agents) if spec.agents is not None else sorted(traj.agents)
    missing = [a for a in wanted if a not in traj.agents]
    if missing:
        raise ValueError(f"agents {missing} not present in {spec.traj}")
    if not wanted:
        raise ValueError("empty agent selection")
    panels = [build_funnel_panel(a, traj.agents[a], events) for a in wanted]
    fig, axes = plt.subplots(
        len(panels), 1, sharex=True,
        figsize=(spec.figsize[0], spec.figsize[1] * len(panels)), squeeze=False,
    )
    for ax, panel in zip(axes[:, 0], panels):
        ax.plot(panel.ceiling.times, panel.ceiling.values, color="tab:blue",
                lw=1.2, label="ceiling")
        ax.plot(panel.floor.times, panel.floor.values, color="tab:blue",
                lw=1.2, ls="--", label="floor")
        ax.plot(panel.rho.times, panel.rho.values, color="black", lw=1.5,
                label="robustness")
        seen = set()
        rho_at = dict(zip(panel.rho.times, panel.rho.values))
        for e in panel.markers:
            marker, color = KIND_STYLE.get(e.kind, ("x", "gray"))
            label = e.kind if e.kind not in seen else None
            seen.add(e.kind)
            ax.plot([e.t], [rho_at.get(e.t, np.nan)], marker=marker, color=color,
                    ms=8, ls="none", label=label)
        ax.set_ylabel(f"agent {panel.agent}")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="lower right", fontsize=8, ncol=2)
    axes[-1, 0].set_xlabel("time")
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)
    return panels


@dataclass
class PlaneTrack:
    agent: int
    xy: np.ndarray  # (n_samples, 2)
    headings: Optional[np.ndarray]  # (n_samples,) for 3-state agents


def plot_plane(spec: PlotSpec) -> list[PlaneTrack]:
    """Render planar trajectories with start/end markers and heading glyphs.

    Agents whose state is neither planar (2) nor planar-plus-heading (3) are
    skipped with a warning on stderr.
    """
    traj = read_trajectory(spec.traj, REQUIRED_PLANE_COLUMNS)
    wanted = list(spec.agents) if spec.agents is not None else sorted(traj.agents)
    if not wanted:
        raise ValueError("empty agent selection")
    tracks = []
    for a in wanted:
        if a not in traj.agents:
            raise ValueError(f"agent {a} not present in {spec.traj}")
        series = traj.agents[a]
        if series.state_dim not in (2, 3):
            print(f"warning: agent {a} has state dim {series.state_dim}, skipped",
                  file=sys.stderr)
            continue
        headings = series.states[:, 2] if series.state_dim == 3 else None
        tracks.append(PlaneTrack(a, series.states[:, :2], headings))
    fig, ax = plt.subplots(figsize=(7.0, 7.0))
    for track in tracks:
        (line,) = ax.plot(track.xy[:, 0], track.xy[:, 1], lw=1.3,
                          label=f"agent {track.agent}")
        color = line.get_color()
        ax.plot(*track.xy[0], marker="o", color=color, ms=7)
        ax.plot(*track.xy[-1], marker="s", color=color, ms=7)
        if track.headings is not None and len(track.xy) > 1:
            stride = max(1, len(track.xy) // 12)
            pts = track.xy[::stride]
            hs = track.headings[::stride]
            ax.quiver(pts[:, 0], pts[:, 1], np.cos(hs), np.sin(hs),
                      color=color, width=3e-3, scale=40, alpha=0.7)
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=spec.dpi)
    plt.close(fig)
    return tracks
