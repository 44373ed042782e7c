"""Command-line wrappers:

    plot-funnel --traj traj.csv --events events.jsonl --agents 1,4 --out funnel.png
    plot-plane  --traj traj.csv [--agents 1,2] --out plane.png
"""
from __future__ import annotations

import argparse
import sys

from .plots import PlotSpec, plot_funnel, plot_plane
from .reader import MissingColumn


def _agent_list(text):
    if text is None:
        return None
    return [int(v) for v in text.split(",") if v.strip()]


def main_funnel(argv=None) -> int:
    p = argparse.ArgumentParser(prog="plot-funnel",
                                description="Per-agent funnel panels from simulator logs")
    p.add_argument("--traj", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--agents", default=None, help="comma-separated ids (default: all)")
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    try:
        panels = plot_funnel(PlotSpec(traj=args.traj, events=args.events,
                                      agents=_agent_list(args.agents), out=args.out))
    except (MissingColumn, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(panels)} panels)")
    return 0


def main_plane(argv=None) -> int:
    p = argparse.ArgumentParser(prog="plot-plane",
                                description="Planar trajectories from a simulator log")
    p.add_argument("--traj", required=True)
    p.add_argument("--agents", default=None, help="comma-separated ids (default: all)")
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    try:
        tracks = plot_plane(PlotSpec(traj=args.traj, agents=_agent_list(args.agents),
                                     out=args.out))
    except (MissingColumn, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(tracks)} trajectories)")
    return 0
