"""Figures from simulator trajectory/event logs: funnel panels and plane plots."""
from .plots import FunnelPanel, PlaneTrack, PlotSpec, plot_funnel, plot_plane
from .reader import JumpEvent, MissingColumn, read_events, read_trajectory

__version__ = "0.1.0"
