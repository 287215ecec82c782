"""Manifest-driven batch renderer for fairness-experiment CSVs.

Consumes only the documented CSV schemas (creators, timesteps, sweep,
terciles); it never imports the simulator.
"""

from .errors import FigureError, InputDataError, ManifestError
from .render import RenderSummary, render, render_all
from .spec import KINDS, POLICY_COLORS, FigureSpec

__all__ = [
    "FigureError",
    "FigureSpec",
    "InputDataError",
    "KINDS",
    "ManifestError",
    "POLICY_COLORS",
    "RenderSummary",
    "render",
    "render_all",
]
