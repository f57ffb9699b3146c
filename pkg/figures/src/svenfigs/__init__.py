"""Offline figure rendering for svenlab run directories."""

__version__ = "0.1.0"

from svenfigs.figlib import FigureError, FigureSpec, PANELS, panel_data, render
