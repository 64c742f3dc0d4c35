"""Headless rendering of run CSVs into report figures.

This subpackage consumes only the CSV artifacts written by the CLI (it never
recomputes norms) and renders with the Agg backend, so it works without a
display and the primary suite runs without it.
"""

from .plots import (
    FigureSpec,
    plot_band_evolution,
    plot_certificate_summary,
    plot_convergence_slope,
    plot_norm_history,
    render,
)

__all__ = [
    "FigureSpec",
    "plot_band_evolution",
    "plot_certificate_summary",
    "plot_convergence_slope",
    "plot_norm_history",
    "render",
]
