"""Figure renderers for the run/sweep/certificate CSV schemas."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("norm-history", "band-evolution", "convergence-slope", "certificate-summary")


@dataclass(frozen=True)
class FigureSpec:
    inputs: list[Path]
    kind: str
    output: Path
    logy: bool = False
    annotate_field: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        for p in self.inputs:
            if not Path(p).exists():
                raise FileNotFoundError(f"figure input does not exist: {p}")


def _read_rows(path: Path, required: tuple[str, ...]) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if rows:
        missing = [c for c in required if c not in rows[0]]
        if missing:
            raise ValueError(
                f"{path}: schema mismatch, missing column(s) {', '.join(missing)}"
            )
    return rows


def _empty_axes(ax, message: str):
    ax.text(0.5, 0.5, message, transform=ax.transAxes, ha="center", va="center",
            color="tab:red")


def _save(fig, output: Path):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=150, bbox_inches="tight")
    plt.close(fig)


def fit_decay_rate(t: np.ndarray, v: np.ndarray) -> float:
    """Fitted exponential decay rate of a positive series (positive = decaying)."""
    keep = v > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(t[keep], np.log(v[keep]), 1)
    return float(-slope)


def plot_norm_history(spec: FigureSpec) -> Path:
    """Time series per norm family from norm_history.csv; weighted overlay dashed."""
    rows = _read_rows(spec.inputs[0], ("t", "name", "value", "ert_value"))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    annotated = None
    if not rows:
        _empty_axes(ax, "empty norm series: nothing to plot")
    else:
        names = sorted({r["name"] for r in rows})
        for name in names:
            t = np.array([float(r["t"]) for r in rows if r["name"] == name])
            v = np.array([float(r["value"]) for r in rows if r["name"] == name])
            e = np.array([float(r["ert_value"]) for r in rows if r["name"] == name])
            (line,) = ax.plot(t, v, label=name)
            ax.plot(t, e, linestyle="--", alpha=0.5, color=line.get_color())
            if name == (spec.annotate_field or "l2_u"):
                annotated = fit_decay_rate(t, v)
        if annotated is not None and np.isfinite(annotated):
            ax.annotate(f"decay rate {annotated:.4g}", xy=(0.02, 0.04),
                        xycoords="axes fraction", fontsize=9)
        if spec.logy:
            ax.set_yscale("log")
        ax.legend(fontsize=7, ncol=2)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title("norm history (dashed: e^{Rt}-weighted)")
    _save(fig, spec.output)
    return spec.output


def plot_band_evolution(spec: FigureSpec) -> Path:
    rows = _read_rows(spec.inputs[0], ("t", "integrand", "accumulated", "radius"))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if not rows:
        _empty_axes(ax, "empty band history")
    else:
        t = np.array([float(r["t"]) for r in rows])
        ax.plot(t, [float(r["accumulated"]) for r in rows], label="accumulated loss")
        ax.plot(t, [float(r["radius"]) for r in rows], label="radius")
        ax2 = ax.twinx()
        ax2.plot(t, [float(r["integrand"]) for r in rows], color="gray", alpha=0.5,
                 label="integrand")
        ax2.set_ylabel("integrand", color="gray")
        ax.legend(loc="center right", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("radius / accumulated")
    ax.set_title("analyticity band")
    _save(fig, spec.output)
    return spec.output


def plot_convergence_slope(spec: FigureSpec) -> Path:
    """Log-log error vs eps with the fitted line and slope annotation."""
    rows = _read_rows(spec.inputs[0], ("eps", "error_total"))
    if len(rows) < 2:
        raise ValueError("convergence-slope figure needs at least 2 eps points")
    eps = np.array([float(r["eps"]) for r in rows])
    err = np.array([float(r["error_total"]) for r in rows])
    slope, intercept = np.polyfit(np.log(eps), np.log(err), 1)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(eps, err, "o", label="measured")
    xs = np.linspace(eps.min(), eps.max(), 50)
    ax.loglog(xs, np.exp(intercept) * xs**slope, "-", alpha=0.7,
              label=f"fit: slope {slope:.2f}")
    ax.annotate(f"slope = {slope:.2f}", xy=(0.05, 0.9), xycoords="axes fraction")
    ax.set_xlabel("eps")
    ax.set_ylabel("error")
    ax.legend()
    ax.set_title("convergence to the hydrostatic limit")
    _save(fig, spec.output)
    return spec.output


def plot_certificate_summary(spec: FigureSpec) -> Path:
    rows = []
    for path in spec.inputs:
        rows.extend(_read_rows(path, ("name", "lhs", "rhs", "fitted_C", "status")))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if not rows:
        _empty_axes(ax, "no certificates")
    else:
        names = [r["name"] for r in rows]
        vals = [float(r["fitted_C"]) if r["fitted_C"] not in ("", "nan") else 0.0 for r in rows]
        colors = ["tab:green" if r["status"] == "holds" else
                  "tab:orange" if r["status"] in ("degenerate", "boundary") else "tab:red"
                  for r in rows]
        ax.bar(range(len(rows)), vals, color=colors)
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("fitted C")
    ax.set_title("certificates (green holds, orange degenerate, red violated)")
    _save(fig, spec.output)
    return spec.output


_RENDERERS = {
    "norm-history": plot_norm_history,
    "band-evolution": plot_band_evolution,
    "convergence-slope": plot_convergence_slope,
    "certificate-summary": plot_certificate_summary,
}


def render(spec: FigureSpec) -> Path:
    return _RENDERERS[spec.kind](spec)
