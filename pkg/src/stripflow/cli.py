"""Command-line entry points: run-limit, run-pe, sweep, verify, norms, figures.

Runs write one self-describing directory each (config.json, fields/, blocks/,
norms.csv, norm_history.csv, band.csv, diagnostics.csv); verify consumes run
directories and writes certificates.csv; figures render CSV artifacts to image
files.  Single-threaded reruns of the same config and seed are bit-identical.
Set STRIPFLOW_OUT_ROOT to redirect all relative output paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import FAMILIES, SCHEMES, RunConfig, initial_data, parse_config


def _out_path(p: str | Path) -> Path:
    root = os.environ.get("STRIPFLOW_OUT_ROOT")
    p = Path(p)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _config_from_args(args) -> RunConfig:
    if args.config:
        cfg = parse_config(args.config)
        overrides = {}
    else:
        cfg = RunConfig(nx=args.nx, ny=args.ny, horizon=args.horizon)
        overrides = {}
    for key in RunConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if overrides:
        merged = cfg.as_dict()
        merged.update(overrides)
        if isinstance(merged.get("eps"), list):
            merged["eps"] = tuple(merged["eps"])
        cfg = RunConfig(**merged)
    return cfg


def _add_config_flags(p: argparse.ArgumentParser, sweep: bool = False):
    p.add_argument("--config", help="JSON config file (flat key-value document)")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--lx", type=float, default=None)
    if sweep:
        p.add_argument("--eps", type=float, nargs="+", default=None)
    else:
        p.add_argument("--eps", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--family", choices=FAMILIES, default=None)
    p.add_argument("--amplitude", type=float, default=None)
    p.add_argument("--band-kmax", dest="band_kmax", type=int, default=None)
    p.add_argument("--band-mmax", dest="band_mmax", type=int, default=None)
    p.add_argument("--snapshot", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--lambda-override", dest="lambda_override", type=float, default=None)
    p.add_argument("--mu-override", dest="mu_override", type=float, default=None)
    p.add_argument("--rweight", type=float, default=None)
    p.add_argument("--c0", type=float, default=None)
    p.add_argument("--cert-budget", dest="cert_budget", type=float, default=None)
    p.add_argument("--outdir", default=None)
    p.add_argument("--cadence", type=int, default=None)
    p.add_argument("--no-dealias", dest="dealias", action="store_false", default=None)
    p.add_argument("--no-hydrostatic-split", dest="hydrostatic_split",
                   action="store_false", default=None)
    p.add_argument("--scheme", choices=SCHEMES, default=None)
    p.add_argument("--figures", action="store_true", default=False,
                   help="render the default report figures into the run directory")


def _run_figures(outdir: Path, kind: str):
    from .figures import FigureSpec, plot_band_evolution, plot_norm_history

    plot_norm_history(FigureSpec(
        inputs=[outdir / "norm_history.csv"], kind="norm-history",
        output=outdir / "norm_history.png", logy=True,
    ))
    plot_band_evolution(FigureSpec(
        inputs=[outdir / "band.csv"], kind="band-evolution",
        output=outdir / "band.png",
    ))


def cmd_run_limit(args) -> int:
    from .artifacts import save_run
    from .limit import run_limit

    cfg = _config_from_args(args)
    outdir = _out_path(cfg.outdir or f"runs/limit-{cfg.hash()}")
    rec = run_limit(cfg)
    save_run(rec, outdir)
    print(f"limit run: status={rec.status} t_final={rec.times[-1]:g} -> {outdir}")
    if args.figures:
        _run_figures(outdir, "limit")
    return 0


def cmd_run_pe(args) -> int:
    from .artifacts import save_run
    from .pe import run_pe

    cfg = _config_from_args(args)
    outdir = _out_path(cfg.outdir or f"runs/pe-{cfg.hash()}")
    rec = run_pe(cfg)
    save_run(rec, outdir)
    print(f"pe run: eps={cfg.eps_scalar:g} status={rec.status} "
          f"t_final={rec.times[-1]:g} -> {outdir}")
    if args.figures:
        _run_figures(outdir, "pe")
    return 0


def cmd_sweep(args) -> int:
    from .artifacts import save_sweep
    from .verify import convergence_sweep

    cfg = _config_from_args(args)
    if not cfg.is_sweep:
        raise ValueError("sweep requires a list-valued eps (e.g. --eps 0.2 0.1 0.05)")
    outdir = _out_path(cfg.outdir or f"runs/sweep-{cfg.hash()}")
    outdir.mkdir(parents=True, exist_ok=True)
    res = convergence_sweep(cfg, progress=lambda m: print(f"  {m}", flush=True))
    save_sweep(res, outdir / "sweep.csv", cfg.hash())
    (outdir / "config.json").write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True))
    print(f"sweep: slope={res.slope:.3f} intercept={res.intercept:.3f} "
          f"mu={res.mu:g} -> {outdir / 'sweep.csv'}")
    if args.figures:
        from .figures import FigureSpec, plot_convergence_slope

        plot_convergence_slope(FigureSpec(
            inputs=[outdir / "sweep.csv"], kind="convergence-slope",
            output=outdir / "sweep.png",
        ))
    return 0


def cmd_verify(args) -> int:
    from .artifacts import load_run, save_certificates
    from .lp import build_filter_bank
    from .verify import (certify_dtu, certify_limit_energy, certify_pe_energy,
                         lemma_battery, smallness_check)

    rundirs = [Path(p) for p in args.rundirs]
    if not rundirs and not args.lemmas:
        print("nothing to verify: no run directories given")
        return 0
    for rundir in rundirs:
        rec = load_run(rundir)
        cfg = rec.config
        reports = [smallness_check(rec.initial["u"], rec.initial["T"], cfg.a,
                                   rec.bank, cfg.c0, cfg.rweight)]
        if rec.kind == "limit":
            reports.append(certify_limit_energy(rec))
            try:
                reports.append(certify_dtu(rec))
            except ValueError as exc:
                print(f"{rundir.name}: limit_dtu skipped ({exc})")
        else:
            reports.append(certify_pe_energy(rec))
        save_certificates(reports, rundir / "certificates.csv", cfg.hash())
        for rep in reports:
            print(f"{rundir.name}: {rep.name}: {rep.status} "
                  f"(lhs={rep.lhs:.4g}, rhs={rep.rhs:.4g}, C={rep.fitted_c:.4g})")
    if args.lemmas:
        from .grid import StripGrid

        grid = StripGrid(args.lemma_nx, args.lemma_nx)
        battery = lemma_battery(grid, args.lemma_samples)
        for kind, res in battery.items():
            print(f"lemma {kind}: max ratio {res['max_ratio']:.4g} over {res['n']} samples "
                  f"(bony check {res['bony_rel_err']:.2e})")
    return 0


def cmd_norms(args) -> int:
    from .artifacts import _header_lines, _write_csv, load_field
    from .lp import besov_norm, build_filter_bank

    f = load_field(Path(args.snapshot))
    bank = build_filter_bank(f.grid)
    rows = []
    for s in args.s:
        rows.append({"name": args.name or Path(args.snapshot).stem, "s": s, "p": "-",
                     "value": repr(besov_norm(f, s, bank))})
        print(f"B^{s}: {float(rows[-1]['value']):.8g}")
    rows.append({"name": "l2", "s": "", "p": "-", "value": repr(f.l2_norm())})
    rows.append({"name": "mean_mode_l2", "s": "", "p": "-", "value": repr(f.mean_mode_l2())})
    if args.output:
        _write_csv(_out_path(args.output), _header_lines(""), ["name", "s", "p", "value"], rows)
    return 0


def cmd_figures(args) -> int:
    from .figures import FigureSpec, render

    spec = FigureSpec(
        inputs=[Path(p) for p in args.inputs],
        kind=args.kind,
        output=_out_path(args.output),
        logy=args.logy,
        annotate_field=args.annotate_field,
    )
    render(spec)
    print(f"figure: {args.kind} -> {spec.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stripflow",
        description="Primitive-equations strip solver and inequality certification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-limit", help="integrate the hydrostatic limit system")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_run_limit)

    p = sub.add_parser("run-pe", help="integrate the primitive equations at one eps")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_run_pe)

    p = sub.add_parser("sweep", help="eps-convergence sweep against the limit system")
    _add_config_flags(p, sweep=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="certify recorded runs and/or run the lemma battery")
    p.add_argument("rundirs", nargs="*", help="run directories to certify")
    p.add_argument("--lemmas", action="store_true", help="run the synthetic lemma-ratio battery")
    p.add_argument("--lemma-nx", type=int, default=32)
    p.add_argument("--lemma-samples", type=int, default=10)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("norms", help="ad-hoc Besov norms of a stored field snapshot")
    p.add_argument("snapshot", help="field CSV written by a run")
    p.add_argument("--s", type=float, nargs="+", default=[0.5, 1.5])
    p.add_argument("--name", default=None)
    p.add_argument("--output", default=None, help="write a name,s,p,value report CSV")
    p.set_defaults(fn=cmd_norms)

    p = sub.add_parser("figures", help="render a figure from CSV artifacts")
    p.add_argument("kind", choices=["norm-history", "band-evolution",
                                    "convergence-slope", "certificate-summary"])
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--logy", action="store_true")
    p.add_argument("--annotate-field", default=None,
                   help="norm family whose decay rate to annotate (norm-history)")
    p.set_defaults(fn=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # error record with module context, nonzero exit
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": args.command,
        }
        print(json.dumps(record), file=sys.stderr)
        if os.environ.get("STRIPFLOW_DEBUG"):
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
