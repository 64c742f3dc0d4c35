"""CSV persistence for runs, norms, bands, certificates and sweeps.

Every file starts with a self-describing comment block: schema name, code
version, and the producing config's hash.  Field snapshots store the complex
coefficients row-major as (k_index, m_index, re, im) with the grid and parity
in the header.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .band import BandState, band_history_rows
from .config import RunConfig
from .grid import SpectralField, StripGrid
from .lp import NormSeries, series_to_csv_rows
from .records import RunRecord

SCHEMA = "stripflow/1"


def _fmt(v) -> str:
    """Full-precision scalar formatting (round-trips exactly through float())."""
    return repr(float(v))


def _header_lines(config_hash: str, extra: dict | None = None) -> list[str]:
    lines = [f"# schema: {SCHEMA}", f"# version: {__version__}", f"# config_hash: {config_hash}"]
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    return lines


def _write_csv(path: Path, header: list[str], fieldnames: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _read_csv(path: Path) -> tuple[dict, list[dict]]:
    meta, rows = {}, []
    with open(path) as fh:
        reader = None
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
                continue
            if reader is None:
                names = [s.strip() for s in line.rstrip("\n").split(",")]
                reader = csv.DictReader(fh, fieldnames=names)
                continue
        # second pass for rows (DictReader consumed nothing above for data lines)
    with open(path) as fh:
        data_lines = [ln for ln in fh if not ln.startswith("#")]
    if data_lines:
        rows = list(csv.DictReader(data_lines))
    return meta, rows


# -- field snapshots -----------------------------------------------------------


def save_field(f: SpectralField, path: Path, t: float, name: str, config_hash: str = "") -> None:
    g = f.grid
    header = _header_lines(config_hash, {
        "t": t, "Nx": g.nx, "Ny": g.ny, "Lx": _fmt(g.lx), "field": name, "parity": f.parity,
    })
    rows = (
        {"k_index": k, "m_index": m, "re": _fmt(f.data[k, m].real), "im": _fmt(f.data[k, m].imag)}
        for k in range(f.data.shape[0])
        for m in range(f.data.shape[1])
    )
    _write_csv(Path(path), header, ["k_index", "m_index", "re", "im"], rows)


def load_field(path: Path, grid: StripGrid | None = None) -> SpectralField:
    meta, rows = _read_csv(Path(path))
    g = grid or StripGrid(int(meta["Nx"]), int(meta["Ny"]), float(meta["Lx"]))
    parity = meta["parity"]
    data = np.zeros((g.nx // 2 + 1, g.vshape(parity)), dtype=complex)
    for row in rows:
        data[int(row["k_index"]), int(row["m_index"])] = float(row["re"]) + 1j * float(row["im"])
    return SpectralField(g, data, parity)


# -- run directories -------------------------------------------------------------


def save_run(rec: RunRecord, outdir: str | Path) -> Path:
    """Write the one-directory-per-run layout.

    config.json, fields/ (initial and final snapshots), blocks/<field>.csv
    (t, q, block_l2 per series), norms.csv (name, s, p, value report),
    norm_history.csv, band.csv, diagnostics.csv.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = rec.config
    chash = cfg.hash()
    payload = cfg.as_dict()
    payload["_schema"] = SCHEMA
    payload["_version"] = __version__
    payload["_hash"] = chash
    payload["_kind"] = rec.kind
    payload["_status"] = rec.status
    (out / "config.json").write_text(json.dumps(payload, indent=2, sort_keys=True))

    for name, f in rec.initial.items():
        save_field(f, out / "fields" / f"initial_{name}.csv", 0.0, name, chash)
    for name, f in rec.final.items():
        save_field(f, out / "fields" / f"final_{name}.csv", float(rec.times[-1]), name, chash)

    for name, ser in rec.series.items():
        _write_csv(
            out / "blocks" / f"{name}.csv",
            _header_lines(chash, {"field": name}),
            ["t", "q", "block_l2"],
            ({"t": _fmt(t), "q": q, "block_l2": _fmt(v)} for t, q, v in series_to_csv_rows(ser)),
        )

    _write_csv(
        out / "norms.csv",
        _header_lines(chash),
        ["name", "s", "p", "value"],
        _norm_report_rows(rec),
    )
    _write_csv(
        out / "norm_history.csv",
        _header_lines(chash, {"rweight": rec.rweight}),
        ["t", "name", "s", "value", "ert_value"],
        ({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()}
         for row in rec.norm_history),
    )
    _write_csv(
        out / "band.csv",
        _header_lines(chash, {"kind": rec.band.kind, "a": rec.band.a, "lambda": rec.band.lam}),
        ["t", "integrand", "accumulated", "radius"],
        ({"t": _fmt(t), "integrand": _fmt(r), "accumulated": _fmt(a), "radius": _fmt(rad)}
         for t, r, a, rad in band_history_rows(rec.band)),
    )
    diag_names = sorted(rec.diagnostics)
    _write_csv(
        out / "diagnostics.csv",
        _header_lines(chash),
        ["t"] + diag_names,
        (
            {"t": _fmt(rec.times[j]), **{n: _fmt(rec.diagnostics[n][j]) for n in diag_names}}
            for j in range(len(rec.times))
        ),
    )
    if rec.eta_pe_integrand is not None:
        _write_csv(
            out / "eta_integrand.csv",
            _header_lines(chash),
            ["t", "pe_integrand"],
            ({"t": _fmt(t), "pe_integrand": _fmt(v)}
             for t, v in zip(rec.step_times[:-1], rec.eta_pe_integrand)),
        )
    return out


def _norm_report_rows(rec: RunRecord):
    from .lp import chemin_lerner_norm

    for name, ser in rec.series.items():
        for s in (0.5, 1.5):
            for p, plabel in ((np.inf, "inf"), (2, "2")):
                val = chemin_lerner_norm(rec.weighted(name, s), p)
                yield {"name": f"ert_{name}", "s": s, "p": plabel, "value": _fmt(val)}


def load_run(rundir: str | Path) -> RunRecord:
    """Rebuild a verification-ready record from a run directory."""
    from .lp import build_filter_bank

    out = Path(rundir)
    payload = json.loads((out / "config.json").read_text())
    kind = payload.pop("_kind")
    status = payload.pop("_status")
    payload = {k: v for k, v in payload.items() if not k.startswith("_")}
    if isinstance(payload.get("eps"), list):
        payload["eps"] = tuple(payload["eps"])
    cfg = RunConfig(**payload)
    g = cfg.grid()
    bank = build_filter_bank(g)

    series = {}
    times = None
    for path in sorted((out / "blocks").glob("*.csv")):
        meta, rows = _read_csv(path)
        name = meta["field"]
        ts = sorted({float(r["t"]) for r in rows})
        qs = sorted({int(r["q"]) for r in rows})
        t_ix = {t: j for j, t in enumerate(ts)}
        q_ix = {q: i for i, q in enumerate(qs)}
        table = np.zeros((len(qs), len(ts)))
        for r in rows:
            table[q_ix[int(r["q"])], t_ix[float(r["t"])]] = float(r["block_l2"])
        series[name] = NormSeries(np.asarray(ts), np.asarray(qs), table, 0.5, name)
        times = np.asarray(ts)

    meta, rows = _read_csv(out / "band.csv")
    hist_t = tuple(float(r["t"]) for r in rows)
    hist_acc = tuple(float(r["accumulated"]) for r in rows)
    hist_rate = tuple(float(r["integrand"]) for r in rows)
    band = BandState(
        a=float(meta["a"]), lam=float(meta["lambda"]), kind=meta["kind"],
        accumulated=hist_acc[-1] if hist_acc else 0.0,
        t=hist_t[-1] if hist_t else 0.0,
        history_t=hist_t or (0.0,), history_acc=hist_acc or (0.0,),
        history_rate=hist_rate or (0.0,),
    )

    initial, final = {}, {}
    for path in (out / "fields").glob("initial_*.csv"):
        initial[path.stem.removeprefix("initial_")] = load_field(path, g)
    for path in (out / "fields").glob("final_*.csv"):
        final[path.stem.removeprefix("final_")] = load_field(path, g)

    _, diag_rows = _read_csv(out / "diagnostics.csv")
    diagnostics = {}
    if diag_rows:
        for key in diag_rows[0]:
            if key != "t":
                diagnostics[key] = np.asarray([float(r[key]) for r in diag_rows])

    eta = None
    step_times = None
    if (out / "eta_integrand.csv").exists():
        _, eta_rows = _read_csv(out / "eta_integrand.csv")
        eta = np.asarray([float(r["pe_integrand"]) for r in eta_rows])
        step_times = np.concatenate(
            [[float(r["t"]) for r in eta_rows], [float(eta_rows[-1]["t"]) + cfg.dt]]
        ) if eta_rows else None

    return RunRecord(
        kind=kind, config=cfg, bank=bank, times=times, series=series, band=band,
        initial=initial, final=final, diagnostics=diagnostics,
        step_times=step_times, eta_pe_integrand=eta,
        eps=cfg.eps_scalar if not cfg.is_sweep else None, status=status,
    )


# -- reports ---------------------------------------------------------------------


def save_certificates(reports, path: Path, config_hash: str = "") -> None:
    names = ["name", "lhs", "rhs", "fitted_C", "status", "grid", "eps", "dt"]
    rows = []
    for rep in reports:
        row = {k: "" for k in names}
        base = rep.row()
        for k in names:
            if k in base:
                v = base[k]
                row[k] = _fmt(v) if isinstance(v, (float, int)) and k != "grid" else v
        rows.append(row)
    _write_csv(Path(path), _header_lines(config_hash), names, rows)


def save_sweep(result, path: Path, config_hash: str = "") -> None:
    names = ["eps", "error_total", "error_sup", "error_dy", "error_eps32", "slope", "intercept"]
    _write_csv(
        Path(path),
        _header_lines(config_hash, {"mu": result.mu, "m_fit": result.m_fit}),
        names,
        ({k: _fmt(v) for k, v in row.items()} for row in result.rows()),
    )


def load_sweep_rows(path: Path) -> list[dict]:
    _, rows = _read_csv(Path(path))
    return [{k: float(v) for k, v in r.items()} for r in rows]
