"""Numerical certification of the energy inequalities, bilinear estimates,
and the eps-convergence rate.

Every certificate compares a left side computed from recorded trajectory data
(weighted block tables plus band histories) against a right side built from
the initial data, and reports the fitted generic constant lhs/rhs.  Constants
are fitted, never asserted: a certificate "holds" when lhs stays within the
configured budget times rhs, and the budget is recorded with the result.
Lemma ratios run on synthetic analytic-band samples over a short time window
with the radius ODE integrated self-consistently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .band import apply_weight
from .config import RunConfig, cert_constant, initial_data
from .grid import COSINE, SINE, SpectralField, StripGrid, product, to_cosine, to_sine
from .limit import v_from_u
from .lp import (
    DyadicFilterBank,
    NormSeries,
    besov_norm,
    besov_norm_pair,
    block_inner_profile,
    block_l2_profile,
    bony_split,
    build_filter_bank,
    chemin_lerner_norm,
    record_series,
    weighted_cl_norm,
)
from .records import RunRecord

INF = np.inf


@dataclass(frozen=True)
class CertificateReport:
    name: str
    lhs: float
    rhs: float
    fitted_c: float
    budget: float
    status: str                 # "holds" | "violated" | "degenerate"
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
               "fitted_C": self.fitted_c, "status": self.status}
        out.update({k: v for k, v in self.meta.items() if np.isscalar(v) or isinstance(v, str)})
        return out


def _verdict(lhs: float, rhs: float, budget: float, degenerate: bool = False, norm: float = 1.0):
    if degenerate:
        return CertificateReport("", lhs, rhs, float("nan"), budget, "degenerate")
    if rhs == 0.0:
        status = "degenerate" if lhs == 0.0 else "violated"
        return CertificateReport("", lhs, rhs, float("nan") if lhs == 0 else float("inf"), budget, status)
    fitted = lhs / (norm * rhs)
    status = "holds" if lhs <= budget * rhs else "violated"
    return CertificateReport("", lhs, rhs, fitted, budget, status)


def _named(report: CertificateReport, name: str, **meta) -> CertificateReport:
    merged = dict(report.meta)
    merged.update(meta)
    return CertificateReport(name, report.lhs, report.rhs, report.fitted_c,
                             report.budget, report.status, merged)


# -- energy certificates -------------------------------------------------------


def certify_limit_energy(rec: RunRecord, bank: DyadicFilterBank | None = None) -> CertificateReport:
    """Weighted-norm budget of the limit run against the initial data.

    lhs = ||e^{Rt}(u_w, T_w)||_{Linf B^1/2} + 1/2 ||e^{Rt} d_y u_w||_{L2 B^1/2};
    rhs = ||e^{a|Dx|}(u0, T0)||_{B^1/2}; fitted C = lhs / (2 rhs).
    """
    bank = bank or rec.bank
    cfg = rec.config
    pair = NormSeries.combine([rec.weighted("u_w", 0.5), rec.weighted("T_w", 0.5)])
    lhs = chemin_lerner_norm(pair, INF) + 0.5 * chemin_lerner_norm(rec.weighted("dyu_w", 0.5), 2)
    rhs = besov_norm_pair(
        [apply_weight(rec.initial["u"], cfg.a), apply_weight(rec.initial["T"], cfg.a)], 0.5, bank
    )
    rep = _verdict(lhs, rhs, cfg.cert_budget, degenerate=rec.status == "band-exhausted", norm=2.0)
    return _named(rep, "limit_energy", grid=f"{cfg.nx}x{cfg.ny}", dt=cfg.dt)


def certify_dtu(rec: RunRecord, bank: DyadicFilterBank | None = None) -> CertificateReport:
    """Time-derivative estimate of the limit run.

    lhs = ||e^{Rt}(d_t u)_w||_{L2 B^3/2} + 1/2 ||e^{Rt} d_y u_w||_{Linf B^3/2};
    rhs = ||e^{a}d_y u0||_{B^3/2} + ||e^{a}d_y u0||_{B^5/2} + ||e^{a}d_y T0||_{B^3/2}.
    """
    bank = bank or rec.bank
    cfg = rec.config
    if len(rec.times) < 4:
        raise ValueError("trajectory sampled too sparsely for the d_t u certificate; "
                         "rerun with a denser output cadence")
    lhs = chemin_lerner_norm(rec.weighted("dtu_w", 1.5), 2) + 0.5 * chemin_lerner_norm(
        rec.weighted("dyu_w", 1.5), INF
    )
    dyu0 = apply_weight(rec.initial["u"], cfg.a).dy()
    dyT0 = apply_weight(rec.initial["T"], cfg.a).dy()
    rhs = (
        besov_norm(dyu0, 1.5, bank)
        + besov_norm(dyu0, 2.5, bank)
        + besov_norm(dyT0, 1.5, bank)
    )
    # data-budget (small c1): ||e^a u0||_{B 1/2} (1 + ||e^a u0||_{B 3/2} + ||e^a T0||_{B 3/2}) <= c1 a
    u0w = apply_weight(rec.initial["u"], cfg.a)
    T0w = apply_weight(rec.initial["T"], cfg.a)
    c1_value = besov_norm(u0w, 0.5, bank) * (
        1.0 + besov_norm(u0w, 1.5, bank) + besov_norm(T0w, 1.5, bank)
    )
    rep = _verdict(lhs, rhs, cfg.cert_budget, degenerate=rec.status == "band-exhausted")
    return _named(rep, "limit_dtu", grid=f"{cfg.nx}x{cfg.ny}", dt=cfg.dt,
                  c1_budget_value=c1_value, c1_budget_cap=cfg.c0 * cfg.a)


def certify_pe_energy(rec: RunRecord, bank: DyadicFilterBank | None = None) -> CertificateReport:
    """Four-term weighted-norm budget of a PE run against the initial data."""
    bank = bank or rec.bank
    cfg = rec.config
    eps = rec.eps
    sup = NormSeries.combine(
        [rec.weighted("u_w", 0.5), rec.weighted("epsv_w", 0.5), rec.weighted("T_w", 0.5)]
    )
    dy_pair = NormSeries.combine([rec.weighted("dyu_w", 0.5), rec.weighted("epsdyv_w", 0.5)])
    dx_pair = NormSeries.combine([rec.weighted("epsdxu_w", 0.5), rec.weighted("eps2dxv_w", 0.5)])
    gradT = NormSeries.combine([rec.weighted("dxT_w", 0.5), rec.weighted("dyT_w", 0.5)])
    lhs = (
        chemin_lerner_norm(sup, INF)
        + chemin_lerner_norm(dy_pair, 2)
        + chemin_lerner_norm(dx_pair, 2)
        + chemin_lerner_norm(gradT, 2)
    )
    rhs = besov_norm_pair(
        [
            apply_weight(rec.initial["u"], cfg.a),
            eps * apply_weight(to_sine(rec.initial["v"]), cfg.a),
            apply_weight(rec.initial["T"], cfg.a),
        ],
        0.5,
        bank,
    )
    rep = _verdict(lhs, rhs, cfg.cert_budget, degenerate=rec.status == "band-exhausted")
    return _named(rep, "pe_energy", grid=f"{cfg.nx}x{cfg.ny}", dt=cfg.dt, eps=eps)


def smallness_check(
    u0: SpectralField, T0: SpectralField, a: float, bank: DyadicFilterBank,
    c0: float, rweight: float,
) -> CertificateReport:
    """Initial-data smallness: ||e^{a|Dx|}u0||_{B1/2} + ||e^{a|Dx|}T0||_{B1/2} vs c0*a.

    Also reports the margin against the run-up threshold min{1/(2C^2), a/(2 lam)}/C
    with the fitted constant floor C and lam = 2 C^2.
    """
    value = besov_norm(apply_weight(u0, a), 0.5, bank) + besov_norm(apply_weight(T0, a), 0.5, bank)
    cap = c0 * a
    c = cert_constant(rweight)
    lam = 2.0 * c * c
    threshold = min(1.0 / (2.0 * c * c), a / (2.0 * lam)) / c
    if abs(value - cap) <= 1e-12 * max(cap, 1.0):
        status = "boundary"
    else:
        status = "holds" if value < cap else "violated"
    return CertificateReport(
        "smallness", value, cap, value / cap if cap else float("inf"), 1.0, status,
        {"margin_c0": cap - value, "threshold_c2": threshold, "margin_c2": threshold - value},
    )


# -- lemma ratio battery ---------------------------------------------------------


@dataclass(frozen=True)
class LemmaSample:
    """Synthetic analytic-band sample: steady fields, radius evolves over the window."""

    u: SpectralField
    w: SpectralField
    a: float
    lam: float
    eps: float = 0.1


def synthetic_sample(
    grid: StripGrid, seed: int, a: float = 0.5, lam: float = 32.0,
    kmax: int | None = None, mmax: int = 8, amplitude: float = 1e-4, eps: float = 0.1,
) -> LemmaSample:
    """Finite band, e^{-a|k|}-decaying magnitudes, random phases, low sine modes."""
    rng = np.random.default_rng(seed)
    kmax = kmax or grid.nx // 4
    mmax = min(mmax, grid.ny - 1)

    def draw():
        f = SpectralField.zeros(grid, SINE)
        k = np.arange(1, kmax + 1)[:, None]
        xi = 2 * np.pi * k / grid.lx
        mags = rng.uniform(0.3, 1.0, (kmax, mmax))
        phases = rng.uniform(0, 2 * np.pi, (kmax, mmax))
        f.data[1 : kmax + 1, :mmax] = amplitude * mags * np.exp(-a * xi) * np.exp(1j * phases)
        return f

    from .config import compatibility_project

    return LemmaSample(compatibility_project(draw()), draw(), a, lam, eps)


LEMMA_KINDS = ("uww", "vww-u", "vww-T", "vvv")


def lemma_ratio(
    kind: str,
    sample: LemmaSample,
    s: float,
    bank: DyadicFilterBank,
    rweight: float = np.pi**2 / 2.0,
    t_end: float = 0.05,
    n_nodes: int = 9,
    check_bony: bool = False,
) -> CertificateReport:
    """LHS/RHS of one bilinear estimate on a synthetic sample.

    The lemma's left side is the block-summed, time-integrated weighted pairing
    (computed from the direct dealiased product; optionally cross-checked
    against the Bony-split path), the right side the matching weighted
    Chemin-Lerner norm.  The radius ODE runs self-consistently over [0, t_end].
    """
    if kind not in LEMMA_KINDS:
        raise ValueError(f"unknown lemma kind {kind!r}; expected one of {LEMMA_KINDS}")
    if not (0.0 < s <= 1.0):
        raise ValueError(f"lemma ratios are stated for s in (0, 1], got {s}")
    g = sample.u.grid
    times = np.linspace(0.0, t_end, n_nodes)
    dt = times[1] - times[0]
    eps = sample.eps
    v = v_from_u(sample.u)

    # radius history: theta' = ||d_y u_w||_{B 1/2} (tau adds the eps d_y v term)
    acc = 0.0
    radii, rates = [], []
    for j in range(n_nodes):
        radius = sample.a - sample.lam * acc
        if radius <= 0:
            return CertificateReport(f"lemma_{kind}", float("nan"), float("nan"),
                                     float("nan"), INF, "degenerate", {"reason": "band exhausted"})
        u_w = apply_weight(sample.u, radius)
        rate = besov_norm(u_w.dy(), 0.5, bank)
        if kind == "vvv":
            rate += eps * besov_norm(apply_weight(v, radius).dy(), 0.5, bank)
        radii.append(radius)
        rates.append(rate)
        acc += dt * rate
    radii = np.asarray(radii)
    rates = np.asarray(rates)
    ert2 = np.exp(2.0 * rweight * times)

    if kind == "uww":
        prod_ab = (sample.u, sample.w.dx())
        target, parity, prefactor = sample.w, SINE, 1.0
    elif kind == "vww-u":
        prod_ab = (v, sample.u.dy())
        target, parity, prefactor = sample.u, SINE, 1.0
    elif kind == "vww-T":
        prod_ab = (v, sample.w.dy())
        target, parity, prefactor = sample.w, SINE, 1.0
    else:  # vvv
        prod_ab = (v, to_cosine(v.dy()))
        target, parity, prefactor = v, COSINE, eps**2

    direct = product(prod_ab[0], prod_ab[1], parity)
    pairings = np.empty((bank.n_blocks, n_nodes))
    for j, radius in enumerate(radii):
        pairings[:, j] = block_inner_profile(
            apply_weight(direct, radius), apply_weight(target, radius), bank
        )
    lhs_blocks = np.trapezoid(np.abs(pairings) * ert2[None, :], times, axis=1)
    lhs = prefactor * float(np.sum(2.0 ** (2.0 * bank.qs * s) * lhs_blocks))

    bony_rel = None
    if check_bony:
        parts = bony_split(prod_ab[0], prod_ab[1], bank, parity=parity)
        pair_b = np.zeros_like(pairings)
        for piece in parts:
            for j, radius in enumerate(radii):
                pair_b[:, j] += block_inner_profile(
                    apply_weight(piece, radius), apply_weight(target, radius), bank
                )
        lhs_b = prefactor * float(
            np.sum(2.0 ** (2.0 * bank.qs * s) * np.trapezoid(np.abs(pair_b) * ert2[None, :], times, axis=1))
        )
        bony_rel = abs(lhs_b - lhs) / max(lhs, 1e-300)

    ert = np.exp(rweight * times)
    if kind in ("uww", "vww-u"):
        ser = record_series([apply_weight(target, r) for r in radii], times, bank, s=s + 0.5)
        rhs = weighted_cl_norm(ser.scaled_by(ert), rates, p=2) ** 2
    elif kind == "vww-T":
        sup_u = max(besov_norm(apply_weight(sample.u, r), 0.5, bank) for r in radii)
        gt = [
            NormSeries.combine(
                [
                    record_series([apply_weight(sample.w.dx(), r) for r in radii], times, bank, s=s),
                    record_series([apply_weight(sample.w.dy(), r) for r in radii], times, bank, s=s),
                ]
            )
        ][0]
        rhs = sup_u * chemin_lerner_norm(gt.scaled_by(ert), 2) ** 2
    else:
        ser = NormSeries.combine(
            [
                record_series([apply_weight(sample.u, r) for r in radii], times, bank, s=s + 0.5),
                record_series([eps * apply_weight(to_sine(v), r) for r in radii], times, bank, s=s + 0.5),
            ]
        )
        rhs = weighted_cl_norm(ser.scaled_by(ert), rates, p=2) ** 2

    if rhs == 0.0:
        status = "degenerate" if lhs == 0.0 else "violated"
        fitted = float("nan") if lhs == 0.0 else float("inf")
        return CertificateReport(f"lemma_{kind}", lhs, rhs, fitted, INF, status)
    meta = {"s": s, "grid": f"{g.nx}x{g.ny}"}
    if bony_rel is not None:
        meta["bony_rel_err"] = bony_rel
    return CertificateReport(f"lemma_{kind}", lhs, rhs, lhs / rhs, INF, "holds", meta)


def lemma_battery(
    grid: StripGrid, n_samples: int, s: float = 0.5, seed: int = 0,
    kinds=LEMMA_KINDS, rweight: float = np.pi**2 / 2.0, check_bony_first: bool = True,
) -> dict[str, dict]:
    """Max fitted ratio per lemma kind over a family of synthetic samples."""
    bank = build_filter_bank(grid)
    out = {}
    for kind in kinds:
        ratios = []
        bony_err = 0.0
        for i in range(n_samples):
            sample = synthetic_sample(grid, seed=seed + 1000 * i + hash(kind) % 97)
            rep = lemma_ratio(kind, sample, s, bank, rweight,
                              check_bony=(check_bony_first and i == 0))
            if rep.status == "holds":
                ratios.append(rep.fitted_c)
            if "bony_rel_err" in rep.meta:
                bony_err = max(bony_err, rep.meta["bony_rel_err"])
        out[kind] = {"max_ratio": max(ratios), "n": len(ratios), "bony_rel_err": bony_err}
    return out


# -- convergence sweep --------------------------------------------------------------


@dataclass
class SweepResult:
    eps: np.ndarray                 # strictly decreasing
    error_total: np.ndarray
    error_sup: np.ndarray
    error_dy: np.ndarray
    error_eps32: np.ndarray
    init_discrepancy: np.ndarray
    slope: float
    intercept: float
    mu: float
    m_fit: float

    def __post_init__(self):
        if len(self.eps) > 1 and np.any(np.diff(self.eps) >= 0):
            raise ValueError("eps must be strictly decreasing")
        if np.any(self.error_total < 0):
            raise ValueError("errors must be nonnegative")

    def rows(self):
        for i in range(len(self.eps)):
            yield {
                "eps": float(self.eps[i]),
                "error_total": float(self.error_total[i]),
                "error_sup": float(self.error_sup[i]),
                "error_dy": float(self.error_dy[i]),
                "error_eps32": float(self.error_eps32[i]),
                "slope": float(self.slope),
                "intercept": float(self.intercept),
            }


def _m_aggregate(limit_rec: RunRecord, pe_sups: list[float]) -> float:
    """Aggregate norm bound entering the error-system decay rate (fitted)."""
    vals = [1.0] + pe_sups
    for s in (0.5, 2.5):
        vals.append(chemin_lerner_norm(limit_rec.series["u_w"].with_s(s), INF))
        vals.append(chemin_lerner_norm(limit_rec.series["dyu_w"].with_s(s), 2))
    vals.append(chemin_lerner_norm(limit_rec.series["dtu_w"].with_s(1.5), 2))
    return float(max(vals))


def convergence_sweep(config: RunConfig, progress=None) -> SweepResult:
    """Run the limit system once and the PE system per eps, with identical
    grids, steps and initial data, and fit the error-vs-eps slope.

    The three left-side norms use the error-system weight radius a - mu*eta(t)
    with eta accumulated from the recorded PE and limit integrands, and
    mu = max(lam, C * fitted M) unless overridden.
    """
    from .limit import run_limit
    from .pe import run_pe

    eps_list = sorted(config.eps_list(), reverse=True)
    if len(set(eps_list)) != len(eps_list):
        raise ValueError("eps list contains duplicates")
    cfg_limit = RunConfig(**{**config.as_dict(), "eps": eps_list[0]})
    limit_rec = run_limit(cfg_limit, keep_fields=True)
    if progress:
        progress("limit run done")

    pe_recs = []
    for e in eps_list:
        cfg_e = RunConfig(**{**config.as_dict(), "eps": e})
        pe_recs.append(run_pe(cfg_e, keep_fields=True))
        if progress:
            progress(f"pe run eps={e:g} done")

    for rec in pe_recs:
        if not np.array_equal(rec.times, limit_rec.times):
            raise ValueError("PE and limit runs sampled at different instants; "
                             "use identical grids and dt schedules")

    pe_sups = [chemin_lerner_norm(r.series["u_w"].with_s(0.5), INF) for r in pe_recs]
    m_fit = _m_aggregate(limit_rec, pe_sups)
    c = cert_constant(config.rweight)
    mu = config.mu_override if config.mu_override is not None else max(config.lam, c * m_fit)

    bank = limit_rec.bank
    theta_rates = np.asarray(limit_rec.band.history_rate)
    a = config.a
    dt = config.dt

    err_sup, err_dy, err_32, init_disc = [], [], [], []
    for rec in pe_recs:
        eps = rec.eps
        n_rates = min(len(rec.eta_pe_integrand), len(theta_rates) - 1)
        eta_steps = np.concatenate(
            [[0.0], np.cumsum(dt * (rec.eta_pe_integrand[:n_rates] + theta_rates[1 : n_rates + 1]))]
        )
        eta_t = np.asarray(rec.step_times)[: len(eta_steps)]
        w1_list, w2_list, dyw1_list, dyw2_list = [], [], [], []
        for j, t in enumerate(rec.times):
            radius = a - mu * float(np.interp(t, eta_t, eta_steps))
            if radius <= 0:
                raise ValueError(f"error-system band exhausted at t={t:g} (mu={mu:g}); "
                                 "reduce mu_override or the horizon")
            w1 = rec.fields["u"][j] - limit_rec.fields["u"][j]
            w2 = rec.fields["v"][j] - limit_rec.fields["v"][j]
            w1_w = apply_weight(w1, radius)
            w2_w = apply_weight(w2, radius)
            w1_list.append(w1_w)
            w2_list.append(eps * to_sine(w2_w))
            dyw1_list.append(w1_w.dy())
            dyw2_list.append(eps * w2_w.dy())
        pair = NormSeries.combine(
            [record_series(w1_list, rec.times, bank, 0.5),
             record_series(w2_list, rec.times, bank, 0.5)]
        )
        dy_pair = NormSeries.combine(
            [record_series(dyw1_list, rec.times, bank, 0.5),
             record_series(dyw2_list, rec.times, bank, 0.5)]
        )
        err_sup.append(chemin_lerner_norm(pair, INF))
        err_dy.append(chemin_lerner_norm(dy_pair, 2))
        err_32.append(eps * chemin_lerner_norm(pair.with_s(1.5), 2))
        d_u = besov_norm_pair(
            [apply_weight(rec.initial["u"] - limit_rec.initial["u"], a)], 0.5, bank
        )
        d_T = besov_norm_pair(
            [apply_weight(rec.initial["T"] - limit_rec.initial["T"], a)], 0.5, bank
        )
        init_disc.append(d_u + d_T)

    eps_arr = np.asarray(eps_list)
    total = np.asarray(err_sup) + np.asarray(err_dy) + np.asarray(err_32)
    if len(eps_arr) >= 2:
        slope, intercept = np.polyfit(np.log(eps_arr), np.log(total), 1)
    else:
        slope, intercept = float("nan"), float("nan")
    return SweepResult(
        eps_arr, total, np.asarray(err_sup), np.asarray(err_dy), np.asarray(err_32),
        np.asarray(init_disc), float(slope), float(intercept), float(mu), m_fit,
    )
