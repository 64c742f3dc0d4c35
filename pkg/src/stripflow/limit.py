"""Time integration of the hydrostatic limit system on the unit strip.

Prognostic fields are u and T (dirichlet-sine); v is reconstructed from u by
the exact vertical antiderivative of -d_x u, and the horizontal pressure
gradient is reconstructed mode-wise from u and T.  Advection and pressure are
treated explicitly, diffusion by a trapezoidal implicit solve that is diagonal
in Fourier-x x sine-y.  The per-mode constant of the pressure (the periodic
gauge absorbing the mean acceleration) is chosen so the discrete step
preserves the column-mean constraint exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .band import THETA, BandState, advance_theta, apply_weight
from .config import RunConfig, initial_data
from .grid import COSINE, SINE, SpectralField, StripGrid, product, to_sine
from .lp import DyadicFilterBank, besov_norm, build_filter_bank, record_series
from .records import RunRecord


class StepError(RuntimeError):
    """Raised when a time step cannot proceed (CFL, NaN, exhausted band)."""


@dataclass(frozen=True)
class LimitStepParams:
    dt: float
    dealias: bool = True
    rweight: float = np.pi**2 / 2.0
    scheme: str = "imex1"
    forcing_u: Callable[[float], SpectralField] | None = None
    forcing_T: Callable[[float], SpectralField] | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 < self.rweight < np.pi**2):
            raise ValueError("exponential weight rate must lie in (0, pi^2)")


@dataclass(frozen=True, eq=False)
class LimitState:
    t: float
    u: SpectralField
    T: SpectralField
    prev_explicit: tuple | None = None   # (E_u, E_T) of the previous step, for AB2
    diagnostics: dict = field(default_factory=dict)


def v_from_u(u: SpectralField) -> SpectralField:
    """v = -int_0^y d_x u ds (exact, cosine parity); v(0) = 0 by construction."""
    if u.parity != SINE:
        raise ValueError("v reconstruction requires a dirichlet-sine u")
    return -u.dx().integrate_y_from_0()


def v_wall_residual(v: SpectralField) -> float:
    """max_k |v_hat(k, 1)|: nonzero values flag violated compatibility."""
    return float(np.abs(v.trace_y(1)).max())


def column_mean(u: SpectralField) -> np.ndarray:
    """Per-mode int_0^1 u dy (the compatibility functional; k = 0 is exempt)."""
    return u.integral_y()


def column_mean_residual(u: SpectralField) -> float:
    return float(np.abs(column_mean(u)[1:]).max())


def pressure_gradient_limit(u: SpectralField, T: SpectralField, dealias: bool = True) -> SpectralField:
    """Horizontal pressure gradient of the hydrostatic system (cosine parity).

    Per nonzero mode k:
      d_x p = i xi_k [ int_0^y T ds - int_0^1 int_0^y T ds dy - int_0^1 u^2 dy ]
              + d_y u(1) - d_y u(0),
    and the k = 0 mode is zero (periodic gauge absorbing the mean acceleration).
    """
    g = u.grid
    ixk = 1j * g.kx
    intT = T.integrate_y_from_0()               # cosine
    dblT = intT.integral_y()                    # per-mode scalar
    u2 = product(u, u, COSINE, dealias)         # sine*sine expands exactly in cosines
    intu2 = u2.integral_y()
    dyu = u.dy()
    jump = dyu.trace_y(1) - dyu.trace_y(0)

    data = intT.data * ixk[:, None]
    data[:, 0] += ixk * (-dblT - intu2) + jump
    data[0, :] = 0.0
    data[-1, :] = 0.0  # Nyquist dropped with d_x
    return SpectralField(g, data, COSINE)


@dataclass(frozen=True, eq=False)
class TendencyParts:
    explicit_u: SpectralField
    explicit_T: SpectralField
    diffusion_u: SpectralField
    diffusion_T: SpectralField

    def total_u(self) -> SpectralField:
        return self.explicit_u + self.diffusion_u

    def total_T(self) -> SpectralField:
        return self.explicit_T + self.diffusion_T


def rhs_limit(state: LimitState, params: LimitStepParams) -> TendencyParts:
    """Pseudospectral tendencies; diffusion split out for the implicit solve."""
    u, T = state.u, state.T
    g = u.grid
    dealias = params.dealias
    try:
        v = v_from_u(u)
        adv_u = product(u, u.dx(), SINE, dealias) + product(v, u.dy(), SINE, dealias)
        adv_T = product(u, T.dx(), SINE, dealias) + product(v, T.dy(), SINE, dealias)
        px = to_sine(pressure_gradient_limit(u, T, dealias))
    except FloatingPointError as exc:
        raise StepError(f"NaN in nonlinear product at t={state.t:.6g}") from exc
    eu = -(adv_u + px)
    eT = -adv_T
    if params.forcing_u is not None:
        eu = eu + params.forcing_u(state.t)
    if params.forcing_T is not None:
        eT = eT + params.forcing_T(state.t)
    m2 = (g.m_sine * np.pi) ** 2
    diff_u = SpectralField(g, -u.data * m2[None, :], SINE)
    lamT = g.kx[:, None] ** 2 + m2[None, :]
    diff_T = SpectralField(g, -T.data * lamT, SINE)
    return TendencyParts(eu, eT, diff_u, diff_T)


# -- implicit machinery -------------------------------------------------------


def _ones_sine(grid: StripGrid) -> np.ndarray:
    """Sine interpolation coefficients of the constant function 1 on (0,1)."""
    from .grid import _interior_values_to_sine

    return _interior_values_to_sine(np.ones(grid.ny - 1), grid.ny)


def _colmean_weights(grid: StripGrid) -> np.ndarray:
    m = grid.m_sine
    return (1.0 - (-1.0) ** m) / (m * np.pi)


def _cn_update(data, explicit_data, lam, dt):
    """(1 + dt/2 lam)^-1 [(1 - dt/2 lam) data + dt explicit]."""
    den = 1.0 + 0.5 * dt * lam
    num = (1.0 - 0.5 * dt * lam) * data + dt * explicit_data
    return num / den


def _gauged_u_update(u: SpectralField, explicit: SpectralField, dt: float) -> SpectralField:
    """CN step of u with the per-mode pressure gauge re-enforcing the column mean."""
    g = u.grid
    m2 = (g.m_sine * np.pi) ** 2
    den = 1.0 + 0.5 * dt * m2
    w = _colmean_weights(g)
    ones = _ones_sine(g)
    gauge_den = dt * np.dot(w, ones / den)
    raw = _cn_update(u.data, explicit.data, m2[None, :], dt)
    delta = (raw[1:, :] @ w.astype(complex)) / gauge_den
    new = raw.copy()
    new[1:, :] -= np.outer(delta, (dt * ones / den))
    return SpectralField(g, new, SINE)


def check_cfl(u: SpectralField, dt: float) -> float:
    g = u.grid
    umax = float(np.abs(u.values()).max())
    cfl = umax * dt * g.nx / g.lx
    if cfl > 0.5:
        raise StepError(f"CFL violation: |u|max dt Nx/Lx = {cfl:.3g} > 0.5")
    return cfl


def step_limit(state: LimitState, params: LimitStepParams, bank: DyadicFilterBank) -> LimitState:
    """One IMEX step: explicit advection + pressure, trapezoidal implicit diffusion."""
    check_cfl(state.u, params.dt)
    parts = rhs_limit(state, params)
    eu, eT = parts.explicit_u, parts.explicit_T
    if params.scheme == "cnab2" and state.prev_explicit is not None:
        pu, pT = state.prev_explicit
        eu_eff = 1.5 * eu - 0.5 * pu
        eT_eff = 1.5 * eT - 0.5 * pT
    else:
        eu_eff, eT_eff = eu, eT
    g = state.u.grid
    dt = params.dt
    u_new = _gauged_u_update(state.u, eu_eff, dt)
    m2 = (g.m_sine * np.pi) ** 2
    lamT = g.kx[:, None] ** 2 + m2[None, :]
    T_new = SpectralField(g, _cn_update(state.T.data, eT_eff.data, lamT, dt), SINE)
    prev = (eu, eT) if params.scheme == "cnab2" else None
    v = v_from_u(u_new)
    diag = {
        "colmean_res": column_mean_residual(u_new),
        "v_wall_res": v_wall_residual(v),
    }
    return LimitState(state.t + dt, u_new, T_new, prev, diag)


def instantaneous_tendency(state: LimitState, params: LimitStepParams) -> SpectralField:
    """Semi-discrete d_t u including diffusion and the column-mean gauge."""
    parts = rhs_limit(state, params)
    total = parts.total_u()
    g = state.u.grid
    w = _colmean_weights(g)
    ones = _ones_sine(g)
    data = total.data.copy()
    delta = data[1:, :] @ w.astype(complex) / np.dot(w, ones)
    data[1:, :] -= np.outer(delta, ones)
    return SpectralField(g, data, SINE)


# -- full runs ----------------------------------------------------------------


def _limit_sample(state, params, band, bank, rec):
    radius = band.radius
    u_w = apply_weight(state.u, radius)
    T_w = apply_weight(state.T, radius)
    dtu_w = apply_weight(instantaneous_tendency(state, params), radius)
    fields = {
        "u_w": u_w,
        "T_w": T_w,
        "dyu_w": u_w.dy(),
        "dxT_w": T_w.dx(),
        "dyT_w": T_w.dy(),
        "dtu_w": dtu_w,
    }
    for name, f in fields.items():
        rec.setdefault(name, []).append(f)
    return fields


def run_limit(
    config: RunConfig, params: LimitStepParams | None = None, keep_fields: bool = False
) -> RunRecord:
    """Integrate the hydrostatic limit system over the configured horizon.

    Records weighted block tables at the sample cadence, advances theta every
    step, and stops with an explicit status if the analyticity band runs out.
    """
    g = config.grid()
    bank = build_filter_bank(g)
    params = params or LimitStepParams(
        dt=config.dt, dealias=config.dealias, rweight=config.rweight, scheme=config.scheme
    )
    u0, T0 = initial_data(config, g)
    state = LimitState(0.0, u0, T0)
    band = BandState(a=config.a, lam=config.lam, kind=THETA)
    n_steps = config.n_steps()

    sample_fields: dict[str, list] = {}
    sample_times = [0.0]
    diag = {"colmean_res": [column_mean_residual(u0)], "v_wall_res": [v_wall_residual(v_from_u(u0))],
            "l2_u": [u0.l2_norm()], "l2_T": [T0.l2_norm()]}
    _limit_sample(state, params, band, bank, sample_fields)
    kept = {"u": [u0], "T": [T0], "v": [v_from_u(u0)]} if keep_fields else None

    status = "ok"
    for n in range(n_steps):
        u_w = apply_weight(state.u, band.radius)
        band = advance_theta(band, u_w, params.dt, bank)
        if band.exhausted:
            status = "band-exhausted"
            break
        try:
            state = step_limit(state, params, bank)
        except StepError as exc:
            raise StepError(f"step {n + 1}: {exc}") from exc
        if (n + 1) % config.cadence == 0 or n + 1 == n_steps:
            sample_times.append(state.t)
            _limit_sample(state, params, band, bank, sample_fields)
            diag["colmean_res"].append(state.diagnostics["colmean_res"])
            diag["v_wall_res"].append(state.diagnostics["v_wall_res"])
            diag["l2_u"].append(state.u.l2_norm())
            diag["l2_T"].append(state.T.l2_norm())
            if kept is not None:
                kept["u"].append(state.u)
                kept["T"].append(state.T)
                kept["v"].append(v_from_u(state.u))

    times = np.asarray(sample_times)
    series = {
        name: record_series(fields, times, bank, s=0.5, name=name)
        for name, fields in sample_fields.items()
    }
    record = RunRecord(
        kind="limit",
        config=config,
        bank=bank,
        times=times,
        series=series,
        band=band,
        initial={"u": u0, "T": T0},
        final={"u": state.u, "T": state.T, "v": v_from_u(state.u)},
        diagnostics={k: np.asarray(v) for k, v in diag.items()},
        fields=kept,
        status=status,
    )
    record.norm_history = _norm_history(record)
    return record


def _norm_history(rec: RunRecord) -> list[dict]:
    rows = []
    ert = rec.ert()
    for j, t in enumerate(rec.times):
        rows.append({"t": float(t), "name": "l2_u", "s": "", "value": float(rec.diagnostics["l2_u"][j]),
                     "ert_value": float(rec.diagnostics["l2_u"][j] * ert[j])})
        if "l2_T" in rec.diagnostics:
            rows.append({"t": float(t), "name": "l2_T", "s": "", "value": float(rec.diagnostics["l2_T"][j]),
                         "ert_value": float(rec.diagnostics["l2_T"][j] * ert[j])})
        for name, ser in rec.series.items():
            for s in (0.5, 1.5):
                val = float(np.sum(2.0 ** (ser.qs * s) * ser.table[:, j]))
                rows.append({"t": float(t), "name": f"B{s}_{name}", "s": s,
                             "value": val, "ert_value": val * float(ert[j])})
    return rows
