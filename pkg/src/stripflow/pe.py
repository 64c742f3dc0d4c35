"""Time integration of the scaled primitive equations on the unit strip.

Prognostic fields are u, T (dirichlet-sine) and v, which is carried in the
neumann-cosine basis so that exactly divergence-free states exist in the
discrete calculus: div = d_x u + d_y v then lives in the sine basis and the
pressure-correction solve is diagonal per (k, m).  The wall values of v are
enforced algebraically each step: the free cosine constant pins v(y=0) = 0 and
the column-mean gauge on u pins v(y=1) = 0.  The ``eps^-2`` buoyancy stiffness
is removed by the hydrostatic split p = p_h + q with d_y p_h = T (exact in the
sine/cosine calculus); disable the split for stiffness studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .band import TAU, BandState, advance_tau, apply_weight
from .config import RunConfig, initial_data
from .grid import COSINE, SINE, SpectralField, StripGrid, product, to_cosine, to_sine
from .limit import LimitStepParams, StepError, _colmean_weights, _cn_update, _ones_sine, check_cfl, v_from_u
from .lp import DyadicFilterBank, besov_norm_pair, build_filter_bank, record_series
from .records import RunRecord


@dataclass(frozen=True)
class PEStepParams:
    dt: float
    eps: float
    dealias: bool = True
    rweight: float = np.pi**2 / 2.0
    scheme: str = "imex1"
    hydrostatic_split: bool = True
    stiffness_safety: float = 0.25
    forcing_u: Callable[[float], SpectralField] | None = None
    forcing_T: Callable[[float], SpectralField] | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")


@dataclass(frozen=True, eq=False)
class PEState:
    t: float
    u: SpectralField          # dirichlet-sine
    v: SpectralField          # neumann-cosine carrier, walls pinned to 0
    T: SpectralField          # dirichlet-sine
    eps: float
    prev_explicit: tuple | None = None
    diagnostics: dict = field(default_factory=dict)


def divergence(u: SpectralField, v: SpectralField) -> SpectralField:
    """d_x u + d_y v in the sine basis (exact for sine u, cosine v)."""
    return u.dx() + v.dy()


def divergence_residual(u: SpectralField, v: SpectralField) -> float:
    return float(np.abs(divergence(u, v).data).max())


def hydrostatic_pressure(T: SpectralField) -> SpectralField:
    """p_h with d_y p_h = T exactly: the vertical antiderivative of T (cosine)."""
    return T.integrate_y_from_0()


def rescale_to_physical(state: PEState):
    """Undo the strip scaling: fields on the thin strip of width eps.

    Returns (U1, U2, T, y_thin) as value arrays on (x_i, eps*y_j) with the
    velocity scaling (u, eps*v).
    """
    eps = state.eps
    return (
        state.u.values(),
        eps * state.v.values(),
        state.T.values(),
        eps * state.u.grid.y,
    )


# -- the elliptic solve --------------------------------------------------------


def anisotropic_pressure_solve(
    rhs: SpectralField,
    neumann_top: np.ndarray,
    neumann_bottom: np.ndarray,
    eps: float,
) -> SpectralField:
    """Solve (d_xx + eps^-2 d_yy) p = rhs with Neumann data d_y p at the walls.

    Per horizontal mode this is a 1D two-point boundary value problem; here it
    is solved in the cosine basis (diagonal per vertical mode) after lifting
    the Neumann data by a quadratic polynomial.  The k = 0 mode requires the
    compatibility int rhs = eps^-2 (top - bottom) flux and is fixed by a
    zero-mean gauge.  Homogeneous data yield a neumann-cosine field; nonzero
    wall slopes cannot live in the cosine basis, so those solutions are
    returned on collocation values with the lifting added pointwise.
    """
    g = rhs.grid
    rhs_c = to_cosine(rhs)
    gt = np.asarray(neumann_top, dtype=complex)
    gb = np.asarray(neumann_bottom, dtype=complex)
    if gt.shape != (g.nx // 2 + 1,) or gb.shape != (g.nx // 2 + 1,):
        raise ValueError("Neumann data must be sampled per horizontal mode")

    defect = abs(rhs_c.data[0, 0] - (gt[0] - gb[0]) / eps**2)
    if defect > 1e-10 * max(1.0, float(np.abs(rhs_c.data).max())):
        raise ValueError(
            f"k=0 solvability violated: mean rhs minus Neumann flux defect = {defect:.3e}"
        )

    homogeneous = not (np.any(gt != 0) or np.any(gb != 0))
    xi2 = g.kx**2
    y = g.y
    if homogeneous:
        resid = rhs_c.data
    else:
        # quadratic lifting L(y) = gb y + (gt-gb) y^2/2 carries the wall slopes
        lift_vals = gb[:, None] * y[None, :] + (gt - gb)[:, None] * (y**2 / 2.0)[None, :]
        lift_c = to_cosine(SpectralField(g, lift_vals, "collocation"))
        op_lift = -xi2[:, None] * lift_c.data
        op_lift[:, 0] += (gt - gb) / eps**2
        resid = rhs_c.data - op_lift

    m = g.m_cosine
    denom = -(xi2[:, None] + (m[None, :] * np.pi) ** 2 / eps**2)
    denom[0, 0] = 1.0  # gauge slot
    sol = resid / denom
    sol[0, 0] = 0.0
    if homogeneous:
        out = SpectralField(g, sol, COSINE)
        data = out.data.copy()
        data[0, 0] -= out.integral_y()[0]
        return SpectralField(g, data, COSINE)
    vals = SpectralField(g, sol, COSINE).colloc().data + lift_vals
    out = SpectralField(g, vals, "collocation")
    data = out.data.copy()
    data[0, :] -= out.integral_y()[0]
    return SpectralField(g, data, "collocation")


# -- tendencies ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PETendencyParts:
    explicit_u: SpectralField
    explicit_v: SpectralField   # cosine
    explicit_T: SpectralField


def rhs_pe(state: PEState, params: PEStepParams) -> PETendencyParts:
    """Dealiased explicit tendencies; diffusion is handled by the implicit solve.

    With the hydrostatic split on, the buoyancy eps^-2 (T - d_y p_h) vanishes
    identically and only d_x p_h survives in the u equation; with the split off
    the full eps^-2 T buoyancy is explicit and the stiffness guard applies.
    """
    u, v, T = state.u, state.v, state.T
    dealias = params.dealias
    try:
        adv_u = product(u, u.dx(), SINE, dealias) + product(v, u.dy(), SINE, dealias)
        adv_v = to_cosine(
            product(u, v.dx(), COSINE, dealias) + product(v, to_cosine(v.dy()), COSINE, dealias)
        )
        adv_T = product(u, T.dx(), SINE, dealias) + product(v, T.dy(), SINE, dealias)
    except FloatingPointError as exc:
        raise StepError(f"NaN in nonlinear product at t={state.t:.6g}") from exc
    eu = -adv_u
    ev = -adv_v
    eT = -adv_T
    if params.hydrostatic_split:
        ph = hydrostatic_pressure(T)
        eu = eu - to_sine(ph.dx())
    else:
        buoy = to_cosine(T) * (1.0 / params.eps**2)
        ev = ev + buoy
    if params.forcing_u is not None:
        eu = eu + params.forcing_u(state.t)
    if params.forcing_T is not None:
        eT = eT + params.forcing_T(state.t)
    return PETendencyParts(eu, ev, eT)


# -- projection step ------------------------------------------------------------


def _project(
    u_star: SpectralField,
    v_star: SpectralField,
    dt: float,
    eps: float,
    cn_den: np.ndarray | None = None,
):
    """Exact discrete projection with the column-mean pressure gauge.

    Finds the sine-basis correction potential q and the per-mode gauge delta
    such that the corrected (u, v) satisfy d_x u + d_y v = 0 on every sine mode
    and int_0^1 u dy = 0 on every nonzero horizontal mode; the free cosine
    constant of v then pins both wall values of v to zero.

    When ``cn_den`` (the implicit-solve denominators of the u update) is given,
    the gauge is routed through the implicit solve exactly like the limit
    solver's pressure gauge, so the eps -> 0 limit of this step reproduces the
    limit-system step; the divergence correction itself stays post-solve.
    """
    g = u_star.grid
    mpi = g.m_sine * np.pi
    xi = g.kx.copy()
    xi[-1] = 0.0  # Nyquist carries no d_x in this calculus
    A = xi[:, None] ** 2 + (mpi[None, :] / eps) ** 2   # (nkx, ny-1)
    w = _colmean_weights(g)
    ones = _ones_sine(g)
    if cn_den is None:
        cn_den = np.ones_like(A)

    div_star = u_star.dx().data - v_star.data[:, 1:-1] * mpi[None, :]
    ones_den = ones[None, :] / cn_den                   # (nkx, ny-1)

    # gauge: column mean of corrected u vanishes for k != 0
    ik = 1j * xi
    num = u_star.data @ w.astype(complex) + ik * ((div_star / A) @ w.astype(complex))
    den = dt * np.sum(w[None, :] * ones_den * (1.0 - xi[:, None] ** 2 / A), axis=1)
    delta = np.zeros_like(num)
    delta[1:] = num[1:] / den[1:]

    q = (-div_star + dt * ik[:, None] * delta[:, None] * ones_den) / (dt * A)

    u_data = u_star.data - dt * (ik[:, None] * q + delta[:, None] * ones_den)
    v_data = v_star.data.copy()
    v_data[:, 1:-1] -= dt * (mpi[None, :] * q) / eps**2
    v_data[:, 0] -= np.sum(v_data, axis=1)  # pin v(y=0) = 0
    u_new = SpectralField(g, u_data, SINE)
    v_new = SpectralField(g, v_data, COSINE)
    q_field = SpectralField(g, q, SINE)
    return u_new, v_new, q_field


def step_pe(state: PEState, params: PEStepParams, bank: DyadicFilterBank) -> PEState:
    """IMEX predictor (diagonal implicit diffusion) followed by the projection."""
    check_cfl(state.u, params.dt)
    eps, dt = params.eps, params.dt
    if not params.hydrostatic_split:
        tmax = float(np.abs(state.T.values()).max())
        if tmax > 0 and dt > eps**2 * params.stiffness_safety / tmax:
            raise StepError(
                f"stiffness guard: dt={dt:g} exceeds eps^2*safety/max|T| = "
                f"{eps**2 * params.stiffness_safety / tmax:g} with hydrostatic split disabled"
            )
    parts = rhs_pe(state, params)
    if params.scheme == "cnab2" and state.prev_explicit is not None:
        pu, pv, pT = state.prev_explicit
        eu = 1.5 * parts.explicit_u - 0.5 * pu
        ev = 1.5 * parts.explicit_v - 0.5 * pv
        eT = 1.5 * parts.explicit_T - 0.5 * pT
    else:
        eu, ev, eT = parts.explicit_u, parts.explicit_v, parts.explicit_T

    g = state.u.grid
    m2s = (g.m_sine * np.pi) ** 2
    m2c = (g.m_cosine * np.pi) ** 2
    xi2 = g.kx**2
    lam_u = eps**2 * xi2[:, None] + m2s[None, :]
    lam_v = eps**2 * xi2[:, None] + m2c[None, :]
    lam_T = xi2[:, None] + m2s[None, :]

    u_star = SpectralField(g, _cn_update(state.u.data, eu.data, lam_u, dt), SINE)
    v_star = SpectralField(g, _cn_update(state.v.data, ev.data, lam_v, dt), COSINE)
    T_new = SpectralField(g, _cn_update(state.T.data, eT.data, lam_T, dt), SINE)

    u_new, v_new, q = _project(u_star, v_star, dt, eps, cn_den=1.0 + 0.5 * dt * lam_u)
    prev = (parts.explicit_u, parts.explicit_v, parts.explicit_T) if params.scheme == "cnab2" else None
    diag = {
        "div_res": divergence_residual(u_new, v_new),
        "v_wall_res": max(
            float(np.abs(v_new.trace_y(0)).max()), float(np.abs(v_new.trace_y(1)).max())
        ),
        "hydro_imbalance": q.dy().l2_norm(),
        "energy": 0.5 * (u_new.l2_norm() ** 2 + eps**2 * v_new.l2_norm() ** 2),
    }
    return PEState(state.t + dt, u_new, v_new, T_new, eps, prev, diag)


# -- full runs --------------------------------------------------------------------


def _pe_sample(state: PEState, band: BandState, bank, rec):
    eps = state.eps
    radius = band.radius
    u_w = apply_weight(state.u, radius)
    v_w = apply_weight(state.v, radius)
    T_w = apply_weight(state.T, radius)
    fields = {
        "u_w": u_w,
        "epsv_w": eps * to_sine(v_w),
        "T_w": T_w,
        "dyu_w": u_w.dy(),
        "epsdyv_w": eps * v_w.dy(),
        "epsdxu_w": eps * u_w.dx(),
        "eps2dxv_w": eps * eps * to_sine(v_w.dx()),
        "dxT_w": T_w.dx(),
        "dyT_w": T_w.dy(),
    }
    for name, f in fields.items():
        rec.setdefault(name, []).append(f)


def run_pe(
    config: RunConfig, params: PEStepParams | None = None, keep_fields: bool = False
) -> RunRecord:
    """Integrate the primitive equations at the configured eps.

    Tracks tau every step, records the Theorem-norm block tables at the sample
    cadence plus the per-step integrand needed by the error-system band.
    """
    g = config.grid()
    bank = build_filter_bank(g)
    eps = config.eps_scalar
    params = params or PEStepParams(
        dt=config.dt, eps=eps, dealias=config.dealias, rweight=config.rweight,
        scheme=config.scheme, hydrostatic_split=config.hydrostatic_split,
    )
    u0, T0 = initial_data(config, g)
    v0 = v_from_u(u0)
    state = PEState(0.0, u0, v0, T0, eps)
    band = BandState(a=config.a, lam=config.lam, kind=TAU)
    n_steps = config.n_steps()

    sample_fields: dict[str, list] = {}
    sample_times = [0.0]
    diag = {
        "div_res": [divergence_residual(u0, v0)],
        "v_wall_res": [float(np.abs(v0.trace_y(1)).max())],
        "hydro_imbalance": [0.0],
        "energy": [0.5 * (u0.l2_norm() ** 2 + eps**2 * v0.l2_norm() ** 2)],
        "l2_u": [u0.l2_norm()],
        "l2_T": [T0.l2_norm()],
    }
    _pe_sample(state, band, bank, sample_fields)
    step_times = [0.0]
    eta_rates = []
    kept = {"u": [u0], "T": [T0], "v": [v0]} if keep_fields else None

    status = "ok"
    for n in range(n_steps):
        u_w = apply_weight(state.u, band.radius)
        v_w = apply_weight(state.v, band.radius)
        eta_rates.append(besov_norm_pair([u_w.dy(), eps * u_w.dx()], 0.5, bank))
        band = advance_tau(band, u_w, v_w, eps, params.dt, bank)
        if band.exhausted:
            status = "band-exhausted"
            break
        try:
            state = step_pe(state, params, bank)
        except StepError as exc:
            raise StepError(f"step {n + 1}: {exc}") from exc
        step_times.append(state.t)
        if (n + 1) % config.cadence == 0 or n + 1 == n_steps:
            sample_times.append(state.t)
            _pe_sample(state, band, bank, sample_fields)
            for key in ("div_res", "v_wall_res", "hydro_imbalance", "energy"):
                diag[key].append(state.diagnostics[key])
            diag["l2_u"].append(state.u.l2_norm())
            diag["l2_T"].append(state.T.l2_norm())
            if kept is not None:
                kept["u"].append(state.u)
                kept["T"].append(state.T)
                kept["v"].append(state.v)

    times = np.asarray(sample_times)
    series = {
        name: record_series(fields, times, bank, s=0.5, name=name)
        for name, fields in sample_fields.items()
    }
    record = RunRecord(
        kind="pe",
        config=config,
        bank=bank,
        times=times,
        series=series,
        band=band,
        initial={"u": u0, "T": T0, "v": v0},
        final={"u": state.u, "T": state.T, "v": state.v},
        diagnostics={k: np.asarray(v) for k, v in diag.items()},
        step_times=np.asarray(step_times),
        eta_pe_integrand=np.asarray(eta_rates),
        eps=eps,
        fields=kept,
        status=status,
    )
    record.norm_history = _pe_norm_history(record)
    return record


def _pe_norm_history(rec: RunRecord) -> list[dict]:
    rows = []
    ert = rec.ert()
    for j, t in enumerate(rec.times):
        for key in ("l2_u", "l2_T"):
            rows.append({"t": float(t), "name": key, "s": "",
                         "value": float(rec.diagnostics[key][j]),
                         "ert_value": float(rec.diagnostics[key][j] * ert[j])})
        for name, ser in rec.series.items():
            val = float(np.sum(2.0 ** (ser.qs * 0.5) * ser.table[:, j]))
            rows.append({"t": float(t), "name": f"B0.5_{name}", "s": 0.5,
                         "value": val, "ert_value": val * float(ert[j])})
    return rows
