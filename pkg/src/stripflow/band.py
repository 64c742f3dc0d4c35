"""Analytic-in-x weights e^{r |D_x|} and the radius functionals theta, tau, eta.

A BandState tracks one of the three accumulated radius losses: theta for the
hydrostatic limit run (rate ||d_y u_w||_{B^1/2}), tau for the primitive-equation
run (adds eps ||d_y v_w||_{B^1/2}), eta for the error system (PE contribution
||(d_y u_w, eps d_x u_w)||_{B^1/2} plus the limit contribution).  The radius
ODE is integrated by forward Euler synchronized with the solver step, and the
weight is always applied as a diagnostic transform of the stored unweighted
fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import SpectralField
from .lp import DyadicFilterBank, besov_norm, besov_norm_pair

THETA = "theta-limit"
TAU = "tau-pe"
ETA = "eta-error"

WEIGHT_EXP_GUARD = 30.0  # max radius * |xi| allowed in e^{r |xi|}


def apply_weight(f: SpectralField, radius: float) -> SpectralField:
    """Apply the horizontal multiplier e^{radius |xi|} mode-wise.

    Negative radius de-weights.  Guarded against overflow: radius * max|xi|
    must stay below WEIGHT_EXP_GUARD.
    """
    kx = f.grid.kx
    peak = radius * float(kx[-1])
    if peak > WEIGHT_EXP_GUARD:
        k_bad = int(f.grid.kx_int[-1])
        raise OverflowError(
            f"analytic weight overflow: radius*|xi| = {peak:.3g} at mode k={k_bad} "
            f"exceeds guard {WEIGHT_EXP_GUARD}"
        )
    return f.hmult(np.exp(radius * kx))


@dataclass(frozen=True)
class BandState:
    """Analyticity-radius record: radius(t) = a - lam * accumulated."""

    a: float
    lam: float
    kind: str = THETA
    accumulated: float = 0.0
    t: float = 0.0
    history_t: tuple = (0.0,)
    history_acc: tuple = (0.0,)
    history_rate: tuple = (0.0,)
    exhausted: bool = False

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("initial radius a must be positive")
        if self.lam <= 0:
            raise ValueError("decay rate multiplier must be positive")

    @property
    def radius(self) -> float:
        return self.a - self.lam * self.accumulated

    def radius_at(self, t: float) -> float:
        acc = np.interp(t, self.history_t, self.history_acc)
        return self.a - self.lam * float(acc)

    def _advanced(self, rate: float, dt: float) -> "BandState":
        if dt <= 0:
            raise ValueError("dt must be positive")
        if rate < 0:
            raise ValueError("radius-loss integrand must be nonnegative")
        acc = self.accumulated + dt * rate
        return replace(
            self,
            accumulated=acc,
            t=self.t + dt,
            history_t=self.history_t + (self.t + dt,),
            history_acc=self.history_acc + (acc,),
            history_rate=self.history_rate + (rate,),
            exhausted=self.a - self.lam * acc <= 0,
        )


def advance_theta(
    band: BandState, u_phi: SpectralField, dt: float, bank: DyadicFilterBank
) -> BandState:
    """One Euler step of theta' = ||d_y u_phi||_{B^1/2}."""
    if band.kind != THETA:
        raise ValueError(f"advance_theta requires a theta-limit band, got {band.kind}")
    rate = besov_norm(u_phi.dy(), 0.5, bank)
    return band._advanced(rate, dt)


def advance_tau(
    band: BandState,
    u_theta: SpectralField,
    v_theta: SpectralField,
    eps: float,
    dt: float,
    bank: DyadicFilterBank,
) -> BandState:
    """One Euler step of tau' = ||d_y u||_{B^1/2} + eps ||d_y v||_{B^1/2} (weighted fields)."""
    if band.kind != TAU:
        raise ValueError(f"advance_tau requires a tau-pe band, got {band.kind}")
    rate = besov_norm(u_theta.dy(), 0.5, bank) + eps * besov_norm(v_theta.dy(), 0.5, bank)
    return band._advanced(rate, dt)


def advance_eta(
    band: BandState,
    u_theta_pe: SpectralField,
    eps: float,
    u_phi_limit: SpectralField,
    dt: float,
    bank: DyadicFilterBank,
) -> BandState:
    """One Euler step of eta' = ||(d_y u^eps, eps d_x u^eps)||_{B^1/2} + ||d_y u||_{B^1/2}.

    The first argument carries the PE solution weighted by its own tau-band,
    the limit field its phi-band; the capital-Phi weight of the error system is
    read as the limit-system weight.
    """
    if band.kind != ETA:
        raise ValueError(f"advance_eta requires an eta-error band, got {band.kind}")
    pe_part = besov_norm_pair([u_theta_pe.dy(), eps * u_theta_pe.dx()], 0.5, bank)
    rate = pe_part + besov_norm(u_phi_limit.dy(), 0.5, bank)
    return band._advanced(rate, dt)


def band_history_rows(band: BandState):
    """Yield (t, integrand, accumulated, radius) rows, the band CSV schema."""
    for t, rate, acc in zip(band.history_t, band.history_rate, band.history_acc):
        yield (float(t), float(rate), float(acc), float(band.a - band.lam * acc))
