"""Horizontal Littlewood-Paley decomposition and Besov / Chemin-Lerner norms.

The dyadic cutoffs follow the classical mollified-step construction: psi is an
even smooth bump equal to 1 on |z| <= 3/4 and supported in |z| < 4/3, and
phi(z) = psi(z/2) - psi(z), so that phi is supported in the ring
3/4 <= |z| <= 8/3 and is identically 1 on 4/3 <= |z| <= 3/2.  On the discrete
torus the homogeneous sum over q in Z is replaced by a hybrid: blocks
q_min..q_max cover every nonzero grid wavenumber and everything below q_min is
absorbed into one inhomogeneous catch-all psi(2^{-q_min} .), carried here with
block index q_min - 1.  The horizontal mean mode k = 0 is excluded from all
Besov-type sums and reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .grid import SINE, SpectralField, StripGrid, product

# Cutoff geometry fixed by the construction above.
PSI_FLAT = 0.75      # psi == 1 on |z| <= 3/4
PSI_SUPP = 4.0 / 3.0  # psi == 0 on |z| >= 4/3
RING_INNER = 0.75    # supp phi = [3/4, 8/3]
RING_OUTER = 8.0 / 3.0
RING_FLAT_LO = 4.0 / 3.0  # phi == 1 on [4/3, 3/2]
RING_FLAT_HI = 1.5


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity transition: 0 for t <= 0, 1 for t >= 1, strictly monotone between."""
    t = np.asarray(t, dtype=float)
    a = np.zeros_like(t)
    pos = t > 0
    a[pos] = np.exp(-1.0 / t[pos])
    b = np.zeros_like(t)
    neg = t < 1
    b[neg] = np.exp(-1.0 / (1.0 - t[neg]))
    return a / (a + b)


def psi_profile(z) -> np.ndarray:
    """Low-frequency cutoff psi: even, 1 on |z| <= 3/4, 0 on |z| >= 4/3."""
    z = np.abs(np.asarray(z, dtype=float))
    return _smooth_step((PSI_SUPP - z) / (PSI_SUPP - PSI_FLAT))


def phi_profile(z) -> np.ndarray:
    """Annulus cutoff phi(z) = psi(z/2) - psi(z)."""
    z = np.asarray(z, dtype=float)
    return psi_profile(z / 2.0) - psi_profile(z)


def partition_sum(xi, q_min: int, q_max: int) -> np.ndarray:
    """psi(2^-q_min xi) + sum_{q_min <= j <= q_max} phi(2^-j xi)."""
    xi = np.asarray(xi, dtype=float)
    total = psi_profile(xi * 2.0 ** (-q_min))
    for j in range(q_min, q_max + 1):
        total = total + phi_profile(xi * 2.0 ** (-j))
    return total


@dataclass(frozen=True, eq=False)
class DyadicFilterBank:
    """Precomputed psi/phi cutoff samples on a grid's half spectrum.

    ``phi_values[qi]`` holds phi(2^-q |xi_k|) for q = q_min + qi; ``psi_values``
    is the catch-all psi(2^-q_min |xi_k|).  ``annulus_flags`` marks wavenumbers
    where the block multiplier is identically 1.
    """

    grid: StripGrid
    q_min: int
    q_max: int
    psi_values: np.ndarray       # (nkx,)
    phi_values: np.ndarray       # (nq, nkx)
    annulus_flags: np.ndarray    # (nq, nkx) bool
    bernstein_constant: float = RING_OUTER

    @property
    def qs(self) -> np.ndarray:
        """Block indices including the catch-all at q_min - 1."""
        return np.arange(self.q_min - 1, self.q_max + 1)

    @property
    def n_blocks(self) -> int:
        return self.q_max - self.q_min + 2

    def multiplier(self, q: int) -> np.ndarray:
        """Cutoff samples of block q (catch-all at q = q_min - 1; else zeros)."""
        if q == self.q_min - 1:
            return self.psi_values
        if self.q_min <= q <= self.q_max:
            return self.phi_values[q - self.q_min]
        return np.zeros_like(self.psi_values)

    def stack(self) -> np.ndarray:
        """(n_blocks, nkx) multipliers, catch-all first."""
        return np.vstack([self.psi_values[None, :], self.phi_values])


def build_filter_bank(grid: StripGrid) -> DyadicFilterBank:
    """Build the dyadic bank covering every nonzero wavenumber of the grid."""
    if grid.nx < 8:
        raise ValueError("grid too coarse for a dyadic decomposition (nx < 8)")
    xi_min = 2.0 * np.pi / grid.lx
    xi_max = float(grid.kx[-1])
    q_min = math.floor(math.log2(xi_min))
    q_max = math.ceil(math.log2(xi_max))
    xi = grid.kx
    psi_vals = psi_profile(xi * 2.0 ** (-q_min))
    phi_vals = np.vstack([phi_profile(xi * 2.0 ** (-q)) for q in range(q_min, q_max + 1)])
    flags = np.zeros_like(phi_vals, dtype=bool)
    for qi, q in enumerate(range(q_min, q_max + 1)):
        z = np.abs(xi) * 2.0 ** (-q)
        flags[qi] = (z >= RING_FLAT_LO) & (z <= RING_FLAT_HI)
    return DyadicFilterBank(grid, q_min, q_max, psi_vals, phi_vals, flags)


def dyadic_block(f: SpectralField, q: int, bank: DyadicFilterBank) -> SpectralField:
    """Delta_q^h f: horizontal annulus cutoff at scale 2^q (zero out of range)."""
    return f.hmult(bank.multiplier(q))


def low_pass(f: SpectralField, q: int, bank: DyadicFilterBank) -> SpectralField:
    """S_q^h f: horizontal low-pass psi(2^-q |D_x|)."""
    return f.hmult(psi_profile(f.grid.kx * 2.0 ** (-q)))


def block_l2_profile(f: SpectralField, bank: DyadicFilterBank) -> np.ndarray:
    """||Delta_q f||_{L2} for q over bank.qs, mean mode excluded."""
    g = f.grid
    vw = f._vertical_weights()
    kw = g.kx_weight.copy()
    kw[0] = 0.0  # mean-mode convention
    energy = kw[:, None] * vw[None, :] * np.abs(f.data) ** 2  # (nkx, nv)
    ek = np.sum(energy, axis=1)
    mults = bank.stack() ** 2
    return np.sqrt(g.lx * (mults @ ek))


def besov_norm(f: SpectralField, s: float, bank: DyadicFilterBank) -> float:
    """B^s norm: sum_q 2^{qs} ||Delta_q^h f||_{L2} over the hybrid block range.

    Validated for s in [-2, 3]; the k = 0 mode is excluded by convention.
    """
    if not (-2.0 <= s <= 3.0):
        raise ValueError(f"regularity index s={s} outside validated range [-2, 3]")
    blocks = block_l2_profile(f, bank)
    return float(np.sum(2.0 ** (bank.qs * s) * blocks))


def block_inner_profile(f: SpectralField, g: SpectralField, bank: DyadicFilterBank) -> np.ndarray:
    """<Delta_q f, Delta_q g>_{L2} for q over bank.qs, mean mode excluded.

    Fields must share parity (Parseval pairing with the block multiplier
    applied to both factors).
    """
    f._check_compatible(g)
    vw = f._vertical_weights()
    kw = f.grid.kx_weight.copy()
    kw[0] = 0.0
    pair_k = np.sum(kw[:, None] * vw[None, :] * np.real(f.data * np.conj(g.data)), axis=1)
    mults = bank.stack() ** 2
    return f.grid.lx * (mults @ pair_k)


def besov_norm_pair(fs: list[SpectralField], s: float, bank: DyadicFilterBank) -> float:
    """B^s norm of a tuple of fields, with ||Delta_q (f1,..)|| = sqrt(sum ||Delta_q fi||^2)."""
    if not (-2.0 <= s <= 3.0):
        raise ValueError(f"regularity index s={s} outside validated range [-2, 3]")
    prof = np.sqrt(sum(block_l2_profile(f, bank) ** 2 for f in fs))
    return float(np.sum(2.0 ** (bank.qs * s) * prof))


# -- time-indexed block profiles ------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormSeries:
    """Per-block L2 norms ||Delta_q^h f(t)||_{L2} on a (q, t) table."""

    times: np.ndarray   # (nt,) strictly increasing
    qs: np.ndarray      # (nq,) block indices, catch-all first
    table: np.ndarray   # (nq, nt) nonnegative
    s: float = 0.5
    name: str = ""

    def __post_init__(self):
        if self.table.shape != (len(self.qs), len(self.times)):
            raise ValueError("table shape does not match (qs, times)")
        if len(self.times) and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.table < 0):
            raise ValueError("block norms must be nonnegative")

    def with_s(self, s: float) -> "NormSeries":
        return replace(self, s=s)

    def scaled_by(self, factor: np.ndarray) -> "NormSeries":
        """Multiply each time column by factor(t) (e.g. exp(R t))."""
        factor = np.asarray(factor, dtype=float)
        if factor.shape != self.times.shape:
            raise ValueError("time factor length mismatch")
        if np.any(factor < 0):
            raise ValueError("time factor must be nonnegative")
        return replace(self, table=self.table * factor[None, :])

    @staticmethod
    def combine(series: list["NormSeries"], name: str = "") -> "NormSeries":
        """Tuple norm series: blockwise sqrt of summed squares."""
        base = series[0]
        for other in series[1:]:
            if not np.array_equal(other.times, base.times) or not np.array_equal(other.qs, base.qs):
                raise ValueError("mismatched block sets or sample times across series")
        table = np.sqrt(sum(s.table**2 for s in series))
        return replace(base, table=table, name=name or base.name)


def record_series(
    fields_by_time: list[SpectralField],
    times: np.ndarray,
    bank: DyadicFilterBank,
    s: float = 0.5,
    name: str = "",
) -> NormSeries:
    table = np.stack([block_l2_profile(f, bank) for f in fields_by_time], axis=1)
    return NormSeries(np.asarray(times, dtype=float), bank.qs, table, s, name)


def _block_time_lp(series: NormSeries, p, weight: np.ndarray | None = None) -> np.ndarray:
    """Per-block (int w(t) ||Delta_q f||^p dt)^{1/p} by trapezoid; sup for p = inf."""
    if len(series.times) == 0:
        raise ValueError("empty norm series")
    if p == np.inf or p == "inf":
        if weight is not None:
            raise ValueError("weighted Chemin-Lerner norms require finite p")
        return np.max(series.table, axis=1)
    if p not in (1, 2):
        raise ValueError(f"unsupported exponent p={p}; use 1, 2 or inf")
    integrand = series.table**p
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != series.times.shape:
            raise ValueError("weight must be sampled at the series instants")
        if np.any(weight < 0):
            raise ValueError("weight must be nonnegative")
        integrand = integrand * weight[None, :]
    if len(series.times) == 1:
        return np.zeros(len(series.qs))
    return np.trapezoid(integrand, series.times, axis=1) ** (1.0 / p)


def chemin_lerner_norm(series: NormSeries, p) -> float:
    """L-tilde^p_T(B^s): blockwise time-L^p, then the 2^{qs}-weighted block sum."""
    per_block = _block_time_lp(series, p)
    return float(np.sum(2.0 ** (series.qs * series.s) * per_block))


def weighted_cl_norm(series: NormSeries, weight: np.ndarray, p=2) -> float:
    """Time-weighted Chemin-Lerner norm with nonnegative weight f(t) in the integral."""
    per_block = _block_time_lp(series, p, weight=weight)
    return float(np.sum(2.0 ** (series.qs * series.s) * per_block))


# -- Bony decomposition ----------------------------------------------------------


def bony_split(
    a: SpectralField,
    b: SpectralField,
    bank: DyadicFilterBank,
    dealias: bool = True,
    parity: str = SINE,
) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Paraproducts and remainder (T_a b, T_b a, R(a, b)) of the product a*b.

    T_a b = sum_q S_{q-1} a Delta_q b and R(a,b) = sum_{|q-q'|<=1} Delta_q a
    Delta_q' b, with the catch-all behaving as block q_min - 1; the three parts
    sum to the dealiased pointwise product exactly (up to roundoff).  The mean
    mode participates here (through the catch-all) so reconstruction is exact.
    """
    g = a.grid
    qs = bank.qs
    blocks_a = [dyadic_block(a, q, bank) for q in qs]
    blocks_b = [dyadic_block(b, q, bank) for q in qs]

    Tab = SpectralField.zeros(g, parity)
    Tba = SpectralField.zeros(g, parity)
    R = SpectralField.zeros(g, parity)
    for i, q in enumerate(qs):
        if q >= bank.q_min + 1:
            sa = low_pass(a, q - 1, bank)
            sb = low_pass(b, q - 1, bank)
            Tab = Tab + product(sa, blocks_b[i], parity, dealias)
            Tba = Tba + product(sb, blocks_a[i], parity, dealias)
        for j, qp in enumerate(qs):
            if abs(q - qp) <= 1:
                R = R + product(blocks_a[i], blocks_b[j], parity, dealias)
    return Tab, Tba, R


# -- Bernstein ratio ---------------------------------------------------------------


@dataclass(frozen=True)
class BernsteinReport:
    ratio: float
    lower: float
    upper: float
    degenerate: bool
    within: bool


def bernstein_ratio(
    f: SpectralField, k: int, lam: float, bank: DyadicFilterBank,
    r1: float = RING_INNER, r2: float = RING_OUTER,
) -> BernsteinReport:
    """||d_x^k f||_{L2} / (lam^k ||f||_{L2}) for a ring-supported field.

    The input must be horizontally supported in r1*lam <= |xi| <= r2*lam; the
    ratio is checked against [C^-k, C^k] for the bank's Bernstein constant.
    """
    xi = f.grid.kx
    energy = np.sum(np.abs(f.data) ** 2, axis=1) * f.grid.kx_weight
    outside = (energy > 1e-24 * max(energy.max(), 1e-300)) & ~(
        (np.abs(xi) >= r1 * lam) & (np.abs(xi) <= r2 * lam)
    )
    if np.any(outside):
        bad = xi[outside][0]
        raise ValueError(f"field is not band-limited to the ring: mode xi={bad:g} populated")
    norm = f.l2_norm()
    if norm == 0.0:
        return BernsteinReport(float("nan"), 0.0, 0.0, True, False)
    df = f
    for _ in range(k):
        df = df.dx()
    ratio = df.l2_norm() / (lam**k * norm)
    c = bank.bernstein_constant
    lo, hi = c ** (-k), c**k
    return BernsteinReport(ratio, lo, hi, False, lo <= ratio <= hi)


# -- serialization ------------------------------------------------------------------


def series_to_csv_rows(series: NormSeries):
    """Yield (t, q, block_l2) rows, the NormSeries CSV schema."""
    for j, t in enumerate(series.times):
        for i, q in enumerate(series.qs):
            yield (float(t), int(q), float(series.table[i, j]))
