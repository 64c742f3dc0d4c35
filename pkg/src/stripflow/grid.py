"""Spectral fields on the unit strip.

The domain is S = [0, Lx) x (0, 1): periodic Fourier modes in the
horizontal direction x, sine or cosine series in the wall-normal
direction y.  A field f is stored as complex horizontal coefficients
``data[k, m]`` against the basis e^{i xi_k x} * B_m(y), where
xi_k = 2*pi*k/Lx for k = 0..Nx/2 (real-transform half spectrum;
negative modes are implied by conjugate symmetry) and B_m is

* ``sin(m*pi*y)``, m = 1..Ny-1   for parity "dirichlet-sine",
* ``cos(m*pi*y)``, m = 0..Ny     for parity "neumann-cosine",
* point values at y_j = j/Ny     for parity "collocation".

Dirichlet-sine fields therefore vanish at y in {0, 1} exactly, and the
vertical calculus (d/dy, antiderivatives, L2 norms) is exact on the
retained modes.  Nonlinear products are evaluated pseudospectrally on
the collocation nodes with an optional 2/3 horizontal dealias mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

SINE = "dirichlet-sine"
COSINE = "neumann-cosine"
COLLOC = "collocation"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class StripGrid:
    """Discretization of the unit strip: Nx horizontal modes, Ny vertical cells."""

    nx: int
    ny: int
    lx: float = 2.0 * np.pi

    def __post_init__(self):
        if not (_is_pow2(self.nx) and self.nx >= 8):
            raise ValueError(f"nx must be a power of two >= 8, got {self.nx}")
        if not (_is_pow2(self.ny) and self.ny >= 8):
            raise ValueError(f"ny must be a power of two >= 8, got {self.ny}")
        if not self.lx > 0:
            raise ValueError(f"lx must be positive, got {self.lx}")

    @cached_property
    def kx_int(self) -> np.ndarray:
        """Integer mode numbers of the half spectrum, k = 0..Nx/2."""
        return np.arange(self.nx // 2 + 1)

    @cached_property
    def kx(self) -> np.ndarray:
        """Horizontal wavenumbers xi_k = 2*pi*k/Lx, k = 0..Nx/2."""
        return 2.0 * np.pi * self.kx_int / self.lx

    @cached_property
    def kx_weight(self) -> np.ndarray:
        """Parseval weights of the half spectrum (conjugate pairs count twice)."""
        w = np.full(self.nx // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    @cached_property
    def x(self) -> np.ndarray:
        return self.lx * np.arange(self.nx) / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        """Collocation nodes y_j = j/Ny, j = 0..Ny (walls included)."""
        return np.arange(self.ny + 1) / self.ny

    @cached_property
    def m_sine(self) -> np.ndarray:
        return np.arange(1, self.ny)

    @cached_property
    def m_cosine(self) -> np.ndarray:
        return np.arange(0, self.ny + 1)

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        """2/3-rule mask over the half spectrum (True = keep)."""
        return self.kx_int <= self.nx // 3

    def vshape(self, parity: str) -> int:
        if parity == SINE:
            return self.ny - 1
        if parity in (COSINE, COLLOC):
            return self.ny + 1
        raise ValueError(f"unknown parity {parity!r}")


# -- vertical transforms -----------------------------------------------------
#
# DST-I / DCT-I conventions (scipy): with interior nodes y_j = j/Ny,
#   sine coeffs  -> values : dst(b, 1)/2
#   values       -> coeffs : dst(v, 1)/Ny
#   cos coeffs   -> values : dct(x, 1)       with x = c, x[1:-1] /= 2
#   values       -> coeffs : c = dct(v, 1)/(2 Ny), c[1:-1] *= 2


def _sine_to_interior_values(coef: np.ndarray) -> np.ndarray:
    return sfft.dst(coef, type=1, axis=-1) / 2.0


def _interior_values_to_sine(vals: np.ndarray, ny: int) -> np.ndarray:
    return sfft.dst(vals, type=1, axis=-1) / ny


def _cosine_to_values(coef: np.ndarray) -> np.ndarray:
    x = coef.copy()
    x[..., 1:-1] /= 2.0
    return sfft.dct(x, type=1, axis=-1)


def _values_to_cosine(vals: np.ndarray, ny: int) -> np.ndarray:
    c = sfft.dct(vals, type=1, axis=-1) / (2.0 * ny)
    c[..., 1:-1] *= 2.0
    return c


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A real scalar field on the strip in horizontal-Fourier representation."""

    grid: StripGrid
    data: np.ndarray  # complex, shape (nx//2+1, vshape(parity))
    parity: str

    def __post_init__(self):
        expected = (self.grid.nx // 2 + 1, self.grid.vshape(self.parity))
        if self.data.shape != expected:
            raise ValueError(
                f"data shape {self.data.shape} does not match parity "
                f"{self.parity!r} on grid (expected {expected})"
            )

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zeros(grid: StripGrid, parity: str = SINE) -> "SpectralField":
        return SpectralField(
            grid, np.zeros((grid.nx // 2 + 1, grid.vshape(parity)), dtype=complex), parity
        )

    @staticmethod
    def from_values(values: np.ndarray, grid: StripGrid, parity: str = SINE) -> "SpectralField":
        """Analyze physical samples values[i, j] on (x_i, y_j), j = 0..Ny."""
        if values.shape != (grid.nx, grid.ny + 1):
            raise ValueError(f"values shape {values.shape} != {(grid.nx, grid.ny + 1)}")
        fx = np.fft.rfft(values, axis=0) / grid.nx
        if parity == SINE:
            data = _interior_values_to_sine(fx[:, 1:-1], grid.ny)
        elif parity == COSINE:
            data = _values_to_cosine(fx, grid.ny)
        elif parity == COLLOC:
            data = fx
        else:
            raise ValueError(f"unknown parity {parity!r}")
        return SpectralField(grid, data, parity)

    @staticmethod
    def from_function(fn, grid: StripGrid, parity: str = SINE) -> "SpectralField":
        xx, yy = np.meshgrid(grid.x, grid.y, indexing="ij")
        return SpectralField.from_values(np.asarray(fn(xx, yy), dtype=float), grid, parity)

    # -- synthesis -----------------------------------------------------------

    def values(self) -> np.ndarray:
        """Physical samples on (x_i, y_j), real array (nx, ny+1)."""
        if self.parity == SINE:
            fx = np.zeros((self.data.shape[0], self.grid.ny + 1), dtype=complex)
            fx[:, 1:-1] = _sine_to_interior_values(self.data)
        elif self.parity == COSINE:
            fx = _cosine_to_values(self.data)
        else:
            fx = self.data
        return np.fft.irfft(fx * self.grid.nx, n=self.grid.nx, axis=0)

    def colloc(self) -> "SpectralField":
        """Reinterpret as collocation parity (horizontal Fourier x vertical values)."""
        if self.parity == COLLOC:
            return self
        if self.parity == SINE:
            fx = np.zeros((self.data.shape[0], self.grid.ny + 1), dtype=complex)
            fx[:, 1:-1] = _sine_to_interior_values(self.data)
        else:
            fx = _cosine_to_values(self.data)
        return SpectralField(self.grid, fx, COLLOC)

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.data + other.data, self.parity)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.data - other.data, self.parity)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.data * c, self.parity)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.data, self.parity)

    def _check_compatible(self, other: "SpectralField"):
        if self.grid is not other.grid and self.grid != other.grid:
            raise ValueError("fields live on different grids")
        if self.parity != other.parity:
            raise ValueError(f"parity mismatch: {self.parity} vs {other.parity}")

    # -- calculus --------------------------------------------------------------

    def dx(self) -> "SpectralField":
        """Exact horizontal derivative (Nyquist mode dropped to keep the field real)."""
        mult = 1j * self.grid.kx
        data = self.data * mult[:, None]
        data[-1, :] = 0.0
        return SpectralField(self.grid, data, self.parity)

    def dy(self) -> "SpectralField":
        """Exact vertical derivative; flips sine <-> cosine parity."""
        g = self.grid
        if self.parity == SINE:
            out = np.zeros((self.data.shape[0], g.ny + 1), dtype=complex)
            out[:, 1:-1] = self.data * (g.m_sine * np.pi)
            return SpectralField(g, out, COSINE)
        if self.parity == COSINE:
            out = -self.data[:, 1:-1] * (g.m_sine * np.pi)
            return SpectralField(g, out.copy(), SINE)
        raise ValueError("dy undefined for collocation parity; convert first")

    def integrate_y_from_0(self) -> "SpectralField":
        """Exact antiderivative int_0^y f ds of a sine field (cosine parity)."""
        if self.parity != SINE:
            raise ValueError("integrate_y_from_0 requires dirichlet-sine parity")
        g = self.grid
        inv = 1.0 / (g.m_sine * np.pi)
        out = np.zeros((self.data.shape[0], g.ny + 1), dtype=complex)
        out[:, 0] = np.sum(self.data * inv, axis=1)
        out[:, 1:-1] = -self.data * inv
        return SpectralField(g, out, COSINE)

    def integral_y(self) -> np.ndarray:
        """Per-mode definite integral int_0^1 f dy (complex, length nx//2+1)."""
        g = self.grid
        if self.parity == SINE:
            w = (1.0 - (-1.0) ** g.m_sine) / (g.m_sine * np.pi)
            return self.data @ w.astype(complex)
        if self.parity == COSINE:
            return self.data[:, 0].copy()
        vals = self.data
        return np.trapezoid(vals, dx=1.0 / g.ny, axis=1)

    def trace_y(self, wall: int) -> np.ndarray:
        """Per-mode boundary value at y = wall (0 or 1)."""
        g = self.grid
        if self.parity == SINE:
            return np.zeros(self.data.shape[0], dtype=complex)
        if self.parity == COSINE:
            signs = (-1.0) ** g.m_cosine if wall == 1 else np.ones(g.ny + 1)
            return self.data @ signs.astype(complex)
        return self.data[:, -1 if wall == 1 else 0].copy()

    # -- norms -------------------------------------------------------------------

    def _vertical_weights(self) -> np.ndarray:
        g = self.grid
        if self.parity == SINE:
            return np.full(g.ny - 1, 0.5)
        if self.parity == COSINE:
            w = np.full(g.ny + 1, 0.5)
            w[0] = 1.0
            return w
        w = np.full(g.ny + 1, 1.0 / g.ny)  # composite trapezoid
        w[0] = 0.5 / g.ny
        w[-1] = 0.5 / g.ny
        return w

    def l2_norm(self) -> float:
        """L2 norm over the full strip, exact Parseval (quadrature for collocation)."""
        vw = self._vertical_weights()
        kw = self.grid.kx_weight
        return float(np.sqrt(self.grid.lx * np.sum(kw[:, None] * vw[None, :] * np.abs(self.data) ** 2)))

    def inner(self, other: "SpectralField") -> float:
        """Real L2(strip) inner product; fields must share parity."""
        self._check_compatible(other)
        vw = self._vertical_weights()
        kw = self.grid.kx_weight
        return float(
            self.grid.lx
            * np.sum(kw[:, None] * vw[None, :] * np.real(self.data * np.conj(other.data)))
        )

    def mean_mode_l2(self) -> float:
        """L2(0,1) norm in y of the horizontal mean mode k = 0."""
        vw = self._vertical_weights()
        return float(np.sqrt(self.grid.lx * np.sum(vw * np.abs(self.data[0, :]) ** 2)))

    # -- horizontal multipliers -----------------------------------------------

    def hmult(self, mult: np.ndarray) -> "SpectralField":
        """Apply a horizontal Fourier multiplier sampled on kx (any parity)."""
        return SpectralField(self.grid, self.data * np.asarray(mult)[:, None], self.parity)

    def dealias(self) -> "SpectralField":
        return self.hmult(self.grid.dealias_keep.astype(float))

    def drop_mean_mode(self) -> "SpectralField":
        data = self.data.copy()
        data[0, :] = 0.0
        return SpectralField(self.grid, data, self.parity)


def to_sine(f: SpectralField) -> SpectralField:
    """Project onto dirichlet-sine parity through the interior collocation values."""
    if f.parity == SINE:
        return f
    fx = f.colloc().data
    return SpectralField(f.grid, _interior_values_to_sine(fx[:, 1:-1], f.grid.ny), SINE)


def to_cosine(f: SpectralField) -> SpectralField:
    """Project onto neumann-cosine parity through the collocation values."""
    if f.parity == COSINE:
        return f
    fx = f.colloc().data
    return SpectralField(f.grid, _values_to_cosine(fx, f.grid.ny), COSINE)


def product(a: SpectralField, b: SpectralField, parity: str = SINE, dealias: bool = True) -> SpectralField:
    """Pointwise product a*b, pseudospectral with 2/3 horizontal dealiasing.

    Both factors are synthesized on the collocation nodes (after masking when
    dealias is on), multiplied, and analyzed back to the requested parity.
    """
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValueError("fields live on different grids")
    fa, fb = (a.dealias(), b.dealias()) if dealias else (a, b)
    vals = fa.values() * fb.values()
    if np.any(np.isnan(vals)):
        raise FloatingPointError("NaN in pointwise product")
    out = SpectralField.from_values(vals, a.grid, parity)
    return out.dealias() if dealias else out
