"""Experiment configuration: parsing, defaults, and initial-data families.

Configs are flat key-value JSON documents.  Unknown keys, missing required
keys and constraint violations are rejected with the offending key named.
The stratification number is pre-absorbed by the strip scaling and is not a
knob here.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import SINE, SpectralField, StripGrid

R_DEFAULT = np.pi**2 / 2.0  # half the first Dirichlet eigenvalue of -d_yy on (0,1)

FAMILIES = ("heat", "analytic-band", "snapshot")
SCHEMES = ("imex1", "cnab2")


def cert_constant(rweight: float) -> float:
    """Generic-constant floor max{4, 1/(2R)} used to set the default decay rate."""
    return max(4.0, 1.0 / (2.0 * rweight))


@dataclass(frozen=True)
class RunConfig:
    """Full experiment description for a limit run, a PE run, or a sweep."""

    nx: int = 64
    ny: int = 64
    lx: float = 2.0 * np.pi
    eps: float | tuple = 0.1           # scalar, or tuple for sweep mode
    dt: float = 1e-3
    horizon: float = 1.0
    family: str = "analytic-band"
    amplitude: float = 5e-4
    band_kmax: int = 4
    band_mmax: int = 4
    snapshot: str | None = None
    seed: int = 1234
    a: float = 0.5
    lambda_override: float | None = None
    mu_override: float | None = None
    rweight: float = R_DEFAULT
    c0: float = 0.01
    cert_budget: float = 50.0
    outdir: str | None = None
    cadence: int = 10
    dealias: bool = True
    hydrostatic_split: bool = True
    scheme: str = "imex1"

    def __post_init__(self):
        _positive = {"nx": self.nx, "ny": self.ny, "lx": self.lx, "dt": self.dt,
                     "a": self.a, "rweight": self.rweight, "c0": self.c0,
                     "amplitude": self.amplitude, "cert_budget": self.cert_budget}
        for key, val in _positive.items():
            if not val > 0:
                raise ValueError(f"config key '{key}' must be positive, got {val}")
        if self.horizon < 0:
            raise ValueError(f"config key 'horizon' must be nonnegative, got {self.horizon}")
        for e in self.eps_list():
            if not (0.0 < e <= 1.0):
                raise ValueError(f"config key 'eps' must lie in (0, 1], got {e}")
        if not (0.0 < self.rweight < np.pi**2):
            raise ValueError(f"config key 'rweight' must lie in (0, pi^2), got {self.rweight}")
        if self.family not in FAMILIES:
            raise ValueError(f"config key 'family' must be one of {FAMILIES}, got {self.family!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"config key 'scheme' must be one of {SCHEMES}, got {self.scheme!r}")
        if self.cadence < 1:
            raise ValueError(f"config key 'cadence' must be >= 1, got {self.cadence}")
        if self.family == "snapshot" and not self.snapshot:
            raise ValueError("config key 'snapshot' is required when family is 'snapshot'")

    # -- derived quantities --------------------------------------------------

    def grid(self) -> StripGrid:
        return StripGrid(self.nx, self.ny, self.lx)

    def eps_list(self) -> tuple:
        if isinstance(self.eps, (list, tuple, np.ndarray)):
            return tuple(float(e) for e in self.eps)
        return (float(self.eps),)

    @property
    def is_sweep(self) -> bool:
        return isinstance(self.eps, (list, tuple, np.ndarray))

    @property
    def eps_scalar(self) -> float:
        el = self.eps_list()
        if len(el) != 1:
            raise ValueError("config is in sweep mode; a single eps is required here")
        return el[0]

    @property
    def lam(self) -> float:
        if self.lambda_override is not None:
            return float(self.lambda_override)
        c = cert_constant(self.rweight)
        return 2.0 * c * c

    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["eps"] = list(self.eps_list()) if self.is_sweep else float(self.eps_scalar)
        return d

    def hash(self) -> str:
        """Experiment identity: all keys except the output location."""
        d = self.as_dict()
        d.pop("outdir", None)
        payload = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a flat JSON config file, applying documented defaults."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict):
        raise ValueError("config must be a flat JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    required = {"nx", "ny", "horizon"}
    missing = required - set(raw)
    if missing:
        raise ValueError(f"missing required config key(s): {', '.join(sorted(missing))}")
    if "eps" in raw and isinstance(raw["eps"], list):
        raw["eps"] = tuple(raw["eps"])
    return RunConfig(**raw)


# -- initial-data families ---------------------------------------------------


def compatibility_project(u: SpectralField) -> SpectralField:
    """Remove the column mean int_0^1 u dy from every nonzero horizontal mode."""
    g = u.grid
    m = g.m_sine
    w = ((1.0 - (-1.0) ** m) / (m * np.pi)).astype(float)
    data = u.data.copy()
    coeff = data[1:, :] @ w.astype(complex)
    data[1:, :] -= np.outer(coeff / np.dot(w, w), w)
    return SpectralField(g, data, SINE)


def initial_data(cfg: RunConfig, grid: StripGrid | None = None):
    """Build (u0, T0) for the configured family; compatibility holds for u0."""
    g = grid or cfg.grid()
    if cfg.family == "heat":
        u0 = SpectralField.from_function(
            lambda x, y: cfg.amplitude * np.sin(np.pi * y) * np.ones_like(x), g, SINE
        )
        return u0, SpectralField.zeros(g, SINE)
    if cfg.family == "analytic-band":
        rng = np.random.default_rng(cfg.seed)
        kmax = min(cfg.band_kmax, g.nx // 3)
        mmax = min(cfg.band_mmax, g.ny - 1)
        u0 = SpectralField.zeros(g, SINE)
        t0 = SpectralField.zeros(g, SINE)
        for f in (u0, t0):
            phases = rng.uniform(0, 2 * np.pi, (kmax, mmax))
            mags = rng.uniform(0.5, 1.0, (kmax, mmax))
            k = np.arange(1, kmax + 1)[:, None]
            m = np.arange(1, mmax + 1)[None, :]
            xi = 2 * np.pi * k / g.lx
            f.data[1 : kmax + 1, :mmax] = (
                cfg.amplitude * mags * np.exp(-cfg.a * xi) / m**2 * np.exp(1j * phases)
            )
        return compatibility_project(u0), t0
    if cfg.family == "snapshot":
        from .artifacts import load_field

        base = Path(cfg.snapshot)
        u0 = load_field(base / "u.csv", g)
        t0 = load_field(base / "T.csv", g)
        return compatibility_project(u0), t0
    raise ValueError(f"unknown family {cfg.family!r}")
