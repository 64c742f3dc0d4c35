"""Run records: everything a finished run exposes to verification and output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .band import BandState
from .config import RunConfig
from .grid import SpectralField
from .lp import DyadicFilterBank, NormSeries


@dataclass
class RunRecord:
    """Immutable-after-run bundle of trajectory samples and diagnostics.

    ``series`` holds per-block L2 tables of the analytically weighted fields
    (weight radius follows the recorded band history).  ``norm_history`` holds
    scalar norm families per sample, both plain and e^{Rt}-scaled, for report
    CSVs and figures.  All certificate inputs are reproducible from this
    record alone.
    """

    kind: str                      # "limit" or "pe"
    config: RunConfig
    bank: DyadicFilterBank
    times: np.ndarray
    series: dict[str, NormSeries]
    band: BandState
    initial: dict[str, SpectralField]
    final: dict[str, SpectralField]
    diagnostics: dict[str, np.ndarray]
    norm_history: list[dict] = field(default_factory=list)
    step_times: np.ndarray | None = None
    eta_pe_integrand: np.ndarray | None = None   # PE runs: ||(dy u, eps dx u)_w||_{B 1/2} per step
    eps: float | None = None
    fields: dict[str, list] | None = None        # sampled fields, kept on request
    status: str = "ok"

    @property
    def rweight(self) -> float:
        return self.config.rweight

    def ert(self, times: np.ndarray | None = None) -> np.ndarray:
        t = self.times if times is None else times
        return np.exp(self.rweight * np.asarray(t))

    def weighted(self, name: str, s: float) -> NormSeries:
        """Series of e^{Rt}-scaled blocks of a recorded field at index s."""
        ser = self.series[name].with_s(s)
        return ser.scaled_by(self.ert())
