"""Certificates, lemma ratios, smallness, and the convergence sweep."""

import numpy as np
import pytest

from stripflow.band import apply_weight
from stripflow.config import RunConfig, initial_data
from stripflow.grid import SINE, SpectralField, StripGrid
from stripflow.limit import run_limit
from stripflow.lp import besov_norm, build_filter_bank
from stripflow.pe import run_pe
from stripflow.verify import (
    LEMMA_KINDS,
    certify_dtu,
    certify_limit_energy,
    certify_pe_energy,
    convergence_sweep,
    lemma_battery,
    lemma_ratio,
    smallness_check,
    synthetic_sample,
)


@pytest.fixture(scope="module")
def small_limit_rec():
    cfg = RunConfig(nx=32, ny=32, family="analytic-band", amplitude=5e-4,
                    dt=1e-3, horizon=0.2, cadence=10)
    return run_limit(cfg)


@pytest.fixture(scope="module")
def small_pe_rec():
    cfg = RunConfig(nx=32, ny=32, family="analytic-band", amplitude=5e-4,
                    dt=1e-3, horizon=0.2, eps=0.2, cadence=10)
    return run_pe(cfg)


class TestEnergyCertificates:
    def test_limit_energy_holds(self, small_limit_rec):
        rep = certify_limit_energy(small_limit_rec)
        assert rep.status == "holds"
        assert 0.0 < rep.fitted_c < 10.0

    def test_zero_data_degenerate(self):
        cfg = RunConfig(nx=16, ny=16, family="analytic-band", amplitude=1e-30,
                        dt=1e-3, horizon=0.01, cadence=5)
        rec = run_limit(cfg)
        rep = certify_limit_energy(rec)
        assert rep.lhs == pytest.approx(0.0, abs=1e-25)

    def test_single_mode_closed_form(self):
        # u0 = amp cos(3x) sin(2 pi y): compatible, zero d_y jump, so the
        # linearized evolution is pure heat at rate 4 pi^2 and every
        # certificate norm has a closed form (amp small kills nonlinearity).
        amp, a, k0 = 1e-8, 0.5, 3
        cfg = RunConfig(nx=32, ny=32, horizon=0.05, dt=5e-4, cadence=1, a=a)
        g = cfg.grid()
        bank = build_filter_bank(g)
        u0 = SpectralField.from_function(
            lambda x, y: amp * np.cos(k0 * x) * np.sin(2 * np.pi * y), g, SINE
        )
        from stripflow.band import THETA, BandState, advance_theta
        from stripflow.limit import LimitState, LimitStepParams, run_limit as _rl

        # run via the library entry point with snapshot-free custom data
        import stripflow.limit as limit_mod

        rec = None
        orig = limit_mod.initial_data
        try:
            limit_mod.initial_data = lambda c, grid=None: (u0, SpectralField.zeros(g, SINE))
            rec = _rl(cfg)
        finally:
            limit_mod.initial_data = orig
        rep = certify_limit_energy(rec)
        rate = 4 * np.pi**2
        R = cfg.rweight
        # k0 = 3 sits in block q = 1: B^1/2 weight 2^{q s} = 2^0.5
        c0 = 2.0**0.5 * np.exp(a * k0) * amp * np.sqrt(np.pi / 2)
        # sup_t e^{(R-rate)t} = 1 at t = 0; dy-part: 2 pi * c0 * sqrt((1-e^{-2(rate-R)T})/(2(rate-R)))
        T = 0.05
        dy_part = 2 * np.pi * c0 * np.sqrt((1 - np.exp(-2 * (rate - R) * T)) / (2 * (rate - R)))
        lhs_exact = c0 + 0.5 * dy_part
        assert rep.rhs == pytest.approx(c0, rel=1e-10)
        assert rep.lhs == pytest.approx(lhs_exact, rel=2e-3)

    def test_dtu_certificate(self, small_limit_rec):
        rep = certify_dtu(small_limit_rec)
        assert rep.status == "holds"
        assert np.isfinite(rep.fitted_c)

    def test_dtu_needs_dense_sampling(self):
        cfg = RunConfig(nx=16, ny=16, family="analytic-band", amplitude=1e-4,
                        dt=1e-3, horizon=0.002, cadence=10)
        rec = run_limit(cfg)
        with pytest.raises(ValueError, match="denser"):
            certify_dtu(rec)

    def test_pe_energy_holds(self, small_pe_rec):
        rep = certify_pe_energy(small_pe_rec)
        assert rep.status == "holds"
        assert np.isfinite(rep.fitted_c)

    def test_pe_energy_constant_stable_across_eps(self):
        cs = []
        for eps in (0.4, 0.1):
            cfg = RunConfig(nx=32, ny=32, family="analytic-band", amplitude=5e-4,
                            dt=1e-3, horizon=0.1, eps=eps, cadence=10)
            cs.append(certify_pe_energy(run_pe(cfg)).fitted_c)
        assert abs(cs[0] - cs[1]) / cs[0] < 0.3

    def test_amplitude_invariance_of_fitted_constant(self):
        cs = []
        for amp in (2e-4, 1e-4):
            cfg = RunConfig(nx=32, ny=32, family="analytic-band", amplitude=amp,
                            dt=1e-3, horizon=0.1, cadence=10)
            cs.append(certify_limit_energy(run_limit(cfg)).fitted_c)
        assert cs[0] == pytest.approx(cs[1], rel=1e-2)


class TestSmallness:
    def test_zero_data_passes_full_margin(self):
        g = StripGrid(16, 16)
        bank = build_filter_bank(g)
        z = SpectralField.zeros(g, SINE)
        rep = smallness_check(z, z, 0.5, bank, 0.01, np.pi**2 / 2)
        assert rep.status == "holds"
        assert rep.meta["margin_c0"] == pytest.approx(0.005)

    def test_boundary_case_flagged(self):
        g = StripGrid(16, 16)
        bank = build_filter_bank(g)
        u = SpectralField.from_function(
            lambda x, y: np.cos(3 * x) * np.sin(np.pi * y), g, SINE
        )
        a, c0 = 0.5, 0.01
        val = besov_norm(apply_weight(u, a), 0.5, bank)
        u_scaled = (c0 * a / val) * u
        rep = smallness_check(u_scaled, SpectralField.zeros(g, SINE), a, bank, c0, np.pi**2 / 2)
        assert rep.status == "boundary"

    def test_margin_scales_linearly(self):
        g = StripGrid(16, 16)
        bank = build_filter_bank(g)
        base = SpectralField.from_function(
            lambda x, y: 1e-4 * np.cos(2 * x) * np.sin(np.pi * y), g, SINE
        )
        z = SpectralField.zeros(g, SINE)
        vals = [smallness_check((2.0**j) * base, z, 0.5, bank, 0.01, np.pi**2 / 2).lhs
                for j in range(3)]
        assert vals[1] == pytest.approx(2 * vals[0], rel=1e-12)
        assert vals[2] == pytest.approx(4 * vals[0], rel=1e-12)


class TestLemmaRatios:
    def test_zero_fields_degenerate(self):
        g = StripGrid(32, 32)
        bank = build_filter_bank(g)
        sample = synthetic_sample(g, seed=0, amplitude=0.0)
        rep = lemma_ratio("uww", sample, 0.5, bank)
        assert rep.status == "degenerate"
        assert rep.lhs == 0.0

    def test_bony_path_matches_brute_force(self):
        g = StripGrid(32, 32)
        bank = build_filter_bank(g)
        sample = synthetic_sample(g, seed=1)
        for kind in LEMMA_KINDS:
            rep = lemma_ratio(kind, sample, 0.5, bank, check_bony=True)
            assert rep.meta["bony_rel_err"] < 1e-6

    def test_few_mode_sample_finite_ratio(self):
        # u at k in {3, 6}, w at k in {3, 9}: u(6) d_x w(3) feeds w's k = 9
        # block, so the pairing is nonzero; ratio finite against brute force.
        g = StripGrid(32, 32)
        bank = build_filter_bank(g)
        u = SpectralField.zeros(g, SINE)
        u.data[3, 1] = 1e-4 * np.exp(-0.5 * 3)
        u.data[6, 2] = 1e-4 * np.exp(-0.5 * 6)
        w = SpectralField.zeros(g, SINE)
        w.data[3, 2] = 1e-4 * np.exp(-0.5 * 3)
        # vertical mode m=1 (odd, matching the product) with a phase that
        # makes the k=9 pairing real
        w.data[9, 0] = 1e-4j * np.exp(-0.5 * 9)
        from stripflow.verify import LemmaSample

        rep = lemma_ratio("uww", LemmaSample(u, w, 0.5, 32.0), 0.5, bank, check_bony=True)
        assert rep.status == "holds"
        assert np.isfinite(rep.fitted_c) and rep.fitted_c > 0
        assert rep.meta["bony_rel_err"] < 1e-6

    def test_invalid_kind_and_s(self):
        g = StripGrid(32, 32)
        bank = build_filter_bank(g)
        sample = synthetic_sample(g, seed=2)
        with pytest.raises(ValueError, match="unknown lemma kind"):
            lemma_ratio("nope", sample, 0.5, bank)
        with pytest.raises(ValueError, match="s in"):
            lemma_ratio("uww", sample, 1.5, bank)

    def test_battery_stability_small(self):
        res32 = lemma_battery(StripGrid(32, 32), 5, seed=7)
        res64 = lemma_battery(StripGrid(64, 64), 5, seed=7)
        for kind in LEMMA_KINDS:
            r32, r64 = res32[kind]["max_ratio"], res64[kind]["max_ratio"]
            assert max(r32, r64) / min(r32, r64) < 10.0


class TestSweep:
    def test_single_eps_reports_errors_only(self):
        cfg = RunConfig(nx=16, ny=16, eps=(0.2,), family="analytic-band",
                        amplitude=1e-4, dt=2e-3, horizon=0.02, cadence=5)
        res = convergence_sweep(cfg)
        assert np.isnan(res.slope)
        assert len(res.error_total) == 1 and res.error_total[0] >= 0.0

    def test_identical_data_zero_initial_error(self):
        cfg = RunConfig(nx=16, ny=16, eps=(0.3, 0.15), family="analytic-band",
                        amplitude=1e-4, dt=2e-3, horizon=0.02, cadence=5)
        res = convergence_sweep(cfg)
        np.testing.assert_allclose(res.init_discrepancy, 0.0, atol=1e-16)
        assert res.mu >= cfg.lam

    def test_duplicate_eps_rejected(self):
        cfg = RunConfig(nx=16, ny=16, eps=(0.2, 0.2), horizon=0.01)
        with pytest.raises(ValueError, match="duplicates"):
            convergence_sweep(cfg)
