"""Dyadic decomposition, Besov and Chemin-Lerner norms, Bony splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from stripflow.grid import SINE, SpectralField, StripGrid, product
from stripflow.lp import (
    NormSeries,
    bernstein_ratio,
    besov_norm,
    block_l2_profile,
    bony_split,
    build_filter_bank,
    chemin_lerner_norm,
    dyadic_block,
    low_pass,
    partition_sum,
    phi_profile,
    psi_profile,
    record_series,
    series_to_csv_rows,
    weighted_cl_norm,
)

from test_grid import rand_sine


@pytest.fixture(scope="module")
def grid():
    return StripGrid(64, 32)


@pytest.fixture(scope="module")
def bank(grid):
    return build_filter_bank(grid)


class TestCutoffProfiles:
    def test_psi_plateau_and_support(self):
        assert psi_profile(0.0) == 1.0
        assert psi_profile(0.74) == 1.0
        assert psi_profile(4 / 3) == 0.0
        assert psi_profile(2.0) == 0.0
        assert 0.0 < psi_profile(1.0) < 1.0

    def test_phi_ring(self):
        # identically 1 on [4/3, 3/2], supported in [3/4, 8/3]
        assert phi_profile(4 / 3) == pytest.approx(1.0, abs=1e-15)
        assert phi_profile(1.45) == pytest.approx(1.0, abs=1e-15)
        assert phi_profile(1.5) == pytest.approx(1.0, abs=1e-15)
        assert phi_profile(0.74) == 0.0
        assert phi_profile(8 / 3 + 1e-9) == 0.0
        assert phi_profile(0.0) == 0.0

    def test_disjoint_supports_two_apart(self):
        z = np.linspace(0.01, 300, 20011)
        for q in range(-2, 6):
            for qp in range(q + 2, 8):
                overlap = phi_profile(z * 2.0**-q) * phi_profile(z * 2.0**-qp)
                assert np.abs(overlap).max() == 0.0

    def test_partition_of_unity_sampled(self):
        rng = np.random.default_rng(0)
        xi = np.exp(rng.uniform(np.log(2.0**-8), np.log(2.0**8), 10_000))
        dev = np.abs(partition_sum(xi, -9, 9) - 1.0)
        assert dev.max() < 1e-10


class TestFilterBank:
    def test_covers_grid_wavenumbers(self, grid, bank):
        assert 2.0**bank.q_min <= 2 * np.pi / grid.lx
        assert 2.0**bank.q_max >= np.pi * grid.nx / grid.lx

    def test_partition_on_grid(self, grid, bank):
        total = bank.stack().sum(axis=0)
        assert np.abs(total[1:] - 1.0).max() < 1e-10

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError):
            StripGrid(4, 32)

    def test_annulus_flags(self, grid, bank):
        # k = 6 sits in the flat annulus of q = 2 (6/4 = 1.5)
        qi = 2 - bank.q_min
        assert bank.annulus_flags[qi, 6]
        assert bank.phi_values[qi, 6] == pytest.approx(1.0, abs=1e-15)


class TestDyadicBlocks:
    def test_flat_annulus_mode_passes_unchanged(self, grid, bank):
        f = SpectralField.zeros(grid, SINE)
        f.data[6, 2] = 0.7
        out = dyadic_block(f, 2, bank)
        np.testing.assert_allclose(out.data, f.data, atol=1e-15)
        for q in bank.qs:
            if q != 2:
                assert dyadic_block(f, q, bank).l2_norm() == 0.0

    def test_far_outside_ring_is_zero(self, grid, bank):
        f = SpectralField.zeros(grid, SINE)
        f.data[24, 1] = 1.0  # 2^-q |k| = 24/8 = 3 > 8/3 at q = 3
        assert dyadic_block(f, 3, bank).l2_norm() == 0.0

    def test_zero_field(self, grid, bank):
        assert dyadic_block(SpectralField.zeros(grid, SINE), 2, bank).l2_norm() == 0.0

    def test_out_of_range_q_gives_zero_field(self, grid, bank):
        f = rand_sine(grid, 0)
        assert dyadic_block(f, bank.q_max + 3, bank).l2_norm() == 0.0

    def test_reconstruction(self, grid, bank):
        f = rand_sine(grid, 1)
        total = SpectralField.zeros(grid, SINE)
        for q in bank.qs:
            total = total + dyadic_block(f, q, bank)
        assert (total - f).l2_norm() < 1e-10 * f.l2_norm()


class TestLowPass:
    def test_above_all_modes_is_identity(self, grid, bank):
        f = rand_sine(grid, 2)
        out = low_pass(f, bank.q_max + 2, bank)
        np.testing.assert_allclose(out.data, f.data, atol=1e-14)

    def test_below_all_modes_vanishes(self, grid, bank):
        f = rand_sine(grid, 3).drop_mean_mode()
        assert low_pass(f, bank.q_min - 9, bank).l2_norm() < 1e-12 * f.l2_norm()

    def test_zero(self, grid, bank):
        assert low_pass(SpectralField.zeros(grid, SINE), 2, bank).l2_norm() == 0.0

    def test_telescoping(self, grid, bank):
        f = rand_sine(grid, 4)
        for q in (bank.q_min + 1, 3, bank.q_max):
            acc = dyadic_block(f, bank.q_min - 1, bank)  # catch-all
            for j in range(bank.q_min, q):
                acc = acc + dyadic_block(f, j, bank)
            assert (low_pass(f, q, bank) - acc).l2_norm() < 1e-10 * f.l2_norm()


def besov_quadrature_oracle(f: SpectralField, s: float, bank) -> float:
    """Direct per-block quadrature: synthesize each block, Simpson in y, exact in x."""
    g = f.grid
    total = 0.0
    y_fine = np.linspace(0.0, 1.0, 2049)
    sines = np.sin(np.outer(y_fine, g.m_sine * np.pi))  # (nyf, ny-1)
    for q in bank.qs:
        blk = dyadic_block(f, q, bank).drop_mean_mode()
        fx = blk.data @ sines.T  # (nkx, nyf) horizontal coefficients at fine y
        vals = np.fft.irfft(fx * g.nx, n=g.nx, axis=0)
        l2sq = simpson(np.sum(vals**2, axis=0) * g.lx / g.nx, x=y_fine)
        total += 2.0 ** (q * s) * np.sqrt(max(l2sq, 0.0))
    return total


class TestBesovNorm:
    def test_zero(self, grid, bank):
        assert besov_norm(SpectralField.zeros(grid, SINE), 0.5, bank) == 0.0

    def test_single_mode_in_flat_annulus(self, grid, bank):
        f = SpectralField.from_function(
            lambda x, y: np.sin(2 * np.pi * y) * np.cos(6 * x), grid, SINE
        )
        # k = 6 lives entirely in block q = 2; ||f||_L2 = sqrt(pi/2)
        expected = 2.0 ** (2 * 0.5) * np.sqrt(np.pi / 2.0)
        assert besov_norm(f, 0.5, bank) == pytest.approx(expected, rel=1e-12)
        assert f.l2_norm() == pytest.approx(np.sqrt(np.pi / 2.0), rel=1e-12)

    def test_two_disjoint_annuli_add(self, grid, bank):
        f1 = SpectralField.from_function(
            lambda x, y: np.sin(np.pi * y) * np.cos(3 * x), grid, SINE
        )
        f2 = SpectralField.from_function(
            lambda x, y: np.sin(2 * np.pi * y) * np.cos(12 * x), grid, SINE
        )
        s = 0.7
        total = besov_norm(f1 + f2, s, bank)
        assert total == pytest.approx(besov_norm(f1, s, bank) + besov_norm(f2, s, bank), rel=1e-12)

    def test_mean_mode_excluded(self, grid, bank):
        f = SpectralField.from_function(
            lambda x, y: np.sin(np.pi * y) * np.ones_like(x), grid, SINE
        )
        assert besov_norm(f, 0.5, bank) == 0.0
        assert f.mean_mode_l2() > 0.0

    def test_validated_range(self, grid, bank):
        with pytest.raises(ValueError, match="validated range"):
            besov_norm(rand_sine(grid, 5), 3.5, bank)

    def test_oracle_equivalence_random_fields(self, grid, bank):
        for seed in range(5):
            f = rand_sine(grid, 30 + seed, kmax=12, mmax=8).drop_mean_mode()
            s = [0.5, 1.5, -0.5][seed % 3]
            oracle = besov_quadrature_oracle(f, s, bank)
            assert besov_norm(f, s, bank) == pytest.approx(oracle, rel=1e-8)

    @settings(max_examples=15, deadline=None)
    @given(c=st.floats(-10, 10, allow_nan=False), seed=st.integers(0, 50))
    def test_absolute_homogeneity(self, grid, bank, c, seed):
        f = rand_sine(grid, seed)
        assert besov_norm(c * f, 0.5, bank) == pytest.approx(
            abs(c) * besov_norm(f, 0.5, bank), rel=1e-10, abs=1e-12
        )

    @settings(max_examples=15, deadline=None)
    @given(s1=st.integers(0, 50), s2=st.integers(51, 99))
    def test_subadditivity(self, grid, bank, s1, s2):
        f, h = rand_sine(grid, s1), rand_sine(grid, s2)
        assert besov_norm(f + h, 0.5, bank) <= (
            besov_norm(f, 0.5, bank) + besov_norm(h, 0.5, bank) + 1e-12
        )


class TestCheminLerner:
    def test_constant_in_time(self, grid, bank):
        f = rand_sine(grid, 6)
        times = np.linspace(0.0, 2.0, 21)
        ser = record_series([f] * 21, times, bank, s=0.5)
        assert chemin_lerner_norm(ser, 2) == pytest.approx(
            np.sqrt(2.0) * besov_norm(f, 0.5, bank), rel=1e-12
        )
        assert chemin_lerner_norm(ser, np.inf) == pytest.approx(
            besov_norm(f, 0.5, bank), rel=1e-12
        )

    def test_sup_of_decaying_series(self, grid, bank):
        f = rand_sine(grid, 7)
        times = np.linspace(0.0, 1.0, 11)
        fields = [np.exp(-t) * f for t in times]
        ser = record_series(fields, times, bank, s=0.5)
        assert chemin_lerner_norm(ser, np.inf) == pytest.approx(
            besov_norm(f, 0.5, bank), rel=1e-12
        )

    def test_exp_profile_closed_form(self, grid, bank):
        # single block, c e^{-t} on [0, 1], p = 2: 2^{qs} c sqrt((1 - e^{-2})/2)
        f = SpectralField.zeros(grid, SINE)
        f.data[6, 2] = 0.5  # block q = 2, ||f||_L2 = c
        c = f.l2_norm()
        times = np.linspace(0.0, 1.0, 201)
        ser = record_series([np.exp(-t) * f for t in times], times, bank, s=0.5)
        expected = 2.0 ** (2 * 0.5) * c * 0.6576490300973938  # sqrt((1 - e^-2)/2), frozen
        assert chemin_lerner_norm(ser, 2) == pytest.approx(expected, rel=5e-4)

    def test_weighted_zero_and_unit(self, grid, bank):
        f = rand_sine(grid, 8)
        times = np.linspace(0.0, 1.0, 11)
        ser = record_series([f] * 11, times, bank, s=0.5)
        assert weighted_cl_norm(ser, np.zeros(11), 2) == 0.0
        assert weighted_cl_norm(ser, np.ones(11), 2) == pytest.approx(
            chemin_lerner_norm(ser, 2), rel=1e-12
        )

    def test_weighted_matches_direct_quadrature(self, grid, bank):
        f = rand_sine(grid, 9)
        times = np.linspace(0.0, 1.0, 101)
        weight = 0.5 + 0.5 * np.sin(3 * times) ** 2
        fields = [np.exp(-0.7 * t) * f for t in times]
        ser = record_series(fields, times, bank, s=0.5)
        profile = block_l2_profile(f, bank)
        per_block = np.sqrt(np.trapezoid(weight * np.exp(-1.4 * times), times)) * profile
        oracle = float(np.sum(2.0 ** (bank.qs * 0.5) * per_block))
        assert weighted_cl_norm(ser, weight, 2) == pytest.approx(oracle, rel=1e-10)

    def test_negative_weight_rejected(self, grid, bank):
        f = rand_sine(grid, 10)
        ser = record_series([f, f], np.array([0.0, 1.0]), bank, s=0.5)
        with pytest.raises(ValueError, match="nonnegative"):
            weighted_cl_norm(ser, np.array([1.0, -0.5]), 2)

    def test_mismatched_blocks_rejected(self, grid, bank):
        f = rand_sine(grid, 11)
        ser = record_series([f, f], np.array([0.0, 1.0]), bank, s=0.5)
        other = NormSeries(ser.times, ser.qs[:-1], ser.table[:-1], 0.5)
        with pytest.raises(ValueError, match="mismatched"):
            NormSeries.combine([ser, other])

    def test_csv_rows(self, grid, bank):
        f = rand_sine(grid, 12)
        ser = record_series([f], np.array([0.0]), bank, s=0.5)
        rows = list(series_to_csv_rows(ser))
        assert len(rows) == bank.n_blocks
        assert rows[0][0] == 0.0 and rows[0][1] == bank.q_min - 1


class TestBonySplit:
    def test_reconstruction_random_pairs(self, grid, bank):
        for seed in range(3):
            a = rand_sine(grid, 40 + seed, kmax=10)
            b = rand_sine(grid, 60 + seed, kmax=10)
            Tab, Tba, R = bony_split(a, b, bank)
            direct = product(a, b, SINE)
            err = (Tab + Tba + R - direct).l2_norm()
            assert err < 1e-8 * direct.l2_norm()

    def test_constant_in_x_factor(self, grid, bank):
        # a depends only on y, b a high-frequency mode: T_a b = a*b exactly,
        # the other two parts vanish (low-frequency convention)
        a = SpectralField.from_function(
            lambda x, y: np.sin(np.pi * y) * np.ones_like(x), grid, SINE
        )
        b = SpectralField.from_function(
            lambda x, y: np.cos(12 * x) * np.sin(2 * np.pi * y), grid, SINE
        )
        Tab, Tba, R = bony_split(a, b, bank)
        direct = product(a, b, SINE)
        assert (Tab - direct).l2_norm() < 1e-12
        assert Tba.l2_norm() < 1e-12
        assert R.l2_norm() < 1e-12

    def test_single_mode_identity(self, grid, bank):
        f = SpectralField.from_function(
            lambda x, y: np.cos(6 * x) * np.sin(np.pi * y), grid, SINE
        )
        Tab, Tba, R = bony_split(f, f, bank)
        direct = product(f, f, SINE)
        assert (Tab + Tba + R - direct).l2_norm() < 1e-10 * max(direct.l2_norm(), 1e-30)

    def test_zero_factor(self, grid, bank):
        z = SpectralField.zeros(grid, SINE)
        parts = bony_split(z, rand_sine(grid, 13), bank)
        assert all(p.l2_norm() == 0.0 for p in parts)


class TestBernstein:
    def test_single_mode_first_derivative(self, grid, bank):
        f = SpectralField.zeros(grid, SINE)
        f.data[4, 2] = 1.0
        rep = bernstein_ratio(f, 1, 4.0, bank)
        assert rep.ratio == pytest.approx(1.0, rel=1e-12)
        assert rep.within

    def test_zero_field_degenerate(self, grid, bank):
        rep = bernstein_ratio(SpectralField.zeros(grid, SINE), 1, 4.0, bank)
        assert rep.degenerate

    def test_ring_supported_random(self, grid, bank):
        rng = np.random.default_rng(14)
        lam = 6.0
        f = SpectralField.zeros(grid, SINE)
        lo, hi = int(np.ceil(0.75 * lam)), int(np.floor(8 / 3 * lam))
        f.data[lo : hi + 1, :6] = rng.standard_normal((hi - lo + 1, 6))
        rep = bernstein_ratio(f, 1, lam, bank)
        assert 1.0 / 3.0 <= rep.ratio <= 3.0
        assert rep.within

    def test_non_band_limited_rejected(self, grid, bank):
        f = rand_sine(grid, 15)
        with pytest.raises(ValueError, match="band-limited"):
            bernstein_ratio(f, 1, 6.0, bank)
