import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlab import analytic
from bmlab.errors import ContractError, GridMismatchError, InsufficientBoxError
from bmlab.grids import (ComplexField, Grid1D, Grid3D, default_box,
                         default_box_1d, density_to_csv, eta_integral,
                         load_field, marginal_longitudinal,
                         marginal_transverse_x, norm_squared, normalized,
                         overlap, save_field)

from conftest import scaled_config


def gaussian_1d(grid, sigma=1.0):
    psi = np.exp(-grid.z**2 / (4.0 * sigma**2)) / (2 * math.pi * sigma**2) ** 0.25
    return ComplexField(grid, psi)


class TestGridConstruction:
    def test_power_of_two_required(self):
        with pytest.raises(Exception):
            Grid1D(n=100, z_half=10.0)
        with pytest.raises(Exception):
            Grid1D(n=8, z_half=10.0)

    def test_spacing(self):
        g = Grid1D(n=64, z_half=8.0)
        assert g.dz == pytest.approx(16.0 / 64)
        assert g.z[0] == pytest.approx(-8.0)
        assert g.z.size == 64

    def test_3d_equal_transverse(self):
        g = Grid3D(16, 16, 32, 6.0, 20.0)
        assert g.x.size == 16 and g.z.size == 32
        assert g.dvol == pytest.approx((12.0 / 16) ** 2 * (40.0 / 32))

    def test_field_shape_checked(self):
        g = Grid1D(n=64, z_half=8.0)
        with pytest.raises(GridMismatchError):
            ComplexField(g, np.zeros(32, dtype=complex))

    def test_non_finite_rejected(self):
        g = Grid1D(n=64, z_half=8.0)
        vals = np.zeros(64, dtype=complex)
        vals[3] = np.nan
        with pytest.raises(ContractError):
            ComplexField(g, vals)


class TestNormSquared:
    def test_gaussian(self):
        f = gaussian_1d(Grid1D(n=256, z_half=12.0))
        assert norm_squared(f) == pytest.approx(1.0, abs=1e-10)

    def test_quadratic_scaling(self):
        g = Grid1D(n=256, z_half=12.0)
        f = gaussian_1d(g)
        f2 = ComplexField(g, 2.0 * f.values)
        assert norm_squared(f2) == pytest.approx(4.0 * norm_squared(f), rel=1e-12)

    def test_thomas_fermi_profile(self):
        s = scaled_config(omega_L_hz=35, ratio_a11=1.3, ratio_a22=0.7, N=500)
        eta_T = analytic.eta_T_gaussian(s.rho0)
        geff = (s.N - 1) * s.g11 * eta_T
        z_tf = (1.5 * geff / s.lam**2) ** (1.0 / 3.0)
        grid = default_box_1d(s.lam, z_tf, 8192)
        tf = analytic.thomas_fermi(s, eta_T, grid)
        f = ComplexField(grid, np.sqrt(tf.q0).astype(complex))
        # the TF kink limits plain quadrature below the smooth-field 1e-10
        assert norm_squared(f) == pytest.approx(1.0, abs=1e-6)


class TestEtaIntegral:
    def test_gaussian_quartic(self):
        sigma = 1.7
        f = gaussian_1d(Grid1D(n=512, z_half=30.0), sigma)
        assert eta_integral(f) == pytest.approx(1.0 / (2 * sigma * math.sqrt(math.pi)),
                                                rel=1e-10)

    def test_uniform_box(self):
        g = Grid1D(n=256, z_half=8.0)
        vals = np.zeros(g.n, dtype=complex)
        sel = np.abs(g.z) < 4.0
        w = float(np.sum(sel)) * g.dz
        vals[sel] = 1.0 / math.sqrt(w)
        assert eta_integral(ComplexField(g, vals)) == pytest.approx(1.0 / w, rel=1e-12)

    def test_transverse_gaussian_2d(self):
        # separable check of eta_T = 1/(4 pi rho0^2) with rho0 = 1/sqrt(2):
        # the x/y factors are Gaussians of sigma = rho0
        rho0 = 1.0 / math.sqrt(2.0)
        f = gaussian_1d(Grid1D(n=256, z_half=8.0), rho0)
        per_axis = eta_integral(f)
        assert per_axis**2 == pytest.approx(1.0 / (4 * math.pi * rho0**2), rel=1e-10)

    def test_unnormalized_rejected(self):
        g = Grid1D(n=256, z_half=12.0)
        f = ComplexField(g, 1.1 * gaussian_1d(g).values)
        with pytest.raises(ContractError):
            eta_integral(f)

    def test_quadrature_convergence(self):
        vals = []
        for n in (256, 512):
            f = gaussian_1d(Grid1D(n=n, z_half=12.0), 1.3)
            vals.append(eta_integral(f))
        assert abs(vals[1] - vals[0]) / vals[0] < 1e-8


class TestOverlap:
    def test_self_overlap(self):
        f = gaussian_1d(Grid1D(n=256, z_half=12.0))
        assert overlap(f, f) == pytest.approx(1.0, abs=1e-10)

    def test_parity_orthogonality(self):
        g = Grid1D(n=256, z_half=12.0)
        even = gaussian_1d(g)
        odd = ComplexField(g, g.z * even.values
                           / math.sqrt(norm_squared(ComplexField(g, g.z * even.values))))
        assert abs(overlap(even, odd)) < 1e-12

    def test_global_phase(self):
        g = Grid1D(n=256, z_half=12.0)
        f = gaussian_1d(g)
        fp = ComplexField(g, f.values * np.exp(1j * 0.7))
        assert overlap(f, fp) == pytest.approx(np.exp(1j * 0.7), abs=1e-10)

    def test_grid_mismatch(self):
        f = gaussian_1d(Grid1D(n=256, z_half=12.0))
        h = gaussian_1d(Grid1D(n=256, z_half=14.0))
        with pytest.raises(GridMismatchError):
            overlap(f, h)

    @given(st.floats(0.5, 2.0), st.floats(-2.0, 2.0), st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_cauchy_schwarz(self, sigma, shift, k):
        g = Grid1D(n=256, z_half=16.0)
        f = gaussian_1d(g, 1.0)
        h = ComplexField(g, np.exp(-(g.z - shift) ** 2 / (4 * sigma**2)
                                   + 1j * k * g.z))
        assert abs(overlap(f, h)) <= \
            math.sqrt(norm_squared(f) * norm_squared(h)) + 1e-12


class TestMarginals:
    def setup_method(self):
        self.g3 = Grid3D(32, 32, 64, 6.0, 20.0)
        x, y, z = np.meshgrid(self.g3.x, self.g3.y, self.g3.z, indexing="ij")
        sigma_z = 3.0
        psi = (np.exp(-0.5 * (x**2 + y**2)) / math.sqrt(math.pi)
               * np.exp(-z**2 / (4 * sigma_z**2)) / (2 * math.pi * sigma_z**2) ** 0.25)
        self.f = ComplexField(self.g3, psi)
        self.sigma_z = sigma_z

    def test_separable_longitudinal(self):
        g1, q = marginal_longitudinal(self.f)
        expect = (np.exp(-g1.z**2 / (2 * self.sigma_z**2))
                  / math.sqrt(2 * math.pi * self.sigma_z**2))
        assert np.max(np.abs(q - expect)) < 1e-10

    def test_separable_transverse(self):
        g1, q = marginal_transverse_x(self.f)
        expect = np.exp(-g1.z**2) / math.sqrt(math.pi)
        assert np.max(np.abs(q - expect)) < 1e-10

    def test_marginals_normalized(self):
        for g1, q in (marginal_longitudinal(self.f),
                      marginal_transverse_x(self.f)):
            assert np.all(q >= 0)
            assert float(np.sum(q) * g1.dz) == pytest.approx(1.0, abs=1e-9)


class TestSerialization:
    def test_round_trip_1d(self, tmp_path):
        f = gaussian_1d(Grid1D(n=128, z_half=10.0))
        p = tmp_path / "field.bmlf"
        save_field(p, f)
        f2 = load_field(p)
        assert f2.grid == f.grid
        assert np.array_equal(f2.values, f.values)

    def test_round_trip_3d(self, tmp_path):
        g3 = Grid3D(16, 16, 32, 6.0, 20.0)
        rng = np.random.default_rng(0)
        vals = rng.standard_normal((16, 16, 32)) + 1j * rng.standard_normal((16, 16, 32))
        vals *= np.exp(-np.abs(np.arange(32) - 16))  # keep boundaries quiet
        f = ComplexField(g3, vals)
        p = tmp_path / "field3.bmlf"
        save_field(p, f)
        f2 = load_field(p)
        assert np.array_equal(f2.values, f.values)

    def test_density_csv(self, tmp_path):
        g = Grid1D(n=64, z_half=8.0)
        q = np.exp(-g.z**2)
        p = tmp_path / "dens.csv"
        density_to_csv(p, g, q, header_lines=["hello"])
        lines = p.read_text().splitlines()
        assert lines[0] == "# hello"
        assert lines[1] == "z,density"
        z0, d0 = lines[2].split(",")
        assert float(z0) == pytest.approx(g.z[0])


class TestDefaultBox:
    def test_longitudinal_rule(self):
        g = default_box_1d(0.01, 100.0, 1024)
        assert g.z_half == pytest.approx(150.0)  # 1.5 z_N dominates
        g = default_box_1d(0.01, 10.0, 1024)
        assert g.z_half == pytest.approx(80.0)   # 8 harmonic lengths dominate

    def test_transverse_rule(self):
        g = default_box(0.01, 100.0, (16, 16, 64))
        assert g.t_half == pytest.approx(6.0)
