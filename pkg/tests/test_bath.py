import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from lindflow.bath import (BathCorrelation, EtaCoefficients,
                           OhmicSpectralDensity, TabulatedSpectralDensity,
                           eta_coefficients)
from lindflow.core import HBAR, KB, ValidationError

XI, WC, TEMP = 0.121, 900.0, 300.0


@pytest.fixture(scope="module")
def ohmic():
    return OhmicSpectralDensity(XI, WC)


class TestSpectralDensity:
    def test_reorganization_energy_paper_value(self, ohmic):
        # 2 xi wc = 217.8 cm^-1 for the standard parameter set
        assert ohmic.reorganization_energy_analytic() == pytest.approx(217.8)
        assert ohmic.reorganization_energy() == pytest.approx(
            ohmic.reorganization_energy_analytic(), rel=1e-6)

    def test_zero_at_origin(self, ohmic):
        assert ohmic(0.0) == 0.0

    def test_maximum_at_cutoff(self, ohmic):
        # d/dw [w exp(-w/wc)] = 0 at w = wc
        grid = np.linspace(1.0, 10 * WC, 20001)
        assert grid[np.argmax(ohmic(grid))] == pytest.approx(WC, rel=1e-3)

    def test_negative_frequency_rejected(self, ohmic):
        with pytest.raises(ValidationError):
            ohmic(-1.0)

    def test_tabulated_roundtrip(self, tmp_path, ohmic):
        grid = np.linspace(0.0, 40 * WC, 4000)
        path = tmp_path / "sd.txt"
        np.savetxt(path, np.column_stack([grid, ohmic(grid)]))
        tab = TabulatedSpectralDensity.from_file(path)
        assert tab(900.0) == pytest.approx(float(ohmic(900.0)), rel=1e-4)
        assert tab.reorganization_energy() == pytest.approx(217.8, rel=1e-3)
        assert tab(1e6) == 0.0

    def test_tabulated_validation(self):
        with pytest.raises(ValidationError):
            TabulatedSpectralDensity([0.0, 1.0, 0.5], [0.0, 1.0, 1.0])
        with pytest.raises(ValidationError):
            TabulatedSpectralDensity([0.0, 1.0], [0.0, -1.0])


class TestBathCorrelation:
    def test_imaginary_part_vanishes_at_zero(self, ohmic):
        alpha = BathCorrelation(ohmic, TEMP)
        assert alpha(0.0).imag == pytest.approx(0.0, abs=1e-12)

    def test_negative_time_conjugate(self, ohmic):
        alpha = BathCorrelation(ohmic, TEMP)
        assert alpha(-7.0) == pytest.approx(np.conj(alpha(7.0)), rel=1e-10)

    def test_against_dense_quadrature_oracle(self, ohmic):
        # independent oracle: fixed-grid Simpson at ~10x node density
        alpha = BathCorrelation(ohmic, TEMP)
        kT = KB * TEMP
        w = np.linspace(1e-6, 40 * WC, 400001)
        fw = ohmic(w) / np.tanh(w / (2 * kT))
        for t in (0.0, 5.0, 20.0):
            re = np.trapezoid(fw * np.cos(w * t / HBAR), w) / (np.pi * HBAR**2)
            im = -np.trapezoid(ohmic(w) * np.sin(w * t / HBAR), w) / (np.pi * HBAR**2)
            val = alpha(t)
            assert val.real == pytest.approx(re, rel=1e-6)
            assert val.imag == pytest.approx(im, rel=1e-6, abs=1e-12)

    def test_nonpositive_temperature_rejected(self, ohmic):
        with pytest.raises(ValidationError):
            BathCorrelation(ohmic, 0.0)


class TestEtaCoefficients:
    def test_zero_spectral_density_gives_zero(self):
        zero = TabulatedSpectralDensity([0.0, 1000.0], [0.0, 0.0])
        eta = eta_coefficients(zero, TEMP, 4.0, 5)
        assert np.allclose(eta.eta, 0.0)

    def test_memory_decay_standard_bath(self, ohmic):
        # at dt = 4 fs the separation-50 coefficient is below 1e-3 of eta0,
        # consistent with a 200 fs memory window converging
        eta = eta_coefficients(ohmic, TEMP, 4.0, 50)
        assert abs(eta.eta[50]) < 1e-3 * abs(eta.eta[0])

    def test_linear_in_coupling_strength(self, ohmic):
        eta1 = eta_coefficients(ohmic, TEMP, 4.0, 4)
        eta3 = eta_coefficients(OhmicSpectralDensity(3 * XI, WC), TEMP, 4.0, 4)
        assert np.allclose(eta3.eta, 3.0 * eta1.eta, rtol=1e-9)

    def test_against_double_time_integral_of_alpha(self, ohmic):
        # oracle: eta(dk) is the double integral of alpha over two cells
        alpha = BathCorrelation(ohmic, TEMP)
        dt = 6.0
        eta = eta_coefficients(ohmic, TEMP, dt, 2)

        re, _ = dblquad(lambda t1, t2: alpha(t2 - t1).real, 0, dt,
                        0, lambda t2: t2, epsabs=1e-11)
        im, _ = dblquad(lambda t1, t2: alpha(t2 - t1).imag, 0, dt,
                        0, lambda t2: t2, epsabs=1e-11)
        assert eta.eta[0] == pytest.approx(re + 1j * im, rel=1e-6)

        re1, _ = dblquad(lambda t1, t2: alpha(t2 - t1).real, dt, 2 * dt,
                         0, dt, epsabs=1e-11)
        im1, _ = dblquad(lambda t1, t2: alpha(t2 - t1).imag, dt, 2 * dt,
                         0, dt, epsabs=1e-11)
        assert eta.eta[1] == pytest.approx(re1 + 1j * im1, rel=1e-6)

    def test_validation(self, ohmic):
        with pytest.raises(ValidationError):
            eta_coefficients(ohmic, TEMP, -1.0, 5)
        with pytest.raises(ValidationError):
            eta_coefficients(ohmic, TEMP, 4.0, 0)
        with pytest.raises(ValidationError):
            EtaCoefficients(dt=1.0, n_memory=3, eta=np.zeros(3, complex))

    def test_constant_path_influence_not_amplifying(self, ohmic):
        # influence magnitude <= 1 for any constant forward/backward pair
        eta = eta_coefficients(ohmic, TEMP, 4.0, 12)
        n = 12
        for sp, sm in [(1.0, -1.0), (1.0, 0.0), (0.5, -0.25)]:
            ds = sp - sm
            expo = 0.0
            for k in range(n):
                for dk in range(0, k + 1):
                    e = eta.eta[dk]
                    expo += -ds * (e * sp - np.conj(e) * sm)
            assert np.exp(expo.real) <= 1.0 + 1e-12
