"""Spectral densities, bath correlation functions and influence coefficients.

The public surface works in wavenumbers; internally the influence-functional
coefficients are dimensionless, obtained by double time-integration of the
bath response function over time-step cells.  For a response function

    alpha(t) = (1/pi) int_0^inf dw J(w) [coth(w/2kT) cos(wt/hbar)
                                         - i sin(wt/hbar)] / hbar^2

(w, J, kT in cm^-1, t in fs) the cell integrals reduce to single frequency
integrals which are evaluated with adaptive (oscillatory-weighted) quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import HBAR, KB, ValidationError

QUAD_EPSREL = 1e-10
QUAD_LIMIT = 800


class SpectralDensity:
    """Base class: callable J(omega) with omega and J in cm^-1."""

    def __call__(self, omega):
        raise NotImplementedError

    def omega_max(self):
        """Upper integration cutoff (integrand negligible beyond)."""
        raise NotImplementedError

    def reorganization_energy(self):
        """lambda = (1/pi) int_0^inf J(w)/w dw, in cm^-1 (by quadrature)."""
        val, _ = quad(lambda w: self(w) / w if w > 0 else self._slope_at_zero(),
                      0.0, self.omega_max(), limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
        return val / np.pi

    def _slope_at_zero(self):
        h = 1e-8 * self.omega_max()
        return self(h) / h


class OhmicSpectralDensity(SpectralDensity):
    """J(w) = 2 pi xi w exp(-w / w_cutoff), w in cm^-1.

    The reorganization energy is 2 xi w_cutoff analytically.
    """

    def __init__(self, xi, omega_cutoff):
        if omega_cutoff <= 0:
            raise ValidationError(f"cutoff must be positive, got {omega_cutoff}")
        self.xi = float(xi)
        self.omega_cutoff = float(omega_cutoff)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < 0):
            raise ValidationError("spectral density evaluated at negative frequency")
        return 2.0 * np.pi * self.xi * omega * np.exp(-omega / self.omega_cutoff)

    def omega_max(self):
        return 40.0 * self.omega_cutoff

    def reorganization_energy_analytic(self):
        return 2.0 * self.xi * self.omega_cutoff


class TabulatedSpectralDensity(SpectralDensity):
    """Linear interpolation of a sampled J(w); zero outside the grid."""

    def __init__(self, omega_grid, values):
        omega_grid = np.asarray(omega_grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if omega_grid.ndim != 1 or omega_grid.shape != values.shape:
            raise ValidationError("grid and values must be matching 1-d arrays")
        if np.any(np.diff(omega_grid) <= 0):
            raise ValidationError("frequency grid must be strictly increasing")
        if np.any(values < 0):
            raise ValidationError("spectral density values must be non-negative")
        self.omega_grid = omega_grid
        self.values = values

    @classmethod
    def from_file(cls, path):
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ValidationError(f"{path}: expected two columns (omega, J)")
        return cls(data[:, 0], data[:, 1])

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < 0):
            raise ValidationError("spectral density evaluated at negative frequency")
        return np.interp(omega, self.omega_grid, self.values, left=0.0, right=0.0)

    def omega_max(self):
        return float(self.omega_grid[-1])


def _coth_weighted(J, kT):
    """Return f(w) = J(w) * coth(w / 2kT), finite at w -> 0."""

    def f(w):
        if w <= 0.0:
            w = 1e-12
        return float(J(w)) / np.tanh(w / (2.0 * kT))

    return f


class BathCorrelation:
    """Finite-temperature response function alpha(t) of a bath.

    Values are in rad^2/fs^2 (energies divided by hbar), the natural units
    for influence-functional exponents.
    """

    def __init__(self, spectral_density, temperature_K):
        if temperature_K <= 0:
            raise ValidationError(f"temperature must be positive, got {temperature_K}")
        self.J = spectral_density
        self.temperature_K = float(temperature_K)
        self.kT = KB * temperature_K

    def __call__(self, t):
        wmax = self.J.omega_max()
        tau = abs(float(t)) / HBAR
        fc = _coth_weighted(self.J, self.kT)
        if tau * wmax > 8.0:
            re, _ = quad(fc, 0.0, wmax, weight="cos", wvar=tau,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
            im, _ = quad(lambda w: float(self.J(w)), 0.0, wmax, weight="sin",
                         wvar=tau, limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
        else:
            re, _ = quad(lambda w: fc(w) * np.cos(w * tau), 0.0, wmax,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
            im, _ = quad(lambda w: float(self.J(w)) * np.sin(w * tau), 0.0, wmax,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
        val = (re - 1j * im) / (np.pi * HBAR * HBAR)
        if t < 0:
            return np.conj(val)
        return val


@dataclass(frozen=True)
class EtaCoefficients:
    """Dimensionless cell-integrated influence coefficients.

    ``eta[dk]`` couples two path cells separated by ``dk`` time steps;
    ``eta[0]`` is the within-cell (ordered) self term.  Coefficients depend
    only on the separation, so a single array covers the whole propagation.
    """

    dt: float
    n_memory: int
    eta: np.ndarray

    def __post_init__(self):
        if self.eta.shape != (self.n_memory + 1,):
            raise ValidationError("eta array must have length n_memory + 1")


def _sinc_half(theta):
    """(sin(x)/x)^2 with x = theta/2, stable near zero."""
    x = theta / 2.0
    if abs(x) < 1e-8:
        return 1.0 - x * x / 3.0
    s = np.sin(x) / x
    return s * s


def _rough_ramp(theta):
    """(theta - sin(theta)) / theta^2, stable near zero."""
    if abs(theta) < 1e-4:
        return theta / 6.0 * (1.0 - theta * theta / 20.0)
    return (theta - np.sin(theta)) / (theta * theta)


def eta_coefficients(spectral_density, temperature_K, dt, n_memory):
    """Influence coefficients for time step ``dt`` (fs) out to ``n_memory`` steps.

    Equivalent to the double integral of the bath response function over the
    two cells (triangular ordering within one cell), carried out analytically
    per frequency mode.
    """
    if dt <= 0:
        raise ValidationError(f"time step must be positive, got {dt}")
    if n_memory < 1:
        raise ValidationError(f"memory must cover at least one step, got {n_memory}")
    J = spectral_density
    kT = KB * temperature_K
    wmax = J.omega_max()
    dt_rad = dt / HBAR  # fs * (rad/fs per cm^-1) -> rad per cm^-1
    fc = _coth_weighted(J, kT)

    def g_coth(w):
        return fc(w) * _sinc_half(w * dt_rad)

    def g_plain(w):
        return float(J(w)) * _sinc_half(w * dt_rad)

    eta = np.zeros(n_memory + 1, dtype=complex)

    re0, _ = quad(g_coth, 0.0, wmax, limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
    im0, _ = quad(lambda w: float(J(w)) * _rough_ramp(w * dt_rad), 0.0, wmax,
                  limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
    pref = dt_rad * dt_rad / np.pi
    eta[0] = pref * (0.5 * re0 - 1j * im0)

    for dk in range(1, n_memory + 1):
        tau = dk * dt_rad
        if tau * wmax > 8.0:
            re, _ = quad(g_coth, 0.0, wmax, weight="cos", wvar=tau,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
            im, _ = quad(g_plain, 0.0, wmax, weight="sin", wvar=tau,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
        else:
            re, _ = quad(lambda w: g_coth(w) * np.cos(w * tau), 0.0, wmax,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
            im, _ = quad(lambda w: g_plain(w) * np.sin(w * tau), 0.0, wmax,
                         limit=QUAD_LIMIT, epsrel=QUAD_EPSREL)
        eta[dk] = pref * (re - 1j * im)

    return EtaCoefficients(dt=float(dt), n_memory=int(n_memory), eta=eta)
