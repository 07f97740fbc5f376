import numpy as np
import pytest

from lindflow.bath import EtaCoefficients, OhmicSpectralDensity, eta_coefficients
from lindflow.core import HBAR, ValidationError, vectorize, devectorize
from lindflow.mps import BondCapError
from lindflow.model import SystemModel, build_excitonic_nmer, build_polaritonic_trimer
from lindflow.pathint import (DynamicalMapSeries, bare_propagator,
                              brute_force_maps, nonhermitian_maps, tempo_maps)

XI, WC, TEMP = 0.121, 900.0, 300.0


def spin_boson(h=181.5):
    H = np.array([[0.0, -h], [-h, 0.0]])
    return SystemModel(H, ["u", "d"], {"bath": np.array([1.0, -1.0])})


def zero_etas(dt, m):
    return EtaCoefficients(dt=dt, n_memory=m, eta=np.zeros(m + 1, complex))


@pytest.fixture(scope="module")
def ohmic():
    return OhmicSpectralDensity(XI, WC)


class TestBarePropagator:
    def test_zero_hamiltonian_identity(self):
        P = bare_propagator(np.zeros((3, 3)), 2.0)
        assert np.allclose(P.matrix, np.eye(9))

    def test_rabi_populations(self):
        h = 181.5
        P = bare_propagator(np.array([[0.0, -h], [-h, 0.0]]), 1.0)
        rho = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        for n in range(1, 60):
            rho = P.apply(rho)
            t = n * 1.0
            assert rho[0, 0].real == pytest.approx(np.cos(h * t / HBAR) ** 2,
                                                   abs=1e-10)

    def test_trace_preserved_random(self):
        rng = np.random.default_rng(0)
        H = rng.standard_normal((4, 4))
        H = H + H.T
        P = bare_propagator(H, 3.0)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = X @ X.conj().T
        rho /= rho.trace()
        assert P.apply(rho).trace() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            bare_propagator(np.zeros((2, 3)), 1.0)
        with pytest.raises(ValidationError):
            bare_propagator(np.zeros((2, 2)), -1.0)


class TestBruteForce:
    def test_zero_coupling_equals_bare_composition(self):
        model = spin_boson()
        maps = brute_force_maps(model, zero_etas(4.0, 5), 5)
        bare = bare_propagator(model.hamiltonian, 4.0).matrix
        acc = np.eye(4, dtype=complex)
        for k in range(6):
            assert np.allclose(maps.maps[k], acc, atol=1e-12)
            acc = bare @ acc

    def test_diagonal_hamiltonian_populations_frozen(self, ohmic):
        # pure dephasing: diagonal H + diagonal coupling leaves populations
        model = SystemModel(np.diag([0.0, 500.0]), ["a", "b"],
                            {"bath": np.array([1.0, -1.0])})
        eta = eta_coefficients(ohmic, TEMP, 4.0, 3)
        maps = brute_force_maps(model, eta, 3)
        rho = np.array([[0.75, 0.2 - 0.1j], [0.2 + 0.1j, 0.25]])
        for k in range(4):
            out = devectorize(maps.maps[k] @ vectorize(rho))
            assert out[0, 0].real == pytest.approx(0.75, abs=1e-12)
            assert out[1, 1].real == pytest.approx(0.25, abs=1e-12)

    def test_path_guard(self, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 2)
        with pytest.raises(ValidationError, match="guard"):
            brute_force_maps(model, eta, 12, max_paths=10_000)


class TestTempoVsBrute:
    def test_spin_boson_oracle(self, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 6)
        mb = brute_force_maps(model, eta, 6)
        mt = tempo_maps(model, eta, 6, svd_cutoff=1e-14)
        assert np.max(np.abs(mt.maps - mb.maps)) < 1e-8

    def test_dimer_two_baths_and_block_mirror(self, ohmic):
        # dimer has three H components, so this exercises block assembly
        # and the conjugate-mirror path against the global enumerator
        model = build_excitonic_nmer(2, 1000.0, 181.5)
        eta = eta_coefficients(ohmic, TEMP, 2.0, 4)
        mb = brute_force_maps(model, eta, 4)
        mt = tempo_maps(model, eta, 4, svd_cutoff=1e-14)
        assert np.max(np.abs(mt.maps - mb.maps)) < 1e-10

    def test_polaritonic_block_structure(self, ohmic):
        model = build_polaritonic_trimer(0.0, 0.0, 181.5, 0.0, 100.0)
        eta = eta_coefficients(ohmic, TEMP, 4.0, 3)
        mb = brute_force_maps(model, eta, 3, chunk=50_000)
        mt = tempo_maps(model, eta, 3, svd_cutoff=1e-14)
        assert np.max(np.abs(mt.maps - mb.maps)) < 1e-10

    def test_zero_coupling_any_length(self):
        model = spin_boson()
        maps = tempo_maps(model, zero_etas(4.0, 3), 12)
        bare = bare_propagator(model.hamiltonian, 4.0).matrix
        acc = np.eye(4, dtype=complex)
        for k in range(13):
            assert np.allclose(maps.maps[k], acc, atol=1e-10)
            acc = bare @ acc


class TestMapProperties:
    def test_hermiticity_preservation(self, ohmic):
        model = build_excitonic_nmer(2, 1000.0, 181.5)
        eta = eta_coefficients(ohmic, TEMP, 2.0, 6)
        maps = tempo_maps(model, eta, 6)
        assert maps.hermiticity_defect() < 1e-8

    def test_trace_preservation(self, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 10)
        maps = tempo_maps(model, eta, 10)
        assert maps.trace_defect() < 1e-8

    def test_bath_additivity_half_strength_twice(self, ohmic):
        # two baths on the same site at half coupling-weight reproduce one
        # full bath: eta is linear in the spectral density
        H = np.array([[0.0, -181.5], [-181.5, 0.0]])
        sig = np.array([1.0, -1.0])
        one = SystemModel(H, ["u", "d"], {"b": sig})
        two = SystemModel(H, ["u", "d"], {"b1": sig, "b2": sig})
        eta_full = eta_coefficients(ohmic, TEMP, 4.0, 5)
        eta_half = eta_coefficients(OhmicSpectralDensity(XI / 2, WC), TEMP, 4.0, 5)
        m_one = tempo_maps(one, {"b": eta_full}, 5, svd_cutoff=1e-14)
        m_two = tempo_maps(two, {"b1": eta_half, "b2": eta_half}, 5,
                           svd_cutoff=1e-14)
        assert np.max(np.abs(m_one.maps - m_two.maps)) < 1e-8

    def test_memory_truncation_monotone(self, ohmic):
        # longer windows converge: ||E_m - E_m'|| shrinks as m grows
        model = spin_boson()
        n = 16
        prev = None
        gaps = []
        for m in (2, 4, 8, 16):
            eta = eta_coefficients(ohmic, TEMP, 4.0, m)
            maps = tempo_maps(model, eta, n, svd_cutoff=1e-9).maps
            if prev is not None:
                gaps.append(np.max(np.abs(maps - prev)))
            prev = maps
        assert gaps[0] > gaps[1] > gaps[2]

    def test_bond_cap_error_advises(self, ohmic):
        model = build_excitonic_nmer(2, 1000.0, 181.5)
        eta = eta_coefficients(ohmic, TEMP, 2.0, 20)
        with pytest.raises(BondCapError, match="bond"):
            tempo_maps(model, eta, 20, svd_cutoff=1e-13, max_bond=8)

    def test_invalid_cutoff(self, ohmic):
        model = spin_boson()
        with pytest.raises(ValidationError):
            tempo_maps(model, zero_etas(4.0, 2), 2, svd_cutoff=0.0)


class TestNonHermitian:
    def test_zero_imaginary_matches_hermitian(self, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 4)
        herm = tempo_maps(model, eta, 4)
        nh = nonhermitian_maps(model, eta, 4, model.hamiltonian.astype(complex))
        assert np.max(np.abs(herm.maps - nh.maps)) < 1e-12
        assert nh.non_hermitian

    def test_isolated_level_decay_rate(self):
        # complex shift -i pi hbar / T makes the population fall as
        # exp(-2 pi t / T)
        T = 300.0
        h_eff = np.array([[0.0, 0.0], [0.0, -1j * np.pi * HBAR / T]])
        model = SystemModel(np.zeros((2, 2)), ["g", "e"],
                            {"b": np.zeros(2)})
        maps = nonhermitian_maps(model, zero_etas(4.0, 2), 10, h_eff)
        rho = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
        for k in range(11):
            out = devectorize(maps.maps[k] @ vectorize(rho))
            expected = np.exp(-2 * np.pi * (k * 4.0) / T)
            assert out[1, 1].real == pytest.approx(expected, rel=1e-10)

    def test_positive_imaginary_rejected(self):
        model = SystemModel(np.zeros((2, 2)), ["g", "e"], {"b": np.zeros(2)})
        h_eff = np.array([[0.0, 0.0], [0.0, +1j * 5.0]])
        with pytest.raises(ValidationError, match="pump"):
            nonhermitian_maps(model, zero_etas(4.0, 2), 4, h_eff)

    def test_trace_monotone_decay(self, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 6)
        h_eff = model.hamiltonian.astype(complex)
        h_eff[1, 1] -= 0.5j * HBAR / 300.0
        maps = nonhermitian_maps(model, eta, 6, h_eff)
        rho = np.array([[0.5, 0.0], [0.0, 0.5]], dtype=complex)
        traces = [devectorize(m @ vectorize(rho)).trace().real
                  for m in maps.maps]
        assert all(b < a + 1e-12 for a, b in zip(traces, traces[1:]))
        assert traces[-1] < traces[0]


class TestSeries:
    def test_identity_first_map_required(self):
        with pytest.raises(ValidationError, match="identity"):
            DynamicalMapSeries(dt=1.0, maps=np.zeros((2, 4, 4)),
                               provenance="test")

    def test_save_load_roundtrip(self, tmp_path, ohmic):
        model = spin_boson()
        eta = eta_coefficients(ohmic, TEMP, 4.0, 3)
        maps = tempo_maps(model, eta, 3)
        path = tmp_path / "maps.txt"
        maps.save(path)
        loaded = DynamicalMapSeries.load(path)
        assert loaded.dt == maps.dt
        assert loaded.provenance == maps.provenance
        assert np.max(np.abs(loaded.maps - maps.maps)) < 1e-15
