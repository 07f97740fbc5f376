import numpy as np
import pytest

from lindflow.core import (HBAR, KB, DensityMatrix, SuperOperator,
                           ValidationError, devectorize, left_right_superop,
                           trace_preservation_defect, vectorize)


def test_hbar_matches_codata():
    # hbar in cm^-1 fs from CODATA hbar and c: 1 / (2 pi c[cm/fs])
    c_cm_fs = 2.99792458e10 * 1e-15
    expected = 1.0 / (2.0 * np.pi * c_cm_fs)
    assert abs(HBAR - expected) / expected < 1e-4
    assert abs(HBAR - 5308.8) / 5308.8 < 1e-4


def test_kb_at_300K():
    assert abs(KB * 300.0 - 208.5) / 208.5 < 1e-3


def test_vectorize_identity_column_major():
    rho = np.eye(2) / 2
    assert np.allclose(vectorize(rho), [0.5, 0.0, 0.0, 0.5])
    # column stacking: element (1, 0) sits at position 1
    rho = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(vectorize(rho), [1.0, 3.0, 2.0, 4.0])


def test_vectorize_roundtrip_random():
    rng = np.random.default_rng(1)
    for _ in range(5):
        rho = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert np.array_equal(devectorize(vectorize(rho)), rho)


def test_left_right_superop_action():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    rho = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    direct = A @ rho @ B.conj().T
    via_superop = devectorize(left_right_superop(A, B) @ vectorize(rho))
    assert np.allclose(via_superop, direct, atol=1e-12)


def test_density_matrix_rejects_non_hermitian():
    bad = np.array([[0.5, 0.1], [0.3, 0.5]])
    with pytest.raises(ValidationError, match="Hermitian"):
        DensityMatrix(bad)


def test_density_matrix_rejects_bad_trace():
    with pytest.raises(ValidationError, match="trace"):
        DensityMatrix(np.eye(2))


def test_density_matrix_rejects_negative_eigenvalue():
    rho = np.array([[1.2, 0.0], [0.0, -0.2]])
    with pytest.raises(ValidationError, match="eigenvalue"):
        DensityMatrix(rho)


def test_density_matrix_tolerance_overrides():
    rho = np.array([[1.1, 0.0], [0.0, -0.1]])
    DensityMatrix(rho, trace_tol=1e-6, eig_tol=0.2)


def test_density_matrix_from_label():
    dm = DensityMatrix.from_label("ge", ["gg", "ge", "eg", "ee"])
    assert dm.population("ge") == 1.0
    assert dm.population("gg") == 0.0


def test_superoperator_trace_preservation_flag():
    d = 3
    U = np.linalg.qr(np.random.default_rng(3).standard_normal((d, d))
                     + 1j * np.random.default_rng(4).standard_normal((d, d)))[0]
    good = left_right_superop(U, U)
    SuperOperator(good, physical=True)
    assert trace_preservation_defect(good) < 1e-12
    with pytest.raises(ValidationError, match="trace"):
        SuperOperator(2.0 * good, physical=True)


def test_superoperator_apply():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    op = SuperOperator(left_right_superop(A, A))
    rho = np.array([[0.7, 0.1], [0.1, 0.3]], dtype=complex)
    assert np.allclose(op.apply(rho), A @ rho @ A.conj().T)
