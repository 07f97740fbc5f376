"""Unit conventions, vectorization, and validated quantum-state containers.

Conventions used throughout the package:

- energies and couplings in wavenumbers (cm^-1), times in femtoseconds (fs),
  temperatures in kelvin.  Phase evolution is ``exp(-i E t / HBAR)`` with
  ``HBAR`` expressed in cm^-1 fs, so parameters from the literature can be
  used verbatim.
- density matrices are vectorized by column stacking (Fortran order).  The
  superoperator implementing ``rho -> A rho B^dag`` is ``kron(conj(B), A)``.
"""

from __future__ import annotations

import numpy as np

# Speed of light in cm/fs (CODATA exact value 2.99792458e10 cm/s).
C_CM_PER_FS = 2.99792458e-5

#: hbar in cm^-1 fs: the phase accumulated by a state of energy E (cm^-1)
#: over time t (fs) is E*t/HBAR.
HBAR = 1.0 / (2.0 * np.pi * C_CM_PER_FS)

#: Boltzmann constant in cm^-1 per kelvin (CODATA kB / hc).
KB = 1.380649e-23 / (6.62607015e-34 * 2.99792458e10)

# Repo-wide default tolerances; every check accepts an override.
HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = 1e-8


class ValidationError(ValueError):
    """Raised when a physical container fails its construction invariants."""


def vectorize(rho):
    """Column-stack a D x D matrix into a length D^2 vector."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(vec):
    """Inverse of :func:`vectorize`; length must be a perfect square."""
    vec = np.asarray(vec)
    if vec.ndim != 1:
        raise ValidationError(f"expected a vector, got shape {vec.shape}")
    d = int(round(np.sqrt(vec.size)))
    if d * d != vec.size:
        raise ValidationError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(d, d, order="F")


def left_right_superop(A, B):
    """Matrix of ``rho -> A rho B^dag`` in the column-stacking convention."""
    A = np.asarray(A)
    B = np.asarray(B)
    return np.kron(B.conj(), A)


def commutator_superop(H):
    """Matrix of ``rho -> -i/hbar [H, rho]`` (H in cm^-1, result in 1/fs)."""
    H = np.asarray(H)
    d = H.shape[0]
    eye = np.eye(d)
    return (-1j / HBAR) * (np.kron(eye, H) - np.kron(H.T, eye))


def is_hermitian(M, tol=HERM_TOL):
    M = np.asarray(M)
    scale = max(np.linalg.norm(M), 1.0)
    return np.max(np.abs(M - M.conj().T)) <= tol * scale


class DensityMatrix:
    """A validated reduced density matrix with labeled basis states.

    Construction enforces hermiticity, unit trace and positivity within the
    given tolerances; propagation code relaxes these for states that drift
    inside the propagator's error budget.
    """

    def __init__(self, entries, labels=None, *, herm_tol=HERM_TOL,
                 trace_tol=TRACE_TOL, eig_tol=EIG_TOL):
        entries = np.array(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError(f"density matrix must be square, got {entries.shape}")
        dim = entries.shape[0]
        if labels is None:
            labels = [str(i) for i in range(dim)]
        labels = list(labels)
        if len(labels) != dim:
            raise ValidationError(f"{len(labels)} labels for dimension {dim}")

        scale = max(np.linalg.norm(entries), 1.0)
        herm_dev = np.max(np.abs(entries - entries.conj().T))
        if herm_dev > herm_tol * scale:
            raise ValidationError(
                f"non-Hermitian density matrix: max |rho - rho^dag| = {herm_dev:.3e}")
        tr = entries.trace()
        if abs(tr - 1.0) > trace_tol:
            raise ValidationError(f"trace = {tr:.12g}, expected 1 within {trace_tol:g}")
        evals = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))
        if evals.min() < -eig_tol:
            raise ValidationError(f"negative eigenvalue {evals.min():.3e}")

        self.entries = entries
        self.entries.setflags(write=False)
        self.dim = dim
        self.labels = labels

    @classmethod
    def from_label(cls, label, labels):
        """Pure state |label><label| in the basis given by `labels`."""
        labels = list(labels)
        if label not in labels:
            raise ValidationError(f"unknown state label {label!r}; basis is {labels}")
        d = len(labels)
        rho = np.zeros((d, d), dtype=complex)
        i = labels.index(label)
        rho[i, i] = 1.0
        return cls(rho, labels)

    def population(self, label):
        return float(self.entries[self.labels.index(label), self.labels.index(label)].real)

    def vec(self):
        return vectorize(self.entries)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, labels={self.labels})"


class SuperOperator:
    """A D^2 x D^2 matrix acting on column-stacked density matrices."""

    def __init__(self, matrix, dt=None, *, physical=False, tol=1e-10):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"superoperator must be square, got {matrix.shape}")
        d = int(round(np.sqrt(matrix.shape[0])))
        if d * d != matrix.shape[0]:
            raise ValidationError(f"side {matrix.shape[0]} is not a perfect square")
        if physical and not trace_preservation_defect(matrix) <= tol:
            raise ValidationError(
                "superoperator flagged physical is not trace-preserving: "
                f"defect {trace_preservation_defect(matrix):.3e}")
        self.matrix = matrix
        self.dim = d
        self.dt = dt

    def apply(self, rho):
        """Apply to a D x D matrix, returning a D x D matrix."""
        return devectorize(self.matrix @ vectorize(rho))

    def __matmul__(self, other):
        if isinstance(other, SuperOperator):
            return SuperOperator(self.matrix @ other.matrix, self.dt)
        return self.matrix @ other


def trace_preservation_defect(matrix):
    """Max deviation of Tr[E(rho)] from Tr[rho] over a spanning set.

    Tr[E(rho)] = tr_vec . vec(rho) with tr_vec the vectorized identity, so
    trace preservation is equivalent to ``E^T tr_vec = tr_vec``.
    """
    matrix = np.asarray(matrix)
    d = int(round(np.sqrt(matrix.shape[0])))
    tr_vec = vectorize(np.eye(d))
    return float(np.max(np.abs(matrix.T @ tr_vec - tr_vec)))


def hermiticity_preservation_defect(matrix, rng=None, samples=4):
    """Max non-hermiticity of E(rho) over random Hermitian unit-trace inputs."""
    matrix = np.asarray(matrix)
    d = int(round(np.sqrt(matrix.shape[0])))
    rng = np.random.default_rng(rng if rng is not None else 7)
    worst = 0.0
    for _ in range(samples):
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = X + X.conj().T
        rho = rho / rho.trace()
        out = devectorize(matrix @ vectorize(rho))
        worst = max(worst, float(np.max(np.abs(out - out.conj().T))))
    return worst
