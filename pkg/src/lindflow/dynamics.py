"""Transfer tensors and reduced-density-matrix propagation.

The memory of the bath enters through transfer tensors extracted from
dynamical maps; Markovian pump/drain/decohering processes enter through a
dissipator semigroup interleaved with the memory convolution by symmetric
splitting.  A dense Runge-Kutta integrator of the bath-free master equation
serves as an independent reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (DensityMatrix, ValidationError, commutator_superop,
                   devectorize, vectorize)
from .model import dissipator_superop
from .pathint import DynamicalMapSeries


class NumericalFailure(RuntimeError):
    """Propagation left its validity envelope (trace drift, instability)."""


@dataclass
class TransferTensors:
    """Discrete memory tensors: E(n) = sum_k T_k E(n-k) for n <= m."""

    dt: float
    tensors: np.ndarray  # (m, d, d) with d the Liouville dimension

    @property
    def m(self):
        return self.tensors.shape[0]

    @property
    def dim(self):
        return int(round(np.sqrt(self.tensors.shape[1])))

    def reconstruct(self, n):
        """Recompose E(n) from the tensors (n <= m), for verification."""
        d = self.tensors.shape[1]
        maps = [np.eye(d, dtype=complex)]
        for j in range(1, n + 1):
            acc = np.zeros((d, d), dtype=complex)
            for k in range(1, min(j, self.m) + 1):
                acc += self.tensors[k - 1] @ maps[j - k]
            maps.append(acc)
        return maps[n]


def transfer_tensors(maps: DynamicalMapSeries, m=None):
    """Extract transfer tensors from the first ``m`` dynamical maps."""
    if m is None:
        m = maps.n_steps
    if maps.n_steps < m:
        raise ValidationError(
            f"need maps through step {m}, have {maps.n_steps}")
    E = maps.maps
    tensors = []
    for n in range(1, m + 1):
        T = E[n].copy()
        for k in range(1, n):
            T -= tensors[k - 1] @ E[n - k]
        tensors.append(T)
    return TransferTensors(dt=maps.dt, tensors=np.array(tensors))


@dataclass
class RDMTrajectory:
    """Time-ordered reduced density matrices on a uniform grid."""

    dt: float
    matrices: np.ndarray  # (n_steps+1, D, D)
    labels: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return self.matrices.shape[0] - 1

    @property
    def times(self):
        return self.dt * np.arange(self.matrices.shape[0])

    @property
    def dim(self):
        return self.matrices.shape[1]

    def traces(self):
        return np.einsum("tii->t", self.matrices).real

    def populations(self, label=None):
        pops = np.einsum("tii->ti", self.matrices).real
        if label is None:
            return pops
        return pops[:, self.labels.index(label)]

    def state(self, n, **tol):
        return DensityMatrix(self.matrices[n], self.labels, **tol)

    def validate(self, trace_tol=1e-6, eig_tol=1e-6):
        """Trace and positivity along the whole trajectory."""
        drift = np.max(np.abs(self.traces() - 1.0))
        if drift > trace_tol:
            raise ValidationError(f"trace drift {drift:.3e} exceeds {trace_tol:g}")
        min_eig = min(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min()
                      for m in self.matrices)
        if min_eig < -eig_tol:
            raise ValidationError(f"negative eigenvalue {min_eig:.3e}")
        return self

    def to_csv(self, path):
        """time_fs plus re/im of the diagonal and upper-triangle elements."""
        labels = self.labels
        D = self.dim
        cols = ["time_fs"]
        getters = []
        for i, l in enumerate(labels):
            cols.append(f"re({l}|{l})")
            getters.append(("re", i, i))
        for i in range(D):
            for j in range(i + 1, D):
                cols.append(f"re({labels[i]}|{labels[j]})")
                getters.append(("re", i, j))
                cols.append(f"im({labels[i]}|{labels[j]})")
                getters.append(("im", i, j))
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for n, t in enumerate(self.times):
                row = [f"{t:.12g}"]
                for part, i, j in getters:
                    v = self.matrices[n, i, j]
                    row.append(f"{(v.real if part == 're' else v.imag):.12g}")
                fh.write(",".join(row) + "\n")


def _dressed_tensors(tensors: TransferTensors, jump_ops, scheme):
    """Fold the dissipator semigroup into the memory tensors.

    symmetric: Theta_k = G(k/2) T_k G(k/2), i.e. each memory term carries
    half of the dissipator action over its own time span on either side.
    bare: Theta_k = G(1/2) T_k G(1/2), dissipator only over the final step.
    """
    d = tensors.tensors.shape[1]
    D = int(round(np.sqrt(d)))
    gen = dissipator_superop(jump_ops, D)
    g_half = expm(gen * (tensors.dt / 2.0))
    theta = np.empty_like(tensors.tensors)
    left = g_half
    for k in range(1, tensors.m + 1):
        if scheme == "symmetric":
            theta[k - 1] = left @ tensors.tensors[k - 1] @ left
            left = left @ g_half
        elif scheme == "bare":
            theta[k - 1] = g_half @ tensors.tensors[k - 1] @ g_half
        else:
            raise ValidationError(f"unknown splitting scheme {scheme!r}")
    return theta


def propagate_with_memory(tensors: TransferTensors, jump_ops, rho0,
                          n_steps, *, scheme="symmetric", check_trace=True,
                          trace_abort=1e-4, labels=None):
    """Evolve rho0 under the memory convolution plus Lindblad dissipators.

    Converges to the continuous equation of motion at second order in the
    time step (symmetric scheme); with no jump operators it reproduces the
    input dynamical maps exactly.
    """
    if isinstance(rho0, DensityMatrix):
        labels = rho0.labels if labels is None else labels
        rho0 = rho0.entries
    rho0 = np.asarray(rho0, dtype=complex)
    D = rho0.shape[0]
    if labels is None:
        labels = [str(i) for i in range(D)]
    if tensors.dim != D:
        raise ValidationError(
            f"state dimension {D} does not match tensors ({tensors.dim})")
    for op in jump_ops:
        op.validate()

    theta = _dressed_tensors(tensors, jump_ops, scheme)
    m = tensors.m
    vecs = [vectorize(rho0)]
    out = np.empty((n_steps + 1, D, D), dtype=complex)
    out[0] = rho0
    for n in range(1, n_steps + 1):
        acc = np.zeros(D * D, dtype=complex)
        for k in range(1, min(n, m) + 1):
            acc += theta[k - 1] @ vecs[n - k]
        vecs.append(acc)
        out[n] = devectorize(acc)
        if check_trace:
            drift = abs(out[n].trace().real - 1.0) + abs(out[n].trace().imag)
            if drift > trace_abort:
                raise NumericalFailure(
                    f"trace drift {drift:.3e} at step {n} (t = {n * tensors.dt:g} fs); "
                    f"memory {m} steps, scheme {scheme}")
    return RDMTrajectory(dt=tensors.dt, matrices=out, labels=list(labels),
                         metadata={"scheme": scheme, "memory_steps": m,
                                   "jump_ops": [repr(op) for op in jump_ops]})


def propagate_maps_directly(maps: DynamicalMapSeries, rho0, labels=None):
    """rho(n) = E(n) rho(0) for every available map (no Lindblad terms)."""
    if isinstance(rho0, DensityMatrix):
        labels = rho0.labels if labels is None else labels
        rho0 = rho0.entries
    v0 = vectorize(np.asarray(rho0, dtype=complex))
    D = int(round(np.sqrt(v0.size)))
    out = np.array([devectorize(E @ v0) for E in maps.maps])
    if labels is None:
        labels = [str(i) for i in range(D)]
    return RDMTrajectory(dt=maps.dt, matrices=out, labels=list(labels),
                         metadata={"engine": "maps-direct"})


def _rk4(gen, y, h, n_sub):
    for _ in range(n_sub):
        k1 = gen @ y
        k2 = gen @ (y + 0.5 * h * k1)
        k3 = gen @ (y + 0.5 * h * k2)
        k4 = gen @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def propagate_lindblad_reference(hamiltonian, jump_ops, rho0, dt, n_steps, *,
                                 tol=1e-12, max_subdiv=4096, labels=None):
    """Bath-free master equation via classical 4th-order integration.

    The substep count is chosen by step halving on the first interval until
    the local error estimate falls below ``tol``; trace drift beyond 1e-6
    afterwards is reported as instability.
    """
    if isinstance(rho0, DensityMatrix):
        labels = rho0.labels if labels is None else labels
        rho0 = rho0.entries
    rho0 = np.asarray(rho0, dtype=complex)
    D = rho0.shape[0]
    if labels is None:
        labels = [str(i) for i in range(D)]
    for op in jump_ops:
        op.validate()
    gen = commutator_superop(hamiltonian) + dissipator_superop(jump_ops, D)

    y = vectorize(rho0)
    n_sub = 1
    while True:
        coarse = _rk4(gen, y, dt / n_sub, n_sub)
        fine = _rk4(gen, y, dt / (2 * n_sub), 2 * n_sub)
        if np.max(np.abs(coarse - fine)) <= tol:
            n_sub *= 2
            break
        n_sub *= 2
        if n_sub > max_subdiv:
            raise NumericalFailure(
                f"step-size control failed: local error "
                f"{np.max(np.abs(coarse - fine)):.3e} > {tol:g} at {max_subdiv} "
                "substeps; reduce dt or loosen tol")

    out = np.empty((n_steps + 1, D, D), dtype=complex)
    out[0] = rho0
    for n in range(1, n_steps + 1):
        y = _rk4(gen, y, dt / n_sub, n_sub)
        out[n] = devectorize(y)
        drift = abs(out[n].trace() - 1.0)
        if drift > 1e-6:
            raise NumericalFailure(
                f"integration unstable: trace drift {drift:.3e} at step {n}; "
                f"n_sub={n_sub}, dt={dt}")
    return RDMTrajectory(dt=dt, matrices=out, labels=list(labels),
                         metadata={"engine": "lindblad-rk4", "n_sub": n_sub})
