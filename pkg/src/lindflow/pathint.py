"""Numerically exact dynamical maps of a system coupled to harmonic baths.

The reduced evolution over ``n`` steps is a sum over forward/backward path
pairs: bare Liouville propagators between time cells, weighted by the
discretized influence functional of every bath.  Cell values are midpoints
of a symmetric split (half-step bare map at both ends, full steps between),
and the influence couples cells at separation ``dk`` through the
coefficients of :class:`~lindflow.bath.EtaCoefficients`.

Two engines share this discretization: an explicit path enumerator (the
oracle, exponential cost) and a matrix-product-state contraction along the
time axis with singular-value truncation (long-memory workhorse).  Within
truncation error they produce identical maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (HBAR, ValidationError, hermiticity_preservation_defect,
                   trace_preservation_defect, SuperOperator)
from .bath import EtaCoefficients
from .mps import MPS

# Relative singular-value cutoff. 1e-8 keeps map errors ~1e-6 on the
# acceptance-scale systems while staying inside the bond cap; the exactness
# contract against the path enumerator is tested at 1e-14 on short runs.
DEFAULT_SVD_CUTOFF = 1e-8
DEFAULT_MAX_BOND = 256


def _bare_liouville(H, dt):
    U = expm(-1j * np.asarray(H, dtype=complex) * (dt / HBAR))
    return np.kron(U.conj(), U)


def bare_propagator(hamiltonian, dt):
    """Forward x backward propagator for the bare system over ``dt`` fs."""
    if dt <= 0:
        raise ValidationError(f"time step must be positive, got {dt}")
    H = np.asarray(hamiltonian)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"Hamiltonian must be square, got {H.shape}")
    return SuperOperator(_bare_liouville(H, dt), dt)


@dataclass
class DynamicalMapSeries:
    """Superoperators E(k dt) for k = 0..N, E(0) the identity."""

    dt: float
    maps: np.ndarray
    provenance: str
    non_hermitian: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=complex)
        if self.maps.ndim != 3 or self.maps.shape[1] != self.maps.shape[2]:
            raise ValidationError(f"maps must be (N+1, d, d), got {self.maps.shape}")
        d = self.maps.shape[1]
        if not np.array_equal(self.maps[0], np.eye(d)):
            raise ValidationError("E(0) must be the identity")

    @property
    def n_steps(self):
        return self.maps.shape[0] - 1

    @property
    def dim(self):
        return int(round(np.sqrt(self.maps.shape[1])))

    def trace_defect(self):
        return max(trace_preservation_defect(m) for m in self.maps)

    def hermiticity_defect(self):
        return max(hermiticity_preservation_defect(m) for m in self.maps)

    def check(self, trace_tol=1e-8, herm_tol=1e-8):
        if not self.non_hermitian and self.trace_defect() > trace_tol:
            raise ValidationError(
                f"maps are not trace-preserving: defect {self.trace_defect():.3e}")
        if self.hermiticity_defect() > herm_tol:
            raise ValidationError(
                f"maps are not hermiticity-preserving: defect "
                f"{self.hermiticity_defect():.3e}")
        return self

    def save(self, path):
        with open(path, "w") as fh:
            fh.write("# dynamical map series: k row col re im\n")
            fh.write(f"# dt_fs {float(self.dt)!r}\n")
            fh.write(f"# provenance {self.provenance}\n")
            fh.write(f"# non_hermitian {int(self.non_hermitian)}\n")
            fh.write(f"# n_maps {self.maps.shape[0]} side {self.maps.shape[1]}\n")
            for k, m in enumerate(self.maps):
                for r in range(m.shape[0]):
                    for c in range(m.shape[1]):
                        v = m[r, c]
                        if v != 0:
                            fh.write(f"{k} {r} {c} {float(v.real)!r} "
                                     f"{float(v.imag)!r}\n")

    @classmethod
    def load(cls, path):
        dt = None
        provenance = "loaded"
        non_hermitian = False
        n_maps = side = None
        entries = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    parts = line[1:].split()
                    if parts[:1] == ["dt_fs"]:
                        dt = float(parts[1])
                    elif parts[:1] == ["provenance"]:
                        provenance = " ".join(parts[1:])
                    elif parts[:1] == ["non_hermitian"]:
                        non_hermitian = bool(int(parts[1]))
                    elif parts[:1] == ["n_maps"]:
                        n_maps, side = int(parts[1]), int(parts[3])
                    continue
                k, r, c, re, im = line.split()
                entries.append((int(k), int(r), int(c), float(re), float(im)))
        if dt is None or n_maps is None:
            raise ValidationError(f"{path}: missing header lines")
        maps = np.zeros((n_maps, side, side), dtype=complex)
        for k, r, c, re, im in entries:
            maps[k, r, c] = re + 1j * im
        return cls(dt=dt, maps=maps, provenance=provenance,
                   non_hermitian=non_hermitian)


class _BathInfluence:
    """Influence data of one bath on a (forward, backward) pair index."""

    def __init__(self, s_fwd, s_bwd, eta: EtaCoefficients):
        s_fwd = np.asarray(s_fwd, dtype=float)
        s_bwd = np.asarray(s_bwd, dtype=float)
        self.dsig = s_fwd - s_bwd
        self.n_memory = eta.n_memory
        # u[dk][a_old]: the earlier cell's weight in the pair exponent.
        self.u = (eta.eta[:, None] * s_fwd[None, :]
                  - np.conj(eta.eta)[:, None] * s_bwd[None, :])
        dvals, cls = np.unique(self.dsig, return_inverse=True)
        self.dvals = dvals
        self.cls = cls

    def self_weights(self):
        """exp of the within-cell term, a vector over the pair index."""
        return np.exp(-self.dsig * self.u[0])

    def pair_matrix(self, dk):
        """Full d x d pair factor between a new cell (rows) and one dk older."""
        return np.exp(-np.outer(self.dsig, self.u[dk]))

    def gate_rows(self, dk):
        """Pair factor resolved by coupling-difference class: (n_cls, d)."""
        return np.exp(-np.outer(self.dvals, self.u[dk]))


def _bath_pairs(model, etas):
    """Normalize the etas argument into (coupling diagonal, eta) pairs."""
    if isinstance(etas, EtaCoefficients):
        etas = {bid: etas for bid in model.coupling_ops}
    unknown = set(etas) - set(model.coupling_ops)
    if unknown:
        raise ValidationError(f"etas given for unknown baths {sorted(unknown)}")
    dts = {e.dt for e in etas.values()}
    if len(dts) > 1:
        raise ValidationError(f"baths disagree on dt: {sorted(dts)}")
    pairs = [(np.asarray(model.coupling_ops[bid], dtype=float), e)
             for bid, e in sorted(etas.items())]
    dt = dts.pop() if dts else None
    return pairs, dt


def _liouville_influences(pairs, dim):
    """Influence objects on the full Liouville index (a = i + j*dim)."""
    a = np.arange(dim * dim)
    return [_BathInfluence(sig[a % dim], sig[a // dim], e) for sig, e in pairs]


def _validate_nonhermitian(h_eff):
    h_eff = np.asarray(h_eff, dtype=complex)
    off = h_eff - np.diag(np.diag(h_eff))
    if np.max(np.abs(off - off.conj().T)) > 1e-10 * max(np.linalg.norm(h_eff), 1.0):
        raise ValidationError("non-Hermitian part must be purely diagonal")
    if np.any(np.diag(h_eff).imag > 1e-12):
        raise ValidationError(
            "positive imaginary diagonal entries amount to a pump, which a "
            "non-Hermitian propagator renders as an unphysical exponential "
            "rise; only decaying (negative) shifts are allowed")
    return h_eff


def brute_force_maps(model, etas, n_steps, *, dt=None, hamiltonian=None,
                     non_hermitian=False, max_paths=100_000_000,
                     chunk=200_000):
    """Exact path-sum maps; cost d^(2n) per step, guarded by ``max_paths``."""
    pairs, eta_dt = _bath_pairs(model, etas)
    dt = dt if dt is not None else eta_dt
    if dt is None:
        raise ValidationError("dt required when no baths are present")
    H = model.hamiltonian if hamiltonian is None else np.asarray(hamiltonian)
    if non_hermitian:
        H = _validate_nonhermitian(H)
    D = model.dim
    d = D * D
    specs = _liouville_influences(pairs, D)
    if d ** n_steps > max_paths:
        raise ValidationError(
            f"path count {d}^{n_steps} exceeds the enumeration guard {max_paths:g}")

    M = _bare_liouville(H, dt)
    Mh = _bare_liouville(H, dt / 2.0)
    b0 = np.ones(d, dtype=complex)
    for sp in specs:
        b0 = b0 * sp.self_weights()
    mem_max = max((sp.n_memory for sp in specs), default=0)
    pair = {}
    for dk in range(1, mem_max + 1):
        mat = np.ones((d, d), dtype=complex)
        for sp in specs:
            if dk <= sp.n_memory:
                mat = mat * sp.pair_matrix(dk)
        pair[dk] = mat

    maps = [np.eye(d, dtype=complex)]
    for n in range(1, n_steps + 1):
        K = np.zeros((d, d), dtype=complex)
        total = d ** n
        for start in range(0, total, chunk):
            ids = np.arange(start, min(start + chunk, total))
            digits = np.empty((ids.size, n), dtype=np.int64)
            rem = ids.copy()
            for k in range(n):
                digits[:, k] = rem % d
                rem //= d
            W = b0[digits[:, 0]].copy()
            for k in range(1, n):
                W *= b0[digits[:, k]]
                W *= M[digits[:, k], digits[:, k - 1]]
            for dk in range(1, min(n - 1, mem_max) + 1):
                mat = pair[dk]
                for k in range(dk, n):
                    W *= mat[digits[:, k], digits[:, k - dk]]
            np.add.at(K, (digits[:, n - 1], digits[:, 0]), W)
        maps.append(Mh @ K @ Mh)

    return DynamicalMapSeries(
        dt=dt, maps=np.array(maps), provenance="brute",
        non_hermitian=non_hermitian,
        metadata={"engine": "brute", "splitting": "strang-midpoint"})


def _zip_bath_pass(mps, spec, n_active, cutoff, max_bond):
    """Multiply one bath's pair factors between site 0 and history sites.

    Separations 1..n_active are gated; the operator bond carries the
    coupling-difference class of the new cell (dimension len(spec.dvals))
    and is zipped through with on-the-fly truncation, leaving the gated
    part of the chain left-canonical.  Returns the discarded weight.
    """
    from .mps import _keep_count, _svd

    nc = len(spec.dvals)
    if nc == 1 and spec.dvals[0] == 0.0:
        return 0.0
    last = min(n_active, spec.n_memory)
    if last < 1:
        return 0.0
    ts = mps.tensors
    zip_cut = cutoff
    # Transient bonds during the zip may overshoot the stored-state cap;
    # the cap proper is enforced by the compression sweep that follows.
    zip_cap = 4 * max_bond
    discarded = 0.0

    # Head site emits the class index into the bond.
    A = ts[0]
    _, d, r0 = A.shape
    T = np.zeros((d, r0, nc), dtype=complex)
    T[np.arange(d), :, spec.cls] = A[0]
    u, s, vh = _svd(T.reshape(d, r0 * nc))
    keep = _keep_count(s, zip_cut, zip_cap, 0)
    discarded += float(np.sum(s[keep:] ** 2))
    ts[0] = u[:, :keep].reshape(1, d, keep)
    Z = (s[:keep, None] * vh[:keep]).reshape(keep, r0, nc)

    for j in range(1, last + 1):
        A = ts[j]
        W = spec.gate_rows(j)
        if j < last:
            T = np.einsum("blg,lpr->bgpr", Z, A, optimize=True)
            T *= W[None, :, :, None]
            b, g, p, r = T.shape
            u, s, vh = _svd(T.transpose(0, 2, 3, 1).reshape(b * p, r * g))
            keep = _keep_count(s, zip_cut, zip_cap, j)
            discarded += float(np.sum(s[keep:] ** 2))
            ts[j] = u[:, :keep].reshape(b, p, keep)
            Z = (s[:keep, None] * vh[:keep]).reshape(keep, r, g)
        else:
            T = np.einsum("blg,lpr->bgpr", Z, A, optimize=True)
            T *= W[None, :, :, None]
            T = T.sum(axis=1)
            b, p, r = T.shape
            u, s, vh = _svd(T.reshape(b * p, r))
            keep = _keep_count(s, zip_cut, zip_cap, j)
            discarded += float(np.sum(s[keep:] ** 2))
            ts[j] = u[:, :keep].reshape(b, p, keep)
            z_tail = s[:keep, None] * vh[:keep]
            ts[j + 1] = np.einsum("br,rps->bps", z_tail, ts[j + 1],
                                  optimize=True)
    return discarded


def _tempo_engine(U, Uh, infl, n_steps, mem_max, svd_cutoff, max_bond):
    """Core time-axis contraction for one (forward, backward) index block.

    ``U``/``Uh`` are the full/half-step forward and backward unitaries as a
    pair (U_fwd, U_bwd); ``infl`` lists per-bath influence objects on this
    block's pair index.  Returns (maps list, max bond, discarded weight).
    """
    U_fwd, U_bwd = U
    Uh_fwd, Uh_bwd = Uh
    M = np.kron(U_bwd.conj(), U_fwd)
    Mh = np.kron(Uh_bwd.conj(), Uh_fwd)
    d = M.shape[0]
    b0 = np.ones(d, dtype=complex)
    for sp in infl:
        b0 = b0 * sp.self_weights()

    maps = [np.eye(d, dtype=complex)]
    if n_steps == 0:
        return maps, 1, 0.0

    # First cell: half-step from the initial index, then the self weight.
    B = b0[:, None] * Mh
    u, s, vh = np.linalg.svd(B, full_matrices=False)
    keep = max(int(np.sum(s > 1e-16 * s[0])), 1) if s[0] > 0 else 1
    mps = MPS([u[:, :keep].reshape(1, d, keep),
               (s[:keep, None] * vh[:keep]).reshape(keep, d, 1)])
    maps.append(Mh @ mps.contract_marginal(keep_first=True))

    max_bond_seen = mps.max_bond()
    discarded = 0.0
    gate = b0[:, None] * M
    for n in range(2, n_steps + 1):
        n_hist = len(mps) - 1
        A0 = mps.tensors[0]
        B = gate[:, :, None] * A0[0][None, :, :]
        _, dphys, r = A0.shape
        u, s, vh = np.linalg.svd(B.reshape(d, dphys * r), full_matrices=False)
        keep = max(int(np.sum(s > 1e-16 * s[0])), 1) if s[0] > 0 else 1
        mps.tensors[0:1] = [u[:, :keep].reshape(1, d, keep),
                            (s[:keep, None] * vh[:keep]).reshape(keep, dphys, r)]
        for sp in infl:
            covered = min(n_hist, sp.n_memory) == n_hist
            discarded += _zip_bath_pass(mps, sp, n_hist, svd_cutoff, max_bond)
            discarded += mps.compress(svd_cutoff, max_bond, skip_qr=covered)
        if len(mps) - 1 > mem_max:
            mps.sum_out(len(mps) - 2)
        max_bond_seen = max(max_bond_seen, mps.max_bond())
        maps.append(Mh @ mps.contract_marginal(keep_first=True))
    return maps, max_bond_seen, discarded


def _h_components(H):
    """Connected components of the Hamiltonian's off-diagonal graph.

    The bare propagator is block-diagonal over these components, and the
    influence weights are diagonal, so the full maps factorize over ordered
    component pairs.
    """
    D = H.shape[0]
    scale = max(np.max(np.abs(H)), 1.0)
    adj = np.abs(H) > 1e-14 * scale
    np.fill_diagonal(adj, False)
    comp = -np.ones(D, dtype=int)
    comps = []
    for start in range(D):
        if comp[start] >= 0:
            continue
        stack = [start]
        members = []
        comp[start] = len(comps)
        while stack:
            i = stack.pop()
            members.append(i)
            for j in np.nonzero(adj[i])[0]:
                if comp[j] < 0:
                    comp[j] = len(comps)
                    stack.append(j)
        comps.append(sorted(members))
    return comps


def tempo_maps(model, etas, n_steps, *, dt=None, svd_cutoff=DEFAULT_SVD_CUTOFF,
               max_bond=DEFAULT_MAX_BOND, hamiltonian=None,
               non_hermitian=False):
    """Tensor-network path-sum maps with singular-value truncation.

    The growing history tensor is stored as an MPS ordered newest cell
    first, with a free trailing leg for the initial Liouville index, so a
    single propagation yields every map E(k dt), k = 1..n_steps.  Memory is
    truncated sharply beyond each bath's coefficient horizon.  Because the
    bare propagator is block-diagonal over the Hamiltonian's connectivity
    components and the couplings are diagonal, the contraction runs per
    ordered component pair; the (b, a) block is the conjugate mirror of
    (a, b), so only a <= b is contracted.
    """
    if not (0 < svd_cutoff < 1):
        raise ValidationError(f"svd_cutoff must be in (0, 1), got {svd_cutoff}")
    pairs, eta_dt = _bath_pairs(model, etas)
    dt = dt if dt is not None else eta_dt
    if dt is None:
        raise ValidationError("dt required when no baths are present")
    H = model.hamiltonian if hamiltonian is None else np.asarray(hamiltonian)
    if non_hermitian:
        H = _validate_nonhermitian(H)
    D = model.dim
    d = D * D
    mem_max = max((e.n_memory for _, e in pairs), default=1)

    U = expm(-1j * H.astype(complex) * (dt / HBAR))
    Uh = expm(-1j * H.astype(complex) * (dt / (2.0 * HBAR)))
    comps = _h_components(H)

    maps = np.zeros((n_steps + 1, d, d), dtype=complex)
    max_bond_seen = 1
    discarded = 0.0
    for a, Ca in enumerate(comps):
        for b, Cb in enumerate(comps[a:], start=a):
            na, nb = len(Ca), len(Cb)
            infl = [_BathInfluence(np.tile(sig[Ca], nb),
                                   np.repeat(sig[Cb], na), e)
                    for sig, e in pairs]
            blk_maps, mb, disc = _tempo_engine(
                (U[np.ix_(Ca, Ca)], U[np.ix_(Cb, Cb)]),
                (Uh[np.ix_(Ca, Ca)], Uh[np.ix_(Cb, Cb)]),
                infl, n_steps, mem_max, svd_cutoff, max_bond)
            max_bond_seen = max(max_bond_seen, mb)
            discarded += disc
            g_ab = np.array([i + D * j for j in Cb for i in Ca])
            maps[np.ix_(range(n_steps + 1), g_ab, g_ab)] = blk_maps
            if b != a:
                # (b, a) block: conjugate with both pair indices swapped.
                g_ba = np.array([i + D * j for j in Ca for i in Cb])
                perm = np.arange(na * nb).reshape(nb, na).T.ravel()
                mirrored = np.conj(np.asarray(blk_maps)[:, perm][:, :, perm])
                maps[np.ix_(range(n_steps + 1), g_ba, g_ba)] = mirrored

    return DynamicalMapSeries(
        dt=dt, maps=maps, provenance="tensor-network",
        non_hermitian=non_hermitian,
        metadata={"engine": "tempo", "svd_cutoff": svd_cutoff,
                  "max_bond": max_bond_seen, "discarded_weight": discarded,
                  "splitting": "strang-midpoint",
                  "n_blocks": len(comps) * (len(comps) + 1) // 2})


def nonhermitian_maps(model, etas, n_steps, h_eff, *, dt=None,
                      engine="tempo", **kwargs):
    """Maps generated with a complex-diagonal effective Hamiltonian.

    The anti-Hermitian part must be decaying (non-positive imaginary
    diagonal); the resulting series is flagged non-trace-preserving.
    """
    h_eff = _validate_nonhermitian(h_eff)
    fn = tempo_maps if engine == "tempo" else brute_force_maps
    return fn(model, etas, n_steps, dt=dt, hamiltonian=h_eff,
              non_hermitian=True, **kwargs)
