"""System Hamiltonians and Lindblad jump operators.

Two model families are provided: the full-space excitonic N-mer (2^N diabatic
product states ``g``/``e`` per monomer, nearest-neighbor excitation hopping)
and a polaritonic trimer restricted to its ground + first-excitation subspace
plus a cavity mode.  Bath coupling operators are diagonal in the model basis,
one bath per monomer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import HBAR, ValidationError, is_hermitian


class JumpValidationError(ValidationError):
    """A jump operator violates the distinct-endpoint restriction."""


@dataclass(frozen=True)
class JumpTerm:
    """One elementary transition ``coeff * |final><initial|``."""
    coeff: complex
    initial: int
    final: int


class JumpOperator:
    """A Markovian process: ``T**-0.5 * sum_j c_j |f_j><i_j|``.

    Within one operator all final states must be pairwise distinct and no
    term may start and end on the same state; processes that would merge
    several initial states into one final state belong in separate operators.
    """

    def __init__(self, timescale_fs, terms, kind="custom", site=None):
        if timescale_fs <= 0:
            raise JumpValidationError(f"timescale must be positive, got {timescale_fs}")
        parsed = []
        for c, i, f in terms:
            parsed.append(JumpTerm(complex(c), int(i), int(f)))
        self.timescale_fs = float(timescale_fs)
        self.terms = tuple(parsed)
        self.kind = kind
        self.site = site
        self.validate()

    def validate(self):
        finals = {}
        for t in self.terms:
            if t.final == t.initial:
                raise JumpValidationError(
                    f"term {t} has identical start and end state")
            if t.final in finals:
                raise JumpValidationError(
                    "shared final state between elementary terms "
                    f"{finals[t.final]} and {t}; split them into separate operators")
            finals[t.final] = t

    def matrix(self, dim):
        """Dense matrix in 1/sqrt(fs) units."""
        L = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            if t.initial >= dim or t.final >= dim:
                raise ValidationError(
                    f"term {t} outside dimension {dim}")
            L[t.final, t.initial] += t.coeff
        return L / np.sqrt(self.timescale_fs)

    def __repr__(self):
        pairs = ", ".join(f"{t.initial}->{t.final}" for t in self.terms)
        return f"JumpOperator({self.kind}, T={self.timescale_fs} fs, [{pairs}])"


def jump_matrix(op: JumpOperator, dim: int):
    """Functional alias for :meth:`JumpOperator.matrix`."""
    return op.matrix(dim)


def validate_jump(op: JumpOperator):
    """Re-run the endpoint-restriction checks; raises on violation."""
    op.validate()
    return True


def dissipator_superop(jump_ops, dim):
    """Lindblad dissipator sum(L rho L^dag - {L^dag L, rho}/2) in 1/fs."""
    eye = np.eye(dim)
    D = np.zeros((dim * dim, dim * dim), dtype=complex)
    for op in jump_ops:
        L = op.matrix(dim)
        LdL = L.conj().T @ L
        D += np.kron(L.conj(), L)
        D -= 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    return D


@dataclass
class SystemModel:
    """A labeled system Hamiltonian with diagonal bath-coupling operators.

    ``coupling_ops`` maps a bath id to the diagonal of its coupling operator;
    ``monomer_of`` maps each basis label to the set of monomers excited in it.
    """

    hamiltonian: np.ndarray
    labels: list
    coupling_ops: dict = field(default_factory=dict)
    ground_label: str | None = None
    monomer_of: dict = field(default_factory=dict)

    def __post_init__(self):
        H = np.array(self.hamiltonian, dtype=complex)
        if not is_hermitian(H, tol=1e-12):
            raise ValidationError("system Hamiltonian is not Hermitian")
        if len(self.labels) != H.shape[0]:
            raise ValidationError("label count does not match Hamiltonian dimension")
        self.hamiltonian = H
        for bath_id, diag in list(self.coupling_ops.items()):
            diag = np.asarray(diag, dtype=float)
            if diag.shape != (H.shape[0],):
                raise ValidationError(
                    f"coupling operator {bath_id} must be a diagonal of length {H.shape[0]}")
            self.coupling_ops[bath_id] = diag

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown label {label!r}; basis is {self.labels}") from None

    def excitation_count(self, label):
        return len(self.monomer_of.get(label, set()))

    def excitation_counts(self):
        return np.array([self.excitation_count(l) for l in self.labels])


def _nmer_labels(n):
    # Binary order with g=0 < e=1 and monomer 1 most significant:
    # gg, ge, eg, ee for the dimer.
    labels = []
    for k in range(2 ** n):
        bits = format(k, f"0{n}b")
        labels.append("".join("e" if b == "1" else "g" for b in bits))
    return labels


def build_excitonic_nmer(n, epsilon, hopping):
    """Full-space N-mer: 2^N product basis, nearest-neighbor hopping -h.

    Diagonal entries are ``epsilon`` per excited monomer; the off-diagonal
    element between two labels differing by one adjacent e/g swap is
    ``-hopping``.  One bath per monomer couples through the projector onto
    that monomer's excited subspace.
    """
    if n < 1:
        raise ValidationError(f"monomer count must be >= 1, got {n}")
    labels = _nmer_labels(n)
    d = len(labels)
    H = np.zeros((d, d))
    for a, la in enumerate(labels):
        H[a, a] = epsilon * la.count("e")
        for b, lb in enumerate(labels):
            if a == b:
                continue
            diff = [j for j in range(n) if la[j] != lb[j]]
            if (len(diff) == 2 and diff[1] == diff[0] + 1
                    and la[diff[0]] != la[diff[1]]):
                H[a, b] = -hopping
    coupling = {}
    for j in range(n):
        coupling[f"monomer{j + 1}"] = np.array(
            [1.0 if l[j] == "e" else 0.0 for l in labels])
    monomer_of = {l: {j + 1 for j in range(n) if l[j] == "e"} for l in labels}
    return SystemModel(H, labels, coupling, ground_label="g" * n,
                       monomer_of=monomer_of)


def build_polaritonic_trimer(epsilon0, epsilon, hopping, omega_c, rabi):
    """Ground + first-excitation subspace of a trimer in a lossy cavity.

    Basis {0, 1, 2, 3, c}: shared ground state, one excitation on monomer j,
    cavity photon.  Nearest-neighbor coupling -hopping between 1-2 and 2-3,
    light-matter coupling ``rabi`` between each monomer state and the cavity.
    ``omega_c`` is the cavity quantum expressed in cm^-1.  Monomer states
    carry their own baths; the ground state and the cavity do not.
    """
    labels = ["0", "1", "2", "3", "c"]
    H = np.zeros((5, 5))
    H[0, 0] = epsilon0
    for j in (1, 2, 3):
        H[j, j] = epsilon
    H[4, 4] = omega_c
    H[1, 2] = H[2, 1] = -hopping
    H[2, 3] = H[3, 2] = -hopping
    for j in (1, 2, 3):
        H[j, 4] = H[4, j] = rabi
    coupling = {}
    for j in (1, 2, 3):
        diag = np.zeros(5)
        diag[j] = 1.0
        coupling[f"monomer{j}"] = diag
    monomer_of = {"0": set(), "1": {1}, "2": {2}, "3": {3}, "c": {"c"}}
    return SystemModel(H, labels, coupling, ground_label="0",
                       monomer_of=monomer_of)


def _is_full_space(model):
    return all(set(l) <= {"g", "e"} for l in model.labels)


def pump_operator(model, site, timescale_fs):
    """Incoherent pump on one monomer of a full-space N-mer.

    One term per basis pair differing only at the pumped monomer, taking its
    ground state to its excited state.
    """
    if not _is_full_space(model):
        raise ValidationError(
            "pumps need the full-space excitonic basis; first-excitation "
            "subspace models cannot gain excitations")
    n = len(model.labels[0])
    if not 1 <= site <= n:
        raise ValidationError(f"site {site} out of range 1..{n}")
    terms = []
    for a, la in enumerate(model.labels):
        if la[site - 1] == "g":
            lb = la[:site - 1] + "e" + la[site:]
            terms.append((1.0, a, model.index(lb)))
    return JumpOperator(timescale_fs, terms, kind="pump", site=site)


def drain_operator(model, site, timescale_fs):
    """Incoherent drain: reverse of :func:`pump_operator`.

    On a polaritonic model, draining site j (or the cavity, site="c") is the
    single jump |j> -> |0>.
    """
    if _is_full_space(model):
        n = len(model.labels[0])
        if not 1 <= site <= n:
            raise ValidationError(f"site {site} out of range 1..{n}")
        terms = []
        for a, la in enumerate(model.labels):
            if la[site - 1] == "e":
                lb = la[:site - 1] + "g" + la[site:]
                terms.append((1.0, a, model.index(lb)))
        return JumpOperator(timescale_fs, terms, kind="drain", site=site)
    if model.ground_label is None:
        raise ValidationError("drains need a ground state in the basis")
    site = int(site) if str(site).isdigit() else site
    terms = [(1.0, model.index(str(site)), model.index(model.ground_label))]
    return JumpOperator(timescale_fs, terms, kind="drain", site=site)
