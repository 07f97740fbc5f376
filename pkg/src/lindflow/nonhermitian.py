"""Effective non-Hermitian surrogates for drain processes.

A drain-only set of jump operators can be folded into the Hamiltonian as
``H - i hbar/2 sum L^dag L``, trading trace conservation for a smaller
description: the decayed population simply vanishes instead of collecting
in the drain target.  Pumps have no such surrogate (a positive imaginary
shift grows exponentially and never lifts an empty state), so they are
rejected.  The comparison pipeline runs the same physical problem through
the Lindblad route and the non-Hermitian route and reports the deviations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import HBAR, ValidationError
from .bath import eta_coefficients
from .dynamics import propagate_with_memory, transfer_tensors
from .flows import accumulate_flows, site_loss
from .model import SystemModel, build_polaritonic_trimer, drain_operator
from .pathint import nonhermitian_maps, tempo_maps


def _term_is_pump(term, model):
    if model is None:
        return False
    li = model.labels[term.initial]
    lf = model.labels[term.final]
    return model.excitation_count(lf) > model.excitation_count(li)


def effective_hamiltonian(hamiltonian, jump_ops, model=None):
    """H - (i hbar / 2) sum_n L_n^dag L_n, drains only.

    A single drain with timescale T on state s shifts its diagonal by
    -i hbar / (2 T).  Operators tagged as pumps (or whose terms raise the
    model's excitation count) are rejected: under purely non-Hermitian
    evolution they would produce an exponential population rise, which is
    phenomenologically wrong.
    """
    H = np.asarray(hamiltonian, dtype=complex).copy()
    D = H.shape[0]
    for op in jump_ops:
        if op.kind == "pump" or any(_term_is_pump(t, model) for t in op.terms):
            raise ValidationError(
                f"{op!r} pumps population; non-Hermitian evolution cannot "
                "represent gain processes")
        L = op.matrix(D)
        H -= 0.5j * HBAR * (L.conj().T @ L)
    return H


def lossy_first_excitation_model(hopping, omega_c, rabi, losses,
                                 shift_convention="halved"):
    """Four-state polaritonic model {1,2,3,c} with complex decaying diagonals.

    ``losses`` maps labels to timescales in fs.  The ground state is not part
    of the basis: decayed population leaves the description entirely.  Two
    conventions for the imaginary shift are supported: ``halved`` gives
    -hbar/(2T) (population lifetime T, matching the Lindblad timescale) and
    ``pi`` gives -pi hbar/T (population decay exp(-2 pi t / T)).
    """
    labels = ["1", "2", "3", "c"]
    H = np.zeros((4, 4))
    H[0, 1] = H[1, 0] = -hopping
    H[1, 2] = H[2, 1] = -hopping
    H[3, 3] = omega_c
    for j in range(3):
        H[j, 3] = H[3, j] = rabi
    coupling = {}
    for j in range(3):
        diag = np.zeros(4)
        diag[j] = 1.0
        coupling[f"monomer{j + 1}"] = diag
    monomer_of = {"1": {1}, "2": {2}, "3": {3}, "c": {"c"}}
    model = SystemModel(H, labels, coupling, ground_label=None,
                        monomer_of=monomer_of)

    if shift_convention == "halved":
        factor = 0.5
    elif shift_convention == "pi":
        factor = np.pi
    else:
        raise ValidationError(f"unknown shift convention {shift_convention!r}")
    h_eff = H.astype(complex)
    for label, T in losses.items():
        if T <= 0:
            raise ValidationError(f"loss timescale for {label} must be positive")
        i = labels.index(str(label))
        h_eff[i, i] -= 1j * factor * HBAR / T
    return model, h_eff


@dataclass
class MethodComparison:
    """Pointwise deviations between the Lindblad and non-Hermitian routes."""

    times: np.ndarray
    observables: dict  # name -> (lindblad curve, non-hermitian curve)
    metadata: dict = field(default_factory=dict)

    def deviations(self):
        return {name: float(np.max(np.abs(a - b)))
                for name, (a, b) in self.observables.items()}

    def max_deviation(self):
        return max(self.deviations().values())

    def to_csv(self, path):
        names = sorted(self.observables)
        with open(path, "w") as fh:
            header = ["time_fs"]
            for n in names:
                header += [f"{n}_lindblad", f"{n}_nonhermitian"]
            fh.write(",".join(header) + "\n")
            for i, t in enumerate(self.times):
                row = [f"{t:.12g}"]
                for n in names:
                    a, b = self.observables[n]
                    row += [f"{a[i]:.12g}", f"{b[i]:.12g}"]
                fh.write(",".join(row) + "\n")

    def summary(self):
        lines = ["cross-method comparison: max |lindblad - nonhermitian|", ""]
        for name, dev in sorted(self.deviations().items()):
            lines.append(f"  {name:24s} {dev:.3e}")
        lines.append("")
        lines.append(f"  worst observable deviation: {self.max_deviation():.3e}")
        return "\n".join(lines)


def compare_methods(*, hopping, rabi, omega_c=0.0, t3_fs=300.0, tc_fs=600.0,
                    spectral_density=None, temperature_K=300.0, dt=4.0,
                    tau_mem_fs=200.0, n_steps=250, initial="1",
                    svd_cutoff=1e-10, max_bond=256):
    """Run the lossy polaritonic trimer through both loss descriptions.

    Lindblad route: five states including the ground state, drains on |3>
    and the cavity, memory propagation with the dissipator.  Non-Hermitian
    route: four states, the same drains folded into complex diagonals
    (-hbar/2T), no dissipator.  Populations, pairwise Hamiltonian flows and
    the two losses are compared pointwise.
    """
    n_mem = int(round(tau_mem_fs / dt))
    if abs(n_mem * dt - tau_mem_fs) > 1e-9:
        raise ValidationError("tau_mem_fs must be a multiple of dt")

    # Lindblad pipeline.
    model_l = build_polaritonic_trimer(0.0, 0.0, hopping, omega_c, rabi)
    drains = [drain_operator(model_l, 3, t3_fs), drain_operator(model_l, "c", tc_fs)]
    if spectral_density is None:
        etas = {bid: _zero_etas(dt, n_mem) for bid in model_l.coupling_ops}
    else:
        eta = eta_coefficients(spectral_density, temperature_K, dt, n_mem)
        etas = {bid: eta for bid in model_l.coupling_ops}
    maps_l = tempo_maps(model_l, etas, n_mem, svd_cutoff=svd_cutoff,
                        max_bond=max_bond)
    tt_l = transfer_tensors(maps_l)
    rho0_l = np.zeros((5, 5), dtype=complex)
    rho0_l[model_l.index(initial), model_l.index(initial)] = 1.0
    traj_l = propagate_with_memory(tt_l, drains, rho0_l, n_steps,
                                   labels=model_l.labels)
    flows_l = accumulate_flows(traj_l, model_l, drains)

    # Non-Hermitian pipeline (no ground state).
    model_n, h_eff = lossy_first_excitation_model(
        hopping, omega_c, rabi, {"3": t3_fs, "c": tc_fs})
    etas_n = {bid: etas[bid] for bid in model_n.coupling_ops}
    maps_n = nonhermitian_maps(model_n, etas_n, n_mem, h_eff,
                               svd_cutoff=svd_cutoff, max_bond=max_bond)
    tt_n = transfer_tensors(maps_n)
    rho0_n = np.zeros((4, 4), dtype=complex)
    rho0_n[model_n.index(initial), model_n.index(initial)] = 1.0
    traj_n = propagate_with_memory(tt_n, [], rho0_n, n_steps,
                                   check_trace=False, labels=model_n.labels)
    flows_n = accumulate_flows(traj_n, model_n, [], hamiltonian=h_eff)

    observables = {}
    for label in ("1", "2", "3", "c"):
        observables[f"pop_{label}"] = (
            traj_l.populations(label), traj_n.populations(label))
    for to in ("1", "2", "3", "c"):
        for frm in ("1", "2", "3", "c"):
            if to == frm:
                continue
            observables[f"flow_{to}_from_{frm}"] = (
                flows_l.pair(to, frm, "H"), flows_n.pair(to, frm, "H"))
    l3 = site_loss(flows_l, 3)
    lc = site_loss(flows_l, "c")
    nh_l3 = np.abs(flows_n.self_loss[:, model_n.index("3")])
    nh_lc = np.abs(flows_n.self_loss[:, model_n.index("c")])
    observables["loss_3"] = (l3, nh_l3)
    observables["loss_c"] = (lc, nh_lc)

    return MethodComparison(
        times=traj_l.times, observables=observables,
        metadata={"dt": dt, "tau_mem_fs": tau_mem_fs, "n_steps": n_steps,
                  "ground_population": traj_l.populations("0"),
                  "nh_trace": traj_n.traces(),
                  "lindblad_trace": traj_l.traces()})


def _zero_etas(dt, n_mem):
    from .bath import EtaCoefficients
    return EtaCoefficients(dt=dt, n_memory=n_mem,
                           eta=np.zeros(n_mem + 1, dtype=complex))
