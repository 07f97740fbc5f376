"""State-to-state transport decomposition of population dynamics.

The instantaneous population change of basis state ``l`` splits into a
Hamiltonian channel, resolved over partner states ``r`` as
``-(2/hbar) <l|H|r> Im<l|rho|r>`` (valid for diagonal system-bath
coupling), and a Lindbladian channel in which each elementary jump term
``c |f><i|`` moves population ``|c|^2 <i|rho|i> / T`` from its initial to
its final state.  Time integration of both channels yields the direct,
unmediated transport P_{l<-r}(t): antisymmetric, zero on the diagonal, and
summing over sources to the net population change of ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import HBAR, ValidationError
from .dynamics import RDMTrajectory
from .model import SystemModel


def _check_diagonal_coupling(model):
    # coupling_ops store diagonals by construction; reject imposters
    for bid, diag in model.coupling_ops.items():
        if np.asarray(diag).ndim != 1:
            raise ValidationError(
                f"bath {bid}: system-bath coupling must be diagonal for the "
                "Hamiltonian-channel decomposition")


def hamiltonian_flux(hamiltonian, rho, l, r):
    """Rate (1/fs) of population flow into ``l`` from ``r`` via H."""
    if l == r:
        return 0.0
    H = np.asarray(hamiltonian)
    rho = np.asarray(rho)
    return float(2.0 / HBAR * (H[l, r] * rho[r, l]).imag)


def lindblad_flux(jump_ops, rho, l, r):
    """Rate (1/fs) of population flow into ``l`` from ``r`` via jump terms."""
    rho = np.asarray(rho)
    rate = 0.0
    for op in jump_ops:
        for t in op.terms:
            w = abs(t.coeff) ** 2 * rho[t.initial, t.initial].real / op.timescale_fs
            if l == t.final and r == t.initial:
                rate += w
            if l == t.initial and r == t.final:
                rate -= w
    return rate


def _hamiltonian_flux_matrix(H, rho):
    """Antisymmetric flux matrix, upper triangle mirrored exactly."""
    D = H.shape[0]
    F = np.zeros((D, D))
    for l in range(D):
        for r in range(l + 1, D):
            v = 2.0 / HBAR * (H[l, r] * rho[r, l]).imag
            F[l, r] = v
            F[r, l] = -v
    return F


def _lindblad_flux_matrix(jump_ops, rho, D):
    F = np.zeros((D, D))
    for op in jump_ops:
        for t in op.terms:
            w = abs(t.coeff) ** 2 * rho[t.initial, t.initial].real / op.timescale_fs
            F[t.final, t.initial] += w
            F[t.initial, t.final] -= w
    return F


@dataclass
class FlowMatrix:
    """Integrated pairwise transport, split by channel.

    ``hamiltonian[n, l, r]`` and ``lindblad[n, l, r]`` hold P_{l<-r} at time
    step n; both are exactly antisymmetric with zero diagonal.  When the
    generating Hamiltonian had decaying diagonal entries, the accumulated
    self-loss is kept apart in ``self_loss`` (the pairwise channels stay
    antisymmetric).  ``populations`` carries the trajectory diagonals for
    bookkeeping checks.
    """

    dt: float
    labels: list
    hamiltonian: np.ndarray
    lindblad: np.ndarray
    populations: np.ndarray
    self_loss: np.ndarray | None = None
    jump_kinds: list = field(default_factory=list)

    @property
    def times(self):
        return self.dt * np.arange(self.hamiltonian.shape[0])

    @property
    def total(self):
        return self.hamiltonian + self.lindblad

    def pair(self, to_label, from_label, channel="total"):
        l = self.labels.index(to_label)
        r = self.labels.index(from_label)
        return self.channel(channel)[:, l, r]

    def channel(self, name):
        if name in ("H", "hamiltonian"):
            return self.hamiltonian
        if name in ("L", "lindblad"):
            return self.lindblad
        if name == "total":
            return self.total
        raise ValidationError(f"unknown channel {name!r}")

    def flux_sum_residual(self):
        """max_l,t |sum_r P_{l<-r}(t) - (P_l(t) - P_l(0))| plus self-loss."""
        inflow = self.total.sum(axis=2)
        if self.self_loss is not None:
            inflow = inflow + self.self_loss
        dpop = self.populations - self.populations[0][None, :]
        return float(np.max(np.abs(inflow - dpop)))

    def to_csv(self, path):
        """Long format: time_fs, from_label, to_label, channel, value."""
        with open(path, "w") as fh:
            fh.write("time_fs,from_label,to_label,channel,value\n")
            D = len(self.labels)
            times = self.times
            for n, t in enumerate(times):
                for l in range(D):
                    for r in range(D):
                        if l == r:
                            continue
                        for ch, arr in (("H", self.hamiltonian),
                                        ("L", self.lindblad)):
                            fh.write(f"{t:.12g},{self.labels[r]},"
                                     f"{self.labels[l]},{ch},{arr[n, l, r]:.12g}\n")
                        fh.write(f"{t:.12g},{self.labels[r]},{self.labels[l]},"
                                 f"total,{(self.hamiltonian[n, l, r] + self.lindblad[n, l, r]):.12g}\n")


def _cumtrapz(samples, dt):
    out = np.zeros_like(samples)
    out[1:] = np.cumsum(0.5 * dt * (samples[1:] + samples[:-1]), axis=0)
    return out


def accumulate_flows(trajectory: RDMTrajectory, model, jump_ops=(),
                     hamiltonian=None):
    """Integrate both flux channels along a trajectory (trapezoidal rule).

    ``hamiltonian`` overrides the model's (used for complex-diagonal
    effective Hamiltonians, whose imaginary diagonal feeds ``self_loss``).
    """
    if isinstance(model, SystemModel):
        _check_diagonal_coupling(model)
        if trajectory.labels != model.labels:
            raise ValidationError(
                f"trajectory basis {trajectory.labels} does not match model "
                f"basis {model.labels}")
        H = model.hamiltonian if hamiltonian is None else np.asarray(hamiltonian)
    else:
        H = np.asarray(model if hamiltonian is None else hamiltonian)
    for op in jump_ops:
        op.validate()

    n_t = trajectory.matrices.shape[0]
    D = trajectory.dim
    fH = np.empty((n_t, D, D))
    fL = np.empty((n_t, D, D))
    for n in range(n_t):
        rho = trajectory.matrices[n]
        fH[n] = _hamiltonian_flux_matrix(H, rho)
        fL[n] = _lindblad_flux_matrix(jump_ops, rho, D)

    self_loss = None
    imag_diag = np.diag(H).imag
    if np.any(imag_diag != 0.0):
        pops = trajectory.populations()
        rates = 2.0 / HBAR * pops * imag_diag[None, :]
        self_loss = _cumtrapz(rates, trajectory.dt)

    return FlowMatrix(
        dt=trajectory.dt, labels=list(trajectory.labels),
        hamiltonian=_cumtrapz(fH, trajectory.dt),
        lindblad=_cumtrapz(fL, trajectory.dt),
        populations=trajectory.populations(),
        self_loss=self_loss,
        jump_kinds=[(op.kind, op.site) for op in jump_ops])


@dataclass
class SiteFlows:
    """Monomer-level aggregation of the diabatic flows."""

    times: np.ndarray
    pump_in: dict      # monomer -> F+(t)
    drain_out: dict    # monomer -> F-(t)
    inter: dict        # (to, from) -> F_{a<-b}(t)
    excitation: dict   # monomer -> E(t)

    def bookkeeping_residual(self):
        """max |E_a(t) - E_a(0) - (F+ - F- + sum_b F_{a<-b})|."""
        worst = 0.0
        for a, exc in self.excitation.items():
            rhs = np.zeros_like(exc)
            rhs += self.pump_in.get(a, 0.0)
            rhs -= self.drain_out.get(a, 0.0)
            for (to, frm), val in self.inter.items():
                if to == a:
                    rhs = rhs + val
            worst = max(worst, float(np.max(np.abs((exc - exc[0]) - rhs))))
        return worst

    def to_csv(self, path):
        cols = ["time_fs"]
        series = []
        for a in sorted(self.pump_in):
            cols.append(f"Fplus_{a}")
            series.append(self.pump_in[a])
        for a in sorted(self.drain_out):
            cols.append(f"Fminus_{a}")
            series.append(self.drain_out[a])
        for (to, frm) in sorted(self.inter):
            cols.append(f"F_{to}_from_{frm}")
            series.append(self.inter[(to, frm)])
        for a in sorted(self.excitation):
            cols.append(f"E_{a}")
            series.append(self.excitation[a])
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for n, t in enumerate(self.times):
                row = [f"{t:.12g}"] + [f"{s[n]:.12g}" for s in series]
                fh.write(",".join(row) + "\n")


def monomer_flows(flow_matrix: FlowMatrix, model: SystemModel):
    """Aggregate diabatic flows to pump/drain/inter-monomer site flows.

    Requires the full-space excitonic metadata (which monomers are excited
    in each label).  Pump inflow into monomer a collects Lindbladian-channel
    pairs where the target has gained an excitation at a; drain outflow the
    reverse; inter-monomer transport collects Hamiltonian-channel pairs
    where one excitation moved between monomers with the rest unchanged.
    """
    if not model.monomer_of and model.dim > 1:
        raise ValidationError("model carries no monomer metadata")
    if flow_matrix.labels != model.labels:
        raise ValidationError("flow matrix and model bases differ")
    labels = model.labels
    exc = {l: set(model.monomer_of.get(l, set())) for l in labels}
    monomers = sorted({m for s in exc.values() for m in s}, key=str)
    n_t = flow_matrix.hamiltonian.shape[0]
    times = flow_matrix.times

    has_pump = {op_site for kind, op_site in flow_matrix.jump_kinds if kind == "pump"}
    has_drain = {op_site for kind, op_site in flow_matrix.jump_kinds if kind == "drain"}

    pump_in = {a: np.zeros(n_t) for a in monomers if a in has_pump}
    drain_out = {a: np.zeros(n_t) for a in monomers if a in has_drain}
    inter = {}
    for li, l in enumerate(labels):
        for ri, r in enumerate(labels):
            if li == ri:
                continue
            gained = exc[l] - exc[r]
            lost = exc[r] - exc[l]
            if len(gained) == 1 and not lost:
                (a,) = gained
                if a in pump_in:
                    pump_in[a] += flow_matrix.lindblad[:, li, ri]
            if len(lost) == 1 and not gained:
                # monomer a lost its excitation going r -> l: positive outflow
                (a,) = lost
                if a in drain_out:
                    drain_out[a] += flow_matrix.lindblad[:, li, ri]
            if len(gained) == 1 and len(lost) == 1:
                (a,), (b,) = gained, lost
                key = (a, b)
                if key not in inter:
                    inter[key] = np.zeros(n_t)
                inter[key] += flow_matrix.hamiltonian[:, li, ri]

    excitation = {}
    for a in monomers:
        sel = [i for i, l in enumerate(labels) if a in exc[l]]
        excitation[a] = flow_matrix.populations[:, sel].sum(axis=1)

    return SiteFlows(times=times, pump_in=pump_in, drain_out=drain_out,
                     inter=inter, excitation=excitation)


def site_loss(flow_matrix: FlowMatrix, site, ground_label="0"):
    """Lindbladian transport from ``site`` into the ground state."""
    if ground_label not in flow_matrix.labels:
        raise ValidationError(
            f"no ground state {ground_label!r} in basis {flow_matrix.labels}")
    g = flow_matrix.labels.index(ground_label)
    j = flow_matrix.labels.index(str(site))
    return flow_matrix.lindblad[:, g, j]


def total_excitation(trajectory: RDMTrajectory, model: SystemModel):
    """sum_a E_a(t): populations weighted by their excitation count."""
    counts = model.excitation_counts()
    return trajectory.populations() @ counts


def steady_mean(series, frac=0.1):
    """Mean over the trailing fraction, with the spread as a flatness check."""
    series = np.asarray(series)
    n = max(int(len(series) * frac), 2)
    tail = series[-n:]
    return float(tail.mean()), float(tail.max() - tail.min())


def excitonic_current(times, drain_flow, window=(0.75, 1.0), r2_min=0.9999):
    """Steady-state extraction current: linear-fit slope in 1/ps.

    The window is given as fractions of the full time span and must lie in
    the established steady state; a poor linear fit (R^2 below ``r2_min``)
    raises with the measured residual.
    """
    times = np.asarray(times, dtype=float)
    drain_flow = np.asarray(drain_flow, dtype=float)
    t0 = times[0] + window[0] * (times[-1] - times[0])
    t1 = times[0] + window[1] * (times[-1] - times[0])
    sel = (times >= t0) & (times <= t1)
    if sel.sum() < 4:
        raise ValidationError("fit window contains fewer than 4 points")
    t = times[sel]
    y = drain_flow[sel]
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0.0:
        ss_res = float(np.sum((A @ [slope, intercept] - y) ** 2))
        r2 = 1.0 - ss_res / ss_tot
        if r2 < r2_min:
            raise ValidationError(
                f"drain flow not yet linear in the fit window: R^2 = {r2:.6f} "
                f"< {r2_min}; extend the trajectory or widen the window")
    return slope * 1e3  # 1/fs -> 1/ps
