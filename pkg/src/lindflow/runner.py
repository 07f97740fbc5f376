"""Config-driven pipeline: model -> maps -> propagation -> flow analysis.

Configs are flat INI files (see README for the schema).  Dynamical maps are
content-addressed and cached on disk, so parameter sweeps that only change
the Lindblad operators (for instance pump/drain timescale grids) reuse the
expensive path-integral stage.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bath import (OhmicSpectralDensity, TabulatedSpectralDensity,
                   EtaCoefficients, eta_coefficients)
from .core import ValidationError
from .dynamics import (RDMTrajectory, propagate_lindblad_reference,
                       propagate_with_memory, transfer_tensors)
from .flows import (FlowMatrix, accumulate_flows, excitonic_current,
                    monomer_flows, site_loss)
from .model import (JumpOperator, SystemModel, build_excitonic_nmer,
                    build_polaritonic_trimer, drain_operator, pump_operator)
from .nonhermitian import compare_methods, effective_hamiltonian
from .pathint import DynamicalMapSeries, brute_force_maps, tempo_maps


class ConfigError(ValueError):
    """A run file failed to parse or violated an invariant."""


REQUIRED_SECTIONS = ("system", "propagation", "initial", "output")
ENGINES = ("tempo", "brute", "lindblad_only", "nonhermitian")


@dataclass
class RunConfig:
    system: dict
    bath: dict
    lindblads: list
    propagation: dict
    initial: dict
    analysis: dict
    output: dict
    raw_text: str = ""

    def content_hash(self):
        return hashlib.sha256(self.raw_text.encode()).hexdigest()[:16]


def parse_config(path):
    parser = ConfigParser()
    try:
        text = Path(path).read_text()
        parser.read_string(text, source=str(path))
    except ConfigParserError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")
    cfg = RunConfig(
        system=dict(parser["system"]),
        bath=dict(parser["bath"]) if parser.has_section("bath") else {},
        lindblads=list(parser["lindblads"].values()) if parser.has_section("lindblads") else [],
        propagation=dict(parser["propagation"]),
        initial=dict(parser["initial"]),
        analysis=dict(parser["analysis"]) if parser.has_section("analysis") else {},
        output=dict(parser["output"]),
        raw_text=text,
    )
    validate_config(cfg)
    return cfg


def _flt(section, key, default=None, name=""):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing key {key!r} in [{name}]")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"[{name}] {key} = {section[key]!r} is not a number") from None


def validate_config(cfg):
    sys_type = cfg.system.get("type")
    if sys_type not in ("nmer", "polaritonic_trimer"):
        raise ConfigError(f"[system] type must be nmer or polaritonic_trimer, "
                          f"got {sys_type!r}")
    engine = cfg.propagation.get("engine", "tempo")
    if engine not in ENGINES:
        raise ConfigError(f"[propagation] engine must be one of {ENGINES}, "
                          f"got {engine!r}")
    dt = _flt(cfg.propagation, "dt_fs", name="propagation")
    if dt <= 0:
        raise ConfigError("[propagation] dt_fs must be positive")
    if engine != "lindblad_only" and cfg.bath.get("kind", "none") != "none":
        tau = _flt(cfg.propagation, "tau_mem_fs", name="propagation")
        ratio = tau / dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(
                f"[propagation] tau_mem_fs = {tau} is not a positive multiple "
                f"of dt_fs = {dt}")
    for spec in cfg.lindblads:
        tokens = spec.split()
        if not tokens or tokens[0] not in ("pump", "drain", "custom"):
            raise ConfigError(f"[lindblads] entry {spec!r}: must start with "
                              "pump, drain or custom")
        kv = dict(tok.split("=", 1) for tok in tokens[1:] if "=" in tok)
        if "timescale_fs" not in kv:
            raise ConfigError(f"[lindblads] entry {spec!r}: timescale_fs missing")
        if float(kv["timescale_fs"]) <= 0:
            raise ConfigError(f"[lindblads] entry {spec!r}: timescale_fs must "
                              "be positive")
    return cfg


def build_model(cfg):
    s = cfg.system
    if s["type"] == "nmer":
        return build_excitonic_nmer(
            int(s.get("n", 2)),
            _flt(s, "epsilon", 1000.0, "system"),
            _flt(s, "hopping", 181.5, "system"))
    return build_polaritonic_trimer(
        _flt(s, "epsilon0", 0.0, "system"),
        _flt(s, "epsilon", 0.0, "system"),
        _flt(s, "hopping", 181.5, "system"),
        _flt(s, "omega_c", 0.0, "system"),
        _flt(s, "rabi", 100.0, "system"))


def build_jump_ops(cfg, model):
    ops = []
    for spec in cfg.lindblads:
        tokens = spec.split()
        kind = tokens[0]
        kv = dict(tok.split("=", 1) for tok in tokens[1:] if "=" in tok)
        T = float(kv["timescale_fs"])
        if kind == "pump":
            ops.append(pump_operator(model, int(kv["site"]), T))
        elif kind == "drain":
            site = kv["site"]
            site = int(site) if site.isdigit() else site
            ops.append(drain_operator(model, site, T))
        else:
            terms = []
            for item in kv["terms"].split(","):
                path, _, coeff = item.partition(":")
                i_label, _, f_label = path.partition(">")
                terms.append((complex(coeff) if coeff else 1.0,
                              model.index(i_label.strip()),
                              model.index(f_label.strip())))
            ops.append(JumpOperator(T, terms, kind="custom"))
    return ops


def build_spectral_density(cfg):
    kind = cfg.bath.get("kind", "none")
    if kind == "none" or not cfg.bath:
        return None
    if kind == "ohmic":
        return OhmicSpectralDensity(_flt(cfg.bath, "xi", name="bath"),
                                    _flt(cfg.bath, "omega_cutoff", name="bath"))
    if kind == "table":
        return TabulatedSpectralDensity.from_file(cfg.bath["table"])
    raise ConfigError(f"[bath] kind must be ohmic, table or none, got {kind!r}")


def _map_cache_key(model, h_eff, sd_desc, temperature, dt, n_mem, n_steps,
                   engine, svd_cutoff, max_bond):
    h = h_eff if h_eff is not None else model.hamiltonian
    blob = json.dumps({
        "H": [f"{v.real!r},{v.imag!r}" for v in np.asarray(h, dtype=complex).ravel()],
        "couplings": {k: list(map(float, v)) for k, v in sorted(model.coupling_ops.items())},
        "sd": sd_desc, "T": temperature, "dt": dt, "n_mem": n_mem,
        "n_steps": n_steps, "engine": engine, "cutoff": svd_cutoff,
        "bond": max_bond, "version": __version__,
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def compute_maps(model, spectral_density, temperature, dt, tau_mem_fs,
                 n_steps=None, *, engine="tempo", svd_cutoff=1e-10,
                 max_bond=256, h_eff=None, cache_dir=None):
    """Dynamical maps with optional on-disk caching."""
    if spectral_density is None:
        n_mem = 1
        etas = {bid: EtaCoefficients(dt=dt, n_memory=1, eta=np.zeros(2, complex))
                for bid in model.coupling_ops}
        sd_desc = "none"
    else:
        n_mem = int(round(tau_mem_fs / dt))
        eta = eta_coefficients(spectral_density, temperature, dt, n_mem)
        etas = {bid: eta for bid in model.coupling_ops}
        if isinstance(spectral_density, OhmicSpectralDensity):
            sd_desc = f"ohmic:{spectral_density.xi}:{spectral_density.omega_cutoff}"
        else:
            sd_desc = "table:" + hashlib.sha256(
                spectral_density.values.tobytes()).hexdigest()[:12]
    n_steps = n_mem if n_steps is None else n_steps

    key = _map_cache_key(model, h_eff, sd_desc, temperature, dt, n_mem,
                         n_steps, engine, svd_cutoff, max_bond)
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"maps_{key}.txt"
        if cache_path.exists():
            return DynamicalMapSeries.load(cache_path)

    kwargs = dict(dt=dt, hamiltonian=h_eff) if h_eff is not None else dict(dt=dt)
    non_h = h_eff is not None and np.any(np.asarray(h_eff).imag != 0)
    if engine == "brute":
        maps = brute_force_maps(model, etas, n_steps, non_hermitian=non_h, **kwargs)
    else:
        maps = tempo_maps(model, etas, n_steps, svd_cutoff=svd_cutoff,
                          max_bond=max_bond, non_hermitian=non_h, **kwargs)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        maps.save(cache_path)
    return maps


@dataclass
class RunResult:
    trajectory: RDMTrajectory
    flow_matrix: FlowMatrix | None
    site_flows: object | None
    files: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def initial_state(cfg, model):
    spec = cfg.initial
    if "matrix_file" in spec:
        data = np.loadtxt(spec["matrix_file"], dtype=complex)
        return np.asarray(data, dtype=complex)
    label = spec.get("state")
    if label is None:
        raise ConfigError("[initial] needs state = <label> or matrix_file = <path>")
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    rho[model.index(label), model.index(label)] = 1.0
    return rho


def run_pipeline(cfg, output_root=None, cache_dir=None):
    """Execute a parsed config end to end, writing CSVs and metadata."""
    model = build_model(cfg)
    jump_ops = build_jump_ops(cfg, model)
    sd = build_spectral_density(cfg)
    prop = cfg.propagation
    dt = _flt(prop, "dt_fs", name="propagation")
    n_steps = int(_flt(prop, "n_steps", name="propagation"))
    engine = prop.get("engine", "tempo")
    svd_cutoff = _flt(prop, "svd_cutoff", 1e-10, "propagation")
    max_bond = int(_flt(prop, "max_bond", 256, "propagation"))
    scheme = prop.get("splitting", "symmetric")
    rho0 = initial_state(cfg, model)

    out_root = Path(output_root or os.environ.get("LINDFLOW_OUTPUT_ROOT", "."))
    outdir = out_root / cfg.output.get("directory", "out")
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.output.get("prefix", "run")
    if cache_dir is None:
        cache_dir = outdir / ".map_cache"

    h_eff = None
    run_jumps = jump_ops
    if engine == "nonhermitian":
        h_eff = effective_hamiltonian(model.hamiltonian, jump_ops, model)
        run_jumps = []

    meta = {
        "version": __version__, "config_hash": cfg.content_hash(),
        "engine": engine, "dt_fs": dt, "n_steps": n_steps,
        "splitting": scheme, "labels": model.labels,
    }

    if engine == "lindblad_only":
        traj = propagate_lindblad_reference(model.hamiltonian, jump_ops,
                                            rho0, dt, n_steps,
                                            labels=model.labels)
    else:
        tau = _flt(prop, "tau_mem_fs", name="propagation") if sd is not None else dt
        maps = compute_maps(model, sd, _flt(cfg.bath, "temperature_K", 300.0, "bath"),
                            dt, tau, engine=engine if engine == "brute" else "tempo",
                            svd_cutoff=svd_cutoff, max_bond=max_bond,
                            h_eff=h_eff, cache_dir=cache_dir)
        meta["tau_mem_fs"] = tau
        meta["map_metadata"] = {k: v for k, v in maps.metadata.items()}
        tt = transfer_tensors(maps)
        traj = propagate_with_memory(tt, run_jumps, rho0, n_steps,
                                     scheme=scheme,
                                     check_trace=h_eff is None,
                                     labels=model.labels)

    files = []
    traj_path = outdir / f"{prefix}_trajectory.csv"
    traj.to_csv(traj_path)
    files.append(traj_path)

    flow_matrix = None
    sflows = None
    analysis = cfg.analysis
    if analysis.get("flows", "true").lower() in ("1", "true", "yes", "on"):
        flow_matrix = accumulate_flows(traj, model, run_jumps, hamiltonian=h_eff)
        fpath = outdir / f"{prefix}_flows.csv"
        flow_matrix.to_csv(fpath)
        files.append(fpath)
        if (analysis.get("monomer_flows", "false").lower() in ("1", "true", "yes", "on")
                and model.monomer_of):
            sflows = monomer_flows(flow_matrix, model)
            spath = outdir / f"{prefix}_site_flows.csv"
            sflows.to_csv(spath)
            files.append(spath)
            window = analysis.get("current_window")
            if window:
                lo, hi = (float(x) for x in window.split())
                drains = sorted(sflows.drain_out)
                if drains:
                    cur = excitonic_current(sflows.times,
                                            sflows.drain_out[drains[0]],
                                            window=(lo, hi))
                    meta["excitonic_current_per_ps"] = cur
                    meta["current_drain_site"] = drains[0]

    meta["files"] = [str(f.name) for f in files]
    meta_path = outdir / f"{prefix}_meta.json"
    meta_path.write_text(json.dumps(meta, indent=2, default=str))
    files.append(meta_path)
    return RunResult(trajectory=traj, flow_matrix=flow_matrix,
                     site_flows=sflows, files=files, metadata=meta)
