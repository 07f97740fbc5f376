"""Command-line entry point.

Verbs: ``run <cfg>`` executes a config end to end; ``validate <cfg>``
parses and checks it; ``reproduce <figN...>`` emits the plot-ready CSV
bundle for named figures; ``oracle <cfg>`` cross-checks the tensor-network
maps against the exact path enumerator (short propagations only).

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
The environment variable LINDFLOW_OUTPUT_ROOT prefixes relative output
directories.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .catalog import FIGURE_IDS, reproduce
from .core import ValidationError
from .dynamics import NumericalFailure
from .mps import BondCapError
from .runner import (ConfigError, build_jump_ops, build_model,
                     build_spectral_density, parse_config, run_pipeline, _flt)


def _cmd_run(args):
    cfg = parse_config(args.config)
    result = run_pipeline(cfg, output_root=args.output_root)
    for f in result.files:
        print(f"wrote {f}")
    return 0


def _cmd_validate(args):
    parse_config(args.config)
    print(f"{args.config}: ok")
    return 0


def _cmd_reproduce(args):
    ids = list(args.figures)
    if ids == ["all"]:
        ids = list(FIGURE_IDS)
    root = Path(args.output_root or os.environ.get("LINDFLOW_OUTPUT_ROOT", "."))
    files = reproduce(ids, root / args.directory, fast=args.fast)
    for f in files:
        print(f"wrote {f}")
    return 0


def _cmd_oracle(args):
    from .bath import eta_coefficients
    from .pathint import brute_force_maps, tempo_maps
    from .bath import EtaCoefficients

    cfg = parse_config(args.config)
    model = build_model(cfg)
    sd = build_spectral_density(cfg)
    dt = _flt(cfg.propagation, "dt_fs", name="propagation")
    n_steps = min(int(_flt(cfg.propagation, "n_steps", name="propagation")), 8)
    if sd is None:
        etas = {bid: EtaCoefficients(dt=dt, n_memory=max(n_steps, 1),
                                     eta=np.zeros(max(n_steps, 1) + 1, complex))
                for bid in model.coupling_ops}
    else:
        tau = _flt(cfg.propagation, "tau_mem_fs", name="propagation")
        n_mem = max(min(int(round(tau / dt)), n_steps), 1)
        eta = eta_coefficients(sd, _flt(cfg.bath, "temperature_K", 300.0, "bath"),
                               dt, n_mem)
        etas = {bid: eta for bid in model.coupling_ops}
    brute = brute_force_maps(model, etas, n_steps, dt=dt)
    tn = tempo_maps(model, etas, n_steps, dt=dt,
                    svd_cutoff=_flt(cfg.propagation, "svd_cutoff", 1e-14,
                                    "propagation"))
    dev = float(np.max(np.abs(brute.maps - tn.maps)))
    root = Path(args.output_root or os.environ.get("LINDFLOW_OUTPUT_ROOT", "."))
    outdir = root / cfg.output.get("directory", "out")
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.output.get("prefix", "run")
    brute.save(outdir / f"{prefix}_maps_brute.txt")
    tn.save(outdir / f"{prefix}_maps_tensor.txt")
    print(f"max |tensor - brute| over {n_steps} steps: {dev:.3e}")
    if dev > 1e-8:
        print("WARNING: engines disagree beyond 1e-8")
        return 2
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lindflow",
        description="Open-system dynamics with baths and Lindblad "
                    "pumps/drains, plus state-to-state transport analysis")
    parser.add_argument("--output-root", default=None,
                        help="prefix for relative output paths "
                             "(default: $LINDFLOW_OUTPUT_ROOT or .)")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute a run config")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate", help="parse and check a run config")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("reproduce", help="emit CSVs for named figures")
    p.add_argument("figures", nargs="+",
                   help=f"ids from {', '.join(FIGURE_IDS)} or 'all'")
    p.add_argument("--directory", default="figures_data")
    p.add_argument("--fast", action="store_true",
                   help="coarse smoke-test settings (same file schema)")
    p.set_defaults(fn=_cmd_reproduce)

    p = sub.add_parser("oracle", help="brute-force cross-check (<= 8 steps)")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, BondCapError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
