"""Command-line driver.

Subcommands: evolve, spectrum, sweep, modes, resonances.  A config file
(``--config``, flat key = value text) supplies defaults; flags override.
Exit codes: 0 success, 2 invalid configuration, 3 numerical-tolerance
violation, 4 sweep completed with per-frequency failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .analysis import (
    ExperimentConfig,
    config_from_values,
    load_config,
    output_path,
    pair_resonances,
    read_sweep_csv,
    run_evolution,
    run_nmax_sweep,
    run_overlap_sweep,
    write_evolution_csv,
    write_modes_csv,
    write_resonances_csv,
    write_sweep_csv,
    _write_csv,
)
from .errors import ConfigError, ToleranceError
from .floquet import labeled_spectrum
from .lattice import SupercellGrid
from .version import __version__

_CONFIG_FLAGS = (
    "mass", "hbar", "v0", "delta", "spacing", "amplitude", "omega", "phases",
    "np", "sigma", "center", "domain", "supercells", "substeps", "horizon",
    "omega_start", "omega_stop", "omega_step", "outdir",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file with defaults")
    for key in _CONFIG_FLAGS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key)
    parser.add_argument("--grid-points", dest="grid_points")
    parser.add_argument("--basis-size", dest="basis_size")
    parser.add_argument("--workers", dest="workers")
    parser.add_argument("--no-refine", action="store_true",
                        help="skip grid refinement around population peaks")


def _build_config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k) is not None}
    for key in ("grid_points", "basis_size", "workers"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.no_refine:
        overrides["refine_peaks"] = 0
    if args.config:
        return load_config(args.config, overrides)
    return config_from_values({}, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driven-lattice",
        description="Floquet-Bloch spectra and stroboscopic dynamics of a "
                    "periodically driven 1D barrier lattice",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="site-population trace over the horizon")
    _add_config_flags(p)
    p.add_argument("--method", choices=("floquet", "direct"), default="floquet")
    p.add_argument("--keep", type=int, help="keep only the k most occupied bands")
    p.add_argument("--bands", help="ground,excited band pair, e.g. 0,2")
    p.add_argument("--output", default="evolve.csv")

    p = sub.add_parser("spectrum", help="quasienergies vs driving frequency")
    _add_config_flags(p)
    p.add_argument("--output", default="spectrum.csv")

    p = sub.add_parser("sweep", help="n_max / overlap / gap vs driving frequency")
    _add_config_flags(p)
    p.add_argument("--overlap-only", action="store_true",
                   help="skip population traces (spectra columns only)")
    p.add_argument("--output", default="sweep.csv")

    p = sub.add_parser("modes", help="sampled mode profiles at one frequency")
    _add_config_flags(p)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--output", default="modes.csv")

    p = sub.add_parser("resonances", help="predicted resonances vs detected dips")
    _add_config_flags(p)
    p.add_argument("--sweep-csv", required=True,
                   help="sweep output providing the overlap curve")
    p.add_argument("--alpha-max", type=int, default=20)
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--output", default="resonances.csv")

    return parser


def _cmd_evolve(args) -> int:
    config = _build_config(args)
    bands = None
    if args.bands:
        parts = [int(tok) for tok in args.bands.split(",")]
        if len(parts) != 2:
            raise ConfigError("--bands expects two labels, e.g. 0,2")
        bands = (parts[0], parts[1])
    trace = run_evolution(config, keep=args.keep, bands=bands, method=args.method)
    path = write_evolution_csv(output_path(config, args.output), config, trace)
    print(path)
    return 0


def _cmd_spectrum(args) -> int:
    config = _build_config(args)
    rows = []
    for omega in config.omega_grid():
        spec = replace(config.lattice, omega=float(omega))
        spectrum = labeled_spectrum(
            spec, 0.0,
            grid=SupercellGrid.for_spec(spec, config.grid_points),
            params=config.params_for(spec),
            basis_size=config.basis_size,
        )
        weights = np.abs(spectrum.overlaps(spectrum.uniform_reference())) ** 2
        for mode in spectrum.modes:
            rows.append((omega, mode.label, mode.quasienergy, weights[mode.label]))
    path = _write_csv(
        output_path(config, args.output), config, "spectrum",
        ["omega", "alpha", "eps", "overlap"], rows,
    )
    print(path)
    return 0


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    sweep = run_overlap_sweep(config) if args.overlap_only else run_nmax_sweep(config)
    path = write_sweep_csv(output_path(config, args.output), sweep)
    print(path)
    if sweep.failures:
        for omega, error in sweep.failures:
            print(f"failed omega={omega:g}: {error}", file=sys.stderr)
        return 4
    return 0


def _cmd_modes(args) -> int:
    config = _build_config(args)
    spec = config.lattice
    spectrum = labeled_spectrum(
        spec, args.kappa,
        grid=SupercellGrid.for_spec(spec, config.grid_points),
        params=config.params_for(spec),
        basis_size=config.basis_size,
    )
    path = write_modes_csv(output_path(config, args.output), config, spectrum,
                           count=args.count)
    print(path)
    return 0


def _cmd_resonances(args) -> int:
    config = _build_config(args)
    omegas, overlaps = read_sweep_csv(args.sweep_csv)
    rows = pair_resonances(config.lattice, omegas, overlaps,
                           alpha_max=args.alpha_max, max_folds=args.folds)
    path = write_resonances_csv(output_path(config, args.output), config, rows)
    print(path)
    return 0


_COMMANDS = {
    "evolve": _cmd_evolve,
    "spectrum": _cmd_spectrum,
    "sweep": _cmd_sweep,
    "modes": _cmd_modes,
    "resonances": _cmd_resonances,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ToleranceError as exc:
        print(f"numerical tolerance violated: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
