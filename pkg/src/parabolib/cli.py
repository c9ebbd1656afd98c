"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 fit failure,
4 I/O or file-schema error.
"""

from __future__ import annotations

import argparse
import sys

from .analysis import constant_cpd_bias, cross_mode_consistency, qpc_effective_cpd
from .config import RunConfig, demo_config, load_config
from .errors import ConfigError, FitError, SchemaError
from .fitting import extract_profiles, fit_power_law
from .forward import synthesize_grid
from .gridio import (
    consistency_to_dict,
    powerlaw_to_dict,
    read_grid,
    read_profiles,
    write_bias_curve,
    write_grid,
    write_json,
    write_profiles,
)
from .model import DEFAULT_LAW, LAWS, MODES, Geometry
from .pipeline import run_pipeline


def _add_config_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON run configuration")
    src.add_argument(
        "--demo", action="store_true", help="use the built-in demonstration configuration"
    )


def _load(args) -> RunConfig:
    return demo_config() if args.demo else load_config(args.config)


def _cmd_simulate(args) -> int:
    config = _load(args)
    scenario = config.scenario_for_mode(args.mode)
    grid = synthesize_grid(scenario)
    write_grid(grid, args.out)
    print(f"wrote {args.out} ({grid.n_rows} rows, mode={grid.mode})")
    return 0


def _cmd_fit(args) -> int:
    grid = read_grid(args.grid)
    law = DEFAULT_LAW[grid.mode] if args.law == "auto" else args.law
    geometry = Geometry(sphere_radius=args.radius) if args.radius else None
    if law == "capacitance_squared" and geometry is None:
        raise ConfigError("law 'capacitance_squared' requires --radius")
    profiles = extract_profiles(grid)
    if args.out_profiles:
        write_profiles(profiles, args.out_profiles)
        print(f"wrote {args.out_profiles}")
    fit = fit_power_law(profiles, law, geometry)
    if args.out_powerlaw:
        write_json(powerlaw_to_dict(fit, grid.mode, grid.provenance), args.out_powerlaw)
        print(f"wrote {args.out_powerlaw}")
    print(
        f"{grid.mode}: law={law} amplitude={fit.amplitude:.6e} "
        f"d0_hat={fit.d0_hat:.6e} +/- {fit.d0_sigma:.2e} chi2/dof={fit.chi2_per_dof:.3g}"
    )
    return 0


def _cmd_bias(args) -> int:
    profiles = read_profiles(args.profiles)
    curve = constant_cpd_bias(profiles, args.v_const, d0=args.d0)
    write_bias_curve(curve, profiles.mode, args.out)
    print(f"wrote {args.out} ({curve.d.shape[0]} rows, V_const={args.v_const:g} V)")
    return 0


def _cmd_consistency(args) -> int:
    if len(args.grid) < 2:
        raise ConfigError("consistency needs at least two --grid files")
    geometry = Geometry(sphere_radius=args.radius) if args.radius else None
    results = {}
    for path in args.grid:
        grid = read_grid(path)
        if grid.mode in results:
            raise ConfigError(f"duplicate mode {grid.mode!r} among the supplied grids")
        law = DEFAULT_LAW[grid.mode]
        if law == "capacitance_squared" and geometry is None:
            raise ConfigError("a dissipation grid requires --radius")
        profiles = extract_profiles(grid)
        results[grid.mode] = (profiles, fit_power_law(profiles, law, geometry))
    report = cross_mode_consistency(results, z_threshold=args.z_threshold)
    write_json(consistency_to_dict(report), args.out)
    print(f"wrote {args.out} (consistent={report.consistent})")
    return 0


def _cmd_qpc(args) -> int:
    dv = qpc_effective_cpd(args.voltage_mv * 1e-3, args.residual_ohm)
    print(f"{dv * 1e3:.4g} mV")
    return 0


def _cmd_pipeline(args) -> int:
    config = _load(args)
    result = run_pipeline(config, output_dir=args.out)
    for name in result.artifacts:
        print(f"wrote {result.output_dir / name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parabolib",
        description=(
            "Synthetic sphere-plane force campaigns and the electrostatic "
            "parabola calibration pipeline."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a measurement grid for one mode")
    _add_config_source(p)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--out", required=True, help="output grid CSV path")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("fit", help="extract profiles and calibrate the curvature law")
    p.add_argument("--grid", required=True, help="input grid CSV")
    p.add_argument("--law", choices=("auto",) + LAWS, default="auto")
    p.add_argument("--radius", type=float, help="sphere radius [m] (capacitance_squared law)")
    p.add_argument("--out-profiles", help="output profiles CSV path")
    p.add_argument("--out-powerlaw", help="output power-law JSON path")
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("bias", help="constant-compensation bias curve from profiles")
    p.add_argument("--profiles", required=True, help="input profiles CSV")
    p.add_argument("--v-const", type=float, required=True, help="fixed bias voltage [V]")
    p.add_argument("--d0", type=float, help="contact point for the abscissa [m]")
    p.add_argument("--out", required=True, help="output bias CSV path")
    p.set_defaults(fn=_cmd_bias)

    p = sub.add_parser("consistency", help="cross-mode agreement report from grids")
    p.add_argument("--grid", action="append", required=True, help="grid CSV (repeat per mode)")
    p.add_argument("--radius", type=float, help="sphere radius [m] (dissipation grids)")
    p.add_argument("--z-threshold", type=float, default=3.0)
    p.add_argument("--out", required=True, help="output report JSON path")
    p.set_defaults(fn=_cmd_consistency)

    p = sub.add_parser("qpc", help="quantum point contact effective contact potential")
    p.add_argument("--voltage-mv", type=float, required=True, help="junction voltage [mV]")
    p.add_argument("--residual-ohm", type=float, required=True, help="residual resistance [ohm]")
    p.set_defaults(fn=_cmd_qpc)

    p = sub.add_parser("pipeline", help="full simulate -> fit -> analyze run")
    _add_config_source(p)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 3
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
