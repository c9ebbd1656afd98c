"""End-to-end run: simulate each mode, fit, analyze, write artifacts.

All artifacts are deterministic functions of the configuration (no
timestamps, sorted JSON keys, fixed float formatting), so identical
config+seed reruns are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import constant_cpd_bias, cross_mode_consistency, decompose_fluct
from .config import RunConfig
from .errors import ConfigError, FitError, ParabolibError
from .fitting import CalibrationProfiles, extract_profiles, fit_power_law
from .forward import synthesize_grid
from .gridio import (
    consistency_to_dict,
    powerlaw_to_dict,
    write_bias_curve,
    write_grid,
    write_json,
    write_profiles,
    _fmt,
    _write_lines,
)
from .model import DEFAULT_LAW, MeasurementGrid, PowerLawFit


@dataclass
class PipelineResult:
    output_dir: Path
    summary: dict
    mode_results: dict
    artifacts: tuple[str, ...]


def _stage(name: str, error_type, fn, *args, **kwargs):
    """Run one pipeline stage, prefixing failures with the stage name."""
    try:
        return fn(*args, **kwargs)
    except ParabolibError as exc:
        exc.args = (f"stage {name}: {exc}",)
        raise
    except ValueError as exc:
        raise error_type(f"stage {name}: {exc}") from exc


def write_parabola_sections(
    grid: MeasurementGrid, profiles: CalibrationProfiles, path, max_sections: int = 5
) -> None:
    """Plot-ready CSV of measured points plus fitted parabola at selected distances."""
    n = profiles.n_distances
    pick = np.unique(np.linspace(0, n - 1, min(max_sections, n)).round().astype(int))
    lines = [
        f"# parabolib-parabolas v1, mode={grid.mode}, units=SI",
        "d_r,V,value,sigma,fit",
    ]
    for i in pick:
        d_r = profiles.d_r[i]
        sel = grid.d_r == d_r
        fit_vals = profiles.k[i] * (grid.V[sel] - profiles.V_m[i]) ** 2 + profiles.fluct[i]
        for v, val, sig, fv in zip(grid.V[sel], grid.value[sel], grid.sigma[sel], fit_vals):
            lines.append(",".join(_fmt(x) for x in (d_r, v, val, sig, fv)))
    _write_lines(path, lines)


def write_profiles_vs_distance(
    profiles: CalibrationProfiles, fit: PowerLawFit, path
) -> None:
    """Profiles re-plotted against calibrated absolute separation d = d0_hat - d_r."""
    d = fit.d0_hat - profiles.d_r
    lines = [
        f"# parabolib-profiles-vs-d v1, mode={profiles.mode}, units=SI, d0_hat={_fmt(fit.d0_hat)}",
        "d,d_r,k,sigma_k,V_m,sigma_V,fluct,sigma_f",
    ]
    cols = (
        d,
        profiles.d_r,
        profiles.k,
        profiles.k_sigma,
        profiles.V_m,
        profiles.V_m_sigma,
        profiles.fluct,
        profiles.fluct_sigma,
    )
    for i in range(profiles.n_distances):
        lines.append(",".join(_fmt(c[i]) for c in cols))
    _write_lines(path, lines)


def _decomposition_summary(profiles, fit, exponents):
    d_abs = fit.d0_hat - profiles.d_r
    try:
        dec = decompose_fluct(d_abs, profiles.fluct, profiles.fluct_sigma, exponents)
    except ValueError as exc:
        return {"error": str(exc)}
    return {
        "exponents": list(dec.exponents),
        "amplitudes": [float(a) for a in dec.amplitudes],
        "sigmas": [float(s) for s in dec.sigmas],
        "chi2_per_dof": dec.chi2_per_dof,
    }


def run_pipeline(config: RunConfig, output_dir=None) -> PipelineResult:
    """Run simulate -> fit -> analyze for every configured mode.

    Writes, per mode: the grid CSV, profiles CSV, power-law JSON, bias CSV
    and two plot-ready CSVs; plus consistency.json (two or more modes) and a
    machine-readable summary.json recording every recovered parameter with
    its uncertainty and the configured ground truth.
    """
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list[str] = []
    summary_modes: dict = {}
    mode_results: dict = {}

    for mode in config.modes:
        scenario = _stage(f"scenario[{mode}]", ConfigError, config.scenario_for_mode, mode)
        grid = _stage(f"synthesize[{mode}]", ConfigError, synthesize_grid, scenario)
        grid_name = f"grid_{mode}.csv"
        write_grid(grid, out / grid_name)

        profiles = _stage(f"extract_profiles[{mode}]", FitError, extract_profiles, grid)
        profiles_name = f"profiles_{mode}.csv"
        write_profiles(profiles, out / profiles_name)

        law = DEFAULT_LAW[mode]
        plfit = _stage(
            f"fit_power_law[{mode}]", FitError, fit_power_law, profiles, law, config.geometry
        )
        powerlaw_name = f"powerlaw_{mode}.json"
        write_json(powerlaw_to_dict(plfit, mode, grid.provenance), out / powerlaw_name)

        v_const = config.v_const if config.v_const is not None else float(profiles.V_m[0])
        bias = _stage(
            f"bias[{mode}]", FitError, constant_cpd_bias, profiles, v_const, plfit.d0_hat
        )
        bias_name = f"bias_{mode}.csv"
        write_bias_curve(bias, mode, out / bias_name)

        parabolas_name = f"parabolas_{mode}.csv"
        write_parabola_sections(grid, profiles, out / parabolas_name)
        vs_d_name = f"profiles_vs_d_{mode}.csv"
        write_profiles_vs_distance(profiles, plfit, out / vs_d_name)

        if mode == "gradient":
            dec_exponents = [n + 1.0 for n in config.basis_exponents]
        else:
            dec_exponents = list(config.basis_exponents)
        truth_amp = (
            config.dissipation_gamma
            if mode == "dissipation"
            else math.pi * config.geometry.sphere_radius * config.geometry.vacuum_permittivity
        )
        summary_modes[mode] = {
            "law": law,
            "amplitude": plfit.amplitude,
            "amplitude_sigma": plfit.amplitude_sigma,
            "d0_hat": plfit.d0_hat,
            "d0_sigma": plfit.d0_sigma,
            "chi2_per_dof": plfit.chi2_per_dof,
            "converged": plfit.converged,
            "n_points": plfit.n_points,
            "v_const": v_const,
            "decomposition": _decomposition_summary(profiles, plfit, dec_exponents),
            "truth": {
                "d0_true": config.d0_true,
                "amplitude_true": truth_amp,
                "cpd_kind": config.cpd.kind,
                "cpd_V0": config.cpd.V0,
                "cpd_slope": config.cpd.slope,
                "rng_seed": scenario.rng_seed,
            },
            "artifacts": {
                "grid": grid_name,
                "profiles": profiles_name,
                "powerlaw": powerlaw_name,
                "bias": bias_name,
                "parabolas": parabolas_name,
                "profiles_vs_d": vs_d_name,
            },
        }
        artifacts += [grid_name, profiles_name, powerlaw_name, bias_name,
                      parabolas_name, vs_d_name]
        mode_results[mode] = (profiles, plfit)

    consistency_payload = None
    if len(mode_results) >= 2:
        report = _stage(
            "consistency", FitError, cross_mode_consistency, mode_results, config.z_threshold
        )
        consistency_payload = consistency_to_dict(report)
        write_json(consistency_payload, out / "consistency.json")
        artifacts.append("consistency.json")

    summary = {
        "format": "parabolib-summary v1",
        "modes": summary_modes,
        "consistency": consistency_payload,
        "z_threshold": config.z_threshold,
    }
    write_json(summary, out / "summary.json")
    artifacts.append("summary.json")

    return PipelineResult(
        output_dir=out,
        summary=summary,
        mode_results=mode_results,
        artifacts=tuple(artifacts),
    )
