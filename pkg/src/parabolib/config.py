"""Run configuration: one shared ground truth, a set of modes, analysis options.

Configurations are single human-editable JSON files with explicit SI values
(no unit suffixes).  Unknown keys are rejected by name; serialization is
lossless, so load(dump(cfg)) reproduces cfg exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import (
    MODES,
    CpdProfile,
    ForceComponents,
    Geometry,
    OscillatorParams,
    Scenario,
)

FORMAT_VERSION = 1

#: per-mode additive seed offset, so shared-truth campaigns draw distinct noise
MODE_SEED_OFFSET = {"static": 0, "gradient": 1, "dissipation": 2}

_TOP_KEYS = {"format_version", "scenario", "modes", "analysis", "output_dir"}
_SCENARIO_KEYS = {
    "geometry",
    "cpd",
    "forces",
    "d0_true",
    "d_r_schedule",
    "voltage_schedule",
    "noise_sigma",
    "noise_rel",
    "noise_floor",
    "rng_seed",
    "oscillator",
    "dissipation_gamma",
    "background_amplitude",
    "background_exponent",
}
_GEOMETRY_KEYS = {"sphere_radius", "vacuum_permittivity"}
_CPD_KEYS = {"kind", "V0", "slope", "d_ref", "table"}
_FORCES_KEYS = {
    "casimir_enabled",
    "surf_amplitude",
    "surf_exponent",
    "exotic_amplitude",
    "exotic_exponent",
}
_OSC_KEYS = {"m_eff", "nu0"}
_ANALYSIS_KEYS = {"basis_exponents", "v_const", "z_threshold"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {where}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required config key {key!r} in {where}")
    return section[key]


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to run simulate -> fit -> analyze reproducibly."""

    geometry: Geometry
    cpd: CpdProfile
    forces: ForceComponents
    d0_true: float
    d_r_schedule: tuple[float, ...]
    voltage_schedule: tuple[float, ...]
    modes: tuple[str, ...]
    noise_sigma: float = 0.0
    noise_rel: float = 0.0
    noise_floor: float = 0.0
    rng_seed: int = 0
    oscillator: OscillatorParams | None = None
    dissipation_gamma: float | None = None
    background_amplitude: float = 0.0
    background_exponent: float = 0.0
    basis_exponents: tuple[float, ...] = (3.0, 2.0)
    v_const: float | None = None
    z_threshold: float = 3.0
    output_dir: str = "parabolib-out"
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "d_r_schedule", tuple(float(x) for x in self.d_r_schedule))
        object.__setattr__(self, "voltage_schedule", tuple(float(x) for x in self.voltage_schedule))
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "basis_exponents", tuple(float(x) for x in self.basis_exponents))
        if self.format_version != FORMAT_VERSION:
            raise ConfigError(
                f"unsupported format_version {self.format_version!r} (expected {FORMAT_VERSION})"
            )
        if not self.modes:
            raise ConfigError("modes must list at least one mode")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r} in modes")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError("modes must not repeat")

    def scenario_for_mode(self, mode: str) -> Scenario:
        """Materialize the shared truth as a Scenario for one mode."""
        if mode not in self.modes:
            raise ConfigError(f"mode {mode!r} is not listed in this config")
        try:
            return Scenario(
                geometry=self.geometry,
                cpd=self.cpd,
                forces=self.forces,
                d0_true=self.d0_true,
                d_r_schedule=self.d_r_schedule,
                voltage_schedule=self.voltage_schedule,
                mode=mode,
                noise_sigma=self.noise_sigma,
                noise_rel=self.noise_rel,
                noise_floor=self.noise_floor,
                rng_seed=(self.rng_seed + MODE_SEED_OFFSET[mode]) % 2**64,
                oscillator=self.oscillator,
                dissipation_gamma=self.dissipation_gamma,
                background_amplitude=self.background_amplitude,
                background_exponent=self.background_exponent,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "scenario": {
                "geometry": {
                    "sphere_radius": self.geometry.sphere_radius,
                    "vacuum_permittivity": self.geometry.vacuum_permittivity,
                },
                "cpd": {
                    "kind": self.cpd.kind,
                    "V0": self.cpd.V0,
                    "slope": self.cpd.slope,
                    "d_ref": self.cpd.d_ref,
                    "table": [list(p) for p in self.cpd.table],
                },
                "forces": {
                    "casimir_enabled": self.forces.casimir_enabled,
                    "surf_amplitude": self.forces.surf_amplitude,
                    "surf_exponent": self.forces.surf_exponent,
                    "exotic_amplitude": self.forces.exotic_amplitude,
                    "exotic_exponent": self.forces.exotic_exponent,
                },
                "d0_true": self.d0_true,
                "d_r_schedule": list(self.d_r_schedule),
                "voltage_schedule": list(self.voltage_schedule),
                "noise_sigma": self.noise_sigma,
                "noise_rel": self.noise_rel,
                "noise_floor": self.noise_floor,
                "rng_seed": self.rng_seed,
                "oscillator": None
                if self.oscillator is None
                else {"m_eff": self.oscillator.m_eff, "nu0": self.oscillator.nu0},
                "dissipation_gamma": self.dissipation_gamma,
                "background_amplitude": self.background_amplitude,
                "background_exponent": self.background_exponent,
            },
            "modes": list(self.modes),
            "analysis": {
                "basis_exponents": list(self.basis_exponents),
                "v_const": self.v_const,
                "z_threshold": self.z_threshold,
            },
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(data, _TOP_KEYS, "top level")
        version = _require(data, "format_version", "top level")
        scen = _require(data, "scenario", "top level")
        if not isinstance(scen, dict):
            raise ConfigError("'scenario' must be an object")
        _check_keys(scen, _SCENARIO_KEYS, "scenario")

        geo = _require(scen, "geometry", "scenario")
        _check_keys(geo, _GEOMETRY_KEYS, "scenario.geometry")
        cpd_d = _require(scen, "cpd", "scenario")
        _check_keys(cpd_d, _CPD_KEYS, "scenario.cpd")
        forces_d = scen.get("forces", {})
        _check_keys(forces_d, _FORCES_KEYS, "scenario.forces")
        osc_d = scen.get("oscillator")
        if osc_d is not None:
            _check_keys(osc_d, _OSC_KEYS, "scenario.oscillator")
        analysis = data.get("analysis", {})
        if not isinstance(analysis, dict):
            raise ConfigError("'analysis' must be an object")
        _check_keys(analysis, _ANALYSIS_KEYS, "analysis")

        try:
            geometry = Geometry(
                sphere_radius=_require(geo, "sphere_radius", "scenario.geometry"),
                **(
                    {"vacuum_permittivity": geo["vacuum_permittivity"]}
                    if "vacuum_permittivity" in geo
                    else {}
                ),
            )
            cpd = CpdProfile(
                kind=_require(cpd_d, "kind", "scenario.cpd"),
                V0=cpd_d.get("V0", 0.0),
                slope=cpd_d.get("slope", 0.0),
                d_ref=cpd_d.get("d_ref", 1e-6),
                table=tuple(tuple(p) for p in cpd_d.get("table", [])),
            )
            forces = ForceComponents(
                casimir_enabled=forces_d.get("casimir_enabled", True),
                surf_amplitude=forces_d.get("surf_amplitude", 0.0),
                surf_exponent=forces_d.get("surf_exponent", 0.0),
                exotic_amplitude=forces_d.get("exotic_amplitude", 0.0),
                exotic_exponent=forces_d.get("exotic_exponent", 0.0),
            )
            oscillator = (
                None
                if osc_d is None
                else OscillatorParams(
                    m_eff=_require(osc_d, "m_eff", "scenario.oscillator"),
                    nu0=_require(osc_d, "nu0", "scenario.oscillator"),
                )
            )
            return cls(
                geometry=geometry,
                cpd=cpd,
                forces=forces,
                d0_true=_require(scen, "d0_true", "scenario"),
                d_r_schedule=_require(scen, "d_r_schedule", "scenario"),
                voltage_schedule=_require(scen, "voltage_schedule", "scenario"),
                modes=_require(data, "modes", "top level"),
                noise_sigma=scen.get("noise_sigma", 0.0),
                noise_rel=scen.get("noise_rel", 0.0),
                noise_floor=scen.get("noise_floor", 0.0),
                rng_seed=scen.get("rng_seed", 0),
                oscillator=oscillator,
                dissipation_gamma=scen.get("dissipation_gamma"),
                background_amplitude=scen.get("background_amplitude", 0.0),
                background_exponent=scen.get("background_exponent", 0.0),
                basis_exponents=analysis.get("basis_exponents", [3.0, 2.0]),
                v_const=analysis.get("v_const"),
                z_threshold=analysis.get("z_threshold", 3.0),
                output_dir=data.get("output_dir", "parabolib-out"),
                format_version=version,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def dump_config(config: RunConfig, path) -> None:
    """Write a config back to JSON (lossless round trip)."""
    Path(path).write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")


def demo_config(output_dir: str = "parabolib-out") -> RunConfig:
    """Built-in demonstration campaign: static+gradient, Casimir-only,
    constant 0.3 V contact potential, 1% relative noise."""
    n_d, n_v = 20, 7
    d_r = [1.5e-6 * i / (n_d - 1) for i in range(n_d)]
    volts = [-0.2 + 1.0 * j / (n_v - 1) for j in range(n_v)]
    return RunConfig(
        geometry=Geometry(sphere_radius=1e-4),
        cpd=CpdProfile.constant(0.3),
        forces=ForceComponents(casimir_enabled=True),
        d0_true=2e-6,
        d_r_schedule=d_r,
        voltage_schedule=volts,
        modes=("static", "gradient"),
        noise_rel=0.01,
        rng_seed=20260810,
        oscillator=OscillatorParams(m_eff=1e-11, nu0=3e5),
        v_const=None,
        output_dir=output_dir,
    )
