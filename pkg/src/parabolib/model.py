"""Core domain types for synthetic sphere-plane force campaigns.

Conventions used throughout the package:

* SI units everywhere (meters, volts, newtons, N/m, hertz, ...).
* Attractive forces and force gradients are positive magnitudes.
* Absolute separation d and actuator reading d_r are related by
  ``d = d0 - d_r`` where d0 is the contact-point parameter.

All values are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .constants import EPSILON_0

MODES = ("static", "gradient", "dissipation")

#: observable units per mode (grid "value" column)
MODE_UNITS = {"static": "N", "gradient": "N/m", "dissipation": "dissipation"}


def _readonly(a) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Geometry:
    """Sphere-plane geometry: sphere radius R [m] and vacuum permittivity."""

    sphere_radius: float
    vacuum_permittivity: float = EPSILON_0

    def __post_init__(self):
        if not (self.sphere_radius > 0.0 and math.isfinite(self.sphere_radius)):
            raise ValueError(f"sphere_radius must be positive, got {self.sphere_radius}")
        if not (self.vacuum_permittivity > 0.0):
            raise ValueError("vacuum_permittivity must be positive")


@dataclass(frozen=True)
class CpdProfile:
    """Contact potential difference V_m as a function of absolute separation d.

    kind 'constant':   V_m(d) = V0 at every separation
    kind 'log_drift':  V_m(d) = V0 + slope * ln(d / d_ref)
    kind 'tabulated':  linear interpolation between (d, V_m) knots; evaluating
                       outside the knot range is an error
    """

    kind: str
    V0: float = 0.0
    slope: float = 0.0
    d_ref: float = 1e-6
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "log_drift", "tabulated"):
            raise ValueError(f"unknown CPD profile kind {self.kind!r}")
        if self.kind == "log_drift" and not self.d_ref > 0.0:
            raise ValueError("log_drift profile needs d_ref > 0")
        if self.kind == "tabulated":
            tab = tuple((float(d), float(v)) for d, v in self.table)
            object.__setattr__(self, "table", tab)
            if len(tab) < 2:
                raise ValueError("tabulated profile needs at least 2 knots")
            ds = [d for d, _ in tab]
            if any(not d > 0.0 for d in ds):
                raise ValueError("tabulated knot separations must be positive")
            if any(b <= a for a, b in zip(ds, ds[1:])):
                raise ValueError("tabulated knot separations must be strictly increasing")

    @classmethod
    def constant(cls, V0: float) -> "CpdProfile":
        return cls(kind="constant", V0=V0)

    @classmethod
    def log_drift(cls, V0: float, slope: float, d_ref: float = 1e-6) -> "CpdProfile":
        return cls(kind="log_drift", V0=V0, slope=slope, d_ref=d_ref)

    @classmethod
    def tabulated(cls, table: Sequence[tuple[float, float]]) -> "CpdProfile":
        return cls(kind="tabulated", table=tuple(table))


def evaluate_cpd(profile: CpdProfile, d):
    """Evaluate V_m(d) [V] at separation(s) d [m] (scalar or array).

    Raises ValueError for d <= 0, and for a tabulated profile when d falls
    outside the knot range.
    """
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0.0) or not np.all(np.isfinite(d_arr)):
        raise ValueError("separation d must be positive and finite")
    if profile.kind == "constant":
        out = np.full_like(d_arr, profile.V0)
    elif profile.kind == "log_drift":
        out = profile.V0 + profile.slope * np.log(d_arr / profile.d_ref)
    else:
        knots_d = np.array([p[0] for p in profile.table])
        knots_v = np.array([p[1] for p in profile.table])
        if np.any(d_arr < knots_d[0]) or np.any(d_arr > knots_d[-1]):
            raise ValueError(
                f"separation outside tabulated range [{knots_d[0]:g}, {knots_d[-1]:g}]"
            )
        out = np.interp(d_arr, knots_d, knots_v)
    return float(out) if np.isscalar(d) or d_arr.ndim == 0 else out


@dataclass(frozen=True)
class ForceComponents:
    """Voltage-independent force model: Casimir term plus two power laws.

    The two auxiliary terms (surface-patch and exotic) share the form
    amplitude / d**exponent with amplitude >= 0, exponent >= 0.
    """

    casimir_enabled: bool = True
    surf_amplitude: float = 0.0
    surf_exponent: float = 0.0
    exotic_amplitude: float = 0.0
    exotic_exponent: float = 0.0

    def __post_init__(self):
        if self.surf_amplitude < 0.0 or self.exotic_amplitude < 0.0:
            raise ValueError("force amplitudes must be >= 0")
        if self.surf_exponent < 0.0 or self.exotic_exponent < 0.0:
            raise ValueError("force exponents must be >= 0")


@dataclass(frozen=True)
class OscillatorParams:
    """Cantilever oscillator: effective mass [kg] and free resonance [Hz]."""

    m_eff: float
    nu0: float

    def __post_init__(self):
        if not self.m_eff > 0.0:
            raise ValueError("m_eff must be positive")
        if not self.nu0 > 0.0:
            raise ValueError("nu0 must be positive")


@dataclass(frozen=True)
class Scenario:
    """Ground truth for one synthetic measurement campaign in one mode.

    noise model per grid cell (all in the mode's observable units):
        sigma = max(noise_sigma, noise_rel * |noiseless value|, noise_floor)
    noise_sigma is an absolute standard deviation; noise_rel is the
    relative-noise convenience with noise_floor as its absolute minimum.
    The rng_seed fully determines the synthesized noise.
    """

    geometry: Geometry
    cpd: CpdProfile
    forces: ForceComponents
    d0_true: float
    d_r_schedule: tuple[float, ...]
    voltage_schedule: tuple[float, ...]
    mode: str = "static"
    noise_sigma: float = 0.0
    noise_rel: float = 0.0
    noise_floor: float = 0.0
    rng_seed: int = 0
    oscillator: OscillatorParams | None = None
    dissipation_gamma: float | None = None
    background_amplitude: float = 0.0
    background_exponent: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "d_r_schedule", tuple(float(x) for x in self.d_r_schedule))
        object.__setattr__(self, "voltage_schedule", tuple(float(x) for x in self.voltage_schedule))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.d0_true > 0.0:
            raise ValueError("d0_true must be positive")
        sched = self.d_r_schedule
        if len(sched) == 0:
            raise ValueError("d_r_schedule must not be empty")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("d_r_schedule must be strictly increasing")
        if sched[-1] >= self.d0_true:
            raise ValueError(
                f"every d_r must stay below d0_true={self.d0_true:g} "
                f"(absolute separation d = d0_true - d_r must be positive)"
            )
        if self.d0_true - sched[0] >= self.geometry.sphere_radius:
            raise ValueError("largest separation d0_true - min(d_r) must stay below R")
        volts = self.voltage_schedule
        if len(set(volts)) != len(volts):
            raise ValueError("voltage_schedule entries must be distinct (grid cells are unique)")
        if len(volts) < 5:
            raise ValueError(
                f"voltage_schedule must contain at least 5 distinct voltages to "
                f"support the per-distance parabola fit (which itself needs >= 3); "
                f"got {len(volts)}"
            )
        for name in ("noise_sigma", "noise_rel", "noise_floor"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not (0 <= int(self.rng_seed) < 2**64):
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        if self.mode == "gradient" and self.oscillator is None:
            raise ValueError("gradient mode requires oscillator parameters")
        if self.mode == "dissipation":
            if self.dissipation_gamma is None or not self.dissipation_gamma > 0.0:
                raise ValueError("dissipation mode requires dissipation_gamma > 0")
        if self.background_amplitude < 0.0 or self.background_exponent < 0.0:
            raise ValueError("dissipation background amplitude/exponent must be >= 0")

    @property
    def separations(self) -> np.ndarray:
        """Absolute separations d = d0_true - d_r, in schedule order."""
        return self.d0_true - np.asarray(self.d_r_schedule)

    def digest(self) -> str:
        """Stable hex digest of every ground-truth field (for provenance)."""
        payload: dict = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (Geometry, CpdProfile, ForceComponents, OscillatorParams)):
                v = {g.name: getattr(v, g.name) for g in fields(v)}
            payload[f.name] = v
        blob = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MeasurementGrid:
    """Observable table: one (d_r, V, value, sigma) row per grid cell.

    Rows are stored in canonical order (d_r ascending, then V ascending) and
    must form a complete rectangular grid with sigma > 0 everywhere.
    provenance is a scenario digest for synthetic grids, "external" otherwise,
    and is preserved by file round trips.
    """

    mode: str
    d_r: np.ndarray
    V: np.ndarray
    value: np.ndarray
    sigma: np.ndarray
    provenance: str = "external"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        cols = [_readonly(getattr(self, n)) for n in ("d_r", "V", "value", "sigma")]
        n = cols[0].shape[0]
        if any(c.ndim != 1 or c.shape[0] != n for c in cols):
            raise ValueError("grid columns must be 1-d arrays of equal length")
        order = np.lexsort((cols[1], cols[0]))
        cols = [_readonly(c[order]) for c in cols]
        for name, c in zip(("d_r", "V", "value", "sigma"), cols):
            object.__setattr__(self, name, c)
        if np.any(self.sigma <= 0.0):
            bad = int(np.argmax(self.sigma <= 0.0))
            raise ValueError(f"sigma must be positive in every row (row {bad} after sorting)")
        dvals = np.unique(self.d_r)
        vvals = np.unique(self.V)
        if dvals.size * vvals.size != n:
            raise ValueError(
                f"grid is not rectangular: {dvals.size} distances x {vvals.size} "
                f"voltages != {n} rows"
            )
        # complete rectangle with unique rows: sorted (d_r, V) must tile exactly
        expect_d = np.repeat(dvals, vvals.size)
        expect_v = np.tile(vvals, dvals.size)
        if not (np.array_equal(self.d_r, expect_d) and np.array_equal(self.V, expect_v)):
            raise ValueError("grid is not rectangular: duplicate or missing (d_r, V) cells")

    @property
    def distances(self) -> np.ndarray:
        return np.unique(self.d_r)

    @property
    def voltages(self) -> np.ndarray:
        return np.unique(self.V)

    @property
    def n_rows(self) -> int:
        return int(self.d_r.shape[0])

    def __eq__(self, other):
        if not isinstance(other, MeasurementGrid):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.provenance == other.provenance
            and np.array_equal(self.d_r, other.d_r)
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.value, other.value)
            and np.array_equal(self.sigma, other.sigma)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ParabolaFit:
    """Per-distance quadratic fit: value = k (V - V_m)^2 + minimum.

    covariance is the 3x3 symmetric matrix over (k, V_m, minimum) obtained by
    the delta method from the raw polynomial-coefficient covariance.
    """

    d_r: float
    k: float
    V_m: float
    minimum: float
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.k > 0.0:
            raise ValueError("parabola curvature k must be positive")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError("covariance must be 3x3")
        cov = 0.5 * (cov + cov.T)  # symmetrize fp noise
        object.__setattr__(self, "covariance", _readonly(cov))

    @property
    def k_sigma(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def V_m_sigma(self) -> float:
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    @property
    def minimum_sigma(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))


#: curvature-vs-distance model names accepted by the power-law fitter
LAWS = ("inverse_linear", "inverse_square", "capacitance_squared")

#: default curvature law per operation mode
DEFAULT_LAW = {
    "static": "inverse_linear",
    "gradient": "inverse_square",
    "dissipation": "capacitance_squared",
}


@dataclass(frozen=True)
class PowerLawFit:
    """Result of calibrating a curvature profile k(d_r) against its law.

    amplitude is alpha, beta, or gamma depending on the law; d0_hat locates
    the hard-contact asymptote (d0_sigma == inf marks a degenerate profile).
    """

    law: str
    amplitude: float
    amplitude_sigma: float
    d0_hat: float
    d0_sigma: float
    chi2_per_dof: float
    n_points: int
    converged: bool = True

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}, got {self.law!r}")
        if not self.d0_hat > 0.0:
            raise ValueError("d0_hat must be positive")

    @property
    def exponent_used(self):
        """1, 2, or 'capacitance-squared', matching the fitted law."""
        return {"inverse_linear": 1, "inverse_square": 2}.get(self.law, "capacitance-squared")
