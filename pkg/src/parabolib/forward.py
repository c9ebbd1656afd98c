"""Forward model: noiseless physics curves and noisy synthetic grids.

Electrostatic convention: the voltage-driven interaction derives from the
sphere-plane capacitance C(d) = 2 pi R eps0 ln(R/d) through the energy
derivative F_el = (1/2) |C'| V^2, which fixes the curvature amplitudes to
alpha = beta = pi R eps0 for the static and gradient modes.  The dissipation
curvature is gamma C(d)^2 with a user-supplied gamma.
"""

from __future__ import annotations

import math
import warnings
from typing import NamedTuple

import numpy as np

from .constants import HBAR_C
from .model import Geometry, MeasurementGrid, OscillatorParams, Scenario, evaluate_cpd


def _check_separation(d, g: Geometry) -> np.ndarray:
    d_arr = np.asarray(d, dtype=float)
    R = g.sphere_radius
    if np.any(d_arr <= 0.0) or not np.all(np.isfinite(d_arr)):
        raise ValueError("separation d must be positive and finite")
    if np.any(d_arr >= R):
        raise ValueError(f"separation d must stay below the sphere radius R={R:g}")
    if np.any(d_arr > R / 10.0):
        warnings.warn(
            f"separation d > R/10 strains the sphere-plane approximation (R={R:g})",
            stacklevel=3,
        )
    return d_arr


def _scalar_like(d, out: np.ndarray):
    return float(out) if np.isscalar(d) or np.asarray(d).ndim == 0 else out


def capacitance(d, g: Geometry):
    """Sphere-plane capacitance C(d) = 2 pi R eps0 ln(R/d) [F], R >> d."""
    d_arr = _check_separation(d, g)
    out = 2.0 * math.pi * g.sphere_radius * g.vacuum_permittivity * np.log(g.sphere_radius / d_arr)
    return _scalar_like(d, out)


def capacitance_derivatives(d, g: Geometry):
    """First and second distance derivatives of the sphere-plane capacitance.

    Returns (C' = -2 pi R eps0 / d [F/m], C'' = +2 pi R eps0 / d^2 [F/m^2]).
    """
    d_arr = _check_separation(d, g)
    pref = 2.0 * math.pi * g.sphere_radius * g.vacuum_permittivity
    c1 = -pref / d_arr
    c2 = pref / d_arr**2
    return _scalar_like(d, c1), _scalar_like(d, c2)


def electrostatic_curvature(mode: str, d, g: Geometry, gamma: float | None = None):
    """Parabola curvature of the electric response at separation d.

    static:      k = (1/2)|C'|  = pi R eps0 / d      [N/V^2]
    gradient:    k = (1/2)|C''| = pi R eps0 / d^2    [N/m/V^2]
    dissipation: k = gamma * C(d)^2                  [dissipation units/V^2]
    """
    if mode == "static":
        d_arr = _check_separation(d, g)
        out = math.pi * g.sphere_radius * g.vacuum_permittivity / d_arr
        return _scalar_like(d, out)
    if mode == "gradient":
        d_arr = _check_separation(d, g)
        out = math.pi * g.sphere_radius * g.vacuum_permittivity / d_arr**2
        return _scalar_like(d, out)
    if mode == "dissipation":
        if gamma is None:
            raise ValueError("dissipation mode requires gamma")
        c = capacitance(d, g)
        return gamma * c**2
    raise ValueError(f"unknown mode {mode!r}")


def casimir_force_pfa(d, g: Geometry):
    """Ideal-conductor sphere-plane Casimir force, proximity-force form.

    F(d) = pi^3 hbar c R / (360 d^3) [N], positive = attractive.
    """
    d_arr = _check_separation(d, g)
    out = math.pi**3 * HBAR_C * g.sphere_radius / (360.0 * d_arr**3)
    return _scalar_like(d, out)


def auxiliary_force(d, amplitude: float, exponent: float):
    """Generic attractive power law amplitude / d**exponent [N]."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0.0):
        raise ValueError("separation d must be positive")
    if amplitude < 0.0:
        raise ValueError("amplitude must be >= 0")
    out = amplitude / d_arr**exponent
    return _scalar_like(d, out)


def fluct_total(d, scenario: Scenario):
    """Total voltage-independent term at separation d, in the scenario's mode units.

    static:      sum of the enabled force components [N]
    gradient:    magnitude of the d-derivative of that sum [N/m]
    dissipation: user-configured background power law
    """
    d_arr = np.asarray(d, dtype=float)
    g = scenario.geometry
    fc = scenario.forces
    if scenario.mode == "dissipation":
        if scenario.background_amplitude > 0.0:
            return auxiliary_force(d, scenario.background_amplitude, scenario.background_exponent)
        return _scalar_like(d, np.zeros_like(d_arr))

    out = np.zeros_like(d_arr)
    # every component is A/d^n; the gradient magnitude of each is n*A/d^(n+1)
    terms = []
    if fc.casimir_enabled:
        terms.append((math.pi**3 * HBAR_C * g.sphere_radius / 360.0, 3.0))
        _check_separation(d_arr, g)
    if fc.surf_amplitude > 0.0:
        terms.append((fc.surf_amplitude, fc.surf_exponent))
    if fc.exotic_amplitude > 0.0:
        terms.append((fc.exotic_amplitude, fc.exotic_exponent))
    if terms and np.any(d_arr <= 0.0):
        raise ValueError("separation d must be positive")
    for amp, n in terms:
        if scenario.mode == "static":
            out = out + amp / d_arr**n
        else:
            out = out + n * amp / d_arr ** (n + 1.0)
    return _scalar_like(d, out)


def electric_observable(mode: str, d, V, scenario: Scenario):
    """Voltage-driven part of the observable: k_mode(d) * (V - V_m(d))^2."""
    k = electrostatic_curvature(mode, d, scenario.geometry, scenario.dissipation_gamma)
    v_m = evaluate_cpd(scenario.cpd, d)
    return k * (np.asarray(V, dtype=float) - v_m) ** 2


class FrequencyShift(NamedTuple):
    """Frequency response of an oscillator to a force gradient G >= 0."""

    dnu_sq: float  # nu0^2 - nu_meas^2 [Hz^2]
    dnu: float  # exact shift nu0 - nu_meas [Hz]
    dnu_small_shift: float  # approximation dnu_sq / (2 nu0) [Hz]


def gradient_to_frequency_shift(G: float, osc: OscillatorParams) -> FrequencyShift:
    """Convert a force gradient [N/m] into the oscillator frequency shift.

    Uses the harmonic-oscillator relation dnu^2 = nu0^2 - nu_meas^2
    = G / (4 pi^2 m_eff), the dimensionally consistent form of the
    frequency-shift/gradient law.  Returns the exact shift
    dnu = nu0 - sqrt(nu0^2 - dnu^2) together with the small-shift
    approximation dnu ~ dnu^2 / (2 nu0).
    """
    if G < 0.0:
        raise ValueError("force gradient G must be >= 0 (attractive magnitude)")
    dnu_sq = G / (4.0 * math.pi**2 * osc.m_eff)
    nu_meas_sq = osc.nu0**2 - dnu_sq
    if nu_meas_sq <= 0.0:
        raise ValueError(
            f"gradient G={G:g} drives nu_meas^2 <= 0 for nu0={osc.nu0:g}; "
            f"oscillator model breaks down"
        )
    dnu = osc.nu0 - math.sqrt(nu_meas_sq)
    return FrequencyShift(dnu_sq, dnu, dnu_sq / (2.0 * osc.nu0))


def noiseless_observable(scenario: Scenario, d, V):
    """Forward model without noise: electric term plus fluctuation term."""
    return electric_observable(scenario.mode, d, V, scenario) + fluct_total(d, scenario)


def synthesize_grid(scenario: Scenario) -> MeasurementGrid:
    """Generate the noisy measurement grid for a scenario.

    Cells are laid out d_r-major, voltage-minor; the per-cell noise sigma is
    max(noise_sigma, noise_rel * |noiseless|, noise_floor), and Gaussian noise
    is drawn from a generator keyed on rng_seed (bit-reproducible; a
    counter-based bit generator keeps the cell->draw assignment fixed).
    When that sigma is zero for every cell the grid is noiseless and records
    sigma = 1.0 as a uniform unit weight for downstream fits.
    """
    d_r = np.asarray(scenario.d_r_schedule)
    volts = np.sort(np.asarray(scenario.voltage_schedule))
    d = scenario.d0_true - d_r

    k = electrostatic_curvature(
        scenario.mode, d, scenario.geometry, scenario.dissipation_gamma
    )
    v_m = np.broadcast_to(np.asarray(evaluate_cpd(scenario.cpd, d)), d.shape)
    fl = np.broadcast_to(np.asarray(fluct_total(d, scenario)), d.shape)

    clean = k[:, None] * (volts[None, :] - v_m[:, None]) ** 2 + fl[:, None]
    clean = clean.ravel()

    sigma = np.maximum.reduce(
        [
            np.full_like(clean, scenario.noise_sigma),
            scenario.noise_rel * np.abs(clean),
            np.full_like(clean, scenario.noise_floor),
        ]
    )
    if np.all(sigma == 0.0):
        value = clean
        sigma = np.ones_like(clean)
    elif np.any(sigma == 0.0):
        raise ValueError(
            "noise model gives sigma = 0 for some cells but not all; "
            "set noise_floor to a positive value"
        )
    else:
        rng = np.random.Generator(np.random.Philox(key=int(scenario.rng_seed)))
        value = clean + sigma * rng.standard_normal(clean.shape[0])

    grid_dr = np.repeat(d_r, volts.size)
    grid_v = np.tile(volts, d_r.size)
    return MeasurementGrid(
        mode=scenario.mode,
        d_r=grid_dr,
        V=grid_v,
        value=value,
        sigma=sigma,
        provenance=f"scenario:{scenario.digest()}",
    )
