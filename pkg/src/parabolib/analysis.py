"""Higher-level studies built on the fitted profiles.

Covers the systematic bias from compensating a drifting contact potential
with one constant voltage, decomposition of the distance-only force into
power-law origins, cross-mode consistency checks, and the quantum point
contact effective-CPD estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import QPC_RESISTANCE
from .errors import FitError
from .fitting import CalibrationProfiles, FreeExponentFit, fit_free_exponent
from .forward import electrostatic_curvature, fluct_total
from .model import PowerLawFit, Scenario, _readonly, evaluate_cpd

#: expected free exponent of the curvature law per mode (None: no pure power law)
EXPECTED_EXPONENT = {"static": 1.0, "gradient": 2.0, "dissipation": None}


@dataclass(frozen=True)
class BiasCurve:
    """Overestimation of the distance-only term under a fixed bias voltage.

    bias(d) = k(d) (V_m(d) - V_const)^2 >= 0; relative_overestimate is
    bias/fluct_true where fluct_true > 0 and NaN (undefined) elsewhere.
    """

    d: np.ndarray
    bias: np.ndarray
    fluct_true: np.ndarray
    relative_overestimate: np.ndarray
    V_const: float

    def __post_init__(self):
        names = ("d", "bias", "fluct_true", "relative_overestimate")
        cols = [_readonly(getattr(self, n)) for n in names]
        n = cols[0].shape[0]
        if any(c.ndim != 1 or c.shape[0] != n for c in cols):
            raise ValueError("bias-curve columns must be 1-d arrays of equal length")
        for name, c in zip(names, cols):
            object.__setattr__(self, name, c)
        if np.any(self.bias < 0.0):
            raise ValueError("bias must be >= 0 in every row")


def constant_cpd_bias(source, V_const: float, d0: float | None = None) -> BiasCurve:
    """Bias curve k(d) (V_m(d) - V_const)^2 from a scenario or fitted profiles.

    With a Scenario the curve is evaluated on the scheduled separations from
    the ground truth.  With CalibrationProfiles the fitted k, V_m and fluct
    columns are used; the abscissa is d0 - d_r when d0 is given, d_r
    otherwise (the bias values themselves do not depend on that labeling).
    """
    if isinstance(source, Scenario):
        d = source.separations
        k = np.asarray(
            electrostatic_curvature(source.mode, d, source.geometry, source.dissipation_gamma)
        )
        v_m = np.asarray(evaluate_cpd(source.cpd, d))
        fluct_true = np.broadcast_to(np.asarray(fluct_total(d, source)), d.shape)
    elif isinstance(source, CalibrationProfiles):
        d = source.d_r if d0 is None else d0 - source.d_r
        k = source.k
        v_m = source.V_m
        fluct_true = source.fluct
    else:
        raise TypeError(f"expected Scenario or CalibrationProfiles, got {type(source).__name__}")

    bias = k * (np.broadcast_to(v_m, k.shape) - V_const) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(fluct_true > 0.0, bias / fluct_true, np.nan)
    return BiasCurve(
        d=np.asarray(d, dtype=float),
        bias=bias,
        fluct_true=np.asarray(fluct_true, dtype=float),
        relative_overestimate=rel,
        V_const=float(V_const),
    )


def fixed_voltage_fluct(profiles: CalibrationProfiles, V_const: float) -> np.ndarray:
    """Distance-only term an experimenter records when always biasing at V_const.

    Evaluates each fitted parabola off its minimum:
    fluct + k (V_m - V_const)^2, i.e. the "off the path" curve.
    """
    return profiles.fluct + profiles.k * (profiles.V_m - V_const) ** 2


@dataclass(frozen=True)
class FluctDecomposition:
    """Weighted linear decomposition of fluct(d) onto a power-law basis."""

    exponents: tuple[float, ...]
    amplitudes: np.ndarray
    sigmas: np.ndarray
    covariance: np.ndarray
    chi2_per_dof: float

    def amplitude(self, exponent: float) -> float:
        return float(self.amplitudes[self.exponents.index(exponent)])

    def sigma(self, exponent: float) -> float:
        return float(self.sigmas[self.exponents.index(exponent)])


def decompose_fluct(d, fluct, sigma, exponents) -> FluctDecomposition:
    """Weighted linear least squares of fluct(d) against {d**-n for n in exponents}.

    Exponents must be pairwise distinct and the system overdetermined
    (more rows than basis terms).
    """
    d = np.asarray(d, dtype=float)
    f = np.asarray(fluct, dtype=float)
    s = np.asarray(sigma, dtype=float)
    exps = tuple(float(n) for n in exponents)
    if len(exps) != len(set(exps)):
        raise ValueError(f"basis exponents must be pairwise distinct, got {exps}")
    if len(exps) == 0:
        raise ValueError("at least one basis exponent is required")
    if d.size < len(exps) + 1:
        raise ValueError(
            f"need at least {len(exps) + 1} rows for {len(exps)} basis terms, got {d.size}"
        )
    if np.any(d <= 0.0):
        raise ValueError("separations must be positive")
    if np.any(s <= 0.0):
        raise ValueError("sigmas must be positive")

    w = 1.0 / s
    X = np.column_stack([d**-n for n in exps]) * w[:, None]
    fw = f * w
    amps, *_ = np.linalg.lstsq(X, fw, rcond=None)
    normal = X.T @ X
    if np.linalg.cond(normal) > 1e14:
        raise ValueError("basis exponents produce a numerically collinear system")
    cov = np.linalg.inv(normal)
    resid = fw - X @ amps
    dof = max(d.size - len(exps), 1)
    return FluctDecomposition(
        exponents=exps,
        amplitudes=_readonly(amps),
        sigmas=_readonly(np.sqrt(np.maximum(np.diag(cov), 0.0))),
        covariance=_readonly(cov),
        chi2_per_dof=float(resid @ resid) / dof,
    )


@dataclass(frozen=True)
class ModeCheck:
    """Per-mode entries of a consistency report."""

    mode: str
    d0_hat: float
    d0_sigma: float
    exponent_hat: float
    exponent_sigma: float
    exponent_expected: float | None
    exponent_z: float | None
    exponent_verdict: str | None


@dataclass(frozen=True)
class PairCheck:
    """Pairwise mode comparison: contact points and CPD profiles."""

    modes: tuple[str, str]
    d0_z: float
    d0_verdict: str
    overlap: bool
    vm_max_abs_diff: float | None
    vm_max_z: float | None
    vm_verdict: str | None


@dataclass(frozen=True)
class ConsistencyReport:
    """Cross-mode agreement summary at a configurable z threshold."""

    z_threshold: float
    modes: tuple[ModeCheck, ...]
    pairs: tuple[PairCheck, ...]

    def mode(self, name: str) -> ModeCheck:
        for m in self.modes:
            if m.mode == name:
                return m
        raise KeyError(name)

    def pair(self, a: str, b: str) -> PairCheck:
        key = tuple(sorted((a, b)))
        for p in self.pairs:
            if p.modes == key:
                return p
        raise KeyError((a, b))

    @property
    def consistent(self) -> bool:
        """True when every performed check passed."""
        verdicts = [m.exponent_verdict for m in self.modes]
        verdicts += [p.d0_verdict for p in self.pairs]
        verdicts += [p.vm_verdict for p in self.pairs]
        return all(v != "inconsistent" for v in verdicts)


def _verdict(z: float, threshold: float) -> str:
    return "consistent" if z < threshold else "inconsistent"


def _vm_comparison(prof_a, fit_a, prof_b, fit_b):
    """Align the two V_m profiles on absolute separations and compare.

    Interpolates the finer-sampled mode onto the coarser one's overlap
    points; returns (max |delta V_m|, max z) or None when the calibrated
    ranges do not overlap.
    """
    d_a = fit_a.d0_hat - prof_a.d_r
    d_b = fit_b.d0_hat - prof_b.d_r
    lo = max(d_a.min(), d_b.min())
    hi = min(d_a.max(), d_b.max())
    if not lo <= hi:
        return None

    def in_window(d):
        return (d >= lo) & (d <= hi)

    na, nb = int(np.sum(in_window(d_a))), int(np.sum(in_window(d_b)))
    if na == 0 or nb == 0:
        return None
    # coarser mode = fewer points inside the shared window
    if na <= nb:
        target_d = d_a[in_window(d_a)]
        target_v = prof_a.V_m[in_window(d_a)]
        target_s = prof_a.V_m_sigma[in_window(d_a)]
        other_d, other_v, other_s = d_b, prof_b.V_m, prof_b.V_m_sigma
    else:
        target_d = d_b[in_window(d_b)]
        target_v = prof_b.V_m[in_window(d_b)]
        target_s = prof_b.V_m_sigma[in_window(d_b)]
        other_d, other_v, other_s = d_a, prof_a.V_m, prof_a.V_m_sigma
    # np.interp needs ascending abscissa; d decreases with d_r
    order = np.argsort(other_d)
    interp_v = np.interp(target_d, other_d[order], other_v[order])
    interp_s = np.interp(target_d, other_d[order], other_s[order])
    diff = np.abs(target_v - interp_v)
    denom = np.sqrt(target_s**2 + interp_s**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(denom > 0.0, diff / denom, np.where(diff > 0.0, np.inf, 0.0))
    return float(diff.max()), float(z.max())


def cross_mode_consistency(mode_results, z_threshold: float = 3.0) -> ConsistencyReport:
    """Compare calibrations across operation modes.

    mode_results maps mode name -> (CalibrationProfiles, PowerLawFit).
    Checks pairwise contact-point agreement z = |d0_A - d0_B| / sqrt(
    sigma_A^2 + sigma_B^2), refits each curvature profile with a free
    exponent against its expected value, and aligns the V_m profiles on
    shared calibrated separations.  Pairs without range overlap are flagged,
    not fatal.
    """
    if len(mode_results) < 2:
        raise ValueError("cross-mode consistency needs at least 2 modes")
    mode_checks = []
    free_fits: dict[str, FreeExponentFit] = {}
    for mode, (profiles, plfit) in sorted(mode_results.items()):
        try:
            ffit = fit_free_exponent(profiles)
        except FitError:
            ffit = None
        free_fits[mode] = ffit
        expected = EXPECTED_EXPONENT.get(mode)
        if ffit is not None and expected is not None:
            if ffit.exponent_sigma > 0.0 and math.isfinite(ffit.exponent_sigma):
                z = abs(ffit.exponent - expected) / ffit.exponent_sigma
            else:
                z = 0.0 if ffit.exponent == expected else math.inf
            exp_z, exp_verdict = z, _verdict(z, z_threshold)
        else:
            exp_z, exp_verdict = None, None
        mode_checks.append(
            ModeCheck(
                mode=mode,
                d0_hat=plfit.d0_hat,
                d0_sigma=plfit.d0_sigma,
                exponent_hat=ffit.exponent if ffit is not None else math.nan,
                exponent_sigma=ffit.exponent_sigma if ffit is not None else math.nan,
                exponent_expected=expected,
                exponent_z=exp_z,
                exponent_verdict=exp_verdict,
            )
        )

    names = sorted(mode_results)
    pair_checks = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            prof_a, fit_a = mode_results[a]
            prof_b, fit_b = mode_results[b]
            denom = math.hypot(fit_a.d0_sigma, fit_b.d0_sigma)
            diff = abs(fit_a.d0_hat - fit_b.d0_hat)
            if denom > 0.0 and math.isfinite(denom):
                z = diff / denom
            else:
                z = 0.0 if diff == 0.0 else math.inf
            vm = _vm_comparison(prof_a, fit_a, prof_b, fit_b)
            pair_checks.append(
                PairCheck(
                    modes=(a, b),
                    d0_z=z,
                    d0_verdict=_verdict(z, z_threshold),
                    overlap=vm is not None,
                    vm_max_abs_diff=vm[0] if vm else None,
                    vm_max_z=vm[1] if vm else None,
                    vm_verdict=_verdict(vm[1], z_threshold) if vm else None,
                )
            )
    return ConsistencyReport(
        z_threshold=float(z_threshold), modes=tuple(mode_checks), pairs=tuple(pair_checks)
    )


def qpc_effective_cpd(V: float, R_r: float) -> float:
    """Effective contact potential of a quantum point contact junction.

    A residual series resistance R_r on top of the quantized resistance
    R0 = h/(2 e^2) = 12906.404 ohm reduces the junction voltage by
    dV_eff = V (1 - R0/(R0 + R_r)) = V R_r/(R0 + R_r).

    Note: a frequently quoted rule-of-thumb puts this near 1 mV for a 50 mV
    junction with R_r = 400 ohm; the formula itself gives 1.503 mV there.
    """
    if R_r < 0.0:
        raise ValueError("residual resistance must be >= 0")
    return V * R_r / (QPC_RESISTANCE + R_r)
