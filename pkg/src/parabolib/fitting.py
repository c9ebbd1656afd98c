"""Inverse pipeline: per-distance parabola fits and curvature-law calibration.

The distance calibration follows a two-stage strategy: a coarse scan over the
contact-point parameter d0 with the amplitude solved linearly at each
candidate, then damped Gauss-Newton refinement of all parameters.  No initial
guess is required from the caller.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FitError
from .model import (
    LAWS,
    MODES,
    Geometry,
    MeasurementGrid,
    ParabolaFit,
    PowerLawFit,
    _readonly,
)

# Gauss-Newton controls: relative-step convergence, iteration budget,
# step-halving budget, conditioning limit beyond which sigma is reported as inf
GN_TOL = 1e-10
GN_MAX_ITER = 200
GN_MAX_HALVINGS = 40
COND_LIMIT = 1e12


def fit_parabola(V, y, sigma, d_r: float = math.nan) -> ParabolaFit:
    """Weighted least-squares fit of y = a V^2 + b V + c, reparametrized.

    Returns k = a, V_m = -b/(2a), minimum = c - b^2/(4a) with their 3x3
    covariance propagated from the (a, b, c) covariance by the delta method.
    Duplicate voltages are kept as independent replicate measurements.

    Raises FitError for fewer than 3 distinct voltages or a non-convex
    (a <= 0) response.
    """
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if V.shape != y.shape or V.shape != sigma.shape or V.ndim != 1:
        raise ValueError("V, y, sigma must be 1-d arrays of equal length")
    if np.any(sigma <= 0.0):
        raise ValueError("all sigma must be positive")
    if np.unique(V).size < 3:
        raise FitError(
            f"parabola fit needs at least 3 distinct voltages, got {np.unique(V).size}"
        )

    w = 1.0 / sigma
    X = np.column_stack([V**2, V, np.ones_like(V)]) * w[:, None]
    yw = y * w
    abc, *_ = np.linalg.lstsq(X, yw, rcond=None)
    cov_abc = np.linalg.inv(X.T @ X)
    a, b, c = abc
    if a <= 0.0:
        raise FitError(f"non-convex voltage response (fitted curvature a={a:.3g} <= 0)")

    k = a
    v_m = -b / (2.0 * a)
    minimum = c - b**2 / (4.0 * a)
    # delta-method Jacobian of (k, V_m, minimum) wrt (a, b, c)
    jac = np.array(
        [
            [1.0, 0.0, 0.0],
            [b / (2.0 * a**2), -1.0 / (2.0 * a), 0.0],
            [b**2 / (4.0 * a**2), -b / (2.0 * a), 1.0],
        ]
    )
    cov = jac @ cov_abc @ jac.T
    return ParabolaFit(d_r=float(d_r), k=k, V_m=v_m, minimum=minimum, covariance=cov)


@dataclass(frozen=True)
class CalibrationProfiles:
    """The three extracted curves k(d_r), V_m(d_r), fluct(d_r) for one mode."""

    mode: str
    d_r: np.ndarray
    k: np.ndarray
    k_sigma: np.ndarray
    V_m: np.ndarray
    V_m_sigma: np.ndarray
    fluct: np.ndarray
    fluct_sigma: np.ndarray
    provenance: str = "external"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        names = ("d_r", "k", "k_sigma", "V_m", "V_m_sigma", "fluct", "fluct_sigma")
        cols = [_readonly(getattr(self, n)) for n in names]
        n = cols[0].shape[0]
        if any(c.ndim != 1 or c.shape[0] != n for c in cols):
            raise ValueError("profile columns must be 1-d arrays of equal length")
        for name, c in zip(names, cols):
            object.__setattr__(self, name, c)
        if np.unique(self.d_r).size != n:
            raise ValueError("profiles need exactly one row per distance")
        if np.any(np.diff(self.d_r) <= 0.0):
            raise ValueError("profile rows must be sorted by increasing d_r")
        if np.any(self.k <= 0.0):
            raise ValueError("curvature k must be positive in every row")

    @property
    def n_distances(self) -> int:
        return int(self.d_r.shape[0])

    def __eq__(self, other):
        if not isinstance(other, CalibrationProfiles):
            return NotImplemented
        names = ("d_r", "k", "k_sigma", "V_m", "V_m_sigma", "fluct", "fluct_sigma")
        return (
            self.mode == other.mode
            and self.provenance == other.provenance
            and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)
        )

    __hash__ = None  # type: ignore[assignment]


def extract_profiles(grid: MeasurementGrid) -> CalibrationProfiles:
    """Run the per-distance parabola fit over a grid and assemble the profiles."""
    dvals = grid.distances
    rows = {name: np.empty(dvals.size) for name in
            ("k", "k_sigma", "V_m", "V_m_sigma", "fluct", "fluct_sigma")}
    for i, d_r in enumerate(dvals):
        sel = grid.d_r == d_r
        try:
            fit = fit_parabola(grid.V[sel], grid.value[sel], grid.sigma[sel], d_r=d_r)
        except FitError as exc:
            raise FitError(f"parabola fit failed at d_r={d_r:.6g}: {exc}") from exc
        rows["k"][i] = fit.k
        rows["k_sigma"][i] = fit.k_sigma
        rows["V_m"][i] = fit.V_m
        rows["V_m_sigma"][i] = fit.V_m_sigma
        rows["fluct"][i] = fit.minimum
        rows["fluct_sigma"][i] = fit.minimum_sigma
    return CalibrationProfiles(mode=grid.mode, d_r=dvals, provenance=grid.provenance, **rows)


def absolute_distances(d_r, d0: float) -> np.ndarray:
    """Map actuator readings onto absolute separations d = d0 - d_r."""
    d_r = np.asarray(d_r, dtype=float)
    if np.any(d_r >= d0):
        bad = float(d_r[d_r >= d0][0])
        raise ValueError(f"d_r={bad:g} >= d0={d0:g}: absolute separation would not be positive")
    return d0 - d_r


def _law_basis(law: str, d0: float, d_r: np.ndarray, geometry: Geometry | None):
    """Unit-amplitude model g(d0, d_r); nan where the candidate d0 is invalid."""
    u = d0 - d_r
    if np.any(u <= 0.0):
        return None
    if law == "inverse_linear":
        return 1.0 / u
    if law == "inverse_square":
        return 1.0 / u**2
    # capacitance_squared: g = [2 pi R eps0 ln(R/u)]^2, valid only for u < R
    R = geometry.sphere_radius
    if np.any(u >= R):
        return None
    return (2.0 * math.pi * R * geometry.vacuum_permittivity * np.log(R / u)) ** 2


def _basis_d0_derivative(law: str, d0: float, d_r: np.ndarray, geometry: Geometry | None):
    u = d0 - d_r
    if law == "inverse_linear":
        return -1.0 / u**2
    if law == "inverse_square":
        return -2.0 / u**3
    R = geometry.sphere_radius
    pref = 2.0 * math.pi * R * geometry.vacuum_permittivity
    return -2.0 * pref**2 * np.log(R / u) / u


def _solve_amplitude(g, y, w2):
    denom = float(np.sum(w2 * g * g))
    if denom <= 0.0:
        return 0.0, math.inf
    amp = float(np.sum(w2 * g * y)) / denom
    return amp, 1.0 / math.sqrt(denom)


def _gn_step(jac, r):
    """Gauss-Newton step via QR; None when the system is numerically singular."""
    step, *_ = np.linalg.lstsq(jac, r, rcond=None)
    return step if np.all(np.isfinite(step)) else None


def _normal_covariance(jac, inflate):
    """inv(J^T J) computed on the correlation-scaled normal matrix.

    Parameters carry wildly different units (amplitudes ~1e-15, distances
    ~1e-6), so conditioning is judged scale-free.  Returns None when the
    scaled matrix is numerically singular (degenerate profile).
    """
    normal = jac.T @ jac
    d = np.sqrt(np.diag(normal))
    if not np.all(d > 0.0) or not np.all(np.isfinite(d)):
        return None
    corr = normal / np.outer(d, d)
    if np.linalg.cond(corr) > COND_LIMIT:
        return None
    return np.linalg.inv(corr) / np.outer(d, d) * inflate


def _scan_candidates(d_r: np.ndarray) -> np.ndarray:
    lo, hi = float(d_r.min()), float(d_r.max())
    span = hi - lo
    return hi + span * np.logspace(-5.0, 1.0, 400)


def fit_power_law(
    profiles: CalibrationProfiles,
    law: str,
    geometry: Geometry | None = None,
) -> PowerLawFit:
    """Calibrate a curvature profile against its distance law.

    law is one of 'inverse_linear' (amplitude/(d0-d_r)), 'inverse_square'
    (amplitude/(d0-d_r)^2) or 'capacitance_squared'
    (amplitude * [2 pi R eps0 ln(R/(d0-d_r))]^2, requires geometry).

    Weighted nonlinear least squares over (amplitude, d0): coarse scan over
    d0 in (max(d_r), max(d_r) + 10*span] with the amplitude solved linearly
    at each candidate, then damped Gauss-Newton.  Uncertainties come from the
    inverse normal matrix, inflated by chi2_per_dof when that exceeds 1; a
    degenerate (near-constant) profile reports d0_sigma = inf instead of
    failing.
    """
    if law not in LAWS:
        raise ValueError(f"law must be one of {LAWS}, got {law!r}")
    if law == "capacitance_squared" and geometry is None:
        raise ValueError("capacitance_squared law requires geometry")
    d_r = profiles.d_r
    y = profiles.k
    if d_r.size < 4:
        raise FitError(f"power-law fit needs at least 4 distances, got {d_r.size}")
    if np.any(np.diff(y) <= 0.0):
        warnings.warn("curvature profile is not monotone increasing in d_r", stacklevel=2)
    w2 = 1.0 / profiles.k_sigma**2

    # stage 1: scan d0, amplitude linear at each candidate
    best = None
    for d0 in _scan_candidates(d_r):
        g = _law_basis(law, d0, d_r, geometry)
        if g is None:
            continue
        amp, _ = _solve_amplitude(g, y, w2)
        chi2 = float(np.sum(w2 * (y - amp * g) ** 2))
        if best is None or chi2 < best[0]:
            best = (chi2, amp, d0)
    if best is None:
        raise FitError("no valid d0 candidate in the scan range")
    chi2, amp, d0 = best

    # stage 2: damped Gauss-Newton on (amplitude, d0)
    def residuals(p):
        g = _law_basis(law, p[1], d_r, geometry)
        if g is None:
            return None, None
        r = (y - p[0] * g) * np.sqrt(w2)
        jac = np.column_stack(
            [g, p[0] * _basis_d0_derivative(law, p[1], d_r, geometry)]
        ) * np.sqrt(w2)[:, None]
        return r, jac

    p = np.array([amp, d0])
    max_dr = float(d_r.max())
    converged = False
    for _ in range(GN_MAX_ITER):
        r, jac = residuals(p)
        chi2 = float(r @ r)
        step = _gn_step(jac, r)
        if step is None:
            break
        scale = 1.0
        improved = False
        for _ in range(GN_MAX_HALVINGS):
            trial = p + scale * step
            if trial[1] > max_dr:
                rt, _ = residuals(trial)
                if rt is not None and float(rt @ rt) < chi2:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            converged = True  # stalled at a floating-point minimum
            break
        rel_step = float(np.max(np.abs(scale * step) / np.maximum(np.abs(trial), 1e-300)))
        p = trial
        if rel_step < GN_TOL:
            converged = True
            break
    if not converged:
        raise FitError(f"power-law fit did not converge within {GN_MAX_ITER} iterations")

    amp, d0 = float(p[0]), float(p[1])
    span = float(d_r.max() - d_r.min())
    if d0 - max_dr <= 1e-9 * span:
        raise FitError(f"fitted d0={d0:.6g} collapsed onto max(d_r)={max_dr:.6g} (unphysical)")

    r, jac = residuals(p)
    chi2 = float(r @ r)
    dof = d_r.size - 2
    chi2_per_dof = chi2 / dof
    inflate = max(chi2_per_dof, 1.0)
    cov = _normal_covariance(jac, inflate)
    if cov is None:
        g = _law_basis(law, d0, d_r, geometry)
        _, amp_sig = _solve_amplitude(g, y, w2)
        amp_sigma, d0_sigma = amp_sig * math.sqrt(inflate), math.inf
    else:
        amp_sigma = math.sqrt(max(cov[0, 0], 0.0))
        d0_sigma = math.sqrt(max(cov[1, 1], 0.0))

    return PowerLawFit(
        law=law,
        amplitude=amp,
        amplitude_sigma=amp_sigma,
        d0_hat=d0,
        d0_sigma=d0_sigma,
        chi2_per_dof=chi2_per_dof,
        n_points=int(d_r.size),
        converged=converged,
    )


@dataclass(frozen=True)
class FreeExponentFit:
    """Curvature-law fit with the distance exponent left free: A/(d0-d_r)^p."""

    amplitude: float
    d0_hat: float
    d0_sigma: float
    exponent: float
    exponent_sigma: float
    chi2_per_dof: float
    n_points: int


def fit_free_exponent(profiles: CalibrationProfiles) -> FreeExponentFit:
    """Fit k(d_r) = A/(d0 - d_r)^p with (A, d0, p) all free.

    Same scan-then-refine strategy as fit_power_law; at each scanned d0 the
    pair (ln A, p) is solved by weighted linear regression in log space.
    """
    d_r = profiles.d_r
    y = profiles.k
    if d_r.size < 4:
        raise FitError(f"free-exponent fit needs at least 4 distances, got {d_r.size}")
    w2 = 1.0 / profiles.k_sigma**2
    # log-space weights by the delta method: Var(ln y) = (sigma/y)^2
    w_log = (y / profiles.k_sigma) ** 2

    best = None
    for d0 in _scan_candidates(d_r):
        u = d0 - d_r
        if np.any(u <= 0.0):
            continue
        X = np.column_stack([np.ones_like(u), -np.log(u)]) * np.sqrt(w_log)[:, None]
        try:
            coef, *_ = np.linalg.lstsq(X, np.log(y) * np.sqrt(w_log), rcond=None)
        except np.linalg.LinAlgError:
            continue
        ln_a, p_exp = coef
        model = math.exp(ln_a) * u**-p_exp
        chi2 = float(np.sum(w2 * (y - model) ** 2))
        if best is None or chi2 < best[0]:
            best = (chi2, math.exp(ln_a), d0, p_exp)
    if best is None:
        raise FitError("no valid d0 candidate in the scan range")
    _, amp, d0, p_exp = best

    def residuals(p):
        a, dd0, q = p
        u = dd0 - d_r
        if np.any(u <= 0.0) or a <= 0.0:
            return None, None
        m = a * u**-q
        r = (y - m) * np.sqrt(w2)
        jac = np.column_stack([u**-q, q * a * u ** (-q - 1.0), -m * np.log(u)])
        return r, jac * np.sqrt(w2)[:, None]

    p = np.array([amp, d0, p_exp])
    max_dr = float(d_r.max())
    converged = False
    for _ in range(GN_MAX_ITER):
        r, jac = residuals(p)
        chi2 = float(r @ r)
        step = _gn_step(jac, r)
        if step is None:
            break
        scale = 1.0
        improved = False
        for _ in range(GN_MAX_HALVINGS):
            trial = p + scale * step
            if trial[1] > max_dr:
                rt, _ = residuals(trial)
                if rt is not None and float(rt @ rt) < chi2:
                    improved = True
                    break
            scale *= 0.5
        if not improved:
            converged = True
            break
        rel_step = float(np.max(np.abs(scale * step) / np.maximum(np.abs(trial), 1e-300)))
        p = trial
        if rel_step < GN_TOL:
            converged = True
            break
    if not converged:
        raise FitError(f"free-exponent fit did not converge within {GN_MAX_ITER} iterations")

    r, jac = residuals(p)
    chi2 = float(r @ r)
    dof = max(d_r.size - 3, 1)
    chi2_per_dof = chi2 / dof
    inflate = max(chi2_per_dof, 1.0)
    cov = _normal_covariance(jac, inflate)
    if cov is None:
        d0_sigma = exp_sigma = math.inf
    else:
        d0_sigma = math.sqrt(max(cov[1, 1], 0.0))
        exp_sigma = math.sqrt(max(cov[2, 2], 0.0))

    return FreeExponentFit(
        amplitude=float(p[0]),
        d0_hat=float(p[1]),
        d0_sigma=d0_sigma,
        exponent=float(p[2]),
        exponent_sigma=exp_sigma,
        chi2_per_dof=chi2_per_dof,
        n_points=int(d_r.size),
    )
