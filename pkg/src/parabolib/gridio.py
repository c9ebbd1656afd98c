"""CSV and JSON artifact formats.

Every numeric field is written in decimal-exponent notation with 17
significant digits, so written values re-parse to the in-memory doubles
exactly and file round trips are lossless.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .analysis import BiasCurve, ConsistencyReport
from .errors import SchemaError
from .fitting import CalibrationProfiles
from .model import MODES, MeasurementGrid, PowerLawFit

GRID_COLUMNS = ("d_r", "V", "value", "sigma")
PROFILE_COLUMNS = ("d_r", "k", "sigma_k", "V_m", "sigma_V", "fluct", "sigma_f")

_GRID_HEADER_RE = re.compile(r"^# parabolib-grid v1, mode=(\w+), units=SI$")
_PROFILES_HEADER_RE = re.compile(r"^# parabolib-profiles v1, mode=(\w+), units=SI$")


def _fmt(x: float) -> str:
    """17 significant digits, enough to reproduce any double exactly."""
    return f"{float(x):.16e}"


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")


def write_grid(grid: MeasurementGrid, path) -> None:
    """Write a measurement grid as `# parabolib-grid v1` CSV."""
    lines = [
        f"# parabolib-grid v1, mode={grid.mode}, units=SI",
        f"# provenance={grid.provenance}",
        ",".join(GRID_COLUMNS),
    ]
    for i in range(grid.n_rows):
        lines.append(
            ",".join(_fmt(c[i]) for c in (grid.d_r, grid.V, grid.value, grid.sigma))
        )
    _write_lines(path, lines)


def _parse_header(line: str, pattern: re.Pattern, kind: str, path) -> str:
    m = pattern.match(line.strip())
    if not m:
        raise SchemaError(
            f"{path}: line 1 is not a '{kind} v1' header (version or format mismatch): "
            f"{line.strip()!r}"
        )
    mode = m.group(1)
    if mode not in MODES:
        raise SchemaError(f"{path}: unknown mode {mode!r} in header")
    return mode


def _split_sections(text: str, path):
    """Split file text into (header, provenance, column line, data lines, data lineno)."""
    lines = text.splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header, rest = lines[0], lines[1:]
    provenance = "external"
    n_comments = 0
    while rest and rest[0].startswith("#"):
        comment = rest.pop(0)
        n_comments += 1
        if comment.startswith("# provenance="):
            provenance = comment[len("# provenance=") :]
    if not rest:
        raise SchemaError(f"{path}: missing column header line")
    first_data_lineno = 1 + n_comments + 2  # header + comments + column line, 1-based
    return header, provenance, rest[0], rest[1:], first_data_lineno


def _check_columns(colline: str, expected, path) -> None:
    got = [c.strip() for c in colline.split(",")]
    missing = [c for c in expected if c not in got]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(repr(m) for m in missing)}")
    if got != list(expected):
        raise SchemaError(
            f"{path}: column header must be exactly {','.join(expected)}, got {colline.strip()!r}"
        )


def _parse_rows(data_lines, n_cols: int, first_row_lineno: int, path) -> np.ndarray:
    rows = []
    for offset, line in enumerate(data_lines):
        lineno = first_row_lineno + offset
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise SchemaError(
                f"{path}: line {lineno}: expected {n_cols} fields, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(rows)


def read_grid(path) -> MeasurementGrid:
    """Read a grid CSV, validating schema, sigma positivity and rectangularity."""
    text = Path(path).read_text()
    header, provenance, colline, data_lines, first_row_lineno = _split_sections(text, path)
    mode = _parse_header(header, _GRID_HEADER_RE, "parabolib-grid", path)
    _check_columns(colline, GRID_COLUMNS, path)
    rows = _parse_rows(data_lines, len(GRID_COLUMNS), first_row_lineno, path)

    sigma_bad = np.nonzero(rows[:, 3] <= 0.0)[0]
    if sigma_bad.size:
        raise SchemaError(
            f"{path}: line {first_row_lineno + int(sigma_bad[0])}: sigma must be positive"
        )
    seen = {}
    for i, (d_r, v) in enumerate(zip(rows[:, 0], rows[:, 1])):
        key = (d_r, v)
        if key in seen:
            raise SchemaError(
                f"{path}: line {first_row_lineno + i}: duplicate grid cell "
                f"(d_r={d_r:g}, V={v:g}) first seen at line {first_row_lineno + seen[key]}"
            )
        seen[key] = i
    try:
        return MeasurementGrid(
            mode=mode,
            d_r=rows[:, 0],
            V=rows[:, 1],
            value=rows[:, 2],
            sigma=rows[:, 3],
            provenance=provenance,
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_profiles(profiles: CalibrationProfiles, path) -> None:
    """Write calibration profiles as `# parabolib-profiles v1` CSV."""
    lines = [
        f"# parabolib-profiles v1, mode={profiles.mode}, units=SI",
        f"# provenance={profiles.provenance}",
        ",".join(PROFILE_COLUMNS),
    ]
    cols = (
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


def read_profiles(path) -> CalibrationProfiles:
    """Read a profiles CSV written by write_profiles."""
    text = Path(path).read_text()
    header, provenance, colline, data_lines, first_row_lineno = _split_sections(text, path)
    mode = _parse_header(header, _PROFILES_HEADER_RE, "parabolib-profiles", path)
    _check_columns(colline, PROFILE_COLUMNS, path)
    rows = _parse_rows(data_lines, len(PROFILE_COLUMNS), first_row_lineno, path)
    try:
        return CalibrationProfiles(
            mode=mode,
            d_r=rows[:, 0],
            k=rows[:, 1],
            k_sigma=rows[:, 2],
            V_m=rows[:, 3],
            V_m_sigma=rows[:, 4],
            fluct=rows[:, 5],
            fluct_sigma=rows[:, 6],
            provenance=provenance,
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_bias_curve(curve: BiasCurve, mode: str, path) -> None:
    """Write a bias curve as plot-ready CSV (abscissa, bias, truth, ratio)."""
    lines = [
        f"# parabolib-bias v1, mode={mode}, units=SI, v_const={_fmt(curve.V_const)}",
        "d,bias,fluct_true,relative_overestimate",
    ]
    for i in range(curve.d.shape[0]):
        lines.append(
            ",".join(
                _fmt(c[i])
                for c in (curve.d, curve.bias, curve.fluct_true, curve.relative_overestimate)
            )
        )
    _write_lines(path, lines)


def powerlaw_to_dict(fit: PowerLawFit, mode: str, provenance: str = "external") -> dict:
    return {
        "format": "parabolib-powerlaw v1",
        "mode": mode,
        "law": fit.law,
        "amplitude": fit.amplitude,
        "amplitude_sigma": fit.amplitude_sigma,
        "d0_hat": fit.d0_hat,
        "d0_sigma": fit.d0_sigma,
        "chi2_per_dof": fit.chi2_per_dof,
        "n_points": fit.n_points,
        "converged": fit.converged,
        "provenance": provenance,
    }


def consistency_to_dict(report: ConsistencyReport) -> dict:
    return {
        "format": "parabolib-consistency v1",
        "z_threshold": report.z_threshold,
        "consistent": report.consistent,
        "modes": [
            {
                "mode": m.mode,
                "d0_hat": m.d0_hat,
                "d0_sigma": m.d0_sigma,
                "exponent_hat": m.exponent_hat,
                "exponent_sigma": m.exponent_sigma,
                "exponent_expected": m.exponent_expected,
                "exponent_z": m.exponent_z,
                "exponent_verdict": m.exponent_verdict,
            }
            for m in report.modes
        ],
        "pairs": [
            {
                "modes": list(p.modes),
                "d0_z": p.d0_z,
                "d0_verdict": p.d0_verdict,
                "overlap": p.overlap,
                "vm_max_abs_diff": p.vm_max_abs_diff,
                "vm_max_z": p.vm_max_z,
                "vm_verdict": p.vm_verdict,
            }
            for p in report.pairs
        ],
    }


def write_json(payload: dict, path) -> None:
    """Deterministic JSON dump (sorted keys; non-finite floats use Python literals)."""
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
