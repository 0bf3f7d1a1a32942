"""Config parsing, the full design pipeline, and report / curve files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .ce import (
    CEFunction,
    calibrate,
    expected_sample_size,
    flat_ce,
    objective,
    second_stage_n,
    unconstrained_ce,
)
from .design import DesignSpec, continuation_region, q_function
from .errors import ConfigError, SpecError
from .monotonise import MonotoneQ, Plateau, RawQ, monotonise
from .numerics import DEFAULT_TOL, Tolerance
from .nupsi import PsiContext
from .type1 import Type1Row, type1_scan

REPORT_DIR_ENV = "MONOTONE_CE_REPORT_DIR"
SPEC_KEYS = tuple(f.name for f in fields(DesignSpec))
OPTIONAL_SPEC_KEYS = ("estimate_rule",)
TOLERANCE_KEYS = tuple(f.name for f in fields(Tolerance))
CURVE_COLUMNS = ("z1", "Q", "Q_tilde", "alpha2_unconstrained", "alpha2_monotone", "n2")


def parse_config(path) -> tuple[DesignSpec, Tolerance]:
    """Read a TOML design file.

    Top-level keys are the ``DesignSpec`` field names (only ``estimate_rule``
    may be omitted); an optional ``[tolerances]`` table sets ``abs_tol``,
    ``rel_tol`` and ``max_iter``.  Unknown keys are rejected.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data, source=str(path))


def config_from_mapping(data: dict, source: str = "<config>") -> tuple[DesignSpec, Tolerance]:
    tol_table = data.get("tolerances", {})
    if not isinstance(tol_table, dict):
        raise ConfigError(f"{source}: 'tolerances' must be a table")
    unknown = sorted(set(data) - set(SPEC_KEYS) - {"tolerances"})
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    unknown = sorted(set(tol_table) - set(TOLERANCE_KEYS))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) in [tolerances]: {', '.join(unknown)}")
    missing = [k for k in SPEC_KEYS if k not in data and k not in OPTIONAL_SPEC_KEYS]
    if missing:
        raise ConfigError(f"{source}: missing key(s) {', '.join(missing)}")
    spec = DesignSpec(**{k: data[k] for k in SPEC_KEYS if k in data})
    try:
        tol = Tolerance(**tol_table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: [tolerances]: {exc}") from exc
    return spec, tol


@dataclass
class DesignReport:
    spec: dict
    region: dict
    decreasing_intervals: list
    plateaus: list
    c_alpha: float
    achieved_level: float
    objective_monotone: float
    objective_unconstrained: float
    ess_at_effects: list
    type1_table: list = field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type1_table"] = [row.to_dict() for row in self.type1_table]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignReport":
        validate_report(d)
        d = dict(d)
        d["type1_table"] = [Type1Row(**row) for row in d["type1_table"]]
        return cls(**d)

    def design_spec(self) -> DesignSpec:
        return DesignSpec(**self.spec)

    def monotone_curve(self) -> MonotoneQ:
        spec = self.design_spec()
        plateaus = tuple(Plateau(a, b, q) for a, b, q in self.plateaus)
        region = continuation_region(spec)
        return MonotoneQ(RawQ(spec, region), region, plateaus)


REPORT_FIELDS = tuple(f.name for f in fields(DesignReport))


def validate_report(d: dict) -> None:
    """Raise SpecError unless ``d`` has exactly the documented report fields."""
    keys = set(d)
    if keys != set(REPORT_FIELDS):
        extra = sorted(keys - set(REPORT_FIELDS))
        missing = sorted(set(REPORT_FIELDS) - keys)
        raise SpecError(f"report schema mismatch: missing={missing} unexpected={extra}")
    row_keys = {f.name for f in fields(Type1Row)}
    for row in d["type1_table"]:
        if set(row) != row_keys:
            raise SpecError(f"type1 row schema mismatch: {sorted(row)}")


def run_design(spec: DesignSpec, tol: Tolerance = DEFAULT_TOL, deltas=(), effects=None,
               timestamp: str | None = None) -> DesignReport:
    """Q -> decreasing intervals -> monotone Q -> calibration -> objectives and audits."""
    region = continuation_region(spec)
    curve = monotonise(spec, region, tol)
    cal = calibrate(curve, spec, tol)
    best = CEFunction(curve, cal.c_alpha, PsiContext(spec.beta_c), region)
    raw = unconstrained_ce(spec, tol)
    effects = (0.0, spec.delta_a) if effects is None else tuple(effects)
    return DesignReport(
        spec=spec.to_dict(),
        region={"z_lo": region.z_lo, "z_hi": region.z_hi},
        decreasing_intervals=[[iv.d_l, iv.d_u] for iv in curve.intervals],
        plateaus=[[p.a, p.b, p.level] for p in curve.plateaus],
        c_alpha=cal.c_alpha,
        achieved_level=cal.achieved_level,
        objective_monotone=objective(best, spec, tol),
        objective_unconstrained=objective(raw, spec, tol),
        ess_at_effects=[[e, expected_sample_size(best, spec, e, tol)] for e in effects],
        type1_table=type1_scan(best, spec, sorted(deltas), tol),
        timestamp=timestamp if timestamp is not None
        else datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def compare_objectives(spec: DesignSpec, tol: Tolerance = DEFAULT_TOL) -> dict:
    region = continuation_region(spec)
    curve = monotonise(spec, region, tol)
    best = CEFunction(curve, calibrate(curve, spec, tol).c_alpha, PsiContext(spec.beta_c), region)
    return {
        "monotone": objective(best, spec, tol),
        "unconstrained": objective(unconstrained_ce(spec, tol), spec, tol),
        "flat": objective(flat_ce(spec, tol), spec, tol),
    }


def report_json(report: DesignReport) -> str:
    # repr-based float output keeps 17 significant digits
    return json.dumps(report.to_dict(), indent=2) + "\n"


def emit_report(report: DesignReport, path) -> Path:
    path = Path(path)
    path.write_text(report_json(report), encoding="utf-8", newline="\n")
    return path


def read_report(path) -> DesignReport:
    return DesignReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def curve_rows(report: DesignReport, grid_step: float, tol: Tolerance = DEFAULT_TOL):
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    spec = report.design_spec()
    region = continuation_region(spec)
    n = int(np.floor(region.width / grid_step + 1e-9)) + 1
    z = np.minimum(region.z_lo + grid_step * np.arange(n), region.z_hi)
    ctx = PsiContext(spec.beta_c)
    best = CEFunction(report.monotone_curve(), report.c_alpha, ctx, region)
    raw = unconstrained_ce(spec, tol)
    cols = [z, q_function(z, spec), best.curve(z), raw(z), best(z), second_stage_n(best, z, spec)]
    return np.column_stack(cols)


def emit_curves(report: DesignReport, grid_step: float, path,
                tol: Tolerance = DEFAULT_TOL) -> Path:
    """Comma-separated curve table over the continuation region (header + one row per grid point)."""
    rows = curve_rows(report, grid_step, tol)
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow(repr(float(v)) for v in row)
    return path
