"""Sweeps over Lagrange multipliers and curve-data output.

A sweep solves every pair of the Cartesian product ``s1_grid x s2_grid``
and returns one :class:`CurvePoint` per pair in row-major order.  Points
are independent, so they may be evaluated by a process pool; the output
order never depends on completion order.

Constant-perception curves are read off the resulting ``(D, P, R)`` cloud
with :func:`bin_by_perception`.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import simplex
from .errors import ConfigError, OracleInfeasibleError, RDPFError
from .fdiv import DIVERGENCES, get_divergence
from .oracles import grid_oracle
from .solver import (
    APPROXIMATE,
    CONVERGED,
    EXACT_IMPLICIT,
    SolverConfig,
    kkt_residual,
    solve,
)
from .spectral import report_for

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
BASE_COLUMNS = ("s1", "s2", "D", "P", "R", "lower", "upper", "iterations", "status")
KKT_FACTOR = 10.0
UNSTABLE_RADIUS = 1.0 - 1e-6


def parse_floats(text):
    """Parse ``"a,b,c"`` (commas and/or whitespace) into a tuple of floats."""
    if isinstance(text, (int, float)):
        return (float(text),)
    if not isinstance(text, str):
        return tuple(float(v) for v in text)
    parts = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    try:
        return tuple(float(t) for t in parts)
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def parse_grid(text):
    """Parse a multiplier grid.

    Accepts an explicit list ``"0.5,1,2"`` or a generated one written as
    ``"linspace:start:stop:num"`` or ``"logspace:start:stop:num"`` (the
    latter with base-10 exponents, like :func:`numpy.logspace`).
    """
    if isinstance(text, str) and text.strip().startswith(("linspace:", "logspace:")):
        kind, *args = text.strip().split(":")
        if len(args) != 3:
            raise ConfigError(f"{kind} grid needs start:stop:num, got {text!r}")
        try:
            start, stop, num = float(args[0]), float(args[1]), int(args[2])
        except ValueError as exc:
            raise ConfigError(f"bad {kind} grid {text!r}") from exc
        return tuple(float(v) for v in getattr(np, kind)(start, stop, num))
    return parse_floats(text)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one sweep.

    ``distortion`` is ``"hamming"`` or the path of a whitespace-separated
    text matrix with one row per source symbol.  ``units`` applies to the
    rate columns; ``perception_units`` converts ``P`` to bits only for the
    KL divergence and leaves other divergences unchanged.
    """

    source: tuple
    divergence: str
    s1_grid: tuple
    s2_grid: tuple = (0.0,)
    distortion: str = "hamming"
    epsilon: float = 1e-9
    max_iters: int = 100_000
    q_floor: float = 1e-15
    mode: str = APPROXIMATE
    output_path: Optional[str] = None
    output_format: str = "csv"
    units: str = "bits"
    perception_units: str = "native"
    oracle: bool = False
    oracle_grid_step: float = 1e-2
    spectral: bool = False
    seed_q0: Optional[tuple] = None
    workers: int = 1

    def __post_init__(self):
        try:
            simplex.source_distribution(self.source)
        except (ValueError, RDPFError) as exc:
            raise ConfigError(f"invalid source: {exc}") from exc
        if self.divergence not in DIVERGENCES:
            raise ConfigError(
                f"unknown divergence {self.divergence!r}; choose from {', '.join(DIVERGENCES)}"
            )
        for name in ("s1_grid", "s2_grid"):
            grid = getattr(self, name)
            if not grid:
                raise ConfigError(f"{name} is empty")
            if any(not (math.isfinite(v) and v >= 0) for v in grid):
                raise ConfigError(f"{name} values must be finite and nonnegative")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.q_floor < 0:
            raise ConfigError("q_floor must be nonnegative")
        if self.mode not in (APPROXIMATE, EXACT_IMPLICIT):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.output_format!r}")
        if self.units not in ("bits", "nats"):
            raise ConfigError(f"unknown units {self.units!r}")
        if self.perception_units not in ("native", "bits"):
            raise ConfigError(f"unknown perception units {self.perception_units!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.seed_q0 is not None and len(self.seed_q0) != self.distortion_matrix().shape[1]:
            raise ConfigError("seed_q0 length does not match the reconstruction alphabet")

    def source_array(self):
        return simplex.source_distribution(self.source)

    def distortion_matrix(self):
        n = len(self.source)
        if self.distortion == "hamming":
            return simplex.hamming(n)
        try:
            d = np.loadtxt(self.distortion, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read distortion matrix {self.distortion!r}: {exc}") from exc
        try:
            d = simplex.distortion_matrix(d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if d.shape[0] != n:
            raise ConfigError(f"distortion matrix has {d.shape[0]} rows for {n} source symbols")
        if any(v > 0 for v in self.s2_grid) and d.shape[0] != d.shape[1]:
            raise ConfigError("s2 > 0 needs a square distortion matrix")
        return d

    def solver_config(self):
        return SolverConfig(
            epsilon=self.epsilon,
            max_iters=self.max_iters,
            q_floor=self.q_floor,
            mode=self.mode,
            kkt_factor=KKT_FACTOR,
            q0=self.seed_q0,
            record_trace=False,
            record_iterates=self.spectral,
        )

    def echo(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class CurvePoint:
    s1: float
    s2: float
    D: float
    P: float
    R: float
    lower: float
    upper: float
    iterations: int
    status: str
    kkt_violation: float = math.nan
    spectral_radius: Optional[float] = None
    oracle_R: Optional[float] = None
    spectral: Optional[dict] = None
    oracle: Optional[dict] = None

    @property
    def converged(self):
        return self.status == CONVERGED


def _attach_oracle(point, p, spec, d, grid_step):
    P_level = point.P if math.isfinite(point.P) else math.inf
    try:
        res = grid_oracle(p, spec, d, point.D, P_level, grid_step)
    except OracleInfeasibleError as exc:
        point.oracle = {"status": "infeasible", "message": str(exc)}
        return
    except (ValueError, RDPFError) as exc:
        point.oracle = {"status": "unavailable", "message": str(exc)}
        return
    point.oracle_R = res.R
    point.oracle = {
        "status": "ok",
        "R": res.R,
        "D": res.D_value,
        "P": res.P_value,
        "D_active": bool(res.D_active),
        "P_active": bool(res.P_active),
        "grid_step": res.grid_step,
        "D_slack": res.D_slack,
        "P_slack": res.P_slack,
        "argmin_Q": res.argmin_Q.tolist(),
    }


def solve_point(config, s1, s2):
    """Solve one grid point; numerical failures end up in ``status``."""
    p = config.source_array()
    d = config.distortion_matrix()
    spec = get_divergence(config.divergence)
    result = solve(p, spec, (s1, s2), d, config.solver_config())
    # independent re-evaluation of the optimality residual on the final iterate
    _, violation = kkt_residual(result.state.q, p, result.state.logA)
    point = CurvePoint(
        s1=float(s1),
        s2=float(s2),
        D=result.D,
        P=result.P,
        R=result.R,
        lower=result.lower,
        upper=result.upper,
        iterations=result.iterations,
        status=result.status,
        kkt_violation=violation,
    )
    if config.spectral:
        report = report_for(result, p, d)
        point.spectral = report.to_json()
        point.spectral_radius = report.spectral_radius_approx
        if point.spectral_radius is not None and point.spectral_radius >= UNSTABLE_RADIUS:
            log.warning("s=(%g, %g): spectral radius %.9g of the linearized update is not below 1",
                        s1, s2, point.spectral_radius)
    if config.oracle:
        _attach_oracle(point, p, spec, d, config.oracle_grid_step)
    return point


def _solve_star(args):
    return solve_point(*args)


def run_sweep(config):
    """Solve every ``(s1, s2)`` in the grid product, row-major over ``(s1, s2)``."""
    return run_pairs(config, [(s1, s2) for s1 in config.s1_grid for s2 in config.s2_grid])


def run_pairs(config, pairs):
    """Solve an explicit list of ``(s1, s2)`` pairs with the settings of ``config``.

    The grids of ``config`` are ignored.  Output order follows ``pairs``.
    """
    tasks = [(config, float(s1), float(s2)) for s1, s2 in pairs]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            points = list(pool.map(_solve_star, tasks))
    else:
        points = [solve_point(*t) for t in tasks]
    bad = sum(not pt.converged for pt in points)
    if bad:
        log.warning("%d of %d points did not converge", bad, len(points))
    return points


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".12g")


def _scaled(point, units, perception_units, divergence):
    rate = LN2 if units == "bits" else 1.0
    perc = LN2 if perception_units == "bits" and divergence == "kl" else 1.0
    row = {
        "s1": point.s1,
        "s2": point.s2,
        "D": point.D,
        "P": point.P / perc,
        "R": point.R / rate,
        "lower": point.lower / rate,
        "upper": point.upper / rate,
        "iterations": point.iterations,
        "status": point.status,
    }
    if point.spectral_radius is not None or point.spectral is not None:
        row["spectral_radius"] = point.spectral_radius
    if point.oracle_R is not None or point.oracle is not None:
        row["oracle_R"] = None if point.oracle_R is None else point.oracle_R / rate
    return row


def verify_points(points, epsilon, factor=KKT_FACTOR):
    """Check every converged point against the optimality-residual bound."""
    bad = [pt for pt in points if pt.converged and not pt.kkt_violation <= factor * epsilon]
    if bad:
        worst = max(bad, key=lambda pt: pt.kkt_violation)
        raise RDPFError(
            f"{len(bad)} converged point(s) exceed the optimality residual bound "
            f"{factor * epsilon:g}; worst {worst.kkt_violation:g} at s=({worst.s1}, {worst.s2})"
        )


def format_csv(points, units="bits", perception_units="native", divergence=None,
               spectral=None, oracle=None):
    """Render points as CSV text.

    ``spectral``/``oracle`` force the optional columns on or off; by default
    they appear when any point carries the data.
    """
    if spectral is None:
        spectral = any(pt.spectral is not None for pt in points)
    if oracle is None:
        oracle = any(pt.oracle is not None for pt in points)
    columns = list(BASE_COLUMNS)
    if spectral:
        columns.append("spectral_radius")
    if oracle:
        columns.append("oracle_R")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for pt in points:
        row = _scaled(pt, units, perception_units, divergence)
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _json_number(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else str(value)


def format_json(points, units="bits", perception_units="native", divergence=None, config=None):
    records = []
    for pt in points:
        row = _scaled(pt, units, perception_units, divergence)
        rec = {k: (v if isinstance(v, str) else
                   int(v) if k == "iterations" else _json_number(v))
               for k, v in row.items()}
        rec["kkt_violation"] = _json_number(pt.kkt_violation)
        if pt.spectral is not None:
            rec["spectral"] = pt.spectral
        if pt.oracle is not None:
            rec["oracle"] = pt.oracle
        records.append(rec)
    doc = {
        "config": config.echo() if config is not None else None,
        "units": {"rate": units, "perception": perception_units},
        "points": records,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def emit(points, output_format="csv", units="bits", path=None, perception_units="native",
         divergence=None, config=None):
    """Write points as CSV or JSON to ``path`` (or return the text if ``path`` is None).

    Converged points are re-checked against the optimality-residual bound
    first when ``config`` is given.
    """
    if not points:
        raise ValueError("no points to emit")
    if config is not None:
        verify_points(points, config.epsilon)
        divergence = divergence or config.divergence
    if output_format == "csv":
        text = format_csv(points, units, perception_units, divergence,
                          spectral=config.spectral if config else None,
                          oracle=config.oracle if config else None)
    elif output_format == "json":
        text = format_json(points, units, perception_units, divergence, config)
    else:
        raise ValueError(f"unknown output format {output_format!r}")
    if path is None:
        return text
    Path(path).write_text(text)
    return text


def read_csv(text):
    """Parse emitted CSV back into dicts of floats (status stays a string)."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            if k == "status":
                row[k] = v
            elif k == "iterations":
                row[k] = int(v)
            else:
                row[k] = float(v) if v != "" else None
        rows.append(row)
    return rows


def bin_by_perception(points, levels, tol):
    """Group converged points whose ``P`` is within ``tol`` of each level.

    Returns ``{level: [points sorted by D]}``.  Each point goes to the
    nearest level only.
    """
    levels = sorted(levels)
    bins = {lvl: [] for lvl in levels}
    for pt in points:
        if not pt.converged or not math.isfinite(pt.P):
            continue
        nearest = min(levels, key=lambda lvl: abs(pt.P - lvl))
        if abs(pt.P - nearest) <= tol:
            bins[nearest].append(pt)
    return {lvl: sorted(pts, key=lambda pt: pt.D) for lvl, pts in bins.items()}


_ALIASES = {
    "s1": "s1_grid",
    "s2": "s2_grid",
    "eps": "epsilon",
    "output": "output_path",
    "format": "output_format",
    "q0": "seed_q0",
}
_FIELDS = {f.name for f in fields(RunConfig)}
_BOOLEAN = {"oracle", "spectral"}
_INTEGER = {"max_iters", "workers"}
_FLOAT = {"epsilon", "q_floor", "oracle_grid_step"}


def _normalize_key(key):
    key = key.strip().lstrip("-").replace("-", "_").lower()
    return _ALIASES.get(key, key)


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    if key == "source" or key == "seed_q0":
        return parse_floats(value)
    if key in ("s1_grid", "s2_grid"):
        return parse_grid(value)
    if key in _BOOLEAN:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {value!r}")
    try:
        if key in _INTEGER:
            return int(float(value))
        if key in _FLOAT:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value.strip()


def read_config_file(path):
    """Read flat ``key = value`` lines; keys mirror the command-line flag names."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}") from exc
    return dict(parser["run"])


def load_config(path=None, overrides=None):
    """Build a :class:`RunConfig` from a config file and/or overrides.

    Overrides win over file values; ``None`` overrides are ignored.
    ``source``, ``divergence`` and ``s1_grid`` are required.
    """
    values = {}
    if path is not None:
        values.update({_normalize_key(k): v for k, v in read_config_file(path).items()})
    for k, v in (overrides or {}).items():
        if v is not None:
            values[_normalize_key(k)] = v
    unknown = set(values) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    values = {k: _coerce(k, v) for k, v in values.items()}
    missing = [k for k in ("source", "divergence", "s1_grid") if k not in values]
    if missing:
        raise ConfigError(f"missing required settings: {', '.join(missing)}")
    values["divergence"] = str(values["divergence"]).lower()
    for key in ("source", "s1_grid", "s2_grid", "seed_q0"):
        if key in values and values[key] is not None:
            values[key] = tuple(float(v) for v in values[key])
    return RunConfig(**values)
