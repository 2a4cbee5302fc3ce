"""Relative-error sweeps of the closed forms and power-law fits of their decay.

A sweep walks one parameter axis (optionally crossed with lists of fixed
values), evaluates the requested closed forms at every grid point and
compares them with the exact spectrum.  Rows come out in grid order times
formula order whatever the number of worker processes.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx
from .errors import BHDimerError, InsufficientData, ParameterError
from .exact import format_float, physical_spectrum, reduced_spectrum
from .model import PhysicalParams, ReducedParams, reduce

__all__ = [
    "AXES",
    "ErrorRecord",
    "SweepSpec",
    "AlphaFit",
    "relative_error",
    "load_sweep_spec",
    "sweep_points",
    "run_sweep",
    "write_sweep_csv",
    "read_sweep_csv",
    "fit_power_law",
    "fit_alpha",
    "fit_alpha_by_formula",
]

AXES = ("c", "c2", "N", "U", "delta")
# |exact| below this leaves the relative error undefined.
EXACT_FLOOR = 1e-12

STATUS_OK = "ok"
STATUS_MISSING = "exact_near_zero"
STATUS_SIGN = "sign_mismatch"

_PHYSICAL_KEYS = ("epsilon", "J", "U", "V", "N")
_REDUCED_KEYS = ("c", "delta", "N")
CSV_COLUMNS = (
    "point", "axis", "axis_value", "c", "delta", "N", "epsilon", "J", "U", "V",
    "formula_id", "approx", "exact", "xi", "in_regime", "status",
)


def relative_error(approx_value: float, exact_value: float) -> float | None:
    """(approx - exact) / exact, or None when |exact| < 1e-12."""
    if abs(exact_value) < EXACT_FLOOR:
        return None
    return (approx_value - exact_value) / exact_value


@dataclass(frozen=True)
class ErrorRecord:
    point: int
    axis: str
    axis_value: float
    params: dict
    formula_id: str
    approx_value: float | None
    exact_value: float | None
    xi: float | None
    in_regime: bool | None
    status: str

    @property
    def N(self) -> int:
        return int(self.params["N"])

    def row(self) -> list[str]:
        def num(v):
            return "" if v is None else format_float(v)

        cells = [str(self.point), self.axis, num(self.axis_value)]
        for key in ("c", "delta", "N", "epsilon", "J", "U", "V"):
            v = self.params.get(key)
            cells.append("" if v is None else (str(v) if key == "N" else format_float(v)))
        cells += [
            self.formula_id,
            num(self.approx_value),
            num(self.exact_value),
            num(self.xi),
            "" if self.in_regime is None else str(int(self.in_regime)),
            self.status,
        ]
        return cells


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis over a grid, the remaining parameters fixed.

    ``values`` holds the explicit axis grid.  Entries of ``fixed`` may be
    lists; the sweep then runs over their Cartesian product (outer loops, in
    sorted key order) with the axis as innermost loop.
    """

    axis: str
    values: tuple
    fixed: dict
    formulas: tuple
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ParameterError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ParameterError("empty sweep range")
        if self.axis in self.fixed or (self.axis == "c2" and "c" in self.fixed):
            raise ParameterError(f"swept axis {self.axis!r} is also fixed")
        unknown = [f for f in self.formulas if f not in approx.FORMULAS]
        if unknown or not self.formulas:
            raise ParameterError(f"unknown or missing formula ids: {unknown}")
        if self.axis == "N":
            object.__setattr__(self, "values", tuple(int(round(v)) for v in self.values))
        else:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "formulas", tuple(self.formulas))

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        for key in ("axis", "range", "fixed", "formulas"):
            if key not in data:
                raise ParameterError(f"sweep spec lacks {key!r}")
        return cls(
            axis=data["axis"],
            values=tuple(grid_values(data["range"])),
            fixed=dict(data["fixed"]),
            formulas=tuple(data["formulas"]),
            output=data.get("output"),
            workers=int(data.get("workers", 1)),
        )


def grid_values(spec) -> list[float]:
    """Axis grid from a list, or a dict with start/stop and step or count (stop inclusive)."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if "values" in spec:
        return [float(v) for v in spec["values"]]
    start, stop = float(spec["start"]), float(spec["stop"])
    if "count" in spec:
        count = int(spec["count"])
        if count < 1:
            raise ParameterError("count must be positive")
        return list(np.linspace(start, stop, count)) if count > 1 else [start]
    step = float(spec["step"])
    if not step > 0:
        raise ParameterError("step must be positive")
    if stop < start:
        raise ParameterError("stop lies below start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def load_sweep_spec(path) -> SweepSpec:
    with Path(path).open(encoding="utf-8") as fh:
        return SweepSpec.from_dict(json.load(fh))


def sweep_points(spec: SweepSpec) -> list[tuple[dict, float]]:
    """(raw parameter dict, axis value) per grid point, in output order."""
    keys = sorted(spec.fixed)
    lists = [v if isinstance(v, (list, tuple)) else [v] for v in (spec.fixed[k] for k in keys)]
    points = []
    for combo in itertools.product(*lists):
        base = dict(zip(keys, combo))
        for value in spec.values:
            point = dict(base)
            if spec.axis == "c2":
                point["c"] = math.sqrt(value)
            else:
                point[spec.axis] = value
            points.append((point, value))
    return points


def _params(point: dict):
    if any(k in point for k in ("epsilon", "J", "U", "V")):
        missing = [k for k in _PHYSICAL_KEYS if k not in point]
        if missing:
            raise ParameterError(f"physical point lacks {missing}")
        return PhysicalParams(*(point[k] for k in _PHYSICAL_KEYS))
    missing = [k for k in _REDUCED_KEYS if k not in point]
    if missing:
        raise ParameterError(f"reduced point lacks {missing}")
    return ReducedParams(point["c"], point["delta"], point["N"])


def _param_dict(p) -> dict:
    if isinstance(p, PhysicalParams):
        r = reduce(p)
        return {"c": r.c, "delta": r.delta, "N": p.N, "epsilon": p.epsilon, "J": p.J, "U": p.U, "V": p.V}
    return {"c": p.c, "delta": p.delta, "N": p.N}


def _level(formula_id: str) -> int:
    return 0 if formula_id.startswith("G_") else 1


def _evaluate_point(args) -> list[ErrorRecord]:
    index, point, axis, axis_value, formulas = args
    try:
        p = _params(point)
        info = _param_dict(p)
        r = reduce(p) if isinstance(p, PhysicalParams) else p
    except BHDimerError as exc:
        return [
            ErrorRecord(index, axis, axis_value, dict(point), f, None, None, None, None, f"error:{type(exc).__name__}")
            for f in formulas
        ]
    reduced_levels = reduced_spectrum(r).energies[:2]
    physical_levels = physical_spectrum(p)[:2] if isinstance(p, PhysicalParams) else None
    records = []
    for f in formulas:
        physical_formula = "_PHYS" in f
        level = _level(f)
        try:
            if physical_formula:
                if physical_levels is None:
                    raise ParameterError("physical formula at a reduced grid point")
                est = approx.FORMULAS[f](p)
                exact_value = float(physical_levels[level])
            else:
                est = approx.FORMULAS[f](r)
                exact_value = float(reduced_levels[level])
        except BHDimerError as exc:
            records.append(ErrorRecord(index, axis, axis_value, info, f, None, None, None, None,
                                       f"error:{type(exc).__name__}"))
            continue
        xi = relative_error(est.value, exact_value)
        if xi is None:
            status = STATUS_MISSING
        elif (est.value > 0) != (exact_value > 0):
            status = STATUS_SIGN
        else:
            status = STATUS_OK
        records.append(ErrorRecord(index, axis, axis_value, info, f, est.value, exact_value, xi,
                                   est.in_validity_regime, status))
    return records


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[ErrorRecord]:
    workers = spec.workers if workers is None else workers
    points = sweep_points(spec)
    jobs = [(i, point, spec.axis, value, spec.formulas) for i, (point, value) in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_evaluate_point, jobs))
    else:
        chunks = [_evaluate_point(job) for job in jobs]
    return [rec for chunk in chunks for rec in chunk]


def write_sweep_csv(fh, records) -> None:
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        fh.write(",".join(rec.row()) + "\n")


def read_sweep_csv(fh) -> list[ErrorRecord]:
    """Parse the output of :func:`write_sweep_csv` back into records."""

    def num(s):
        return None if s == "" else float(s)

    records = []
    for row in csv.DictReader(fh):
        params = {}
        for key in ("c", "delta", "epsilon", "J", "U", "V"):
            if row[key] != "":
                params[key] = float(row[key])
        params["N"] = int(row["N"])
        records.append(ErrorRecord(
            int(row["point"]), row["axis"], num(row["axis_value"]), params, row["formula_id"],
            num(row["approx"]), num(row["exact"]), num(row["xi"]),
            None if row["in_regime"] == "" else bool(int(row["in_regime"])), row["status"],
        ))
    return records


@dataclass(frozen=True)
class AlphaFit:
    alpha: float
    amplitude: float
    residual: float
    n_points: int
    n_excluded: int
    formula_id: str | None = None
    excluded: tuple = field(default=(), compare=False)

    def as_dict(self) -> dict:
        return {
            "formula_id": self.formula_id,
            "alpha": self.alpha,
            "amplitude": self.amplitude,
            "residual": self.residual,
            "n_points": self.n_points,
            "n_excluded": self.n_excluded,
        }


def fit_power_law(N, xi) -> tuple[float, float, float]:
    """Least-squares fit of log|xi| = log A - alpha log N.

    Returns (alpha, A, rms residual of the log fit).
    """
    N = np.asarray(N, dtype=float)
    xi = np.abs(np.asarray(xi, dtype=float))
    if len(np.unique(N)) < 4:
        raise InsufficientData(f"need at least 4 distinct N values, got {len(np.unique(N))}")
    if np.any(xi == 0) or np.any(N <= 0):
        raise InsufficientData("power-law fit needs nonzero errors and positive N")
    x, y = np.log(N), np.log(xi)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(-slope), float(math.exp(intercept)), float(np.sqrt(np.mean(resid**2)))


def fit_alpha(records) -> AlphaFit:
    """Decay exponent of |xi| with N for the records of one formula.

    Rows without a usable xi are dropped, and so are rows whose xi has the
    minority sign (the error curve crossing zero there).  Both are counted
    in ``n_excluded``.
    """
    records = list(records)
    ids = {rec.formula_id for rec in records}
    if len(ids) > 1:
        raise ParameterError(f"records mix formulas {sorted(ids)}; use fit_alpha_by_formula")
    usable = [rec for rec in records if rec.status == STATUS_OK and rec.xi is not None and rec.xi != 0]
    if usable:
        positive = sum(rec.xi > 0 for rec in usable)
        majority = positive * 2 >= len(usable)
        kept = [rec for rec in usable if (rec.xi > 0) == majority]
    else:
        kept = []
    excluded = tuple(rec for rec in records if rec not in kept)
    alpha, amp, resid = fit_power_law([rec.N for rec in kept], [rec.xi for rec in kept])
    return AlphaFit(alpha, amp, resid, len(kept), len(excluded), ids.pop() if ids else None, excluded)


def fit_alpha_by_formula(records) -> dict[str, AlphaFit]:
    groups: dict[str, list] = {}
    for rec in records:
        groups.setdefault(rec.formula_id, []).append(rec)
    return {f: fit_alpha(recs) for f, recs in groups.items()}
