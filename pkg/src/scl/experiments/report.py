"""Report rows, summary statistics and deterministic CSV/JSON emission.

Outputs are reproducible artifacts: fixed seed plus a single worker yields
byte-identical files, so nothing time- or host-dependent is ever written.
Floats are serialized with 17 significant digits (round-trip exact).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = [
    "experiment",
    "row_id",
    "quantity",
    "value",
    "target",
    "tol_kind",
    "tol",
    "se",
    "passed",
    "required",
    "detail",
]


def fmt(x) -> str:
    """Serialize one CSV cell; floats get 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return f"{float(x):.17g}"
    return str(x)


@dataclass(frozen=True)
class Row:
    """One pass/fail comparison.

    tol_kind: 'abs' (|value-target| <= tol), 'rel' (<= tol*|target|),
    'se' (<= tol*se), 'upper' (value <= target), 'lower' (value >= target),
    'interval' (target-tol <= value <= target+tol) or 'report' (no check).
    Rows with required=False never affect the suite exit code.
    """

    row_id: str
    quantity: str
    value: float
    target: float | None = None
    tol_kind: str = "report"
    tol: float = 0.0
    se: float | None = None
    required: bool = True
    detail: str = ""

    @property
    def passed(self) -> bool:
        v, t = self.value, self.target
        kind = self.tol_kind
        if kind == "report":
            return True
        if t is None or not np.isfinite(v):
            return False
        if kind == "abs":
            return abs(v - t) <= self.tol
        if kind == "rel":
            return abs(v - t) <= self.tol * abs(t)
        if kind == "se":
            return self.se is not None and abs(v - t) <= self.tol * self.se
        if kind == "upper":
            return v <= t + self.tol
        if kind == "lower":
            return v >= t - self.tol
        if kind == "interval":
            return t - self.tol <= v <= t + self.tol
        raise ValueError(f"unknown tol_kind {kind!r}")


@dataclass
class SummaryStats:
    """Location/dispersion summary of one sample."""

    mean: float
    variance: float
    quantiles: dict
    se: float
    count: int

    @classmethod
    def from_sample(cls, xs) -> "SummaryStats":
        xs = np.asarray(xs, dtype=float)
        n = len(xs)
        if n == 0:
            raise ValueError("empty sample")
        var = float(xs.var(ddof=1)) if n > 1 else 0.0
        qs = np.quantile(xs, [0.05, 0.25, 0.50, 0.75, 0.95])
        quantiles = {p: float(q) for p, q in zip(("q05", "q25", "q50", "q75", "q95"), qs)}
        if list(quantiles.values()) != sorted(quantiles.values()):
            raise ValueError("quantiles must be monotone")
        return cls(
            mean=float(xs.mean()),
            variance=var,
            quantiles=quantiles,
            se=math.sqrt(var / n),
            count=n,
        )

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            **self.quantiles,
            "se": self.se,
            "count": self.count,
        }


@dataclass
class Report:
    experiment: str
    seed: int
    trials: int
    config: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    fitted_constants: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def add(self, *args, **kwargs) -> Row:
        row = args[0] if args and isinstance(args[0], Row) else Row(*args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.required and not r.passed)

    @property
    def ok(self) -> bool:
        return self.n_failed == 0

    def row_dicts(self) -> list:
        out = []
        for r in self.rows:
            out.append(
                {
                    "row_id": r.row_id,
                    "quantity": r.quantity,
                    "value": None if r.value is None else float(r.value),
                    "target": None if r.target is None else float(r.target),
                    "tol_kind": r.tol_kind,
                    "tol": float(r.tol),
                    "se": None if r.se is None else float(r.se),
                    "passed": bool(r.passed),
                    "required": bool(r.required),
                    "detail": r.detail,
                }
            )
        return out


def emit_report(report: Report, out_dir: str) -> tuple[str, str]:
    """Write <experiment>.csv and summary.json under out_dir.

    Deterministic: row order is insertion order (runners emit canonically
    sorted rows), floats carry 17 significant digits, JSON keys are sorted
    and no volatile metadata (timestamps, hosts, durations) is included.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{report.experiment}.csv")
    lines = [",".join(CSV_COLUMNS)]
    for r in report.rows:
        cells = [
            report.experiment,
            r.row_id,
            r.quantity,
            fmt(r.value),
            fmt(r.target),
            r.tol_kind,
            fmt(r.tol),
            fmt(r.se),
            fmt(r.passed),
            fmt(r.required),
            r.detail.replace(",", ";"),
        ]
        lines.append(",".join(cells))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = {
        "experiment": report.experiment,
        "seed": report.seed,
        "trials": report.trials,
        "config": report.config,
        "rows": report.row_dicts(),
        "fitted_constants": report.fitted_constants,
        "stats": report.stats,
        "n_failed": report.n_failed,
        "pass": report.ok,
    }
    json_path = os.path.join(out_dir, "summary.json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1, allow_nan=True)
        fh.write("\n")
    return csv_path, json_path


def validate_summary(summary: dict) -> list:
    """Structural validation of a summary.json document against the shipped
    schema; returns a list of problems (empty when valid)."""
    import importlib.resources as res

    with res.files("scl.experiments").joinpath("summary_schema.json").open() as fh:
        schema = json.load(fh)
    problems: list[str] = []

    def check(obj, spec, path):
        t = spec.get("type")
        if t == "object":
            if not isinstance(obj, dict):
                problems.append(f"{path}: expected object")
                return
            for key in spec.get("required", []):
                if key not in obj:
                    problems.append(f"{path}: missing key {key!r}")
            for key, sub in spec.get("properties", {}).items():
                if key in obj:
                    check(obj[key], sub, f"{path}.{key}")
        elif t == "array":
            if not isinstance(obj, list):
                problems.append(f"{path}: expected array")
                return
            sub = spec.get("items")
            if sub:
                for i, el in enumerate(obj):
                    check(el, sub, f"{path}[{i}]")
        elif t == "string":
            if not isinstance(obj, str):
                problems.append(f"{path}: expected string")
        elif t == "integer":
            if not isinstance(obj, int) or isinstance(obj, bool):
                problems.append(f"{path}: expected integer")
        elif t == "number":
            if not isinstance(obj, (int, float)) or isinstance(obj, bool):
                problems.append(f"{path}: expected number")
        elif t == "boolean":
            if not isinstance(obj, bool):
                problems.append(f"{path}: expected boolean")
        elif isinstance(t, list):
            kinds = {
                "string": (str,),
                "number": (int, float),
                "integer": (int,),
                "boolean": (bool,),
                "null": (type(None),),
            }
            allowed = tuple(k for name in t for k in kinds.get(name, ()))
            ok = isinstance(obj, allowed)
            if isinstance(obj, bool) and "boolean" not in t:
                ok = False
            if not ok:
                problems.append(f"{path}: expected one of {t}")

    check(summary, schema, "$")
    return problems
