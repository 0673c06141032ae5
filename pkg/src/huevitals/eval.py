"""RMSE evaluation of estimate streams against reference devices."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

import numpy as np

from .exceptions import AlignmentError, ConfigError, UnreadableFileError

METRICS = ("hr", "rr")
REFERENCE_METHOD = "hexoskin"
AAMI_HR_LIMIT = 5.0

# Published RMSE figures for the bundled comparison table, keyed by column.
PUBLISHED_RMSE = {
    "apple_hr": 3.1119,
    "samsung_hr": 2.0901,
    "hue_hr": 2.9558,
    "green_hr": 3.0262,
    "hue_rr": 1.7014,
    "green_rr": 2.5026,
}


@dataclass(frozen=True)
class ReferenceSeries:
    times: np.ndarray
    values: np.ndarray
    metric: str
    method: str

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D and equally long")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError(f"{self.method}: times must be strictly increasing")
        if np.any(v <= 0):
            raise ValueError(f"{self.method}: values must be positive")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def by_second(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for t, v in zip(self.times, self.values):
            out.setdefault(int(round(t)), float(v))
        return out


@dataclass(frozen=True)
class RmseEntry:
    method: str
    reference: str
    metric: str
    rmse: float
    n: int

    @property
    def key(self) -> str:
        return f"{self.method}_{self.metric}"

    def to_dict(self) -> dict:
        return {"method": self.method, "reference": self.reference, "metric": self.metric,
                "rmse": round(self.rmse, 4), "n": self.n}


@dataclass
class RmseReport:
    entries: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def get(self, method: str, metric: str) -> RmseEntry:
        for e in self.entries:
            if e.method == method and e.metric == metric:
                return e
        raise KeyError(f"{method}/{metric}")

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "aami": self._aami(),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def _aami(self) -> dict[str, bool]:
        if not any(e.metric == "hr" for e in self.entries):
            return {}
        return aami_check(self)

    def to_text(self) -> str:
        lines = [f"{'metric':<6} {'method':<12} {'reference':<10} {'n':>3} {'rmse':>8}  aami"]
        aami = self._aami()
        for e in self.entries:
            flag = ("pass" if aami[e.method] else "fail") if e.metric == "hr" else "-"
            lines.append(f"{e.metric:<6} {e.method:<12} {e.reference:<10} {e.n:>3} "
                         f"{e.rmse:>8.4f}  {flag}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def rmse(a: ReferenceSeries, b: ReferenceSeries) -> RmseEntry:
    """Root mean square difference over timestamps both series share.

    Timestamps are rounded to whole seconds before matching. ``a`` is the
    estimate and ``b`` the reference; the value is symmetric in the two.
    """
    if a.metric != b.metric:
        raise ValueError(f"metric mismatch: {a.metric} vs {b.metric}")
    sa, sb = a.by_second(), b.by_second()
    common = sorted(set(sa) & set(sb))
    if not common:
        raise AlignmentError(f"{a.method} and {b.method} share no timestamps")
    diff = np.array([sa[t] - sb[t] for t in common])
    return RmseEntry(a.method, b.method, a.metric, float(np.sqrt(np.mean(diff ** 2))),
                     len(common))


def _column_series(rows, column: str) -> ReferenceSeries:
    method, metric = column.rsplit("_", 1)
    times, values = [], []
    for row in rows:
        cell = (row.get(column) or "").strip()
        if not cell:
            continue
        times.append(float(row["time_s"]))
        values.append(float(cell))
    return ReferenceSeries(np.array(times), np.array(values), metric, method)


def read_reference_csv(path) -> dict[str, ReferenceSeries]:
    """Parse a comparison CSV into ``{column: ReferenceSeries}``.

    The header starts with ``time_s``; every other column is named
    ``<method>_<metric>``. Blank cells are missing values.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(str(exc)) from exc
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or reader.fieldnames[0].strip() != "time_s":
            raise ConfigError(f"{path}: first column must be time_s")
        rows = list(reader)
    out = {}
    for col in reader.fieldnames[1:]:
        col = col.strip()
        if "_" not in col or col.rsplit("_", 1)[1] not in METRICS:
            raise ConfigError(f"{path}: column {col!r} is not <method>_<hr|rr>")
        out[col] = _column_series(rows, col)
    return out


def read_estimates_jsonl(path, label: Optional[str] = None) -> dict[str, ReferenceSeries]:
    """Load ``hr``/``rr`` from estimator JSONL output as two series."""
    label = label or os.path.splitext(os.path.basename(str(path)))[0]
    cols = {"hr": ([], []), "rr": ([], [])}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            for metric in METRICS:
                if rec.get(metric) is not None:
                    cols[metric][0].append(float(rec["t"]))
                    cols[metric][1].append(float(rec[metric]))
    return {f"{label}_{m}": ReferenceSeries(np.array(t), np.array(v), m, label)
            for m, (t, v) in cols.items() if t}


def bundled_table_path() -> str:
    return str(resources.files("huevitals").joinpath("data/device_comparison.csv"))


def table_report(reference_csv=None, estimates: Iterable = (),
                 reference: str = REFERENCE_METHOD) -> RmseReport:
    """RMSE of every non-reference column (and each estimate file) against ``reference``.

    ``estimates`` holds paths to JSONL estimate files or ``(label, path)``
    pairs. Recomputed values that differ from the published figures for the
    bundled table are listed in ``report.notes``.
    """
    path = reference_csv or bundled_table_path()
    series = read_reference_csv(path)
    for item in estimates:
        label, est_path = item if isinstance(item, tuple) else (None, item)
        series.update(read_estimates_jsonl(est_path, label))

    report = RmseReport()
    for metric in METRICS:
        ref_key = f"{reference}_{metric}"
        if ref_key not in series:
            continue  # e.g. an HR-only reference; estimate RR columns go unscored
        for key in (k for k, s in series.items() if s.metric == metric and k != ref_key):
            report.entries.append(rmse(series[key], series[ref_key]))
    if not report.entries:
        raise ConfigError(f"no column can be scored against reference {reference!r}")
    report.notes.extend(published_discrepancies(report))
    return report


def published_discrepancies(report: RmseReport) -> list[str]:
    """Compare against the published figures when the report covers those columns."""
    computed = {e.key: round(e.rmse, 4) for e in report.entries if e.reference == REFERENCE_METHOD}
    if not set(PUBLISHED_RMSE) <= set(computed):
        return []
    notes = []
    mismatched = sorted(k for k, v in PUBLISHED_RMSE.items() if computed[k] != v)
    for k in mismatched:
        notes.append(f"{k}: recomputed {computed[k]:.4f} differs from published {PUBLISHED_RMSE[k]:.4f}")
    swapped = [k for k in mismatched
               if any(computed[k] == PUBLISHED_RMSE[o] and computed[o] == PUBLISHED_RMSE[k]
                      for o in mismatched if o != k and o.endswith(k[-3:]))]
    if swapped:
        notes.append("published values for " + " and ".join(swapped)
                     + " appear swapped; recomputed values are reported")
    return notes


def aami_check(report: RmseReport, limit: float = AAMI_HR_LIMIT) -> dict[str, bool]:
    """HR methods pass when RMSE is strictly below ``limit`` beats per minute."""
    hr = [e for e in report.entries if e.metric == "hr"]
    if not hr:
        raise ConfigError("report has no HR entries")
    return {e.method: rmse_pass(e.rmse, limit) for e in hr}


def rmse_pass(value: float, limit: float = AAMI_HR_LIMIT) -> bool:
    return bool(math.isfinite(value) and value < limit)
