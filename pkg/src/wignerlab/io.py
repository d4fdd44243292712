"""Run manifests, result tables, and deterministic file emission.

Result tables serialize to RFC-4180 CSV (header row, shortest round-trip
float repr) or to a JSON array of objects with identical field names;
each scaling fit additionally gets a two-column plot-data file with a
fit-line sidecar.  Wall-clock quantities live only in the manifest, so
the emitted tables are byte-identical across reruns and thread counts.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .experiments import ExperimentRecord, ScalingFit, StatRecord

__all__ = [
    "RunManifest",
    "ResultTable",
    "canonical_digest",
    "experiment_table",
    "stat_table",
    "write_fit_data",
]

SCHEMA_VERSION = 1


def canonical_digest(config: dict) -> str:
    """SHA-256 of the canonicalized config: sorted keys, normalized text."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_digest: str
    tool_version: str
    base_seed: int
    started_at: str
    finished_at: str
    record_refs: list[str] = field(default_factory=list)
    audit_summary: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def write(self, path: Path):
        path = Path(path)
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


@dataclass
class ResultTable:
    """Typed columnar rows with a total, deterministic sort order."""

    columns: tuple[tuple[str, str], ...]  # (name, type) pairs
    rows: list[dict]

    def sorted_rows(self) -> list[dict]:
        names = [c for c, _ in self.columns]
        sort_keys = [c for c in ("n", "u", "v", "p") if c in names]
        return sorted(self.rows, key=lambda r: tuple(r[c] for c in sort_keys))

    def _cell_text(self, value, typ: str) -> str:
        if typ == "float":
            return repr(float(value))
        if typ == "bool":
            return "true" if value else "false"
        return str(value)

    def to_csv_text(self) -> str:
        buf = _io.StringIO()
        writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
        writer.writerow([name for name, _ in self.columns])
        for row in self.sorted_rows():
            writer.writerow([self._cell_text(row[name], typ) for name, typ in self.columns])
        return buf.getvalue()

    def write_csv(self, path: Path):
        Path(path).write_text(self.to_csv_text(), newline="")

    def to_json_text(self) -> str:
        objs = []
        for row in self.sorted_rows():
            obj = {}
            for name, typ in self.columns:
                v = row[name]
                obj[name] = bool(v) if typ == "bool" else _TYPES[typ](v)
            objs.append(obj)
        return json.dumps(objs, indent=2) + "\n"

    def write_json(self, path: Path):
        Path(path).write_text(self.to_json_text())

    @classmethod
    def read_csv(cls, path: Path, columns) -> "ResultTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = [name for name, _ in columns]
            if header != names:
                raise ValueError(f"schema mismatch: {header} != {names}")
            rows = []
            for raw in reader:
                row = {}
                for (name, typ), cell in zip(columns, raw):
                    if typ == "bool":
                        row[name] = cell == "true"
                    else:
                        row[name] = _TYPES[typ](cell)
                rows.append(row)
        return cls(columns=tuple(columns), rows=rows)


EXPERIMENT_COLUMNS = (
    ("law", "str"),
    ("n", "int"),
    ("u", "float"),
    ("v", "float"),
    ("p", "int"),
    ("pipeline", "str"),
    ("trials", "int"),
    ("mean_abs_gap_p", "float"),
    ("se_abs_gap_p", "float"),
    ("mean_abs_imgap_p", "float"),
    ("se_abs_imgap_p", "float"),
    ("mean_abs_err_p", "float"),
    ("se_abs_err_p", "float"),
    ("admissible_count", "int"),
    ("degraded", "bool"),
)

STAT_COLUMNS = (
    ("law", "str"),
    ("n", "int"),
    ("statistic", "str"),
    ("trials", "int"),
    ("median", "float"),
    ("mean", "float"),
    ("se", "float"),
)


def experiment_table(records: list[ExperimentRecord]) -> ResultTable:
    rows = []
    for r in records:
        row = {name: getattr(r, name) for name, _ in EXPERIMENT_COLUMNS}
        rows.append(row)
    return ResultTable(columns=EXPERIMENT_COLUMNS, rows=rows)


def stat_table(records: list[StatRecord]) -> ResultTable:
    rows = [{name: getattr(r, name) for name, _ in STAT_COLUMNS} for r in records]
    return ResultTable(columns=STAT_COLUMNS, rows=rows)


def write_fit_data(fit: ScalingFit, stem: Path, xlabel: str = "predictor") -> list[Path]:
    """Two-column (predictor, response) points plus a fit-line sidecar."""
    stem = Path(stem)
    points = stem.with_suffix(".points.dat")
    line = stem.with_suffix(".fit.dat")
    with open(points, "w") as fh:
        fh.write(f"# {xlabel} response\n")
        for x, y in sorted(zip(fit.predictors, fit.responses)):
            fh.write(f"{x!r} {y!r}\n")
    xs = np.geomspace(min(fit.predictors), max(fit.predictors), 64)
    with open(line, "w") as fh:
        fh.write(f"# fit: response = exp({fit.intercept!r}) * {xlabel}^({fit.slope!r})\n")
        fh.write(f"# slope_stderr = {fit.slope_stderr!r}  r_squared = {fit.r_squared!r}\n")
        for x in xs:
            fh.write(f"{x!r} {float(np.exp(fit.intercept) * x ** fit.slope)!r}\n")
    return [points, line]
