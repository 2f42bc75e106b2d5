"""CSV writers with a fixed float format (12 significant digits)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .certificate import Certificate
from .duhamel import IterationReport, SpaceTimeField
from .field_core import Field
from .oracle import OracleRun

CERTIFICATE_COLUMNS = ("condition_id", "p", "q", "A", "T", "valid", "margin")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.11e}"
    return str(x)


def write_csv(path, header, rows, footer: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        if footer:
            fh.write(f"# {footer}\n")
    return path


def field_rows(f: Field):
    X = [c.ravel() for c in f.domain.coordinates()]
    for i, v in enumerate(f.values.ravel()):
        yield (i, *(x[i] for x in X), v)


def write_field(path, f: Field) -> Path:
    header = ["node"] + [f"x{k}" for k in range(f.domain.n)] + ["value"]
    return write_csv(path, header, field_rows(f))


def write_trace(path, rows, value_name: str = "value") -> Path:
    return write_csv(path, ["t", value_name], rows)


def write_space_time(path, w: SpaceTimeField) -> Path:
    flat = w.values.reshape(len(w.times), -1)
    rows = ((t, i, v) for t, sl in zip(w.times, flat) for i, v in enumerate(sl))
    return write_csv(path, ["t", "node", "value"], rows)


def write_iteration_report(path, report: IterationReport) -> Path:
    return write_csv(path, ["iteration", "residual", "gap"], report.rows())


def certificate_row(cert: Certificate) -> list:
    r = cert.row()
    return [r[c] for c in CERTIFICATE_COLUMNS]


def write_certificates(path, certs) -> Path:
    return write_csv(path, CERTIFICATE_COLUMNS, (certificate_row(c) for c in certs))


def write_oracle_run(path, run: OracleRun) -> Path:
    return write_csv(path, ["t", "sup_norm", "dt_used"], run.rows(), footer=run.summary())
