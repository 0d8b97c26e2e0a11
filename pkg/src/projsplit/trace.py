"""Per-iteration trace files: JSON Lines or headerless CSV.

Every record has exactly the :class:`~projsplit.solver.IterateTrace` fields.
In CSV the ``inner_iters`` list is joined with ``;`` and a missing objective
is an empty field.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, TextIO

from .solver import TRACE_FIELDS, IterateTrace

FORMATS = ("jsonl", "csv")


def _csv_cell(name: str, value) -> str:
    if name == "inner_iters":
        return ";".join(str(int(v)) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace(records: Iterable[IterateTrace], fh: TextIO, fmt: str = "jsonl", header: bool = False) -> int:
    """Write ``records`` to an open text stream; returns the record count."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown trace format {fmt!r}; choose from {FORMATS}")
    n = 0
    if fmt == "jsonl":
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")
            n += 1
        return n
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(TRACE_FIELDS)
    for rec in records:
        d = rec.to_dict()
        w.writerow([_csv_cell(k, d[k]) for k in TRACE_FIELDS])
        n += 1
    return n


def save_trace(records: Iterable[IterateTrace], path, fmt: str = "jsonl", header: bool = False) -> int:
    with open(Path(path), "w", newline="") as fh:
        return write_trace(records, fh, fmt, header)


def _from_csv_row(row: list[str]) -> IterateTrace:
    if len(row) != len(TRACE_FIELDS):
        raise ValueError(f"expected {len(TRACE_FIELDS)} fields, found {len(row)}")
    d = dict(zip(TRACE_FIELDS, row))
    return IterateTrace(
        k=int(d["k"]),
        alpha_k=float(d["alpha_k"]),
        beta_k=float(d["beta_k"]),
        theta_k=float(d["theta_k"]),
        phi_at_hat=float(d["phi_at_hat"]),
        grad_norm_sq_gamma=float(d["grad_norm_sq_gamma"]),
        residual_primal=float(d["residual_primal"]),
        residual_dual=float(d["residual_dual"]),
        inner_iters=[int(v) for v in d["inner_iters"].split(";")] if d["inner_iters"] else [],
        objective=float(d["objective"]) if d["objective"] else None,
        step_norm=float(d["step_norm"]),
    )


def read_trace(path, fmt: str | None = None) -> list[IterateTrace]:
    """Parse a trace file back into records (format from the suffix if not given)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "jsonl")
    text = path.read_text()
    if fmt == "jsonl":
        out = []
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                if set(d) != set(TRACE_FIELDS):
                    raise ValueError(f"trace record fields {sorted(d)} do not match the schema")
                out.append(IterateTrace(**d))
        return out
    rows = list(csv.reader(io.StringIO(text)))
    if rows and rows[0] == list(TRACE_FIELDS):
        rows = rows[1:]
    return [_from_csv_row(r) for r in rows if r]
