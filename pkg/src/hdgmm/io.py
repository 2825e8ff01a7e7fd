"""CSV interchange with headers; floats written with 17 significant digits."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import InputError
from .panel import PanelData


def format_float(x):
    return format(float(x), ".17g")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def read_matrix_csv(path, name=None):
    """Read a numeric CSV with one header row.

    Lines starting with ``#`` (the metadata block written by
    :func:`table_to_text`) are skipped.

    Returns
    -------
    header : list of str
    values : (rows, cols) float array

    Raises
    ------
    InputError
        With the offending line number for ragged rows or non-numeric cells.
    """
    name = name or str(path)
    try:
        with open(path, newline="") as fh:
            lines = [(k, ln) for k, ln in enumerate(fh, start=1) if not ln.startswith("#")]
            if not lines:
                raise InputError(f"{name}: file is empty")
            header = next(csv.reader([lines[0][1]]))
            rows = []
            for (lineno, _), row in zip(lines[1:], csv.reader(ln for _, ln in lines[1:])):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise InputError(
                        f"{name}: line {lineno} has {len(row)} fields, header has {len(header)}"
                    )
                try:
                    vals = [float(cell) for cell in row]
                except ValueError:
                    raise InputError(f"{name}: line {lineno} has a non-numeric value") from None
                if not all(np.isfinite(vals)):
                    raise InputError(f"{name}: line {lineno} has a non-finite value")
                rows.append(vals)
    except OSError as exc:
        raise InputError(f"{name}: cannot read ({exc.strerror})") from None
    if not rows:
        raise InputError(f"{name}: no data rows")
    return [h.strip() for h in header], np.array(rows, dtype=np.float64)


def write_csv(fh, header, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def matrix_to_csv(path, values, header):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        write_csv(fh, header, values.tolist())


def table_to_text(header, rows, fmt="csv", metadata=None):
    """Render a table as csv, json (list of records) or markdown."""
    if fmt == "csv":
        buf = io.StringIO()
        if metadata:
            for key, val in metadata.items():
                buf.write(f"# {key}: {_fmt(val)}\n")
        write_csv(buf, header, rows)
        return buf.getvalue()
    if fmt == "json":
        records = [
            {h: (float(v) if isinstance(v, (float, np.floating)) else v) for h, v in zip(header, row)}
            for row in rows
        ]
        payload = {"rows": records}
        if metadata:
            payload["metadata"] = metadata
        return json.dumps(payload, indent=2, default=_json_default) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row in rows:
            lines.append("| " + " | ".join(
                f"{v:.4f}" if isinstance(v, (float, np.floating)) else str(v) for v in row) + " |")
        if metadata:
            lines.append("")
            lines.extend(f"- {k}: {_fmt(v)}" for k, v in metadata.items())
        return "\n".join(lines) + "\n"
    raise InputError(f"unknown output format {fmt!r}")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def read_panel_csv(path):
    """Long-format panel: columns ``unit, period, y, x_1..x_K``; must be balanced."""
    header, values = read_matrix_csv(path)
    if header[:3] != ["unit", "period", "y"]:
        raise InputError(f"{path}: header must start with unit,period,y; got {header[:3]}")
    units, unit_idx = np.unique(values[:, 0], return_inverse=True)
    periods, period_idx = np.unique(values[:, 1], return_inverse=True)
    n, T = len(units), len(periods)
    if values.shape[0] != n * T:
        raise InputError(f"{path}: unbalanced panel ({values.shape[0]} rows for {n} units x {T} periods)")
    seen = np.zeros((n, T), dtype=bool)
    seen[unit_idx, period_idx] = True
    if not seen.all():
        raise InputError(f"{path}: unbalanced panel (duplicate unit/period pairs)")
    K = values.shape[1] - 3
    y = np.zeros((n, T))
    x = np.zeros((n, T, K))
    y[unit_idx, period_idx] = values[:, 2]
    x[unit_idx, period_idx] = values[:, 3:]
    return PanelData(y=y, x=x)


def write_panel_csv(path, data):
    K = data.K
    header = ["unit", "period", "y"] + [f"x_{k + 1}" for k in range(K)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            for t in range(data.T):
                writer.writerow([i + 1, t + 1, format_float(data.y[i, t])]
                                + [format_float(v) for v in data.x[i, t]])
