"""CSV and JSON plumbing for the command-line front end.

Floats are written with ``repr`` (shortest round-trip decimal), so a value
written and read back is bit-identical.
"""

import csv
import json
import math

import numpy as np

from .exceptions import StableMCDError


class DataFormatError(StableMCDError, ValueError):
    """Input file could not be parsed as a numeric matrix."""


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    return "" if x is None else str(x)


def read_matrix(path, header=False):
    """Read a comma-delimited UTF-8 numeric matrix.

    Returns
    -------
    X : ndarray of shape (n, p)
    names : list of str or None
        Column names when ``header`` is set.

    Raises
    ------
    DataFormatError
        Ragged rows, non-numeric or non-finite cells, or no data rows; the
        message names the offending line and column (both 1-based).
    OSError
        The file cannot be opened.
    """
    names = None
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            for fields in reader:
                line = reader.line_num
                if not fields or all(not f.strip() for f in fields):
                    continue
                if header and names is None:
                    names = [f.strip() for f in fields]
                    width = len(names)
                    continue
                if width is None:
                    width = len(fields)
                elif len(fields) != width:
                    raise DataFormatError(f"{path}: line {line} has {len(fields)} fields, expected {width}")
                row = []
                for col, f in enumerate(fields, start=1):
                    try:
                        v = float(f)
                    except ValueError:
                        raise DataFormatError(
                            f"{path}: line {line}, column {col}: cannot parse {f.strip()!r} as a number"
                        ) from None
                    if not math.isfinite(v):
                        raise DataFormatError(f"{path}: line {line}, column {col}: non-finite value {f.strip()!r}")
                    row.append(v)
                rows.append(row)
        except csv.Error as exc:
            raise DataFormatError(f"{path}: line {reader.line_num}: {exc}") from None
        except UnicodeDecodeError as exc:
            raise DataFormatError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64), names


def write_matrix(path, X):
    """Write a matrix without header using shortest round-trip floats."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for row in X:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def write_table(path, columns, rows, fmt="csv"):
    """Write records as CSV (header + rows) or as a JSON list of objects."""
    rows = [list(r) for r in rows]
    if fmt == "json":
        records = [{c: _json_value(v) for c, v in zip(columns, r)} for r in rows]
        write_json(path, records)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_cell(v) for v in r) + "\n")


def _json_value(x):
    if isinstance(x, np.ndarray):
        return [_json_value(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _json_value(v) for k, v in x.items()}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if not math.isfinite(x) else x
    return x


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_value(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
