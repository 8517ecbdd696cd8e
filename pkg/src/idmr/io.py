"""File formats: CSV ingestion, fit serialization, constraint files, tables.

Counts and covariates arrive as headerless comma-separated files (an
optional single header line can be skipped).  Fits are serialized as JSON
with floats written by Python's shortest round-trip repr, so a write
followed by a read reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .constraints import AcrossTie, ConstraintSpec, WithinTie
from .engine import FitResult, prepare_data
from .exceptions import ParseError, ShapeError
from .model import CountMatrix, CovariateMatrix, Dataset, ParamMatrix


def _read_rows(path, header: bool) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, newline="") as handle:
        for line_no, record in enumerate(csv.reader(handle), start=1):
            if header and line_no == 1:
                continue
            if not record:
                continue
            rows.append((line_no, record))
    if not rows:
        raise ParseError(f"{path} contains no data rows")
    return rows


def _parse_counts(path, header: bool) -> np.ndarray:
    rows = _read_rows(path, header)
    width = len(rows[0][1])
    out = np.empty((len(rows), width), dtype=np.int64)
    for r, (line_no, record) in enumerate(rows):
        if len(record) != width:
            raise ParseError(
                f"expected {width} fields but found {len(record)}", line=line_no
            )
        for c, field in enumerate(record):
            try:
                value = int(field.strip())
            except ValueError:
                raise ParseError(f"count {field!r} is not an integer", line=line_no) from None
            if value < 0:
                raise ParseError(f"count {value} is negative", line=line_no)
            out[r, c] = value
    return out


def _parse_covariates(path, header: bool) -> np.ndarray:
    rows = _read_rows(path, header)
    width = len(rows[0][1])
    out = np.empty((len(rows), width), dtype=np.float64)
    for r, (line_no, record) in enumerate(rows):
        if len(record) != width:
            raise ParseError(
                f"expected {width} fields but found {len(record)}", line=line_no
            )
        for c, field in enumerate(record):
            try:
                value = float(field.strip())
            except ValueError:
                raise ParseError(f"covariate {field!r} is not a number", line=line_no) from None
            if not math.isfinite(value):
                raise ParseError(f"covariate {field!r} is not finite", line=line_no)
            out[r, c] = value
    return out


def load_dataset(
    counts_path,
    covariates_path,
    add_intercept: bool = False,
    header: bool = False,
    base_column: int | None = None,
) -> Dataset:
    """Read counts and covariates from CSV and validate the data model.

    ``add_intercept`` prepends a column of ones to the covariates;
    ``base_column`` moves the given counts column to the last position so it
    serves as the base category.  Zero-total observations and empty non-base
    choice columns are dropped with a warning.
    """
    counts = _parse_counts(counts_path, header)
    covariates = _parse_covariates(covariates_path, header)
    if counts.shape[0] != covariates.shape[0]:
        raise ShapeError(
            f"{counts.shape[0]} count rows but {covariates.shape[0]} covariate rows"
        )
    if add_intercept:
        covariates = np.hstack([np.ones((covariates.shape[0], 1)), covariates])
    if base_column is not None:
        d = counts.shape[1]
        if not 0 <= base_column < d:
            raise ShapeError(f"base column {base_column} out of range for d={d}")
        order = [k for k in range(d) if k != base_column] + [base_column]
        counts = counts[:, order]
    data = Dataset(CountMatrix.from_counts(counts), CovariateMatrix(covariates))
    reduced, _rows, _choices = prepare_data(data)
    return reduced


def write_fit(
    result: FitResult, path, seed: int | None = None, include_wall_times: bool = True
) -> None:
    """Serialize a fit to JSON.

    ``include_wall_times=False`` omits the per-iteration timings, giving a
    byte-reproducible document for fixed inputs and seed.
    """
    document = {
        "library_version": __version__,
        "theta": {
            "shape": [result.theta.d, result.theta.p],
            "data": [float(x) for x in result.theta.rows.ravel()],
        },
        "init_kind": result.init_kind,
        "iterations_run": result.iterations_run,
        "step_norms": list(result.step_norms),
        "objective_trace": list(result.objective_trace),
        "wall_times": list(result.wall_times) if include_wall_times else [],
        "inner_not_converged": [list(pair) for pair in result.inner_not_converged],
        "dropped_choices": list(result.dropped_choices),
        "seed": seed,
    }
    with open(path, "w") as handle:
        json.dump(document, handle, indent=1)
        handle.write("\n")


def read_fit(path) -> FitResult:
    """Read back a fit written by :func:`write_fit`."""
    with open(path) as handle:
        document = json.load(handle)
    d, p = document["theta"]["shape"]
    rows = np.array(document["theta"]["data"], dtype=np.float64).reshape(d, p)
    return FitResult(
        theta=ParamMatrix(rows),
        iterations_run=int(document["iterations_run"]),
        step_norms=tuple(document["step_norms"]),
        objective_trace=tuple(document["objective_trace"]),
        wall_times=tuple(document["wall_times"]),
        init_kind=document["init_kind"],
        inner_not_converged=tuple(
            (int(a), int(b)) for a, b in document.get("inner_not_converged", [])
        ),
        dropped_choices=tuple(int(k) for k in document.get("dropped_choices", [])),
    )


def read_theta(path) -> ParamMatrix:
    """Coefficients from a fit document, for warm starts from a file."""
    return read_fit(path).theta


def load_constraints(path) -> ConstraintSpec:
    """Parse a constraint file: one constraint per line.

    Formats (0-based indices)::

        within k j1 j2
        across j k1 k2 ... kq [= value]

    Blank lines and lines starting with '#' are skipped.
    """
    within: list[WithinTie] = []
    across: list[AcrossTie] = []
    with open(path) as handle:
        for line_no, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            kind = tokens[0].lower()
            try:
                if kind == "within":
                    if len(tokens) != 4:
                        raise ValueError("expected: within k j1 j2")
                    k, j1, j2 = (int(t) for t in tokens[1:])
                    within.append(WithinTie(choice=k, pairs=((j1, j2),)))
                elif kind == "across":
                    value = None
                    if "=" in tokens:
                        eq = tokens.index("=")
                        if eq != len(tokens) - 2:
                            raise ValueError("pinned value must be the final token")
                        value = float(tokens[eq + 1])
                        tokens = tokens[:eq]
                    if len(tokens) < 3:
                        raise ValueError("expected: across j k1 k2 ... [= value]")
                    j = int(tokens[1])
                    choices = tuple(int(t) for t in tokens[2:])
                    across.append(AcrossTie(coordinate=j, choices=choices, value=value))
                else:
                    raise ValueError(f"unknown constraint kind {kind!r}")
            except ValueError as err:
                raise ParseError(str(err), line=line_no) from None
    return ConstraintSpec(within=tuple(within), across=tuple(across))


def write_rows_csv(rows, path, columns) -> None:
    """Write dataclass rows to CSV with the given column attribute order."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([getattr(row, c) for c in columns])


def format_rows_text(rows, columns) -> str:
    """Fixed-width text rendering of dataclass rows for terminal output."""
    header = [str(c) for c in columns]
    body = []
    for row in rows:
        rendered = []
        for c in columns:
            value = getattr(row, c)
            rendered.append(f"{value:.6g}" if isinstance(value, float) else str(value))
        body.append(rendered)
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for rendered in body:
        lines.append("  ".join(v.rjust(w) for v, w in zip(rendered, widths)))
    return "\n".join(lines)


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    """Write a numeric matrix as headerless CSV with full float precision."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        for row in np.atleast_2d(matrix):
            writer.writerow(
                [int(x) if np.issubdtype(matrix.dtype, np.integer) else repr(float(x)) for x in row]
            )


def ensure_parent(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        raise ParseError(f"directory {path.parent} does not exist")
    return path
