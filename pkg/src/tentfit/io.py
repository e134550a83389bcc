"""Headerless CSV points in, CSV samples out."""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .errors import ParseError


def _header(d: int) -> list[str]:
    return [f"x{j + 1}" for j in range(d)]


def parse_points(text: str, d: int | None = None) -> np.ndarray:
    """Parse CSV text, one point per row.

    Blank lines and whitespace around cells are ignored. A first row reading
    exactly ``x1,...,xd`` is taken to be the header written by
    :func:`format_points` and skipped.
    """
    rows = []
    reader = csv.reader(_io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        if not rows and cells == _header(len(cells)):
            d = d or len(cells)
            continue
        try:
            # float() ignores the locale, so "1,5" style decimals are rejected
            vals = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-numeric cell ({exc})") from exc
        if not all(np.isfinite(vals)):
            raise ParseError(f"line {lineno}: non-finite value")
        if rows and len(vals) != len(rows[0]):
            raise ParseError(f"line {lineno}: expected {len(rows[0])} columns, found {len(vals)}")
        if d is not None and len(vals) != d:
            raise ParseError(f"line {lineno}: expected {d} columns, found {len(vals)}")
        rows.append(vals)
    if not rows:
        return np.empty((0, d or 0))
    return np.array(rows, dtype=float)


def read_points(path, d: int | None = None) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not a text file") from exc
    return parse_points(text, d)


def format_points(X, header: bool = False, d: int | None = None) -> str:
    """CSV with shortest round-trip decimals; optional ``x1..xd`` header."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, d or 1) if X.size or d else X.reshape(0, 0)
    d = X.shape[1] if X.ndim == 2 and X.shape[1] else (d or 0)
    lines = []
    if header:
        lines.append(",".join(_header(d)))
    lines.extend(",".join(repr(float(v)) for v in row) for row in X)
    return "\n".join(lines) + ("\n" if lines else "")


def write_points(path, X, header: bool = False, d: int | None = None) -> None:
    Path(path).write_text(format_points(X, header=header, d=d))


__all__ = ["parse_points", "read_points", "format_points", "write_points"]
