"""CSV files for boundary data, profiles and iteration traces.

Every float is written with 9 significant digits so reruns diff cleanly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .forward import BoundaryData
from .model import CoefficientProfile

FMT = "%.9g"


class ParseError(ValueError):
    """Malformed CSV input; the message names the file and line."""


def write_csv(path, header: list[str], columns) -> Path:
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(v if isinstance(v, str) else FMT % v for v in row) + "\n")
    return path


def read_csv(path, columns: list[str]) -> dict[str, np.ndarray]:
    """Read named float columns; extra columns are ignored."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(f"{path}:1: missing column(s) {', '.join(missing)} in header {header}")
        pos = [header.index(c) for c in columns]
        data = [[] for _ in columns]
        for line, row in enumerate(reader, start=2):
            if not row or all(not s.strip() for s in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
            for k, p in enumerate(pos):
                try:
                    v = float(row[p])
                except ValueError:
                    raise ParseError(f"{path}:{line}: column {columns[k]!r}: not a number: {row[p]!r}") from None
                if not np.isfinite(v):
                    raise ParseError(f"{path}:{line}: column {columns[k]!r}: non-finite value")
                data[k].append(v)
    if not data[0]:
        raise ParseError(f"{path}: no data rows")
    return {c: np.array(v) for c, v in zip(columns, data)}


def write_boundary_data(outdir, data: BoundaryData) -> list[Path]:
    outdir = Path(outdir)
    paths = [write_csv(outdir / "g0.csv", ["t", "g0"], [data.times, data.g0])]
    if data.g1 is not None:
        paths.append(write_csv(outdir / "g1.csv", ["t", "g1"], [data.times, data.g1]))
    return paths


def read_boundary_data(g0_path, g1_path=None, eps: float | None = None) -> BoundaryData:
    g0 = read_csv(g0_path, ["t", "g0"])
    g1 = None
    if g1_path is not None:
        d1 = read_csv(g1_path, ["t", "g1"])
        if d1["t"].shape != g0["t"].shape or not np.allclose(d1["t"], g0["t"], rtol=0, atol=1e-9):
            raise ParseError(f"{g1_path}: time column differs from {g0_path}")
        g1 = d1["g1"]
    return BoundaryData(g0["t"], g0["g0"], g1, eps=eps)


def write_profile(path, c: CoefficientProfile, name: str = "c") -> Path:
    return write_csv(path, ["x", name], [c.x, c.values])


def read_profile(path, name: str = "c", cmax: float = 16.0) -> CoefficientProfile:
    d = read_csv(path, ["x", name])
    try:
        return CoefficientProfile(d["x"], d[name], cmax)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_trace(path, trace, seconds: bool = True) -> Path:
    """``iter,consec_err,objective,grad_norm[,seconds]``; consec_err is empty at iter 0."""
    recs = trace.records
    header = ["iter", "consec_err", "objective", "grad_norm"] + (["seconds"] if seconds else [])
    cols = [
        [str(r.n) for r in recs],
        ["" if np.isnan(r.consec_err) else FMT % r.consec_err for r in recs],
        [r.objective for r in recs],
        [r.grad_norm for r in recs],
    ]
    if seconds:
        cols.append([r.seconds for r in recs])
    return write_csv(path, header, cols)


def write_series(path, times, values, name: str = "f") -> Path:
    return write_csv(path, ["t", name], [times, values])
