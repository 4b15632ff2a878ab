"""CSV/JSON/SVG output and ingestion of single-country I-O tables.

Ingestion layout (UTF-8 CSV)::

    SECTOR,Agri,Manu,FINAL_DEMAND
    Agri,0,1,1
    Manu,2,0,1
    VALUE_ADDED,0,2,

The header names the sectors plus a ``FINAL_DEMAND`` column (any position
after the first cell).  The next N rows hold the flow matrix, labelled in
header order.  A trailing ``VALUE_ADDED`` row is optional; when present
the input-side identity is checked against it, otherwise value added is
derived from the identities.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .experiments import ExperimentError, fit_scatter
from .measures import downstreamness_true, rank1_estimators, upstreamness_true
from .model import IoTable, ModelError, build_pair

FINAL_DEMAND = "FINAL_DEMAND"
VALUE_ADDED = "VALUE_ADDED"


class IngestError(ValueError):
    pass


def fmt(x) -> str:
    """Locale-independent text for a number; floats keep 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def svg_scatter(series, title: str, xlabel: str, ylabel: str, width: int = 480, height: int = 480) -> str:
    """Static scatter plot with a slope-1 reference line through the first series' centroid.

    ``series`` is a list of ``(label, x, y, colour)``.
    """
    pad = 60
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    lo = float(min(xs.min(), ys.min()))
    hi = float(max(xs.max(), ys.max()))
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    lo, hi = lo - 0.05 * span, hi + 0.05 * span

    def px(v):
        return pad + (v - lo) / (hi - lo) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 15 {height / 2:.1f})">{ylabel}</text>',
    ]
    for tick in np.linspace(lo, hi, 5):
        out.append(f'<text x="{px(tick):.1f}" y="{height - pad + 16}" text-anchor="middle">{tick:.3g}</text>')
        out.append(f'<text x="{pad - 6}" y="{py(tick) + 4:.1f}" text-anchor="end">{tick:.3g}</text>')
    for _, x, y, colour in series:
        for a, b in zip(np.asarray(x, float), np.asarray(y, float)):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2" fill="{colour}" fill-opacity="0.6"/>')
    # slope-1 line through the centroid of the first series, clipped to the box
    cx, cy = float(np.mean(series[0][1])), float(np.mean(series[0][2]))
    x0, x1 = max(lo, lo + cx - cy), min(hi, hi + cx - cy)
    out.append(
        f'<line x1="{px(x0):.2f}" y1="{py(x0 - cx + cy):.2f}" x2="{px(x1):.2f}" y2="{py(x1 - cx + cy):.2f}" '
        'stroke="black" stroke-width="2.5"/>'
    )
    for n, (label, *_rest, colour) in enumerate(series):
        y = pad + 16 * n
        out.append(f'<circle cx="{pad + 12}" cy="{y}" r="4" fill="{colour}"/>')
        out.append(f'<text x="{pad + 22}" y="{y + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path


@dataclass(frozen=True, eq=False)
class EmpiricalTable:
    sector_names: tuple[str, ...]
    flows: np.ndarray
    final_demand: np.ndarray
    value_added: np.ndarray
    density: float

    @property
    def gross_output(self) -> np.ndarray:
        return self.flows.sum(axis=1) + self.final_demand

    def to_io_table(self) -> IoTable:
        return IoTable.from_flows(self.flows, self.final_demand)


def _number(cell, where):
    try:
        x = float(cell)
    except ValueError:
        raise IngestError(f"{where}: not a number: {cell!r}") from None
    if not math.isfinite(x):
        raise IngestError(f"{where}: non-finite value {cell!r}")
    return x


def ingest_table(path, format: str = "csv", rtol: float = 1e-6) -> EmpiricalTable:
    if format != "csv":
        raise IngestError(f"unsupported table format {format!r}; only 'csv' is implemented")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if FINAL_DEMAND not in header[1:]:
        raise IngestError(f"{path}: header has no {FINAL_DEMAND} column")
    fd_col = header.index(FINAL_DEMAND, 1)
    sector_cols = [j for j in range(1, len(header)) if j != fd_col]
    names = tuple(header[j] for j in sector_cols)
    n = len(names)
    if n == 0:
        raise IngestError(f"{path}: no sector columns")
    body = rows[1:]
    va_row = None
    if body and body[-1][0].strip() == VALUE_ADDED:
        va_row = body.pop()
    if len(body) != n:
        raise IngestError(f"{path}: {n} sector columns but {len(body)} flow rows (dimension mismatch)")
    flows = np.empty((n, n))
    fd = np.empty(n)
    for i, row in enumerate(body):
        label = row[0].strip()
        if label != names[i]:
            raise IngestError(f"{path}: row {i + 2} is labelled {label!r}, expected {names[i]!r}")
        if len(row) != len(header):
            raise IngestError(f"{path}: row {label!r} has {len(row)} cells, header has {len(header)}")
        for k, j in enumerate(sector_cols):
            flows[i, k] = _number(row[j], f"flow {label!r} -> {names[k]!r}")
            if flows[i, k] < 0:
                raise IngestError(f"negative flow in cell ({label!r}, {names[k]!r}): {row[j]}")
        fd[i] = _number(row[fd_col], f"final demand of {label!r}")
        if fd[i] < 0:
            raise IngestError(f"negative final demand for {label!r}: {row[fd_col]}")
    y = flows.sum(axis=1) + fd
    derived_va = y - flows.sum(axis=0)
    if va_row is None:
        va = derived_va
    else:
        if len(va_row) < len(header) - 1:
            raise IngestError(f"{path}: {VALUE_ADDED} row is too short")
        va = np.array([_number(va_row[j], f"value added of {names[k]!r}") for k, j in enumerate(sector_cols)])
        gap = np.abs(va - derived_va)
        bad = np.flatnonzero(gap > rtol * np.maximum(np.abs(y), 1e-300))
        if bad.size:
            report = "; ".join(
                f"row {names[i]!r}: output {y[i]:.17g} vs input {flows[:, i].sum() + va[i]:.17g}" for i in bad
            )
            raise IngestError(f"accounting identity violated (rtol={rtol}): {report}")
    density = float(np.count_nonzero(flows)) / flows.size
    for arr in (flows, fd, va):
        arr.flags.writeable = False
    return EmpiricalTable(names, flows, fd, va, density)


def write_table(table: EmpiricalTable, path) -> Path:
    header = ["SECTOR", *table.sector_names, FINAL_DEMAND]
    rows = [[name, *table.flows[i], table.final_demand[i]] for i, name in enumerate(table.sector_names)]
    rows.append([VALUE_ADDED, *table.value_added, ""])
    return write_csv(path, header, rows)


@dataclass(frozen=True)
class EmpiricalMeasures:
    sector_names: tuple[str, ...]
    u1: np.ndarray
    d1: np.ndarray
    u_tilde: np.ndarray
    d_tilde: np.ndarray
    density: float
    slope: float | None

    def rows(self):
        for k, name in enumerate(self.sector_names):
            yield name, self.u1[k], self.d1[k], self.u_tilde[k], self.d_tilde[k]


def measure_empirical(table: EmpiricalTable) -> EmpiricalMeasures:
    try:
        pair = build_pair(table.to_io_table())
    except ModelError as exc:
        raise IngestError(str(exc)) from exc
    u1 = upstreamness_true(pair.a_u).values
    d1 = downstreamness_true(pair.a_d).values
    ut, dt = rank1_estimators(pair)
    try:
        slope = fit_scatter(u1, d1).ols_slope
    except (ValueError, ExperimentError):
        slope = None
    return EmpiricalMeasures(table.sector_names, u1, d1, ut.values, dt.values, table.density, slope)
