"""CSV and JSON input/output for fields, maps, forms and reports.

Floats are written with 17 significant digits so that reading a file back
reproduces every value bit for bit.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .domains import domain_from_dict
from .errors import ConfigError
from .fields import SampledFunction


def fmt(x):
    return format(float(x), ".17g")


def _sidecar(path):
    path = Path(path)
    return path.with_suffix(".json")


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_field(path, sampled, tolerance=None, solver=None):
    """Write grid values as CSV (one index column per real axis, then the
    value) with a JSON sidecar describing the domain."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = sampled.values
    d = values.ndim
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a}" for a in range(d)] + ["value"])
        for idx in np.ndindex(values.shape):
            w.writerow(list(idx) + [fmt(values[idx])])
    write_json(_sidecar(path), {
        "domain": sampled.domain.to_dict(),
        "tolerance": tolerance,
        "solver": solver or {},
    })
    return path


def read_field(path):
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    box = domain_from_dict(meta["domain"])
    values = np.full(box.shape, np.nan)
    with path.open(newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        d = len(header) - 1
        if d != len(box.shape):
            raise ConfigError(f"{path}: {d} index columns for a {len(box.shape)}-axis grid")
        for row in rows:
            values[tuple(int(i) for i in row[:d])] = float(row[d])
    if np.isnan(values).any():
        raise ConfigError(f"{path}: grid has missing nodes")
    return SampledFunction(box, values)


def write_map(path, gmap, stats=None):
    """Gradient map export: index, q, G(q) and Jacobian determinant."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    box = gmap.domain
    n = box.dimension
    q = box.grid()
    det = gmap.determinants
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        head = [f"i{a}" for a in range(2 * n)]
        head += [f"q{k}_{p}" for p in ("re", "im") for k in range(n)]
        head += [f"g{k}_{p}" for p in ("re", "im") for k in range(n)]
        w.writerow(head + ["det_jacobian"])
        for idx in np.ndindex(box.shape):
            qq, gg = q[idx], gmap.map_values[idx]
            row = list(idx)
            row += [fmt(v) for v in np.concatenate([qq.real, qq.imag])]
            row += [fmt(v) for v in np.concatenate([gg.real, gg.imag])]
            w.writerow(row + [fmt(det[idx])])
    write_json(_sidecar(path), {"domain": box.to_dict(), "defects": stats or {}})
    return path


def write_form(path, form):
    """Real 2-form export: one row per grid node with the flattened matrix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    W = form.real
    shape = W.shape[:-2]
    d = W.shape[-1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a}" for a in range(len(shape))] + [f"w{a}{b}" for a in range(d) for b in range(d)])
        for idx in np.ndindex(shape):
            w.writerow(list(idx) + [fmt(v) for v in W[idx].ravel()])
    return path


def write_series(path, rows):
    """Plot-ready CSV with columns x, y, series."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "series"])
        for x, y, series in rows:
            w.writerow([fmt(x), fmt(y), series])
    return path
