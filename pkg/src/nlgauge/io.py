"""CSV and JSON serialization.

CSV layouts (one header row, floats written with 17 significant digits so
values round-trip exactly):

* Field:  ``node, x, c[...]`` with one column per channel entry, e.g.
  ``c0`` for vectors or ``c0_1`` for matrices.
* OdForm: ``i, j, x_i, x_j, c[...]`` for every ordered off-diagonal pair.
* matrix: plain ``row, col, value`` triplets for nonzero entries.

JSON container::

    {"kind": "field" | "odform", "grid": {...}, "shape": [...], "values": [...]}

with ``values`` flattened in C order.
"""
from __future__ import annotations

import csv
import json
import math
from itertools import product
from pathlib import Path

import numpy as np

from .grid import Field, OdForm, make_grid

FLOAT_FMT = "{:.17g}"


def _fmt(v) -> str:
    return FLOAT_FMT.format(float(v))


def _channel_names(shape: tuple) -> list:
    if not shape:
        return ["c"]
    return ["c" + "_".join(map(str, idx)) for idx in product(*[range(n) for n in shape])]


def field_to_csv(u: Field, path) -> Path:
    path = Path(path)
    g = u.grid
    flat = u.values.reshape(g.M, -1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x"] + _channel_names(u.channel_shape))
        for i in range(g.M):
            w.writerow([i, _fmt(g.x[i])] + [_fmt(v) for v in flat[i]])
    return path


def field_from_csv(path, grid) -> Field:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    names = rows[0][2:]
    data = np.array([[float(v) for v in r[2:]] for r in rows[1:]])
    if names == ["c"]:
        return Field(grid, data[:, 0])
    shape = tuple(int(p) + 1 for p in names[-1][1:].split("_"))
    return Field(grid, data.reshape((grid.M,) + shape))


def odform_to_csv(F: OdForm, path) -> Path:
    path = Path(path)
    g = F.grid
    flat = F.kernel.reshape(g.M, g.M, -1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x_i", "x_j"] + _channel_names(F.channel_shape))
        for i in range(g.M):
            for j in range(g.M):
                if i != j:
                    w.writerow([i, j, _fmt(g.x[i]), _fmt(g.x[j])] + [_fmt(v) for v in flat[i, j]])
    return path


def matrix_to_csv(A: np.ndarray, path, tol: float = 0.0) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for (r, c), v in np.ndenumerate(A):
            if abs(v) > tol:
                w.writerow([r, c, _fmt(v)])
    return path


def rows_to_csv(rows: list, path, columns: list | None = None) -> Path:
    """Flat dict rows (e.g. a decay table) to CSV."""
    path = Path(path)
    columns = columns or (list(rows[0].keys()) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return path


def to_container(obj) -> dict:
    if isinstance(obj, Field):
        kind, arr = "field", obj.values
    elif isinstance(obj, OdForm):
        kind, arr = "odform", obj.kernel
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return {"kind": kind, "grid": obj.grid.to_dict(), "shape": list(arr.shape),
            "values": [float(v) for v in arr.ravel()]}


def from_container(data: dict):
    g = data["grid"]
    grid = make_grid(g["half_width"], g["points"], g["geometry"], g["image_count"])
    arr = np.asarray(data["values"], dtype=float).reshape(data["shape"])
    if data["kind"] == "field":
        return Field(grid, arr)
    if data["kind"] == "odform":
        return OdForm(grid, arr)
    raise ValueError(f"unknown container kind {data['kind']!r}")


def jsonable(obj):
    """Recursively convert numpy/containers to plain JSON types; non-finite floats become strings."""
    if isinstance(obj, (Field, OdForm)):
        return to_container(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    raise TypeError(f"cannot convert {type(obj).__name__} to JSON")


def hodge_parts_to_dict(parts) -> dict:
    return {
        "s": parts.s,
        "a": to_container(parts.a),
        "B": to_container(parts.B),
        "iterations": parts.iterations,
        "residual": parts.residual,
        "exact_energy": parts.exact_energy,
        "sol_energy": parts.sol_energy,
        "total_energy": parts.total_energy,
        "pythagoras_defect": parts.pythagoras_defect,
    }


def gauge_result_to_dict(res, fields: bool = True) -> dict:
    out = res.summary()
    if res.trace:
        out["trace"] = res.trace
    if fields:
        out.update({"P": to_container(res.rotation.P), "eps": to_container(res.eps),
                    "A": to_container(res.A), "a": to_container(res.a)})
    return out


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
