"""Serialization: binary field container, CSV tables, JSON sidecars."""

import csv
import json

import numpy as np

from .grids import Grid, Field

FIELD_FORMAT = "halfwave-field-v1"


def save_field(path, field, meta=None):
    """Write a field to a self-describing .npz container."""
    payload = {
        "format": np.array(FIELD_FORMAT),
        "n_points": np.array(field.grid.n_points),
        "length": np.array(field.grid.length),
        "values": field.values,
    }
    if meta is not None:
        payload["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_field(path):
    """Read a field container; returns (Field, meta dict)."""
    with np.load(path, allow_pickle=False) as data:
        fmt = str(data["format"])
        if fmt != FIELD_FORMAT:
            raise ValueError("unrecognized field container format %r" % fmt)
        grid = Grid(int(data["n_points"]), float(data["length"]))
        field = Field(grid, data["values"])
        meta = json.loads(str(data["meta"])) if "meta" in data else {}
    return field, meta


def save_field_csv(path, field):
    """Write x, Re, Im columns; grid parameters go into comment headers."""
    with open(path, "w", newline="") as fh:
        fh.write("# %s\n" % FIELD_FORMAT)
        fh.write("# n_points = %d\n" % field.grid.n_points)
        fh.write("# length = %.17e\n" % field.grid.length)
        writer = csv.writer(fh)
        writer.writerow(["x", "re", "im"])
        for x, v in zip(field.grid.nodes, field.values):
            writer.writerow(["%.17e" % x, "%.17e" % v.real, "%.17e" % v.imag])


def load_field_csv(path):
    n_points = None
    length = None
    rows = []
    with open(path, "r", newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    key = key.strip()
                    if key == "n_points":
                        n_points = int(val)
                    elif key == "length":
                        length = float(val)
                continue
            if line.startswith("x,"):
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    if n_points is None or length is None:
        raise ValueError("CSV field file lacks grid parameters in headers")
    if len(rows) != n_points:
        raise ValueError("CSV row count %d does not match n_points %d" % (len(rows), n_points))
    values = np.array([re + 1j * im for _, re, im in rows])
    return Field(Grid(n_points, length), values)


def save_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path, "r") as fh:
        return json.load(fh)


def save_series_csv(path, columns):
    """Write named 1-d arrays as CSV columns.  `columns` is a list of
    (name, array) pairs; all arrays must share a length."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(arr, dtype=float) for _, arr in columns]
    n = len(arrays[0])
    for name, arr in zip(names, arrays):
        if len(arr) != n:
            raise ValueError("column %r has length %d, expected %d" % (name, len(arr), n))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            writer.writerow(["%.17e" % arr[i] for arr in arrays])


def load_series_csv(path):
    with open(path, "r", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        names = next(reader)
        data = [[] for _ in names]
        for row in reader:
            for slot, item in zip(data, row):
                slot.append(float(item))
    return {name: np.array(vals) for name, vals in zip(names, data)}
