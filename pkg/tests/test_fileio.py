"""Serialization round trips for fields, CSV tables, JSON sidecars."""

import numpy as np
import pytest

from halfwave.fileio import (
    load_field,
    load_field_csv,
    load_json,
    load_series_csv,
    save_field,
    save_field_csv,
    save_json,
    save_series_csv,
)
from halfwave.grids import Field, Grid


@pytest.fixture()
def sample_field():
    g = Grid(128, 40.0)
    vals = np.exp(-g.nodes**2 / 8.0) * np.exp(0.25j * g.nodes)
    return Field(g, vals)


def test_field_container_round_trip(tmp_path, sample_field):
    path = tmp_path / "field.npz"
    save_field(path, sample_field, meta={"kind": "test", "tol": 1e-10})
    loaded, meta = load_field(path)
    assert loaded.grid == sample_field.grid
    assert np.array_equal(loaded.values, sample_field.values)
    assert meta == {"kind": "test", "tol": 1e-10}


def test_field_container_without_meta(tmp_path, sample_field):
    path = tmp_path / "field.npz"
    save_field(path, sample_field)
    loaded, meta = load_field(path)
    assert np.array_equal(loaded.values, sample_field.values)
    assert meta == {}


def test_field_csv_round_trip(tmp_path, sample_field):
    path = tmp_path / "field.csv"
    save_field_csv(path, sample_field)
    loaded = load_field_csv(path)
    assert loaded.grid == sample_field.grid
    assert np.allclose(loaded.values, sample_field.values, atol=1e-16)


def test_field_csv_headers_carry_grid(tmp_path, sample_field):
    path = tmp_path / "field.csv"
    save_field_csv(path, sample_field)
    text = path.read_text()
    assert "n_points = 128" in text
    assert "length" in text


def test_json_round_trip(tmp_path):
    path = tmp_path / "meta.json"
    obj = {"b": [1, 2, 3], "a": {"x": 1.5}}
    save_json(path, obj)
    assert load_json(path) == obj


def test_series_csv_round_trip(tmp_path):
    path = tmp_path / "series.csv"
    t = np.linspace(-0.5, 0.0, 11)
    lam = 0.1 + t**2
    save_series_csv(path, [("t", t), ("lam", lam)])
    back = load_series_csv(path)
    assert np.allclose(back["t"], t, atol=1e-16)
    assert np.allclose(back["lam"], lam, atol=1e-16)


def test_series_csv_rejects_ragged(tmp_path):
    with pytest.raises(ValueError):
        save_series_csv(tmp_path / "bad.csv", [("a", [1.0, 2.0]), ("b", [1.0])])
