"""Dataset construction, CSV ingestion, and validation contracts."""

import numpy as np
import pytest

from icmiv import Dataset, ValidationError, load_csv, save_csv, standardize_instruments


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _firm_like_csv(path, n=150, p=11, seed=0):
    rng = np.random.default_rng(seed)
    header = ["output"] + [f"v{j}" for j in range(p)]
    data = rng.standard_normal((n, p + 1))
    _write_csv(path, header, data.tolist())
    return header


def test_load_csv_moderately_sized_instrument_set(tmp_path):
    # all covariates double as instruments; no excluded instrument at all
    path = tmp_path / "firms.csv"
    header = _firm_like_csv(path)
    x_cols = header[1:]
    ds = load_csv(path, y_col="output", x_cols=x_cols, z_cols=x_cols, endog_cols=[x_cols[0]])
    assert ds.n == 150
    assert ds.p_z == 11
    assert ds.p_x == 12  # intercept + 11
    assert ds.x_names[0] == "const"
    assert ds.endog_mask[1] and not ds.endog_mask[0]


def test_load_csv_intercept_only(tmp_path):
    path = tmp_path / "tiny.csv"
    _write_csv(path, ["y", "z"], [[1.0, 0.1], [2.0, 0.4], [3.5, -0.2], [0.5, 1.1]])
    ds = load_csv(path, y_col="y", x_cols=[], z_cols=["z"])
    assert ds.p_x == 1
    assert np.all(ds.X == 1.0)


def test_load_csv_rejects_nan_cell(tmp_path):
    path = tmp_path / "bad.csv"
    _write_csv(path, ["y", "z"], [[1.0, 0.1], [2.0, "NaN"], [3.0, 0.7], [4.0, -1.0]])
    with pytest.raises(ValidationError, match="non-finite"):
        load_csv(path, y_col="y", x_cols=[], z_cols=["z"])


def test_load_csv_missing_column_is_named(tmp_path):
    path = tmp_path / "cols.csv"
    _write_csv(path, ["y", "z"], [[1, 2]] * 5)
    with pytest.raises(ValidationError, match="'w'"):
        load_csv(path, y_col="y", x_cols=["w"], z_cols=["z"])


def test_load_csv_parse_error_carries_row_index(tmp_path):
    path = tmp_path / "parse.csv"
    _write_csv(path, ["y", "z"], [[1.0, 0.3], [2.0, "abc"], [3.0, 0.5], [1.0, 0.1]])
    with pytest.raises(ValidationError, match="row 2"):
        load_csv(path, y_col="y", x_cols=[], z_cols=["z"])


def test_load_csv_endog_must_be_covariate(tmp_path):
    path = tmp_path / "e.csv"
    _write_csv(path, ["y", "x", "z"], [[1, 2, 3]] * 6)
    # x constant is fine for X; z varies
    _write_csv(path, ["y", "x", "z"], [[i, 2 * i, 3 + i] for i in range(6)])
    with pytest.raises(ValidationError, match="endogenous"):
        load_csv(path, y_col="y", x_cols=["x"], z_cols=["z"], endog_cols=["z"])


def test_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    n = 40
    x = rng.standard_normal(n) * 1e3
    z = rng.standard_normal(n) / 7.0
    y = rng.standard_normal(n) + 1e-9
    ds = Dataset(
        y,
        np.column_stack([np.ones(n), x]),
        np.column_stack([x, z]),
        ("const", "x"),
        ("x", "w"),
        np.array([False, True]),
    )
    out = tmp_path / "round.csv"
    save_csv(ds, out)
    ds2 = load_csv(out, y_col="y", x_cols=["x"], z_cols=["x", "w"], endog_cols=["x"])
    assert np.array_equal(ds.y, ds2.y)
    assert np.array_equal(ds.X, ds2.X)
    assert np.array_equal(ds.Z, ds2.Z)


def test_dataset_invariants():
    n = 10
    rng = np.random.default_rng(0)
    z = rng.standard_normal(n)
    ones = np.ones(n)
    good = dict(
        y=rng.standard_normal(n),
        X=np.column_stack([ones, z]),
        Z=z[:, None],
        x_names=("const", "x"),
        z_names=("z",),
        endog_mask=np.array([False, False]),
    )
    Dataset(**good)

    bad = dict(good, X=np.column_stack([2 * ones, z]))
    with pytest.raises(ValidationError, match="intercept"):
        Dataset(**bad)

    bad = dict(good, Z=np.full((n, 1), 3.0))
    with pytest.raises(ValidationError, match="constant"):
        Dataset(**bad)

    bad = dict(good, endog_mask=np.array([True, False]))
    with pytest.raises(ValidationError, match="intercept"):
        Dataset(**bad)

    bad = dict(good, y=np.full(n, np.inf))
    with pytest.raises(ValidationError, match="non-finite"):
        Dataset(**bad)

    # too few rows relative to p_x
    with pytest.raises(ValidationError, match="n >="):
        Dataset(
            y=np.arange(3.0),
            X=np.column_stack([np.ones(3), np.arange(3.0)]),
            Z=np.arange(3.0)[:, None],
            x_names=("const", "x"),
            z_names=("z",),
            endog_mask=np.array([False, False]),
        )


def test_dataset_is_readonly():
    n = 8
    z = np.arange(float(n))
    ds = Dataset(
        np.ones(n), np.column_stack([np.ones(n), z]), z[:, None],
        ("const", "x"), ("z",), np.array([False, False]),
    )
    with pytest.raises(ValueError):
        ds.y[0] = 5.0
    with pytest.raises(ValueError):
        ds.Z[0, 0] = 5.0


def test_atan_standardization():
    n = 8
    z = np.array([0.0, 1e6, -1e6, 0.5, -0.5, 2.0, 3.0, -7.0])
    ds = Dataset(
        np.ones(n), np.column_stack([np.ones(n), z]), z[:, None],
        ("const", "x"), ("z",), np.array([False, False]),
    )
    out = standardize_instruments(ds, "atan")
    assert out.Z[0, 0] == 0.0
    assert abs(out.Z[1, 0] - np.pi / 2) < 1e-5
    assert np.all(np.abs(out.Z) < np.pi / 2)
    # X and y untouched
    assert np.array_equal(out.X, ds.X)
    assert np.array_equal(out.y, ds.y)

    same = standardize_instruments(ds, "none")
    assert np.array_equal(same.Z, ds.Z)
    assert np.array_equal(same.y, ds.y)

    with pytest.raises(ValueError, match="method"):
        standardize_instruments(ds, "log")
