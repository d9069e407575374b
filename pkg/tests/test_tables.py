"""Fixed-precision float formatting and the CSV table container."""

import numpy as np
import pytest

from qdsps.tables import DataTable, format_float, read_csv, write_csv


# ---------------------------------------------------------------------------
# number formatting: nine significant digits everywhere


def test_moderate_magnitudes_use_fixed_point():
    assert format_float(1.0) == "1.00000000"
    assert format_float(-3.6) == "-3.60000000"
    assert format_float(123456.789) == "123456.789"
    assert format_float(0.0012345678) == "0.00123456780"


def test_extreme_magnitudes_use_scientific():
    assert format_float(1.0e-4) == "1.00000000e-04"
    assert format_float(1.0e7) == "1.00000000e+07"
    assert format_float(0.0) == "0.00000000e+00"


def test_round_trip_precision():
    rng = np.random.default_rng(0)
    values = np.concatenate([
        rng.uniform(-1e5, 1e5, 50),
        rng.uniform(-1e-2, 1e-2, 50),
        10.0 ** rng.uniform(-12, 12, 50) * rng.choice([-1, 1], 50),
    ])
    for v in values:
        assert float(format_float(v)) == pytest.approx(v, rel=1e-8)


def test_non_finite_rejected():
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ValueError):
            format_float(bad)


# ---------------------------------------------------------------------------
# table container


def _table():
    return DataTable.from_columns(
        freq_ghz=np.linspace(-2, 2, 5), transmission=np.linspace(0, 1, 5)
    )


def test_column_access_and_shape():
    t = _table()
    assert t.columns == ("freq_ghz", "transmission")
    assert np.allclose(t.column("freq_ghz"), np.linspace(-2, 2, 5))
    with pytest.raises(KeyError):
        t.column("missing")


def test_validation_rules():
    with pytest.raises(ValueError):
        DataTable(columns=["a", "a"], data=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        DataTable(columns=["a,b"], data=np.zeros((3, 1)))
    with pytest.raises(ValueError):
        DataTable(columns=["a", "b"], data=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        DataTable(columns=["a"], data=np.array([[np.nan]]))


def test_csv_round_trip_through_text():
    t = _table()
    text = t.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "freq_ghz,transmission"
    back = DataTable.from_csv(text)
    assert back.columns == t.columns
    assert np.allclose(back.data, t.data, rtol=1e-8)


def test_csv_round_trip_through_file(tmp_path):
    t = DataTable.from_columns(
        tau_ns=np.linspace(0, 10, 11), g2=np.abs(np.sin(np.linspace(0, 3, 11)))
    )
    path = tmp_path / "out.csv"
    write_csv(t, path)
    back = read_csv(path)
    assert back.columns == ("tau_ns", "g2")
    assert np.allclose(back.data, t.data, rtol=1e-8)


def test_csv_parse_errors_name_the_line():
    with pytest.raises(ValueError, match="line 3"):
        DataTable.from_csv("a,b\n1.0,2.0\n1.0\n")
    with pytest.raises(ValueError, match="line 2"):
        DataTable.from_csv("a,b\nx,2.0\n")
    with pytest.raises(ValueError):
        DataTable.from_csv("")
