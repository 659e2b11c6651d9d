"""File format round trips and validation for the CSV/JSON loaders."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from stkrig import ModelParams, TimeSeriesPanel
from stkrig.io import (
    PanelFormatError,
    load_locations,
    load_model,
    load_panel,
    load_series,
    load_single_series,
    save_panel,
    write_json,
)


def _panel(seed=0, m=4, n=12, d=2):
    rng = np.random.default_rng(seed)
    return TimeSeriesPanel(
        locations=rng.uniform(0.0, 3.0, size=(m, d)),
        observations=rng.standard_normal((m, n)),
        site_ids=tuple("s%d" % i for i in range(m)),
    )


def test_save_load_round_trip(tmp_path):
    panel = _panel(seed=5)
    loc_path, series_path = save_panel(panel, str(tmp_path / "out"))
    loaded = load_panel(loc_path, series_path)
    # repr() of a float is exact, so the round trip is bitwise
    npt.assert_array_equal(loaded.locations, panel.locations)
    npt.assert_array_equal(loaded.observations, panel.observations)
    assert loaded.site_ids == panel.site_ids


def test_series_columns_reordered_by_name(tmp_path):
    loc = tmp_path / "loc.csv"
    ser = tmp_path / "ser.csv"
    loc.write_text("site_id,x1\na,0.0\nb,1.0\n")
    # columns appear in the opposite order from the locations file
    ser.write_text("t,b,a\n1,10.0,1.0\n2,20.0,2.0\n")
    panel = load_panel(str(loc), str(ser))
    npt.assert_array_equal(panel.observations[0], [1.0, 2.0])
    npt.assert_array_equal(panel.observations[1], [10.0, 20.0])


def test_locations_header_and_rows_validated(tmp_path):
    path = tmp_path / "loc.csv"

    path.write_text("")
    with pytest.raises(PanelFormatError, match="empty"):
        load_locations(str(path))

    path.write_text("name,x1\na,0.0\n")
    with pytest.raises(PanelFormatError, match="site_id"):
        load_locations(str(path))

    path.write_text("site_id\na\n")
    with pytest.raises(PanelFormatError, match="site_id"):
        load_locations(str(path))

    path.write_text("site_id,x1,x2\na,0.0\n")
    with pytest.raises(PanelFormatError, match="expected 3"):
        load_locations(str(path))

    path.write_text("site_id,x1\na,0.0\na,1.0\n")
    with pytest.raises(PanelFormatError, match="duplicate site id"):
        load_locations(str(path))

    path.write_text("site_id,x1\n,0.0\n")
    with pytest.raises(PanelFormatError, match="blank"):
        load_locations(str(path))

    path.write_text("site_id,x1\na,zero\n")
    with pytest.raises(PanelFormatError, match="cannot parse"):
        load_locations(str(path))

    path.write_text("site_id,x1\na,inf\n")
    with pytest.raises(PanelFormatError, match="not finite"):
        load_locations(str(path))

    path.write_text("site_id,x1\n")
    with pytest.raises(PanelFormatError, match="no sites"):
        load_locations(str(path))


def test_series_validated(tmp_path):
    path = tmp_path / "ser.csv"
    ids = ["a", "b"]

    path.write_text("")
    with pytest.raises(PanelFormatError, match="empty"):
        load_series(str(path), ids)

    path.write_text("time,a,b\n1,0,0\n2,0,0\n")
    with pytest.raises(PanelFormatError, match="must start with 't'"):
        load_series(str(path), ids)

    path.write_text("t,a\n1,0\n2,0\n")
    with pytest.raises(PanelFormatError, match="missing \\['b'\\]"):
        load_series(str(path), ids)

    path.write_text("t,a,b,c\n1,0,0,0\n2,0,0,0\n")
    with pytest.raises(PanelFormatError, match="unexpected \\['c'\\]"):
        load_series(str(path), ids)

    path.write_text("t,a,b\n1,0\n")
    with pytest.raises(PanelFormatError, match="has 2 fields"):
        load_series(str(path), ids)

    path.write_text("t,a,b\n1,x,0\n2,0,0\n")
    with pytest.raises(PanelFormatError, match="cannot parse"):
        load_series(str(path), ids)

    path.write_text("t,a,b\n1,nan,0\n2,0,0\n")
    with pytest.raises(PanelFormatError, match="not finite"):
        load_series(str(path), ids)

    path.write_text("t,a,b\n1,0,0\n")
    with pytest.raises(PanelFormatError, match="at least two time points"):
        load_series(str(path), ids)


def test_load_panel_wraps_panel_errors(tmp_path):
    loc = tmp_path / "loc.csv"
    ser = tmp_path / "ser.csv"
    # two sites at the same coordinates: rejected by the panel constructor,
    # surfaced as a format error naming both files
    loc.write_text("site_id,x1\na,0.0\nb,0.0\n")
    ser.write_text("t,a,b\n1,0,0\n2,1,1\n")
    with pytest.raises(PanelFormatError, match="loc.csv"):
        load_panel(str(loc), str(ser))


def test_load_model_bare_and_wrapped(tmp_path):
    params = ModelParams(sigma_e2=1.5, nu=1.0, c_coeffs=(0.2, 0.4), nugget=0.1)
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps(params.to_dict()))
    wrapped = tmp_path / "wrapped.json"
    wrapped.write_text(json.dumps({"params": params.to_dict(), "command": "estimate"}))
    for path in (bare, wrapped):
        loaded = load_model(str(path))
        assert loaded.sigma_e2 == params.sigma_e2
        assert loaded.c_coeffs == params.c_coeffs
        assert loaded.nugget == params.nugget

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([1, 2, 3]))
    with pytest.raises(PanelFormatError, match="JSON object"):
        load_model(str(bad))

    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"sigma_e2": 1.0}))
    with pytest.raises(PanelFormatError, match="missing required key"):
        load_model(str(incomplete))


def test_load_single_series(tmp_path):
    path = tmp_path / "series.csv"
    path.write_text("t,zhat\n1,1.5\n2,-0.5\n3,2.25\n")
    npt.assert_array_equal(load_single_series(str(path)), [1.5, -0.5, 2.25])

    path.write_text("t\n1\n2\n")
    with pytest.raises(PanelFormatError, match="header"):
        load_single_series(str(path))

    path.write_text("h,zhat\n1,1.5\n2,2.5\n")
    with pytest.raises(PanelFormatError, match="first column"):
        load_single_series(str(path))

    path.write_text("t,zhat\n1,abc\n")
    with pytest.raises(PanelFormatError, match="cannot parse"):
        load_single_series(str(path))

    path.write_text("t,zhat\n1,1.0\n")
    with pytest.raises(PanelFormatError, match="at least two"):
        load_single_series(str(path))


def test_write_json_creates_parents_and_ends_with_newline(tmp_path):
    path = tmp_path / "nested" / "deeper" / "out.json"
    returned = write_json(str(path), {"alpha": 1})
    assert returned == str(path)
    text = path.read_text()
    assert text.endswith("\n")
    assert json.loads(text) == {"alpha": 1}


def test_panel_format_error_is_value_error():
    assert issubclass(PanelFormatError, ValueError)
