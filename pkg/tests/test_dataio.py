"""Round-trip and formatting behavior of the kv / TSV layer."""
import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from teamlift import dataio
from teamlift.errors import ConfigError


def test_format_value_floats_round_trip_exactly():
    for x in (0.1, 1 / 3, 2.5e-17, -1234.56789, 1e300, float(np.float64(0.22) * 45)):
        assert float(dataio.format_value(x)) == x


def test_format_value_int_bool_none_date():
    assert dataio.format_value(3) == "3"
    assert dataio.format_value(True) == "true"
    assert dataio.format_value(False) == "false"
    assert dataio.format_value(None) == ""
    assert dataio.format_value("plain") == "plain"
    assert dataio.format_value(dt.date(2018, 8, 10)) == "2018-08-10"
    assert dataio.format_value((1, 2, 3)) == "1,2,3"


def test_format_value_numpy_scalars():
    assert float(dataio.format_value(float(np.float64(0.1)))) == 0.1
    assert dataio.format_value(int(np.int64(4))) == "4"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip_property(x):
    assert float(dataio.format_value(x)) == x


def test_parse_bool():
    assert dataio.parse_bool("true") is True
    assert dataio.parse_bool("false") is False
    with pytest.raises(ConfigError):
        dataio.parse_bool("maybe")


def test_kv_render_parse_round_trip():
    doc = {"alpha": 1.5, "beta.gamma": "text", "flag": True, "n": 12}
    text = dataio.render_kv(doc)
    back = dataio.parse_kv(text)
    assert back == {"alpha": "1.5", "beta.gamma": "text", "flag": "true", "n": "12"}


def test_kv_parse_skips_blank_and_comment_lines():
    text = "# comment\n\na = 1\n  b = two words \n"
    assert dataio.parse_kv(text) == {"a": "1", "b": "two words"}


def test_kv_last_entry_wins_on_repeated_key():
    assert dataio.parse_kv("a = 1\na = 2\n") == {"a": "2"}


def test_kv_rejects_missing_separator():
    with pytest.raises(ConfigError):
        dataio.parse_kv("just some text\n")


def test_kv_rejects_multiline_values():
    with pytest.raises(ValueError):
        dataio.render_kv({"a": "two\nlines"})


def test_kv_file_round_trip(tmp_path):
    path = tmp_path / "doc.kv"
    dataio.write_kv(path, {"x": 0.1, "y": -3})
    assert dataio.read_kv(path) == {"x": "0.1", "y": "-3"}


def test_table_round_trip(tmp_path):
    path = tmp_path / "t.tsv"
    rows = [["a", 1, 0.5], ["b", 2, 1 / 3]]
    dataio.write_table(path, ["name", "count", "frac"], rows)
    header, back = dataio.read_table(path)
    assert header == ["name", "count", "frac"]
    assert back[0] == ["a", "1", "0.5"]
    assert float(back[1][2]) == 1 / 3


def test_table_rejects_ragged_write(tmp_path):
    with pytest.raises(ValueError):
        dataio.write_table(tmp_path / "unused.tsv", ["a", "b"], [["only-one"]])


def test_table_rejects_ragged_read(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tb\n1\n")
    with pytest.raises(ValueError):
        dataio.read_table(path)
