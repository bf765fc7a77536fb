import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlharnack import DomainGrid
from nlharnack import io


def test_fmt_forms():
    assert io.fmt(True) == "true" and io.fmt(None) == ""
    assert io.fmt(0.1) == "0.1" and io.fmt(np.float64(0.25)) == "0.25"
    assert io.fmt(math.nan) == "nan" and io.fmt(-math.inf) == "-inf"
    assert io.fmt(np.int64(3)) == "3"


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=50))
def test_field_text_roundtrip(values):
    text = io.field_text(values)
    back = [float(line) for line in text.splitlines()]
    assert back == [float(v) for v in values]


def test_read_field_skips_comments(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("# header\n1.5\n\n2.5\n")
    np.testing.assert_array_equal(io.read_field(p), [1.5, 2.5])
    p.write_text("1.0\nabc\n")
    with pytest.raises(ValueError, match="not a float"):
        io.read_field(p)


def test_atomic_write_and_csv(tmp_path):
    p = tmp_path / "sub" / "x.csv"
    io.write_csv(p, ("a", "b"), [(1, 0.5), ("q,r", None)])
    assert p.read_text() == 'a,b\n1,0.5\n"q,r",\n'
    assert list((tmp_path / "sub").iterdir()) == [p]


def test_slice_1d_in_2d():
    grid = DomainGrid(((0.0, 1.0), (0.0, 2.0)), 0.25)
    vals = grid.points[:, 0] + 10 * grid.points[:, 1]
    x, v = io.slice_1d(grid, vals, axis=0, at=1.0)
    assert np.all(np.diff(x) > 0) and len(x) == 4
    np.testing.assert_allclose(v - x, v[0] - x[0])
    y, w = io.slice_1d(grid, vals, axis=1)
    assert len(y) == 8
