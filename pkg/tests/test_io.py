import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tomocouple.io import header_path, read_config, read_pgm, read_raw, write_config, write_pgm, write_raw


@pytest.mark.parametrize("kind, keys", [("image", ("height", "width")), ("sinogram", ("angles", "cells"))])
def test_raw_roundtrip_and_header(tmp_path, kind, keys):
    a = np.arange(12, dtype=np.float64).reshape(3, 4) / 7
    p = tmp_path / "a.raw"
    write_raw(p, a, kind)
    back, found = read_raw(p)
    assert found == kind
    np.testing.assert_array_equal(back, a.astype(np.float32))
    hdr = read_config(header_path(p))
    assert (hdr[keys[0]], hdr[keys[1]], hdr["dtype"]) == ("3", "4", "float32le")
    assert p.stat().st_size == 12 * 4


@settings(max_examples=20, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_raw_roundtrip_property(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("raw") / "x.raw"
    write_raw(p, a, "sinogram")
    np.testing.assert_array_equal(read_raw(p)[0], a)


def test_raw_rejects_bad_input(tmp_path):
    with pytest.raises(ValueError):
        write_raw(tmp_path / "x.raw", np.zeros(3), "image")
    with pytest.raises(ValueError):
        write_raw(tmp_path / "x.raw", np.zeros((2, 2)), "volume")
    p = tmp_path / "y.raw"
    write_raw(p, np.zeros((2, 2)), "image")
    np.zeros(3, dtype="<f4").tofile(p)
    with pytest.raises(ValueError, match="header says"):
        read_raw(p)


def test_config_comments_and_errors(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\na = 1  # trailing\n\nb.c=x=y\n", encoding="utf-8")
    assert read_config(p) == {"a": "1", "b.c": "x=y"}
    p.write_text("novalue\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":1:"):
        read_config(p)
    write_config(p, {"k": 2.5})
    assert read_config(p) == {"k": "2.5"}


def test_pgm_window_and_roundtrip(tmp_path):
    a = np.array([[-1.0, 0.0], [0.5, 2.0]])
    p = tmp_path / "t.pgm"
    write_pgm(p, a, 0.0, 1.0)
    assert p.read_bytes().startswith(b"P5\n2 2\n65535\n")
    np.testing.assert_array_equal(read_pgm(p), [[0, 0], [32768, 65535]])
