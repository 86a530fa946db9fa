import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvmem.io import RunManifest, read_csv, write_csv, write_json


def test_csv_format(tmp_path):
    p = write_csv(tmp_path / "sub" / "a.csv", ["x", "y"], [(1, 0.1), (np.int64(2), np.float64(1 / 3))], "note=1")
    raw = p.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "# note=1"
    assert lines[1] == "x,y"
    assert lines[3] == f"2,{1 / 3!r}"


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_csv_round_trip_is_exact(tmp_path_factory, xs):
    p = tmp_path_factory.mktemp("rt") / "r.csv"
    write_csv(p, ["v"], [(x,) for x in xs])
    header, data = read_csv(p)
    assert header == ["v"]
    np.testing.assert_array_equal(data[:, 0], xs)


def test_json_sorted_and_nan_safe(tmp_path):
    p = write_json(tmp_path / "a.json", {"b": np.float64(math.nan), "a": np.arange(3), "c": np.bool_(True),
                                        "z": 1 + 2j, "inf": [math.inf, 1.0]})
    text = p.read_text()
    d = json.loads(text)
    assert list(d) == sorted(d)
    assert d["b"] is None and d["inf"] == [None, 1.0]
    assert d["a"] == [0, 1, 2] and d["c"] is True and d["z"] == {"re": 1.0, "im": 2.0}
    with pytest.raises(TypeError):
        write_json(tmp_path / "b.json", {"x": object()})


def test_manifest(tmp_path):
    m = RunManifest("fit", "abc", 0)
    m.outputs += ["z.csv", "a.csv"]
    d = json.loads(m.finish(tmp_path).read_text())
    assert d["outputs"] == ["a.csv", "z.csv"]
    assert d["scenario_hash"] == "abc" and d["wall_time_s"] >= 0
    assert "_t0" not in d
