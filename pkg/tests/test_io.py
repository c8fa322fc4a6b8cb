import math

import numpy as np

from squeezed_laser import io


def test_fmt():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(3) == "3"
    assert io.fmt(True) == "1"
    assert io.fmt(float("nan")) == "nan"
    assert io.fmt(-math.inf) == "-inf"
    assert float(io.fmt(math.pi)) == math.pi


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(7, 3)) * 10.0 ** rng.integers(-8, 8, size=(7, 3))
    meta = {"name": "demo", "params": {"r": 0.5, "z": 1 + 2j, "arr": np.arange(3)}, "bad": float("inf")}
    path = io.write_csv(tmp_path / "sub" / "out.csv", ["a", "b", "c"], data, meta)
    back_meta, cols, back = io.read_csv(path)
    assert cols == ["a", "b", "c"]
    assert np.array_equal(back, data)
    assert back_meta["params"] == {"r": 0.5, "z": [1.0, 2.0], "arr": [0, 1, 2]}
    assert back_meta["bad"] == "inf"


def test_header_is_comment_block(tmp_path):
    path = io.write_csv(tmp_path / "x.csv", ["t"], [[1.0]], {"k": 1})
    lines = path.read_text().splitlines()
    assert all(line.startswith("#") for line in lines[:-2])
    assert lines[-2:] == ["t", "1"]
