import json

import numpy as np
import pytest

from nvsparse.io import (PGM_MAXVAL, config_hash, dumps, read_csv, read_pgm, to_counts, write_csv,
                         write_json, read_json, write_pgm)


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_roundtrip_within_quantization(tmp_path, binary):
    v = np.random.default_rng(0).uniform(size=(7, 13))
    path = tmp_path / "a.pgm"
    write_pgm(path, v, binary=binary)
    back = read_pgm(path)
    assert back.shape == (7, 13)
    assert np.max(np.abs(back - v)) <= 0.5 / PGM_MAXVAL + 1e-12
    assert path.read_bytes().startswith(b"P5\n13 7\n65535\n" if binary else b"P2\n13 7\n65535\n")


def test_pgm_binary_layout_big_endian(tmp_path):
    path = tmp_path / "b.pgm"
    write_pgm(path, np.array([[0.0, 1.0]]))
    assert path.read_bytes().endswith(b"\x00\x00\xff\xff")


def test_pgm_reader_handles_comments_and_bad_magic(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P2\n# comment\n2 1\n# another\n100\n0 100\n")
    assert np.allclose(read_pgm(p), [[0.0, 1.0]])
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n65535\n\x00")
    with pytest.raises(ValueError):
        read_pgm(p)


def test_counts_clip():
    assert to_counts([-1.0, 0.5, 2.0]).tolist() == [0, 32768, 65535]


def test_csv_roundtrip_exact_floats(tmp_path):
    path = tmp_path / "t.csv"
    x = 0.1 + 0.2
    write_csv(path, ["a", "b"], [[x, np.int64(3)], [float("inf"), "s"]])
    rows = read_csv(path)
    assert float(rows[0]["a"]) == x and rows[0]["b"] == "3"
    assert rows[1]["a"] == "inf"
    assert b"\r" not in path.read_bytes()


def test_json_handles_numpy_and_nonfinite(tmp_path):
    obj = {"b": np.float64(1.5), "a": np.arange(3), "c": float("inf"), "d": float("nan")}
    text = dumps(obj)
    back = json.loads(text)
    assert back == {"a": [0, 1, 2], "b": 1.5, "c": "inf", "d": "nan"}
    assert text.index('"a"') < text.index('"b"')
    write_json(tmp_path / "x.json", obj)
    assert read_json(tmp_path / "x.json") == back


def test_config_hash_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
