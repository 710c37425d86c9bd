import numpy as np
import pytest

from qosdiff.checkpoint import MAGIC, load_arrays, save_arrays


def test_roundtrip_preserves_values_and_order(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {
        "alpha": rng.standard_normal((3, 4)),
        "beta": rng.standard_normal(7),
        "gamma": np.array(2.5),
    }
    path = tmp_path / "model.ckpt"
    save_arrays(path, arrays)
    loaded = load_arrays(path)
    assert list(loaded) == ["alpha", "beta", "gamma"]
    for name in arrays:
        np.testing.assert_array_equal(loaded[name], arrays[name])
        assert loaded[name].dtype == np.float64


def test_header_is_readable_text(tmp_path):
    path = tmp_path / "model.ckpt"
    save_arrays(path, {"w": np.ones((2, 2))})
    header = path.read_bytes().split(b"DATA\n")[0].decode("ascii")
    lines = header.splitlines()
    assert lines[0] == MAGIC
    assert lines[1] == "w,2 2"


def test_payload_is_little_endian_float64(tmp_path):
    path = tmp_path / "model.ckpt"
    save_arrays(path, {"w": np.array([1.0, -2.0])})
    blob = path.read_bytes()
    payload = blob[blob.index(b"DATA\n") + 5:]
    np.testing.assert_array_equal(
        np.frombuffer(payload, dtype="<f8"), [1.0, -2.0]
    )


def test_non_checkpoint_file_rejected(tmp_path):
    path = tmp_path / "bogus.ckpt"
    path.write_bytes(b"something else\nDATA\n")
    with pytest.raises(ValueError, match="checkpoint"):
        load_arrays(path)


def test_empty_mapping_roundtrip(tmp_path):
    path = tmp_path / "empty.ckpt"
    save_arrays(path, {})
    assert load_arrays(path) == {}
