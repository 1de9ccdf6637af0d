import numpy as np
import pytest

from teq.generators import laplace1d
from teq.hmatrix import band_from_dense
from teq.io import FormatError, load_matrix, read_banded, read_tensor, write_banded, write_tensor

from conftest import spd_banded


@pytest.mark.parametrize("shape", [(5,), (3, 4), (2, 3, 4), (1, 1, 1, 2)])
def test_tensor_roundtrip(tmp_path, shape, rng):
    X = rng.standard_normal(shape)
    path = tmp_path / "x.bin"
    write_tensor(path, X)
    np.testing.assert_array_equal(read_tensor(path), X)


def test_tensor_layout(tmp_path):
    X = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "x.bin"
    write_tensor(path, X)
    raw = path.read_bytes()
    head = np.frombuffer(raw[:24], dtype="<i8")
    np.testing.assert_array_equal(head, [2, 2, 3])
    # first mode fastest
    np.testing.assert_array_equal(np.frombuffer(raw[24:], dtype="<f8"), [0, 3, 1, 4, 2, 5])


def test_tensor_errors(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x01")
    with pytest.raises(FormatError):
        read_tensor(p)
    p.write_bytes(np.array([2, 2, 2], dtype="<i8").tobytes() + b"\x00" * 8)
    with pytest.raises(FormatError):
        read_tensor(p)
    p.write_bytes(np.array([0], dtype="<i8").tobytes())
    with pytest.raises(FormatError):
        read_tensor(p)


def test_banded_roundtrip(tmp_path, rng):
    A = spd_banded(12, 3, rng)
    ab = band_from_dense(A, 3)
    path = tmp_path / "a.txt"
    write_banded(path, ab)
    np.testing.assert_array_equal(read_banded(path), ab)
    H = load_matrix(path, n_min=4)
    np.testing.assert_array_equal(H.dense(), A)
    assert H.is_banded


def test_banded_text_format(tmp_path):
    path = tmp_path / "lap.txt"
    path.write_text("3 1\n2 -1\n2 -1\n2 0\n")
    np.testing.assert_array_equal(read_banded(path), laplace1d(3))


@pytest.mark.parametrize("text", ["", "3\n", "2 1\n1 0\n", "2 1\n1 0\n1\n", "x y\n"])
def test_banded_errors(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(FormatError):
        read_banded(path)


def test_load_dense_binary(tmp_path, rng):
    A = spd_banded(20, 2, rng)
    path = tmp_path / "a.bin"
    write_tensor(path, A)
    H = load_matrix(path, n_min=4)
    np.testing.assert_allclose(H.dense(), A, atol=1e-13)
    write_tensor(path, np.ones((2, 3)))
    with pytest.raises(FormatError):
        load_matrix(path)
