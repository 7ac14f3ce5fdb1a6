import gzip
import math
import struct

import numpy as np
import pytest

from dimreader import datasets
from dimreader.exceptions import EmptyDataset, NonNumericCell, ParseError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def idx_bytes(arr, code=0x08, dtype=">u1"):
    arr = np.asarray(arr)
    head = struct.pack(">HBB", 0, code, arr.ndim) + struct.pack(">" + "I" * arr.ndim, *arr.shape)
    return head + arr.astype(dtype).tobytes()


def test_three_row_csv(tmp_path):
    p = write(tmp_path, "a.csv", "a,b\n1,2\n3,4.5\n-1,0\n")
    ds = datasets.load_csv(p)
    assert ds.names == ["a", "b"]
    np.testing.assert_array_equal(ds.data, [[1, 2], [3, 4.5], [-1, 0]])
    assert ds.labels is None


def test_label_column(tmp_path):
    p = write(tmp_path, "a.csv", "x,kind,y\n1,cat,2\n3,dog,4\n")
    ds = datasets.load_csv(p, label_column="kind")
    assert ds.names == ["x", "y"] and list(ds.labels) == ["cat", "dog"]


def test_missing_cell_names_row_and_column(tmp_path):
    p = write(tmp_path, "a.csv", "a,b\n1,2\n3,\n")
    with pytest.raises(ParseError) as info:
        datasets.load_csv(p)
    assert info.value.row == 3 and info.value.column == "b"
    assert "row 3" in str(info.value) and "'b'" in str(info.value)


def test_non_numeric_cell(tmp_path):
    p = write(tmp_path, "a.csv", "a,b\n1,two\n")
    with pytest.raises(NonNumericCell) as info:
        datasets.load_csv(p)
    assert (info.value.row, info.value.column) == (2, "b")


@pytest.mark.parametrize("text", ["", "a,b\n"])
def test_empty_csv(tmp_path, text):
    with pytest.raises(EmptyDataset):
        datasets.load_csv(write(tmp_path, "a.csv", text))


def test_ragged_row(tmp_path):
    with pytest.raises(ParseError):
        datasets.load_csv(write(tmp_path, "a.csv", "a,b\n1,2,3\n"))


def test_unknown_label_column(tmp_path):
    with pytest.raises(ParseError):
        datasets.load_csv(write(tmp_path, "a.csv", "a,b\n1,2\n"), label_column="c")


def test_iris_csv_round_trip(tmp_path, iris):
    p = tmp_path / "iris.csv"
    iris.to_csv(p, label_name="species")
    ds = datasets.load_csv(p, label_column="species")
    assert (ds.n, ds.d, len(ds.labels)) == (150, 4, 150)
    np.testing.assert_array_equal(ds.data, iris.data)
    assert ds.names == iris.names


@pytest.mark.parametrize("gz", [False, True])
def test_idx_images_scaled(tmp_path, gz):
    imgs = np.arange(2 * 3 * 4).reshape(2, 3, 4) * 10
    raw = idx_bytes(imgs)
    p = tmp_path / ("img.idx.gz" if gz else "img.idx")
    p.write_bytes(gzip.compress(raw) if gz else raw)
    lab = tmp_path / "lab.idx"
    lab.write_bytes(idx_bytes([7, 3]))
    ds = datasets.load_dataset(p, "idx-images", labels_path=lab)
    assert ds.image_shape == (3, 4) and ds.data.shape == (2, 12)
    np.testing.assert_allclose(ds.data, imgs.reshape(2, -1) / 255.0)
    assert list(ds.labels) == [7, 3]


def test_idx_float_payload(tmp_path):
    p = tmp_path / "f.idx"
    p.write_bytes(idx_bytes(np.array([[0.5, -2.0]]), code=0x0E, dtype=">f8"))
    np.testing.assert_array_equal(datasets.load_idx(p).data, [[0.5, -2.0]])


@pytest.mark.parametrize(
    "raw",
    [b"\x00\x00", b"\x01\x00\x08\x01" + b"\x00" * 8, idx_bytes(np.zeros((2, 2)))[:-1]],
    ids=["short", "magic", "truncated"],
)
def test_bad_idx(tmp_path, raw):
    p = tmp_path / "bad.idx"
    p.write_bytes(raw)
    with pytest.raises(ParseError):
        datasets.load_idx(p)


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        datasets.load_dataset(tmp_path / "x", "parquet")


def test_swiss_roll_parameterisation():
    ds = datasets.swiss_roll(n=300, seed=4)
    u, v = ds.params["u"], ds.params["v"]
    assert u.min() >= 1.5 * math.pi and u.max() <= 4.5 * math.pi
    assert v.min() >= 0.0 and v.max() <= 15.0
    np.testing.assert_allclose(ds.data, np.stack([u * np.cos(u), u * np.sin(u), v], 1))


@pytest.mark.parametrize("name", ["s-curve", "swiss-roll"])
def test_tangents_are_derivatives(name):
    ds = datasets.generate(name, n=50, seed=1)
    param = next(iter(ds.tangents))
    # Rebuild the manifold at a shifted parameter and compare directions.
    h = 1e-6
    base = ds.params[param]
    if name == "s-curve":
        f = lambda t: np.stack([np.sin(t), ds.params["height"], np.sign(t) * (np.cos(t) - 1.0)], 1)  # noqa: E731
    else:
        f = lambda u: np.stack([u * np.cos(u), u * np.sin(u), ds.params["v"]], 1)  # noqa: E731
    fd = (f(base + h) - f(base - h)) / (2 * h)
    cos = np.sum(fd * ds.tangents[param], 1) / (np.linalg.norm(fd, axis=1) * np.linalg.norm(ds.tangents[param], axis=1))
    assert cos.min() >= 1 - 1e-8


def test_generators_are_seeded():
    for name in ("s-curve", "swiss-roll", "rings", "blobs"):
        a = datasets.generate(name, n=40, seed=3)
        b = datasets.generate(name, n=40, seed=3)
        np.testing.assert_array_equal(a.data, b.data)
        assert a.n == 40
    with pytest.raises(ValueError):
        datasets.generate("torus")


def test_rings_are_interlocked():
    ds = datasets.interlocked_rings(n=200, seed=0, noise=0.0)
    r1, r2 = ds.data[ds.labels == 0], ds.data[ds.labels == 1]
    np.testing.assert_allclose(np.linalg.norm(r1[:, :2], axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(r2[:, [0, 2]] - [1.0, 0.0], axis=1), 1.0)
    # Linked: walking around ring 2 crosses ring 1's disc exactly once.
    order = np.argsort(ds.params["angle"][ds.labels == 1])
    loop = np.vstack([r2[order], r2[order][:1]])
    crossings = 0
    for p, q in zip(loop, loop[1:]):
        if p[2] * q[2] < 0:
            t = p[2] / (p[2] - q[2])
            crossings += np.hypot(*(p[:2] + t * (q[:2] - p[:2]))) < 1.0
    assert crossings == 1
