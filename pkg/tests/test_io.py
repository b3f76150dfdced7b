import struct

import numpy as np
import pytest

from lpir.core import Dataset
from lpir.errors import FormatError
from lpir.io import (
    load_codebook,
    load_dataset,
    load_scheme,
    save_codebook,
    save_dataset_raw,
    save_idx_images,
    save_scheme,
)
from lpir.quantizer import Codebook, LloydConfig
from lpir.schemes import build_compression_scheme


def test_raw_f64_handcrafted(tmp_path):
    path = tmp_path / "tiny.f64"
    floats = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    blob = b"LPR1" + struct.pack("<QQQ", 2, 1, 3) + struct.pack("<6d", *floats)
    path.write_bytes(blob)
    ds = load_dataset(path)
    assert ds.values.shape == (2, 1, 3)
    assert ds.values.ravel().tolist() == floats


def test_raw_f64_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    ds = Dataset(rng.normal(size=(7, 3, 2)))
    path = tmp_path / "ds.f64"
    save_dataset_raw(path, ds)
    back = load_dataset(path)
    assert back.values.tobytes() == ds.values.tobytes()


def test_raw_f64_bad_magic(tmp_path):
    path = tmp_path / "bad.f64"
    path.write_bytes(b"NOPE" + struct.pack("<QQQ", 1, 1, 1) + struct.pack("<d", 0.0))
    with pytest.raises(FormatError) as err:
        load_dataset(path)
    assert err.value.offset == 0


def test_raw_f64_truncated(tmp_path):
    path = tmp_path / "trunc.f64"
    path.write_bytes(b"LPR1" + struct.pack("<QQQ", 2, 1, 3) + struct.pack("<d", 1.0))
    with pytest.raises(FormatError) as err:
        load_dataset(path)
    assert "truncated" in str(err.value)


def test_idx_single_white_image(tmp_path):
    path = tmp_path / "img.idx"
    save_idx_images(path, np.full((1, 28, 28), 255, dtype=np.uint8))
    ds = load_dataset(path, format="idx_images")
    assert ds.values.shape == (1, 1, 784)
    assert np.allclose(ds.values, 1.0)
    assert ds.image_shape == (28, 28, 1)


def test_idx_rescale_endpoints(tmp_path):
    path = tmp_path / "img.idx"
    img = np.zeros((1, 2, 2), dtype=np.uint8)
    img[0, 0, 0] = 255
    save_idx_images(path, img)
    ds = load_dataset(path, format="idx_images")
    assert ds.values.ravel()[0] == pytest.approx(1.0)
    assert ds.values.ravel()[1] == pytest.approx(-1.0)


def test_idx_wrong_magic(tmp_path):
    path = tmp_path / "lbl.idx"
    path.write_bytes(struct.pack(">I", 0x00000801) + struct.pack(">I", 4) + b"\x00" * 4)
    with pytest.raises(FormatError) as err:
        load_dataset(path, format="idx_images")
    assert "0x00000803" in str(err.value)


def test_codebook_roundtrip_and_layout(tmp_path):
    cb = Codebook(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    path = tmp_path / "cb.lpq"
    save_codebook(path, cb)
    blob = path.read_bytes()
    assert blob[:4] == b"LPQ1"
    k, dim = struct.unpack("<QQ", blob[4:20])
    assert (k, dim) == (3, 2)
    assert struct.unpack("<6d", blob[20:]) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    back = load_codebook(path)
    assert back.vectors.tobytes() == cb.vectors.tobytes()


def _tiny_scheme(per_subset=False):
    rng = np.random.default_rng(5)
    train = Dataset(rng.normal(size=(64, 3, 2)))
    return build_compression_scheme(
        train, 2, 3, LloydConfig(k=8, restarts=2, seed=0),
        per_subset_encoders=per_subset,
    )


@pytest.mark.parametrize("per_subset", [False, True])
def test_scheme_roundtrip(tmp_path, per_subset):
    scheme = _tiny_scheme(per_subset)
    path = tmp_path / "scheme.lps"
    save_scheme(path, scheme)
    back = load_scheme(path)
    assert back.num_files == scheme.num_files
    assert back.subset_size == scheme.subset_size
    assert back.bits_total == scheme.bits_total
    assert back.file_means.tobytes() == scheme.file_means.tobytes()
    for a, b in zip(back.all_codebooks(), scheme.all_codebooks()):
        assert a.vectors.tobytes() == b.vectors.tobytes()
    assert (back.subset_codebooks is None) == (scheme.subset_codebooks is None)


def test_scheme_bad_magic(tmp_path):
    path = tmp_path / "x.lps"
    path.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(FormatError):
        load_scheme(path)
