import struct

import numpy as np
import pytest

from ghyena.core.errors import DataIOError
from ghyena.recall.data import STREAMS, generate_dataset, positional_encoding
from ghyena.recall.dataset_io import decode_dataset, encode_dataset, load_dataset, save_dataset


@pytest.fixture(scope="function")
def instances():
    return generate_dataset(4, 3, 8, seed=7, stream=STREAMS["test"])


def test_saved_dataset_loads_back(tmp_path, instances):
    path = tmp_path / "data" / "test.gar"
    save_dataset(path, instances)
    loaded = load_dataset(path)
    assert len(loaded) == 4
    for a, b in zip(instances, loaded):
        np.testing.assert_array_equal(a.tokens, b.tokens)
        np.testing.assert_array_equal(a.target, b.target)
        np.testing.assert_array_equal(b.pos_features, positional_encoding(8))


def test_encoding_layout(instances):
    blob = encode_dataset(instances[:1])
    assert blob[:4] == b"GAR1"
    assert struct.unpack_from("<II", blob, 4) == (1, 1)
    assert struct.unpack_from("<I", blob, 12) == (8,)
    assert len(blob) == 16 + 8 * (8 * 3 + 3)


def test_same_seed_same_bytes(instances):
    again = generate_dataset(4, 3, 8, seed=7, stream=STREAMS["test"])
    assert encode_dataset(instances) == encode_dataset(again)


def test_bad_magic(instances):
    blob = b"XXXX" + encode_dataset(instances)[4:]
    with pytest.raises(DataIOError):
        decode_dataset(blob)


def test_unsupported_version(instances):
    blob = bytearray(encode_dataset(instances))
    blob[4:8] = struct.pack("<I", 9)
    with pytest.raises(DataIOError):
        decode_dataset(bytes(blob))


def test_truncated_and_trailing_bytes(instances):
    blob = encode_dataset(instances)
    with pytest.raises(DataIOError):
        decode_dataset(blob[:-5])
    with pytest.raises(DataIOError):
        decode_dataset(blob + b"\x00")
    with pytest.raises(DataIOError):
        decode_dataset(blob[:6])


def test_missing_file(tmp_path):
    with pytest.raises(DataIOError):
        load_dataset(tmp_path / "nothing.gar")
