"""GAR1 dataset files.

Layout (little-endian): magic ``b"GAR1"``, u32 version, u32 instance count, then per
instance a u32 token count ``n``, ``n * 3`` f64 token coordinates and 3 f64 target
coordinates. Positional features are recomputed on load.
"""
import struct
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from ghyena.core.errors import DataIOError
from ghyena.recall.data import AssocRecallInstance

MAGIC = b"GAR1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sII")
COUNT = struct.Struct("<I")


def encode_dataset(instances: Sequence[AssocRecallInstance]) -> bytes:
    chunks = [HEADER.pack(MAGIC, FORMAT_VERSION, len(instances))]
    for inst in instances:
        chunks.append(COUNT.pack(inst.n))
        chunks.append(np.ascontiguousarray(inst.tokens, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(inst.target, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_dataset(blob: bytes, source: str = "<bytes>") -> List[AssocRecallInstance]:
    if len(blob) < HEADER.size:
        raise DataIOError(f"{source}: truncated header")
    magic, version, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataIOError(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataIOError(f"{source}: unsupported format version {version}")

    offset = HEADER.size
    instances = []
    for i in range(count):
        if offset + COUNT.size > len(blob):
            raise DataIOError(f"{source}: truncated at instance {i}")
        (n,) = COUNT.unpack_from(blob, offset)
        offset += COUNT.size
        size = 8 * (3 * n + 3)
        if offset + size > len(blob):
            raise DataIOError(f"{source}: truncated at instance {i}")
        values = np.frombuffer(blob, dtype="<f8", count=3 * n + 3, offset=offset).astype(np.float64)
        offset += size
        instances.append(AssocRecallInstance(tokens=values[: 3 * n].reshape(n, 3), target=values[3 * n:]))
    if offset != len(blob):
        raise DataIOError(f"{source}: {len(blob) - offset} trailing bytes")
    return instances


def save_dataset(path: Union[str, Path], instances: Sequence[AssocRecallInstance]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(encode_dataset(instances))
        tmp.replace(path)
    except OSError as e:
        raise DataIOError(f"cannot write dataset {path}: {e}") from e


def load_dataset(path: Union[str, Path]) -> List[AssocRecallInstance]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read dataset {path}: {e}") from e
    return decode_dataset(blob, str(path))
