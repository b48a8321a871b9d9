"""GHK1 checkpoint files.

A checkpoint is two files sharing a stem:

* ``<stem>.ghk``: magic ``b"GHK1"``, little-endian u32 format version, then every tensor
  as contiguous little-endian float64 values.
* ``<stem>.manifest``: one tab-separated line per tensor, ``name dtype shape offset``,
  where shape is comma-joined extents (empty for scalars) and offset is the absolute byte
  offset of the tensor inside the ``.ghk`` file.
"""
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from ghyena.core.errors import DataIOError

MAGIC = b"GHK1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sI")

PathLike = Union[str, Path]


def stem_path(stem: PathLike, extension: str) -> Path:
    """``<stem><extension>``; dots already in the stem name are kept."""
    stem = Path(stem)
    return stem.with_name(stem.name + extension)


def checkpoint_paths(stem: PathLike) -> tuple:
    return stem_path(stem, ".ghk"), stem_path(stem, ".manifest")


def save_checkpoint(stem: PathLike, tensors: Mapping[str, np.ndarray]) -> None:
    blob_path, manifest_path = checkpoint_paths(stem)
    lines = []
    offset = HEADER.size
    chunks = []
    for name, value in tensors.items():
        if any(ch.isspace() for ch in name):
            raise DataIOError(f"tensor name {name!r} contains whitespace")
        arr = np.asarray(value, dtype="<f8")
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"{name}\tfloat64\t{shape}\t{offset}")
        chunks.append(np.ascontiguousarray(arr).tobytes())
        offset += arr.nbytes

    try:
        blob_path.parent.mkdir(parents=True, exist_ok=True)
        tmp_blob = stem_path(blob_path, ".tmp")
        with open(tmp_blob, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, FORMAT_VERSION))
            for chunk in chunks:
                fh.write(chunk)
        tmp_manifest = stem_path(manifest_path, ".tmp")
        tmp_manifest.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        tmp_blob.replace(blob_path)
        tmp_manifest.replace(manifest_path)
    except OSError as e:
        raise DataIOError(f"cannot write checkpoint {stem}: {e}") from e


def load_checkpoint(stem: PathLike) -> Dict[str, np.ndarray]:
    blob_path, manifest_path = checkpoint_paths(stem)
    try:
        blob = blob_path.read_bytes()
        manifest = manifest_path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIOError(f"cannot read checkpoint {stem}: {e}") from e

    if len(blob) < HEADER.size:
        raise DataIOError(f"{blob_path}: truncated header")
    magic, version = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataIOError(f"{blob_path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataIOError(f"{blob_path}: unsupported format version {version}")

    tensors: Dict[str, np.ndarray] = {}
    for lineno, line in enumerate(manifest.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            name, dtype, shape_txt, offset_txt = line.split("\t")
            shape = tuple(int(s) for s in shape_txt.split(",")) if shape_txt else ()
            offset = int(offset_txt)
        except ValueError as e:
            raise DataIOError(f"{manifest_path}:{lineno}: malformed entry") from e
        if dtype != "float64":
            raise DataIOError(f"{manifest_path}:{lineno}: unsupported dtype {dtype}")
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if offset < HEADER.size or end > len(blob):
            raise DataIOError(f"{manifest_path}:{lineno}: entry {name} out of bounds")
        tensors[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
    return tensors
