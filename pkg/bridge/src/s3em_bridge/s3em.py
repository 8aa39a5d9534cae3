"""Writer/reader for the S3EM embedding interchange format.

Little-endian layout: magic b"S3EM", version u32 = 1, dim u32, count u32,
count*dim float32 values row-major, then a u32 label-block length followed
by newline-separated UTF-8 labels (length 0 means unlabeled). This is the
only surface shared with the classifier side, so it is implemented here
from the format description rather than imported.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"S3EM"
VERSION = 1


class S3emError(Exception):
    pass


def write_s3em(path, vectors: np.ndarray, labels: list[str] | None = None) -> None:
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise S3emError(f"expected a 2-d array, got shape {vectors.shape}")
    if not np.isfinite(vectors).all():
        raise S3emError("refusing to write non-finite values")
    count, dim = vectors.shape
    if labels is None:
        block = b""
    else:
        if len(labels) != count:
            raise S3emError(f"{len(labels)} labels for {count} rows")
        for lab in labels:
            if "\n" in lab:
                raise S3emError(f"label {lab!r} contains a newline")
        block = "\n".join(labels).encode("utf-8")
    payload = (
        MAGIC
        + struct.pack("<III", VERSION, dim, count)
        + vectors.astype("<f4").tobytes(order="C")
        + struct.pack("<I", len(block))
        + block
    )
    Path(path).write_bytes(payload)


def read_s3em(path) -> tuple[np.ndarray, list[str] | None]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise S3emError(f"bad magic {raw[:4]!r}")
    version, dim, count = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise S3emError(f"unsupported version {version}")
    offset = 16
    vectors = np.frombuffer(raw, dtype="<f4", count=dim * count, offset=offset)
    vectors = vectors.reshape(count, dim).copy()
    offset += 4 * dim * count
    (block_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    labels = None
    if block_len:
        labels = raw[offset : offset + block_len].decode("utf-8").split("\n")
        if len(labels) != count:
            raise S3emError(f"{len(labels)} labels for {count} rows")
    return vectors, labels
