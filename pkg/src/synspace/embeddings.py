"""Embedding containers, the cosine kernel, and the S3EM file formats.

Binary S3EM layout (little-endian):

    magic   4 bytes  b"S3EM"
    version u32      = 1
    dim     u32
    count   u32
    values  count * dim float32, row-major
    labels  u32 byte length, then that many bytes of newline-separated
            UTF-8 labels (length 0 means the set carries no labels)

Files store float32; in memory everything is float64 so sums over
thousands of rows stay stable. A float32 value survives the round trip
through float64 exactly, so save(load(path)) reproduces the file
byte for byte.

The text alternative is one record per line: ``label<TAB>v1,v2,...,vD``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    NonFiniteValueError,
    TruncatedFileError,
    ZeroVectorError,
)

MAGIC = b"S3EM"
FORMAT_VERSION = 1

ZERO_NORM_FLOOR = 1e-12


def normalize(v, dim: int | None = None) -> np.ndarray:
    """Scale a raw vector to unit L2 norm, preserving direction.

    Raises ZeroVectorError when the norm is at or below 1e-12 and
    DimensionMismatchError when ``dim`` is given and does not match.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f"expected length {dim}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise NonFiniteValueError("vector contains NaN or Inf")
    norm = float(np.linalg.norm(arr))
    if norm <= ZERO_NORM_FLOOR:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm:.3e}")
    out = arr / norm
    out.setflags(write=False)
    return out


def cosine(a, b) -> float:
    """Inner product of two unit vectors, clamped to [-1, 1]."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.shape != bv.shape or av.ndim != 1:
        raise DimensionMismatchError(f"incompatible shapes {av.shape} and {bv.shape}")
    return float(np.clip(np.dot(av, bv), -1.0, 1.0))


@dataclass(frozen=True)
class EmbeddingSet:
    """An ordered collection of same-dimension embeddings.

    ``vectors`` is a (count, dim) float64 array; ``labels``, when present,
    is a parallel tuple of strings. Instances are immutable.
    """

    vectors: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected a 2-d array, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DimensionMismatchError("embedding dimension must be positive")
        if not np.isfinite(arr).all():
            raise NonFiniteValueError("embedding set contains NaN or Inf")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != arr.shape[0]:
                raise DimensionMismatchError(
                    f"{len(labels)} labels for {arr.shape[0]} embeddings"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    def __len__(self) -> int:
        return self.count

    def normalized(self) -> "EmbeddingSet":
        """Return a copy with every row scaled to unit norm."""
        norms = np.linalg.norm(self.vectors, axis=1)
        if (norms <= ZERO_NORM_FLOOR).any():
            bad = int(np.argmax(norms <= ZERO_NORM_FLOOR))
            raise ZeroVectorError(f"row {bad} has norm {norms[bad]:.3e}")
        return EmbeddingSet(self.vectors / norms[:, None], self.labels)

    def subset(self, indices) -> "EmbeddingSet":
        idx = np.asarray(indices, dtype=np.intp)
        labels = None
        if self.labels is not None:
            labels = tuple(self.labels[int(i)] for i in idx)
        return EmbeddingSet(self.vectors[idx], labels)


def save_embeddings(es: EmbeddingSet, path, fmt: str = "binary") -> None:
    """Write an EmbeddingSet to disk in the binary or text format."""
    path = Path(path)
    if fmt == "binary":
        path.write_bytes(_to_binary(es))
    elif fmt == "text":
        path.write_text(_to_text(es), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_embeddings(path, fmt: str | None = None) -> EmbeddingSet:
    """Read an EmbeddingSet, sniffing binary vs. text from the content."""
    raw = Path(path).read_bytes()
    if fmt is None:
        fmt = _sniff_format(raw)
    if fmt == "binary":
        return _from_binary(raw)
    if fmt == "text":
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"text embedding file is not UTF-8: {exc}") from exc
        return _from_text(text)
    raise ValueError(f"unknown format {fmt!r}")


def _sniff_format(raw: bytes) -> str:
    if raw[:4] == MAGIC:
        return "binary"
    # A text file must at least decode and carry the tab separator up front.
    head = raw.split(b"\n", 1)[0]
    try:
        head.decode("utf-8")
    except UnicodeDecodeError:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if b"\t" not in head:
        raise BadMagicError(f"bad magic {raw[:4]!r} and no text record structure")
    return "text"


def _to_binary(es: EmbeddingSet) -> bytes:
    values = es.vectors.astype("<f4")
    if not np.isfinite(values).all():
        raise NonFiniteValueError("refusing to write non-finite values")
    if es.labels is None:
        label_block = b""
    else:
        for lab in es.labels:
            if "\n" in lab:
                raise FormatError(f"label {lab!r} contains a newline")
        label_block = "\n".join(es.labels).encode("utf-8")
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, es.dim, es.count)
    return header + values.tobytes(order="C") + struct.pack("<I", len(label_block)) + label_block


def _from_binary(raw: bytes) -> EmbeddingSet:
    if len(raw) < 4:
        raise TruncatedFileError(f"file of {len(raw)} bytes is shorter than the magic")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 16:
        raise TruncatedFileError("header truncated")
    version, dim, count = struct.unpack_from("<III", raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if dim < 1:
        raise FormatError("dimension must be positive")
    offset = 16
    nbytes = 4 * dim * count
    if len(raw) < offset + nbytes + 4:
        raise TruncatedFileError(
            f"need {offset + nbytes + 4} bytes for {count}x{dim} values, have {len(raw)}"
        )
    values = np.frombuffer(raw, dtype="<f4", count=dim * count, offset=offset)
    values = values.reshape(count, dim).astype(np.float64)
    offset += nbytes
    (label_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if len(raw) < offset + label_len:
        raise TruncatedFileError("label block truncated")
    if len(raw) > offset + label_len:
        raise FormatError(f"{len(raw) - offset - label_len} trailing bytes")
    labels: tuple[str, ...] | None = None
    if label_len > 0:
        try:
            decoded = raw[offset : offset + label_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"label block is not UTF-8: {exc}") from exc
        labels = tuple(decoded.split("\n"))
        if len(labels) != count:
            raise FormatError(f"{len(labels)} labels for {count} embeddings")
    if not np.isfinite(values).all():
        raise NonFiniteValueError("file contains NaN or Inf values")
    return EmbeddingSet(values, labels)


def _format_value(x: float) -> str:
    # Shortest decimal that round-trips the stored float32.
    return np.format_float_positional(np.float32(x), unique=True, trim="0")


def _to_text(es: EmbeddingSet) -> str:
    labels = es.labels if es.labels is not None else [""] * es.count
    lines = []
    for lab, row in zip(labels, es.vectors):
        if "\t" in lab or "\n" in lab:
            raise FormatError(f"label {lab!r} contains a separator character")
        lines.append(lab + "\t" + ",".join(_format_value(v) for v in row))
    return "\n".join(lines) + ("\n" if lines else "")


def _from_text(text: str) -> EmbeddingSet:
    rows = []
    labels = []
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(f"line {lineno}: missing tab separator")
        label, _, payload = line.partition("\t")
        try:
            row = np.array([float(np.float32(tok)) for tok in payload.split(",")])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
        if dim is None:
            dim = row.shape[0]
        elif row.shape[0] != dim:
            raise DimensionMismatchError(
                f"line {lineno}: {row.shape[0]} values, expected {dim}"
            )
        rows.append(row)
        labels.append(label)
    if not rows:
        raise FormatError("text embedding file has no records")
    values = np.vstack(rows)
    if not np.isfinite(values).all():
        raise NonFiniteValueError("file contains NaN or Inf values")
    return EmbeddingSet(values, tuple(labels))
