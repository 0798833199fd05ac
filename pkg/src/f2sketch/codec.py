"""Compact prefix-free serialisation of :class:`~f2sketch.sketch.PartitionSketch`.

Each counter ``A[i]`` is written as one sign bit followed by the Elias-gamma
code of ``|A[i]| + 1``, i.e. ``2*floor(log2(|A[i]|+1)) + 2`` bits. Zero is
written as ``0`` + ``1``; a set sign bit on a zero counter is rejected as
non-canonical.

F2SK v1 file layout (all integers big-endian)::

    offset  size  field
    0       4     magic  b"F2SK"
    4       1     version (1)
    5       8     epsilon, IEEE-754 binary64
    13      8     bucket count P (u64)
    21      8     hash seed (u64)
    29      8     items seen n (u64)
    37      8     counter section length in bits (u64)
    45      B     counter bitstream, MSB first, zero padded to B = ceil(bits/8)
    45+B    4     CRC-32 of bytes [0, 45+B)
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ._validation import bucket_count_for
from .sketch import PartitionSketch

MAGIC = b"F2SK"
VERSION = 1
HEADER_FIELDS = 4
HEADER_BITS = 64 * HEADER_FIELDS
_HEADER = struct.Struct(">4sBdQQQQ")


class CodecError(ValueError):
    """Malformed or truncated encoding. ``position`` is the failing bit offset."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at bit {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class EncodedSketch:
    epsilon: float
    bucket_count: int
    seed: int
    items_seen: int
    payload: bytes
    counter_bits: int
    checksum: int

    @property
    def bit_length(self) -> int:
        """Header plus counter section, in bits."""
        return HEADER_BITS + self.counter_bits

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(
            MAGIC, VERSION, self.epsilon, self.bucket_count, self.seed, self.items_seen, self.counter_bits
        )
        body = head + self.payload
        return body + struct.pack(">I", zlib.crc32(body))

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedSketch":
        if len(data) < _HEADER.size + 4:
            raise CodecError("file shorter than the F2SK header", 8 * len(data))
        magic, version, eps, p, seed, n, nbits = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CodecError(f"bad magic {magic!r}", 0)
        if version != VERSION:
            raise CodecError(f"unsupported version {version}", 32)
        nbytes = (nbits + 7) // 8
        end = _HEADER.size + nbytes
        if len(data) != end + 4:
            raise CodecError(f"expected {end + 4} bytes, got {len(data)}", 8 * min(len(data), end))
        (crc,) = struct.unpack_from(">I", data, end)
        if zlib.crc32(data[:end]) != crc:
            raise CodecError("CRC-32 mismatch")
        payload = bytes(data[_HEADER.size:end])
        return cls(eps, p, seed, n, payload, nbits, zlib.crc32(payload))


def gamma_code(m: int) -> str:
    """Elias-gamma code of ``m >= 1`` as a bit string."""
    if m < 1:
        raise ValueError("gamma code is defined for m >= 1")
    b = bin(m)[2:]
    return "0" * (len(b) - 1) + b


def counter_code_length(value: int) -> int:
    return 2 * (abs(int(value)) + 1).bit_length()


def _pack(bits: str) -> bytes:
    if not bits:
        return b""
    pad = -len(bits) % 8
    return int(bits + "0" * pad, 2).to_bytes((len(bits) + pad) // 8, "big")


def _unpack(payload: bytes, nbits: int) -> str:
    if not payload:
        return ""
    return bin(int.from_bytes(payload, "big"))[2:].zfill(8 * len(payload))[:nbits]


def encode_counters(counters) -> str:
    parts = []
    for a in np.asarray(counters).tolist():
        parts.append("1" if a < 0 else "0")
        parts.append(gamma_code(abs(a) + 1))
    return "".join(parts)


def decode_counters(bits: str, count: int) -> list[int]:
    out = []
    pos = 0
    total = len(bits)
    for i in range(count):
        if pos >= total:
            raise CodecError(f"stream ends before counter {i}", pos)
        negative = bits[pos] == "1"
        pos += 1
        one = bits.find("1", pos)
        if one < 0:
            raise CodecError(f"unterminated length prefix in counter {i}", pos)
        width = one - pos + 1
        if one + width > total:
            raise CodecError(f"truncated magnitude in counter {i}", one)
        m = int(bits[one:one + width], 2)
        pos = one + width
        if m == 1 and negative:
            raise CodecError(f"negative zero in counter {i}", pos - width - 1)
        out.append(-(m - 1) if negative else m - 1)
    if pos != total:
        raise CodecError(f"{total - pos} trailing bits after {count} counters", pos)
    return out


def encode(sketch: PartitionSketch) -> EncodedSketch:
    check_is_fitted(sketch, "counters_")
    if sketch.seed_ is None:
        raise ValueError("only seeded sketches can be encoded")
    bits = encode_counters(sketch.counters_)
    payload = _pack(bits)
    return EncodedSketch(
        epsilon=float(sketch.epsilon),
        bucket_count=int(sketch.bucket_count_),
        seed=int(sketch.seed_),
        items_seen=int(sketch.n_items_),
        payload=payload,
        counter_bits=len(bits),
        checksum=zlib.crc32(payload),
    )


def decode(enc: EncodedSketch) -> PartitionSketch:
    """Inverse of :func:`encode`; raises :class:`CodecError` on bad input."""
    if len(enc.payload) != (enc.counter_bits + 7) // 8:
        raise CodecError("payload length disagrees with counter_bits", 8 * len(enc.payload))
    counters = decode_counters(_unpack(enc.payload, enc.counter_bits), enc.bucket_count)
    mass = sum(abs(a) for a in counters)
    if mass > enc.items_seen:
        raise CodecError(f"counter mass {mass} exceeds items_seen {enc.items_seen}")
    if (sum(counters) - enc.items_seen) % 2:
        raise CodecError("counter sum parity disagrees with items_seen")
    if zlib.crc32(enc.payload) != enc.checksum:
        raise CodecError("checksum mismatch")
    bucket_count = None if enc.bucket_count == _default_buckets(enc.epsilon) else enc.bucket_count
    sketch = PartitionSketch.from_state(enc.epsilon, enc.bucket_count, enc.seed, counters, enc.items_seen)
    sketch.bucket_count = bucket_count
    return sketch


def _default_buckets(epsilon: float) -> int | None:
    try:
        return bucket_count_for(epsilon)
    except (TypeError, ValueError):
        return None


def log2_ceil_ratio(num: int, den: int) -> int:
    """``ceil(log2(num / den))`` for positive integers, exactly."""
    c = -(-num // den)
    return (c - 1).bit_length()


def counter_bit_budget(bucket_count: int, n: int) -> int:
    """``2P * ceil(log2(n/P + 2)) + 4P``."""
    p = int(bucket_count)
    if p < 1:
        raise ValueError("bucket_count must be >= 1")
    return 2 * p * log2_ceil_ratio(n + 2 * p, p) + 4 * p


def bit_budget(bucket_count: int, n: int) -> int:
    """Counter budget plus the fixed header; every length-``n`` stream fits."""
    return counter_bit_budget(bucket_count, n) + HEADER_BITS


def save(sketch: PartitionSketch, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(sketch).to_bytes())


def load(path) -> PartitionSketch:
    with open(path, "rb") as fh:
        return decode(EncodedSketch.from_bytes(fh.read()))
