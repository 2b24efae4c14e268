"""The MCC1 on-disk container.

Layout, all little-endian:

===========  =====  ====================================================
field        bytes  meaning
===========  =====  ====================================================
magic            4  ``MCC1``
version          2  u16, currently 1
p1, p2           8  u32 each: pixel dimensions
n1, n2           8  u32 each: moment quadrant bounds
nu_code          2  u16 divergence order; 0 encodes infinity
prior_mode       1  u8: 0 uniform, 1 inline SVD, 2 external reference
r                2  u16 factor rank (0 when unused)
ref_len+ref    2+L  only for prior_mode 2: u16 length, then UTF-8 bytes
moments       8*M   (n1+1)*(n2+1) float64, row-major, k2 fastest
m1          4*p1*r  prior_mode 1 only: float32, column-major
m2          4*r*p2  prior_mode 1 only: float32, row-major
crc32            4  u32 CRC-32 of the payload (moments + factor blocks)
===========  =====  ====================================================
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .divergence import NU_INF, normalize_nu
from .grid import IndexSet

MAGIC = b"MCC1"
VERSION = 1

PRIOR_UNIFORM = 0
PRIOR_INLINE_SVD = 1
PRIOR_EXTERNAL_REF = 2

_HEADER = struct.Struct("<4sHIIIIHBH")


class ContainerError(ValueError):
    """Base class for malformed or corrupt containers."""


class BadMagicError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class LengthMismatchError(ContainerError):
    pass


class NaNPayloadError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


@dataclass
class CompressedContainer:
    """In-memory form of an MCC1 container."""

    p1: int
    p2: int
    n1: int
    n2: int
    nu: int | float
    prior_mode: int
    r: int
    moments: np.ndarray
    m1: np.ndarray | None = None
    m2: np.ndarray | None = None
    prior_ref: str | None = None

    @property
    def grid_dims(self) -> tuple[int, int]:
        return (2 * (self.p1 - 1), 2 * (self.p2 - 1))

    @property
    def index_set(self) -> IndexSet:
        return IndexSet((self.n1, self.n2), self.grid_dims)

    def validate(self) -> None:
        if self.p1 < 2 or self.p2 < 2:
            raise ContainerError(f"pixel dims must be >= 2, got {self.p1}x{self.p2}")
        if self.n1 < 0 or self.n2 < 0:
            raise ContainerError("quadrant bounds must be nonnegative")
        N1, N2 = self.grid_dims
        if 2 * self.n1 >= N1 or 2 * self.n2 >= N2:
            raise ContainerError(
                f"quadrant ({self.n1},{self.n2}) too large for grid ({N1},{N2})"
            )
        order = normalize_nu(self.nu)
        if order != NU_INF and order > 0xFFFF:
            raise ContainerError(f"order {order} does not fit the format")
        if self.prior_mode not in (PRIOR_UNIFORM, PRIOR_INLINE_SVD, PRIOR_EXTERNAL_REF):
            raise ContainerError(f"unknown prior mode {self.prior_mode}")
        if not 0 <= self.r <= 0xFFFF:
            raise ContainerError(f"rank {self.r} does not fit the format")
        moments = np.asarray(self.moments, dtype=float)
        if moments.shape != (self.n1 + 1, self.n2 + 1):
            raise ContainerError(
                f"moment table {moments.shape} does not match quadrant "
                f"({self.n1 + 1},{self.n2 + 1})"
            )
        if not np.all(np.isfinite(moments)):
            raise NaNPayloadError("moments contain non-finite values")
        if moments[0, 0] <= 0.0:
            raise ContainerError("leading moment must be positive")
        if self.prior_mode == PRIOR_INLINE_SVD:
            if self.r < 1:
                raise ContainerError("inline factors require rank >= 1")
            if self.r > min(self.p1, self.p2):
                raise ContainerError(f"rank {self.r} exceeds min(p1, p2)")
            if self.m1 is None or self.m2 is None:
                raise ContainerError("inline mode requires both factor blocks")
            if self.m1.shape != (self.p1, self.r) or self.m2.shape != (self.r, self.p2):
                raise ContainerError(
                    f"factor shapes {self.m1.shape}, {self.m2.shape} do not match "
                    f"p=({self.p1},{self.p2}), r={self.r}"
                )
            if not (np.all(np.isfinite(self.m1)) and np.all(np.isfinite(self.m2))):
                raise NaNPayloadError("factors contain non-finite values")
        else:
            if self.m1 is not None or self.m2 is not None:
                raise ContainerError("factor blocks are only allowed in inline mode")
        if self.prior_mode == PRIOR_EXTERNAL_REF:
            if not self.prior_ref:
                raise ContainerError("external mode requires a prior reference name")
            if len(self.prior_ref.encode("utf-8")) > 0xFFFF:
                raise ContainerError("prior reference name too long")
        elif self.prior_ref:
            raise ContainerError("prior reference only belongs to external mode")


def _nu_code(nu) -> int:
    order = normalize_nu(nu)
    return 0 if order == NU_INF else int(order)


def _nu_from_code(code: int) -> int | float:
    return NU_INF if code == 0 else int(code)


def serialize(container: CompressedContainer) -> bytes:
    """Encode a validated container to bytes."""
    container.validate()
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        container.p1,
        container.p2,
        container.n1,
        container.n2,
        _nu_code(container.nu),
        container.prior_mode,
        container.r,
    )
    parts = [header]
    if container.prior_mode == PRIOR_EXTERNAL_REF:
        ref = container.prior_ref.encode("utf-8")
        parts.append(struct.pack("<H", len(ref)))
        parts.append(ref)
    payload = np.ascontiguousarray(container.moments, dtype="<f8").tobytes()
    if container.prior_mode == PRIOR_INLINE_SVD:
        payload += np.asarray(container.m1, dtype="<f4").tobytes(order="F")
        payload += np.asarray(container.m2, dtype="<f4").tobytes(order="C")
    parts.append(payload)
    parts.append(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))
    return b"".join(parts)


def deserialize(data: bytes) -> CompressedContainer:
    """Decode bytes to a container, rejecting malformed or corrupt streams."""
    if len(data) < _HEADER.size:
        raise LengthMismatchError(f"stream of {len(data)} bytes is shorter than the header")
    magic, version, p1, p2, n1, n2, nu_code, prior_mode, rank = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}")
    offset = _HEADER.size

    prior_ref = None
    if prior_mode == PRIOR_EXTERNAL_REF:
        if len(data) < offset + 2:
            raise LengthMismatchError("stream ends inside the reference length")
        (ref_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if len(data) < offset + ref_len:
            raise LengthMismatchError("stream ends inside the reference name")
        try:
            prior_ref = data[offset : offset + ref_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ContainerError(f"prior reference is not valid UTF-8: {exc}") from exc
        offset += ref_len

    moment_bytes = 8 * (n1 + 1) * (n2 + 1)
    factor_bytes = 0
    if prior_mode == PRIOR_INLINE_SVD:
        factor_bytes = 4 * (p1 * rank + rank * p2)
    expected = offset + moment_bytes + factor_bytes + 4
    if len(data) != expected:
        raise LengthMismatchError(f"stream is {len(data)} bytes, header promises {expected}")

    payload = data[offset : offset + moment_bytes + factor_bytes]
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    actual_crc = zlib.crc32(payload) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(f"crc mismatch: stored {stored_crc:#010x}, actual {actual_crc:#010x}")

    moments = np.frombuffer(payload, dtype="<f8", count=(n1 + 1) * (n2 + 1)).reshape(
        n1 + 1, n2 + 1
    )
    if not np.all(np.isfinite(moments)):
        raise NaNPayloadError("moments contain non-finite values")
    m1 = m2 = None
    if prior_mode == PRIOR_INLINE_SVD:
        cursor = moment_bytes
        m1_flat = np.frombuffer(payload, dtype="<f4", count=p1 * rank, offset=cursor)
        m1 = m1_flat.reshape((p1, rank), order="F").copy()
        cursor += 4 * p1 * rank
        m2_flat = np.frombuffer(payload, dtype="<f4", count=rank * p2, offset=cursor)
        m2 = m2_flat.reshape((rank, p2), order="C").copy()
        if not (np.all(np.isfinite(m1)) and np.all(np.isfinite(m2))):
            raise NaNPayloadError("factors contain non-finite values")

    container = CompressedContainer(
        p1=int(p1),
        p2=int(p2),
        n1=int(n1),
        n2=int(n2),
        nu=_nu_from_code(nu_code),
        prior_mode=int(prior_mode),
        r=int(rank),
        moments=moments.astype(float),
        m1=m1,
        m2=m2,
        prior_ref=prior_ref,
    )
    container.validate()
    return container


def save_container(path: str, container: CompressedContainer) -> None:
    with open(path, "wb") as handle:
        handle.write(serialize(container))


def load_container(path: str) -> CompressedContainer:
    with open(path, "rb") as handle:
        return deserialize(handle.read())
