"""Bit-exact binary checkpoints.

Layout: magic "EHDS", then a payload of
    u32 LE  format version (currently 1)
    u32 LE  n (samples per dimension)
    f64 LE  t
    u64 LE  step_index
    5 * n^3 f64 LE sample arrays (ux, uy, uz, v, w), x-fastest order,
followed by the CRC32 of the payload as u32 LE.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .spectral import Grid, RealField, VectorField

MAGIC = b"EHDS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<IIdQ")  # version, n, t, step_index


class CheckpointError(ValueError):
    """Malformed, truncated, or corrupted checkpoint file."""


def _payload(state) -> bytes:
    n = state.grid.n
    parts = [_HEADER.pack(FORMAT_VERSION, n, state.t, state.step_index)]
    for f in (state.u.x, state.u.y, state.u.z, state.v, state.w):
        parts.append(np.ascontiguousarray(f.samples, dtype="<f8").ravel(order="F").tobytes())
    return b"".join(parts)


def state_checksum(state) -> str:
    """CRC32 of the checkpoint payload, as 8 hex digits."""
    return format(zlib.crc32(_payload(state)) & 0xFFFFFFFF, "08x")


def write_checkpoint(path, state) -> None:
    payload = _payload(state)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    Path(path).write_bytes(MAGIC + payload + struct.pack("<I", crc))


def read_checkpoint(path):
    """Read a checkpoint back into a State (CRC-verified, bit-exact)."""
    from .solver import State

    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size + 4:
        raise CheckpointError(f"checkpoint {path} is truncated ({len(raw)} bytes)")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"checkpoint {path} has bad magic {raw[:4]!r}")
    payload, (stored_crc,) = raw[len(MAGIC) : -4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"checkpoint {path} failed CRC verification")

    version, n, t, step_index = _HEADER.unpack_from(payload)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    expected = _HEADER.size + 5 * n**3 * 8
    if len(payload) != expected:
        raise CheckpointError(
            f"checkpoint {path} payload is {len(payload)} bytes, expected {expected}"
        )

    grid = Grid(n)
    arrays = []
    offset = _HEADER.size
    for _ in range(5):
        flat = np.frombuffer(payload, dtype="<f8", count=n**3, offset=offset)
        arrays.append(flat.reshape((n, n, n), order="F").astype(np.float64))
        offset += n**3 * 8
    ux, uy, uz, v, w = arrays
    return State(
        u=VectorField(RealField(grid, ux), RealField(grid, uy), RealField(grid, uz)),
        v=RealField(grid, v),
        w=RealField(grid, w),
        t=t,
        step_index=step_index,
    )
