"""Canonical binary snapshot of a :class:`~rdcds.engine.SystemState`.

Layout, every integer little-endian unsigned 64-bit after the 4-byte magic::

    b"RDCD"  version
    q  N  R_r  K_c  L  K_c_num  K_c_den  seed  slot
    server rows            N * lambda_G symbols, row-major
    reference message      L symbols
    reference noise        blocks 1..G, each (R_r - K_c) x gamma_i, row-major

Evaluation points are always the canonical ones, so they are not stored.
The update history kept for verification is not stored either: a reloaded
state treats its current payload as fresh, which is exactly what the
protocol itself sees.
"""

from __future__ import annotations

import struct
from fractions import Fraction

import numpy as np

from .algebra import EvalPoints
from .errors import SnapshotError
from .params import derive_params
from .engine import SystemState, load_reference

MAGIC = b"RDCD"
VERSION = 1
_U64 = struct.Struct("<Q")
_HEADER = struct.Struct("<4sQ" + "Q" * 9)
_LIMIT = 1 << 64


def _words(values) -> bytes:
    arr = np.asarray(values).reshape(-1)
    if arr.dtype == object:
        return b"".join(_U64.pack(int(v)) for v in arr)
    return arr.astype("<u8").tobytes()


def dump(state: SystemState) -> bytes:
    p = state.params
    if p.q >= _LIMIT:
        raise SnapshotError("field modulus does not fit in 64 bits")
    if p.pts != EvalPoints.canonical(p.n, p.q):
        raise SnapshotError("only canonical evaluation points can be serialized")
    if state.seed < 0 or state.seed >= _LIMIT:
        raise SnapshotError("seed must fit in an unsigned 64-bit word")
    header = _HEADER.pack(
        MAGIC, VERSION, p.q, p.n, p.r_r, p.k_c, p.L,
        p.k_c_raw.numerator, p.k_c_raw.denominator, state.seed, state.slot,
    )
    parts = [header, _words(state.servers), _words(state.ref_message)]
    parts.extend(_words(z) for z in state.ref_noise)
    return b"".join(parts)


def load(blob: bytes) -> SystemState:
    if len(blob) < _HEADER.size:
        raise SnapshotError("snapshot truncated in header")
    magic, version, q, n, r_r, k_c, L, num, den, seed, slot = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if den == 0:
        raise SnapshotError("zero denominator in storage factor")
    try:
        p = derive_params(n, r_r, Fraction(num, den), q=q)
    except Exception as exc:
        raise SnapshotError(f"invalid parameters in snapshot: {exc}") from exc
    if p.k_c != k_c or p.L != L:
        raise SnapshotError("header K_c/L disagree with the derived parameters")

    sizes = [n * p.storage_len, p.L] + [p.noise_rows * gm for gm in p.gamma]
    expected = _HEADER.size + 8 * sum(sizes)
    if len(blob) != expected:
        raise SnapshotError(f"snapshot has {len(blob)} bytes, expected {expected}")
    raw = np.frombuffer(blob, dtype="<u8", offset=_HEADER.size)
    if np.any(raw >= q):
        raise SnapshotError("symbol outside the field")
    f = p.field
    chunks, off = [], 0
    for s in sizes:
        chunks.append(f.array([int(v) for v in raw[off : off + s]]))
        off += s
    servers = chunks[0].reshape(n, p.storage_len)
    noise = [c.reshape(p.noise_rows, gm) for c, gm in zip(chunks[2:], p.gamma)]
    return load_reference(p, chunks[1], noise, servers, seed, slot)


def dump_file(state: SystemState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump(state))


def load_file(path) -> SystemState:
    with open(path, "rb") as fh:
        return load(fh.read())
