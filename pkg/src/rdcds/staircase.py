"""Staircase structure generation.

``sc_gen`` lays a length-L data vector and per-block noise out as
``M = [M_1, ..., M_G]``: block 1 holds the reshaped data above its noise,
and every later block ``i`` starts with ``D_{i-1}``, a reshaped copy of
the redundancy rows ``M_1(R_r+i-1,:), ..., M_{i-1}(R_r+1,:)``, followed by
its own noise rows and structural zeros.

Arrays use 0-based numpy indexing internally.  Block, row and column
numbers in :class:`ReplicaCoord` are 1-based to match the usual matrix
notation.  All arrays may carry trailing batch axes (see
:mod:`rdcds.algebra`); generation is pure index shuffling, so they pass
through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, LengthMismatch
from .params import SystemParams


def reshape(v, rows: int, cols: int) -> np.ndarray:
    """Row-major fill of the leading axis of ``v`` into a rows x cols grid."""
    v = np.asarray(v)
    if v.shape[0] != rows * cols:
        raise LengthMismatch(f"cannot reshape {v.shape[0]} symbols into {rows}x{cols}")
    return v.reshape((rows, cols) + v.shape[1:])


@dataclass
class StaircasePayload:
    data: np.ndarray
    noise: list[np.ndarray]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    def validate(self, p: SystemParams) -> None:
        if self.data.ndim < 1 or self.data.shape[0] != p.L:
            raise DimensionMismatch(f"data must hold L={p.L} symbols, got shape {self.data.shape}")
        if len(self.noise) != p.g:
            raise DimensionMismatch(f"expected {p.g} noise blocks, got {len(self.noise)}")
        for i, z in enumerate(self.noise, start=1):
            want = (p.noise_rows, p.gamma[i - 1]) + self.batch_shape
            if z.shape != want:
                raise DimensionMismatch(f"noise block {i} has shape {z.shape}, expected {want}")


def zero_payload(p: SystemParams, batch: tuple[int, ...] = ()) -> StaircasePayload:
    f = p.field
    return StaircasePayload(f.zeros((p.L,) + batch), [f.zeros((p.noise_rows, gm) + batch) for gm in p.gamma])


def random_payload(p: SystemParams, rng: np.random.Generator) -> StaircasePayload:
    f = p.field
    data = f.random(rng, (p.L,))
    return StaircasePayload(data, [f.random(rng, (p.noise_rows, gm)) for gm in p.gamma])


class StaircaseMatrix:
    """The block list ``[M_1, ..., M_G]`` together with its N x lambda_G concatenation."""

    def __init__(self, params: SystemParams, blocks: list[np.ndarray]):
        self.params = params
        self.blocks = blocks
        self.assembled = np.concatenate(blocks, axis=1)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.assembled.shape[2:]

    def data_rows(self) -> np.ndarray:
        """Block 1 data region flattened back into the length-L vector."""
        p = self.params
        top = self.blocks[0][: p.alpha[0]]
        return top.reshape((p.L,) + top.shape[2:])

    def noise(self) -> list[np.ndarray]:
        p = self.params
        return [blk[p.alpha[i] : p.beta[i]] for i, blk in enumerate(self.blocks)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StaircaseMatrix):
            return NotImplemented
        return self.assembled.shape == other.assembled.shape and bool(np.all(self.assembled == other.assembled))

    def __add__(self, other: StaircaseMatrix) -> StaircaseMatrix:
        return sc_add(self, other)

    def __neg__(self) -> StaircaseMatrix:
        return self.scale(-1)

    def scale(self, c: int) -> StaircaseMatrix:
        q = self.params.q
        c = int(c) % q
        return StaircaseMatrix(self.params, [blk * c % q for blk in self.blocks])


NoiseFn = Callable[[int, np.ndarray, list], np.ndarray]


def replica_vector(blocks: list[np.ndarray], i: int, p: SystemParams) -> np.ndarray:
    """Concatenate M_1(R_r+i-1,:), M_2(R_r+i-2,:), ..., M_{i-1}(R_r+1,:) for block ``i >= 2``."""
    return np.concatenate([blocks[k - 1][p.r_r + i - k - 1] for k in range(1, i)], axis=0)


def build_blocks(data: np.ndarray, noise_fn: NoiseFn, p: SystemParams) -> list[np.ndarray]:
    """Generate blocks in order; ``noise_fn(i, top_rows, blocks_so_far)`` supplies block i's noise rows."""
    batch = data.shape[1:]
    blocks: list[np.ndarray] = []
    for i in range(1, p.g + 1):
        a, b, gm = p.alpha[i - 1], p.beta[i - 1], p.gamma[i - 1]
        src = data if i == 1 else replica_vector(blocks, i, p)
        top = reshape(src, a, gm)
        blk = p.field.zeros((p.n, gm) + batch)
        blk[:a] = top
        blk[a:b] = noise_fn(i, top, blocks)
        blocks.append(blk)
    return blocks


def sc_gen(payload: StaircasePayload, p: SystemParams) -> StaircaseMatrix:
    payload.validate(p)
    return StaircaseMatrix(p, build_blocks(payload.data, lambda i, top, blocks: payload.noise[i - 1], p))


def sc_add(a: StaircaseMatrix, b: StaircaseMatrix) -> StaircaseMatrix:
    if a.params != b.params or a.assembled.shape != b.assembled.shape:
        raise DimensionMismatch("staircase matrices built from different parameters")
    q = a.params.q
    return StaircaseMatrix(a.params, [(x + y) % q for x, y in zip(a.blocks, b.blocks)])


class ReplicaCoord(NamedTuple):
    """``source`` and ``target`` as 1-based (block, row, column) triples."""

    source: tuple[int, int, int]
    target: tuple[int, int, int]


def replica_coords(i: int, j: int, p: SystemParams) -> list[ReplicaCoord]:
    """Where row ``j`` of block ``i`` reappears inside a later block's D region.

    Row ``j`` in ``[R_r+1, beta_i]`` is copied into block ``i + j - R_r`` at
    flattened offset ``lambda_{i-1}`` of that block's replica vector.
    """
    if not 1 <= i <= p.g:
        raise IndexOutOfRange(f"block {i} outside [1, {p.g}]")
    if not p.r_r + 1 <= j <= p.beta[i - 1]:
        raise IndexOutOfRange(f"row {j} outside [{p.r_r + 1}, {p.beta[i - 1]}] for block {i}")
    target = i + j - p.r_r
    width = p.gamma[target - 1]
    coords = []
    for c in range(p.gamma[i - 1]):
        pos = p.lam[i - 1] + c
        coords.append(ReplicaCoord((i, j, c + 1), (target, pos // width + 1, pos % width + 1)))
    return coords
