"""Read and update operations on a staircase-coded store.

Server ``n`` (1-based) stores row ``n`` of ``C @ M`` where ``C`` is the
N x N Cauchy matrix and ``M`` the assembled staircase matrix.

Read: with ``k >= R_r`` servers available, every available server returns
the first ``lambda_J`` symbols of its row (``J = N + 1 - k``) and
:func:`sic_decode` peels blocks ``J, J-1, ..., 1`` using replicated rows
recovered from later blocks.

Update: the increment is laid out with :func:`build_h_blocks`, whose
redundancy rows ``H_i`` are solved block by block so that the coded rows of
the dropout servers vanish.  Only the first ``lambda_{G_t}`` symbols of each
coded row can be nonzero, and that prefix is what gets uploaded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    LengthExceeded,
    ReadInfeasible,
    ShapeMismatch,
    TailNotZero,
    UpdateInfeasible,
)
from .params import SystemParams, update_threshold
from .staircase import StaircaseMatrix, build_blocks


def server_set(p: SystemParams, servers: Iterable[int]) -> tuple[int, ...]:
    """Sorted, validated tuple of 1-based server indices."""
    out = sorted(int(s) for s in servers)
    if len(set(out)) != len(out):
        raise IndexOutOfRange(f"duplicate server index in {out}")
    for s in out:
        if not 1 <= s <= p.n:
            raise IndexOutOfRange(f"server {s} outside [1, {p.n}]")
    return tuple(out)


def complement(p: SystemParams, servers: Iterable[int]) -> tuple[int, ...]:
    taken = set(server_set(p, servers))
    return tuple(n for n in range(1, p.n + 1) if n not in taken)


@lru_cache(maxsize=8192)
def _cauchy_inverse(p: SystemParams, rows: tuple[int, ...], cols: tuple[int, ...]) -> np.ndarray:
    sub = p.C[np.ix_(rows, cols)]
    return p.field.inverse(sub)


# --------------------------------------------------------------------------
# read
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReadPlan:
    available: tuple[int, ...]
    j: int
    length: int


@dataclass(frozen=True)
class ReadDownload:
    server: int
    symbols: np.ndarray


def plan_read(p: SystemParams, available: Iterable[int]) -> ReadPlan:
    avail = server_set(p, available)
    if len(avail) < p.r_r:
        raise ReadInfeasible(f"{len(avail)} servers available, read needs {p.r_r}")
    j = p.n + 1 - len(avail)
    return ReadPlan(avail, j, p.lam[j])


def download(storage: np.ndarray, plan: ReadPlan) -> list[ReadDownload]:
    """What each available server returns: a prefix of its storage row."""
    return [ReadDownload(n, storage[n - 1, : plan.length].copy()) for n in plan.available]


def sic_decode(downloads: list[ReadDownload], available: Iterable[int], p: SystemParams) -> np.ndarray:
    """Recover the stored length-L vector by successive interference cancellation."""
    plan = plan_read(p, available)
    avail, J = plan.available, plan.j
    got = {d.server: d.symbols for d in downloads}
    if sorted(got) != list(avail) or len(got) != len(downloads):
        raise ShapeMismatch(f"downloads from {sorted(got)} do not match available set {list(avail)}")
    for n, sym in got.items():
        if sym.shape[0] < plan.length:
            raise ShapeMismatch(f"server {n} returned {sym.shape[0]} symbols, need {plan.length}")

    f = p.field
    rows = tuple(n - 1 for n in avail)
    C_av = p.C[list(rows)]
    A = np.stack([got[n][: plan.length] for n in avail])
    decoded: dict[int, np.ndarray] = {}
    for i in range(J, 0, -1):
        y = A[:, p.lam[i - 1] : p.lam[i]]
        # rows R_r+1 .. R_r+J-i of block i were copied into blocks i+1..J
        known = list(range(p.r_r, p.r_r + J - i))
        if known:
            vals = []
            for j0 in known:
                tgt = i + (j0 + 1) - p.r_r
                flat = decoded[tgt][: p.alpha[tgt - 1]]
                flat = flat.reshape((-1,) + flat.shape[2:])
                vals.append(flat[p.lam[i - 1] : p.lam[i]])
            known_vals = np.stack(vals)
            y = (y - f.matmul(C_av[:, known], known_vals)) % p.q
        unknown = [r for r in range(p.beta[i - 1]) if r not in known]
        sol = f.matmul(_cauchy_inverse(p, rows, tuple(unknown)), y)
        blk = f.zeros((p.beta[i - 1],) + y.shape[1:])
        blk[unknown] = sol
        if known:
            blk[known] = known_vals
        decoded[i] = blk
    top = decoded[1][: p.alpha[0]]
    return top.reshape((p.L,) + top.shape[2:])


# --------------------------------------------------------------------------
# update
# --------------------------------------------------------------------------


def effective_blocks(p: SystemParams, x: int, n_dropouts: int) -> tuple[int, bool]:
    """``G_t = N - 2R_r + K_c + X + |D| + 1``, clamped to 1; returns (G_t, clamped)."""
    g_t = p.n - 2 * p.r_r + p.k_c + x + n_dropouts + 1
    if g_t < 1:
        return 1, True
    return g_t, False


def update_feasible(p: SystemParams, x: int, n_dropouts: int) -> bool:
    return x >= 0 and p.n - n_dropouts >= update_threshold(p, x)


def sample_secure_noise(x: int, g_t: int, p: SystemParams, rng: np.random.Generator) -> list[np.ndarray]:
    """Uniform X x gamma_i blocks for i = 1..G_t, drawn in block order."""
    if not 0 <= x <= p.noise_rows:
        raise UpdateInfeasible(f"security level X={x} outside [0, {p.noise_rows}]")
    return [p.field.random(rng, (x, p.gamma[i])) for i in range(g_t)]


@dataclass
class UpdatePlan:
    dropouts: tuple[int, ...]
    x: int
    g_t: int
    clamped: bool
    secure_noise: list[np.ndarray]
    h_blocks: list[np.ndarray]
    increment: StaircaseMatrix

    @property
    def upload_len(self) -> int:
        return self.increment.params.lam[self.g_t]

    def noise_blocks(self) -> list[np.ndarray]:
        return self.increment.noise()


def build_h_blocks(delta, secure_noise: list[np.ndarray], dropouts: Iterable[int], x: int, p: SystemParams) -> UpdatePlan:
    """Lay out the increment so that ``(C @ M_dot)(n, :) = 0`` for every dropout ``n``.

    Block i (i <= G_t) gets noise rows ``[Zsec_i; H_i; 0]`` with
    ``H_i = -C(D, [a+X+1 : a+X+|D|])^-1 (C(D, [a]) top_i + C(D, [a+1 : a+X]) Zsec_i)``
    where ``a = alpha_i`` and ``top_i`` is the block's data rows, fixed by
    the blocks before it.  Later blocks carry no noise.
    """
    D = server_set(p, dropouts)
    nd = len(D)
    if not update_feasible(p, x, nd):
        raise UpdateInfeasible(
            f"update with X={x} and {nd} dropouts needs {update_threshold(p, max(x, 0))} available servers, "
            f"have {p.n - nd}"
        )
    g_t, clamped = effective_blocks(p, x, nd)
    f = p.field
    delta = f.array(delta) if not isinstance(delta, np.ndarray) else delta
    if delta.shape[0] != p.L:
        raise DimensionMismatch(f"increment must hold L={p.L} symbols, got {delta.shape[0]}")
    batch = delta.shape[1:]
    if len(secure_noise) != g_t:
        raise DimensionMismatch(f"expected {g_t} secure-noise blocks, got {len(secure_noise)}")
    for i, z in enumerate(secure_noise):
        if z.shape != (x, p.gamma[i]) + batch:
            raise DimensionMismatch(f"secure-noise block {i + 1} has shape {z.shape}")

    Cd = p.C[[n - 1 for n in D]]
    h_blocks: list[np.ndarray] = []

    def noise_fn(i: int, top: np.ndarray, blocks) -> np.ndarray:
        gm = p.gamma[i - 1]
        if i > g_t:
            return f.zeros((p.noise_rows, gm) + batch)
        a = p.alpha[i - 1]
        zsec = secure_noise[i - 1]
        if nd:
            rhs = (f.matmul(Cd[:, :a], top) + f.matmul(Cd[:, a : a + x], zsec)) % p.q
            inv = _cauchy_inverse(p, tuple(n - 1 for n in D), tuple(range(a + x, a + x + nd)))
            h = (-f.matmul(inv, rhs)) % p.q
        else:
            h = f.zeros((0, gm) + batch)
        h_blocks.append(h)
        pad = f.zeros((p.noise_rows - x - nd, gm) + batch)
        return np.concatenate([zsec, h, pad], axis=0)

    blocks = build_blocks(delta, noise_fn, p)
    return UpdatePlan(D, x, g_t, clamped, list(secure_noise), h_blocks, StaircaseMatrix(p, blocks))


def coded_increment(plan: UpdatePlan, p: SystemParams) -> np.ndarray:
    """Full ``C @ M_dot`` (N x lambda_G, plus any batch axes)."""
    return p.field.matmul(p.C, plan.increment.assembled)


@dataclass(frozen=True)
class UpdatePacket:
    server: int
    symbols: np.ndarray


def make_update_packets(plan: UpdatePlan, p: SystemParams, available: Iterable[int] | None = None) -> list[UpdatePacket]:
    """One truncated coded row per available server."""
    avail = complement(p, plan.dropouts) if available is None else server_set(p, available)
    full = coded_increment(plan, p)
    cut = plan.upload_len
    packets = []
    for n in avail:
        row = full[n - 1]
        if np.any(row[cut:] != 0):
            raise TailNotZero(f"server {n}: coded increment is nonzero beyond column {cut}")
        packets.append(UpdatePacket(n, row[:cut].copy()))
    return packets


def apply_update(storage_row: np.ndarray, packet: UpdatePacket, q: int) -> np.ndarray:
    """Add the packet onto the prefix of a storage row; the suffix is unchanged."""
    k = packet.symbols.shape[0]
    if k > storage_row.shape[0]:
        raise LengthExceeded(f"packet of {k} symbols exceeds storage of {storage_row.shape[0]}")
    out = storage_row.copy()
    out[:k] = (out[:k] + packet.symbols) % q
    return out


# --------------------------------------------------------------------------
# costs
# --------------------------------------------------------------------------


def read_bound(p: SystemParams, n_dropouts: int) -> Fraction:
    return Fraction(p.n - n_dropouts, p.n - p.r_r + p.k_c - n_dropouts)


def update_bound(p: SystemParams, x: int, n_dropouts: int) -> Fraction:
    return Fraction(p.n - n_dropouts, p.r_r - x - n_dropouts)


@dataclass(frozen=True)
class CostReport:
    kind: str
    servers: int
    symbols: int
    L: int
    cost: Fraction
    bound: Fraction
    r_r: int
    r_u: int | None = None
    clamped: bool = False

    @property
    def matches_bound(self) -> bool:
        return self.cost == self.bound

    @property
    def exceeds_bound(self) -> bool:
        return self.cost > self.bound


def measured_read_cost(p: SystemParams, downloads: list[ReadDownload]) -> CostReport:
    symbols = sum(int(d.symbols.shape[0]) for d in downloads)
    return CostReport("read", len(downloads), symbols, p.L, Fraction(symbols, p.L),
                      read_bound(p, p.n - len(downloads)), p.r_r)


def measured_update_cost(p: SystemParams, plan: UpdatePlan, packets: list[UpdatePacket]) -> CostReport:
    symbols = sum(int(pk.symbols.shape[0]) for pk in packets)
    nd = len(plan.dropouts)
    return CostReport("update", len(packets), symbols, p.L, Fraction(symbols, p.L),
                      update_bound(p, plan.x, nd), p.r_r, update_threshold(p, plan.x), plan.clamped)


def read_cost(p: SystemParams, available: Iterable[int]) -> CostReport:
    plan = plan_read(p, available)
    k = len(plan.available)
    return CostReport("read", k, k * plan.length, p.L, Fraction(k * plan.length, p.L),
                      read_bound(p, p.n - k), p.r_r)


def update_cost(p: SystemParams, available: Iterable[int], x: int) -> CostReport:
    avail = server_set(p, available)
    nd = p.n - len(avail)
    if not update_feasible(p, x, nd):
        raise UpdateInfeasible(f"update with X={x} infeasible with {len(avail)} available servers")
    g_t, clamped = effective_blocks(p, x, nd)
    symbols = len(avail) * p.lam[g_t]
    return CostReport("update", len(avail), symbols, p.L, Fraction(symbols, p.L),
                      update_bound(p, x, nd), p.r_r, update_threshold(p, x), clamped)
