"""Linear-algebra checks on the read/update pipeline.

Everything the protocol does is linear over GF(q) in the message,
increment and noise symbols.  Feeding unit vectors through the pipeline
(as one batch along a trailing axis) yields the exact matrices of those
maps, and the security and recoverability claims become rank statements:

* X-security: for every X-subset of available servers, the column space
  of increment -> packets lies inside that of secure noise -> packets.
  Uniform noise then makes the packet distribution independent of the
  increment.
* Unique recovery: for every (R_r - |D|)-subset, the increment columns
  add exactly L to the rank of the noise columns.
* Steady-state security: for every (R_r - K_c)-subset of servers, the
  message -> storage column space lies inside noise -> storage.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import Inconsistent
from .params import SystemParams
from .protocol import build_h_blocks, coded_increment, complement, effective_blocks, server_set
from .staircase import StaircasePayload, sc_gen


def _unit_columns(p: SystemParams, rows: int, start: int, total: int) -> np.ndarray:
    """A (rows, total) block with ones at (k, start + k)."""
    out = p.field.zeros((rows, total))
    for k in range(rows):
        out[k, start + k] = 1
    return out


@dataclass
class UpdateMap:
    """``coded[n, c, v]``: symbol c of server n's coded increment per unit input v.

    Inputs are ordered increment first (L columns), then secure noise blocks
    1..G_t flattened row-major.
    """

    params: SystemParams
    dropouts: tuple[int, ...]
    x: int
    g_t: int
    coded: np.ndarray

    @property
    def n_delta(self) -> int:
        return self.params.L

    @property
    def n_inputs(self) -> int:
        return self.coded.shape[2]

    @property
    def available(self) -> tuple[int, ...]:
        return complement(self.params, self.dropouts)

    @property
    def upload_len(self) -> int:
        return self.params.lam[self.g_t]

    def stacked(self, servers: Iterable[int]) -> np.ndarray:
        """Packet map of the given servers, one row per uploaded symbol."""
        idx = [n - 1 for n in servers]
        return self.coded[idx, : self.upload_len].reshape(-1, self.n_inputs)


def update_map(p: SystemParams, dropouts: Iterable[int], x: int) -> UpdateMap:
    D = server_set(p, dropouts)
    g_t, _ = effective_blocks(p, x, len(D))
    sizes = [x * p.gamma[i] for i in range(g_t)]
    total = p.L + sum(sizes)
    delta = _unit_columns(p, p.L, 0, total)
    noise, off = [], p.L
    for i, s in enumerate(sizes):
        noise.append(_unit_columns(p, s, off, total).reshape(x, p.gamma[i], total))
        off += s
    plan = build_h_blocks(delta, noise, D, x, p)
    return UpdateMap(p, D, x, g_t, coded_increment(plan, p))


def null_violations(m: UpdateMap) -> list[tuple[int, int]]:
    """(server, column) pairs where a dropout's coded row is not identically zero."""
    bad = []
    for n in m.dropouts:
        for c in np.flatnonzero(np.any(m.coded[n - 1] != 0, axis=-1)):
            bad.append((n, int(c) + 1))
    return bad


def tail_violations(m: UpdateMap) -> list[int]:
    """Servers whose coded row has a nonzero beyond the upload prefix."""
    tail = m.coded[:, m.upload_len :]
    return [n + 1 for n in range(m.params.n) if np.any(tail[n] != 0)]


def contained(field, inner: np.ndarray, outer: np.ndarray) -> bool:
    """colspace(inner) is a subspace of colspace(outer)."""
    if inner.size == 0 or not np.any(inner):
        return True
    return field.rank(np.concatenate([outer, inner], axis=1)) == field.rank(outer)


def x_security_violations(m: UpdateMap) -> list[tuple[int, ...]]:
    f = m.params.field
    bad = []
    for sub in combinations(m.available, m.x):
        a = m.stacked(sub)
        if not contained(f, a[:, : m.n_delta], a[:, m.n_delta :]):
            bad.append(sub)
    return bad


def recovery_violations(m: UpdateMap, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Subsets of size R_r - |D| from which a planted increment is not uniquely solvable."""
    p, f = m.params, m.params.field
    planted = f.random(rng, (m.n_inputs,))
    bad = []
    for sub in combinations(m.available, p.r_r - len(m.dropouts)):
        a = m.stacked(sub)
        y = f.matmul(a, planted)
        try:
            sol = f.solve(a, y)
        except Inconsistent:
            bad.append(sub)
            continue
        unique = f.rank(a) - f.rank(a[:, m.n_delta :]) == m.n_delta
        if not unique or not np.array_equal(sol[: m.n_delta], planted[: m.n_delta]):
            bad.append(sub)
    return bad


# --------------------------------------------------------------------------
# storage maps over a history of updates
# --------------------------------------------------------------------------


@dataclass
class StorageMap:
    """``storage[n, c, v]`` over inputs split into message-like and noise-like columns."""

    params: SystemParams
    storage: np.ndarray
    message_cols: list[int]
    noise_cols: list[int]


def storage_map(p: SystemParams, updates: Sequence[tuple[Sequence[int], int]]) -> StorageMap:
    """Storage as a linear function of the base payload and every later increment and secure noise.

    ``updates`` lists ``(dropouts, X)`` for each update applied since the
    base payload was stored.  Reads do not touch storage and are omitted.
    """
    f = p.field
    noise_len = p.noise_rows * p.lam[p.g]
    widths = []
    for D, x in updates:
        g_t, _ = effective_blocks(p, x, len(D))
        widths.append((p.L, sum(x * p.gamma[i] for i in range(g_t)), g_t))
    total = p.L + noise_len + sum(a + b for a, b, _ in widths)

    message_cols = list(range(p.L))
    noise_cols = list(range(p.L, p.L + noise_len))
    data = _unit_columns(p, p.L, 0, total)
    base_noise, off = [], p.L
    for gm in p.gamma:
        s = p.noise_rows * gm
        base_noise.append(_unit_columns(p, s, off, total).reshape(p.noise_rows, gm, total))
        off += s
    storage = f.matmul(p.C, sc_gen(StaircasePayload(data, base_noise), p).assembled)

    for (D, x), (nl, ns, g_t) in zip(updates, widths):
        delta = _unit_columns(p, nl, off, total)
        message_cols.extend(range(off, off + nl))
        off += nl
        noise_cols.extend(range(off, off + ns))
        sec = []
        for i in range(g_t):
            s = x * p.gamma[i]
            sec.append(_unit_columns(p, s, off, total).reshape(x, p.gamma[i], total))
            off += s
        plan = build_h_blocks(delta, sec, D, x, p)
        coded = coded_increment(plan, p)
        for n in complement(p, D):
            storage[n - 1] = (storage[n - 1] + coded[n - 1]) % p.q
    return StorageMap(p, storage, message_cols, noise_cols)


def steady_state_violations(sm: StorageMap, subset_size: int | None = None) -> list[tuple[int, ...]]:
    p, f = sm.params, sm.params.field
    k = p.noise_rows if subset_size is None else subset_size
    bad = []
    for sub in combinations(range(1, p.n + 1), k):
        a = sm.storage[[n - 1 for n in sub]].reshape(-1, sm.storage.shape[2])
        if not contained(f, a[:, sm.message_cols], a[:, sm.noise_cols]):
            bad.append(sub)
    return bad
