"""Slot-by-slot simulation of the coded store with a plaintext reference.

The engine keeps the N server rows alongside the reference message, the
reference noise and the staircase matrix they generate, so that every slot
can be checked against ``servers == C @ M_ref``.

Randomness for slot ``t`` comes from its own stream derived from
``(seed, t)``; within an update the increment is drawn first, then the
secure-noise blocks in block order.  A state restored from a snapshot
therefore replays exactly what the uninterrupted run would have done.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, TailNotZero
from .params import SystemParams
from .protocol import (
    CostReport,
    build_h_blocks,
    complement,
    download,
    effective_blocks,
    make_update_packets,
    measured_read_cost,
    measured_update_cost,
    plan_read,
    apply_update,
    sample_secure_noise,
    server_set,
    sic_decode,
    update_feasible,
)
from .staircase import StaircaseMatrix, StaircasePayload, sc_add, sc_gen
from . import verify

log = logging.getLogger(__name__)

VERIFY_DEPTHS = ("quick", "full", "off")


def slot_rng(seed: int, slot: int, purpose: int = 1) -> np.random.Generator:
    """Independent stream per (seed, purpose, slot); purpose 0 is initialisation."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose, slot)))


@dataclass
class SlotOp:
    kind: str
    dropouts: tuple[int, ...] = ()
    x: int = 0
    increment: str | Sequence[int] = "random"


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _frac(v: Fraction | None) -> str | None:
    return None if v is None else str(v)


@dataclass
class SlotReport:
    slot: int
    kind: str
    dropouts: tuple[int, ...]
    x: int
    feasible: bool
    cost: CostReport | None = None
    verification: list[Verdict] = field(default_factory=list)
    recovered_message: list[int] | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verification)

    def to_dict(self) -> dict:
        c = self.cost
        return {
            "slot": self.slot,
            "kind": self.kind,
            "dropouts": list(self.dropouts),
            "x": self.x,
            "feasible": self.feasible,
            "cost": None if c is None else {
                "symbols": c.symbols,
                "servers": c.servers,
                "L": c.L,
                "normalized": _frac(c.cost),
                "bound": _frac(c.bound),
                "matches_bound": c.matches_bound,
                "clamped": c.clamped,
                "r_r": c.r_r,
                "r_u": c.r_u,
            },
            "verification": [v.to_dict() for v in self.verification],
            "recovered_message": self.recovered_message,
        }


@dataclass
class SystemState:
    params: SystemParams
    servers: np.ndarray
    ref_message: np.ndarray
    ref_noise: list[np.ndarray]
    ref_matrix: StaircaseMatrix
    seed: int
    slot: int = 0
    # updates since the reference payload was last loaded; verification only
    history: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    last_update: tuple[tuple[int, ...], int] | None = None

    @property
    def C(self) -> np.ndarray:
        return self.params.C

    @property
    def ref_payload(self) -> StaircasePayload:
        return StaircasePayload(self.ref_message, self.ref_noise)


def load_reference(p: SystemParams, message: np.ndarray, noise: list[np.ndarray], servers: np.ndarray,
                   seed: int, slot: int) -> SystemState:
    payload = StaircasePayload(message, noise)
    return SystemState(p, servers, message, noise, sc_gen(payload, p), seed, slot)


def init_system(p: SystemParams, w0=None, seed: int = 0) -> SystemState:
    """Sample the initial noise (and message, unless given) and store ``C @ M`` row by row."""
    f = p.field
    rng = slot_rng(seed, 0, purpose=0)
    if w0 is None:
        message = f.random(rng, (p.L,))
    else:
        message = f.array(list(w0))
        if message.shape != (p.L,):
            raise LengthMismatch(f"initial message must hold L={p.L} symbols, got {message.shape[0]}")
    noise = [f.random(rng, (p.noise_rows, gm)) for gm in p.gamma]
    matrix = sc_gen(StaircasePayload(message, noise), p)
    servers = f.matmul(p.C, matrix.assembled)
    return SystemState(p, servers, message, noise, matrix, seed, 0)


def step(state: SystemState, op: SlotOp, depth: str = "quick") -> SlotReport:
    """Execute one read or update against the available servers."""
    p = state.params
    dropouts = server_set(p, op.dropouts)
    if op.kind == "read":
        return _read(state, dropouts, depth)
    if op.kind == "update":
        return _update(state, dropouts, op, depth)
    raise ValueError(f"unknown operation kind {op.kind!r}")


def _read(state: SystemState, dropouts: tuple[int, ...], depth: str) -> SlotReport:
    p = state.params
    report = SlotReport(state.slot, "read", dropouts, 0, feasible=False)
    available = complement(p, dropouts)
    if len(available) < p.r_r:
        log.info("slot %d: read infeasible with %d available", state.slot, len(available))
        return report
    state.last_update = None
    before = state.servers.copy()
    plan = plan_read(p, available)
    downloads = download(state.servers, plan)
    recovered = sic_decode(downloads, available, p)
    report.feasible = True
    report.cost = measured_read_cost(p, downloads)
    report.recovered_message = [int(v) for v in recovered]
    ok = np.array_equal(recovered, state.ref_message)
    report.verification.append(Verdict("read_correct", ok, "" if ok else "recovered message differs from reference"))
    report.verification.append(Verdict("read_purity", bool(np.array_equal(before, state.servers))))
    state.slot += 1
    report.verification.extend(verify_state(state, depth))
    return report


def _update(state: SystemState, dropouts: tuple[int, ...], op: SlotOp, depth: str) -> SlotReport:
    p, f = state.params, state.params.field
    x = int(op.x)
    report = SlotReport(state.slot, "update", dropouts, x, feasible=False)
    if not update_feasible(p, x, len(dropouts)):
        log.info("slot %d: update infeasible (X=%d, |D|=%d)", state.slot, x, len(dropouts))
        return report
    if isinstance(op.increment, str):
        if op.increment != "random":
            raise ValueError(f"increment must be 'random' or a list of {p.L} integers")
        rng = slot_rng(state.seed, state.slot)
        delta = f.random(rng, (p.L,))
    else:
        delta = f.array(list(op.increment))
        if delta.shape != (p.L,):
            raise LengthMismatch(f"increment must hold L={p.L} symbols, got {delta.shape[0]}")
        rng = slot_rng(state.seed, state.slot)
    g_t, _ = effective_blocks(p, x, len(dropouts))
    secure = sample_secure_noise(x, g_t, p, rng)
    plan = build_h_blocks(delta, secure, dropouts, x, p)
    report.feasible = True
    verdicts = report.verification

    coded = f.matmul(p.C, plan.increment.assembled)
    null_bad = [n for n in dropouts if np.any(coded[n - 1] != 0)]
    verdicts.append(Verdict("null_property", not null_bad,
                            "" if not null_bad else f"dropout servers with nonzero coded rows: {null_bad}"))
    try:
        packets = make_update_packets(plan, p)
        verdicts.append(Verdict("tail_zero", True))
    except TailNotZero as exc:
        verdicts.append(Verdict("tail_zero", False, str(exc)))
        return report

    before = state.servers.copy()
    for pk in packets:
        state.servers[pk.server - 1] = apply_update(state.servers[pk.server - 1], pk, p.q)
    untouched = all(np.array_equal(before[n - 1], state.servers[n - 1]) for n in dropouts)
    verdicts.append(Verdict("dropout_rows_unchanged", untouched))
    report.cost = measured_update_cost(p, plan, packets)

    new_message = (state.ref_message + delta) % p.q
    new_noise = [(z + dz) % p.q for z, dz in zip(state.ref_noise, plan.noise_blocks())]
    new_matrix = sc_gen(StaircasePayload(new_message, new_noise), p)
    additive = sc_add(state.ref_matrix, plan.increment) == new_matrix
    verdicts.append(Verdict("additivity", additive))
    state.ref_message, state.ref_noise, state.ref_matrix = new_message, new_noise, new_matrix
    state.history.append((dropouts, x))
    state.last_update = (dropouts, x)
    state.slot += 1
    verdicts.extend(verify_state(state, depth))
    return report


def verify_state(state: SystemState, depth: str = "quick") -> list[Verdict]:
    """Consistency and security checks on the current state.

    ``quick``: servers match ``C @ M_ref``, ``M_ref`` matches the reference
    payload, and one random R_r-subset decodes.  ``full`` adds every
    R_r-subset decode, the null/X-security/recovery checks for the update
    just applied (if any), and steady-state security over the updates since
    the reference was loaded.
    """
    if depth == "off":
        return []
    if depth not in VERIFY_DEPTHS:
        raise ValueError(f"verification depth must be one of {VERIFY_DEPTHS}")
    p = state.params
    out: list[Verdict] = []

    expected = p.field.matmul(p.C, state.ref_matrix.assembled)
    diff = np.argwhere(expected != state.servers)
    if diff.size:
        n, c = (int(v) + 1 for v in diff[0])
        out.append(Verdict("consistency", False, f"server {n} column {c} differs from C @ M_ref"))
    else:
        out.append(Verdict("consistency", True))
    out.append(Verdict("reference_matrix", sc_gen(state.ref_payload, p) == state.ref_matrix))

    rng = slot_rng(state.seed, state.slot, purpose=2)
    subset = tuple(sorted(int(v) + 1 for v in rng.choice(p.n, size=p.r_r, replace=False)))
    out.append(_decode_verdict(state, [subset], "decode_random_subset"))
    if depth == "quick":
        return out

    out.append(_decode_verdict(state, list(combinations(range(1, p.n + 1), p.r_r)), "decode_all_subsets"))
    if state.last_update is not None:
        D, x = state.last_update
        m = verify.update_map(p, D, x)
        bad = verify.null_violations(m)
        out.append(Verdict("null_property_map", not bad, "" if not bad else f"nonzero (server, column): {bad[:5]}"))
        bad = verify.x_security_violations(m)
        out.append(Verdict("x_security", not bad, "" if not bad else f"leaking subsets: {bad[:5]}"))
    sm = verify.storage_map(p, state.history)
    bad = verify.steady_state_violations(sm)
    out.append(Verdict("steady_state_security", not bad, "" if not bad else f"leaking subsets: {bad[:5]}"))
    return out


def _decode_verdict(state: SystemState, subsets: list[tuple[int, ...]], name: str) -> Verdict:
    p = state.params
    for sub in subsets:
        plan = plan_read(p, sub)
        w = sic_decode(download(state.servers, plan), sub, p)
        if not np.array_equal(w, state.ref_message):
            return Verdict(name, False, f"decode from servers {list(sub)} disagrees with reference")
    return Verdict(name, True)
