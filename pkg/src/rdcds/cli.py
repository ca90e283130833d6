"""Scenario files, seeded runs and reporting.

A scenario is a JSON document::

    {"params": {"n": 6, "r_r": 4, "k_c": 2}, "seed": 7, "q": 13,
     "verify": "full",
     "ops": [{"kind": "read", "dropouts": [6]},
             {"kind": "update", "dropouts": [5], "x": 1, "increment": "random"}]}

``q``, ``seed`` (default 0) and ``verify`` (default ``quick``) are optional.
Ops may carry ``expected_infeasible`` and their own ``verify``.  ``k_c`` may
be an integer, a float or a fraction string such as ``"5/2"``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any

from . import snapshot
from .engine import VERIFY_DEPTHS, SlotOp, SlotReport, SystemState, Verdict, init_system, step, verify_state
from .errors import InvalidParams, ParseError, RDCDSError, ValidationError
from .params import SystemParams, derive_params

log = logging.getLogger(__name__)

_TOP_KEYS = {"params", "seed", "q", "verify", "ops"}
_PARAM_KEYS = {"n", "r_r", "k_c"}
_OP_KEYS = {
    "read": {"kind", "dropouts", "expected_infeasible", "verify"},
    "update": {"kind", "dropouts", "x", "increment", "expected_infeasible", "verify"},
}


@dataclass
class ScenarioOp:
    op: SlotOp
    expected_infeasible: bool = False
    verify: str | None = None


@dataclass
class Scenario:
    n: int
    r_r: int
    k_c: Fraction
    seed: int = 0
    q: int | None = None
    verify: str = "quick"
    ops: list[ScenarioOp] = field(default_factory=list)

    def params(self) -> SystemParams:
        return derive_params(self.n, self.r_r, self.k_c, q=self.q)


def _int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{path}: expected an integer, got {json.dumps(value)}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _object(value, path: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise ValidationError(f"{path}: expected an object")
    extra = sorted(set(value) - allowed)
    if extra:
        raise ValidationError(f"{path}: unknown key(s) {', '.join(extra)}")
    return value


def _depth(value, path: str) -> str:
    if value not in VERIFY_DEPTHS:
        raise ValidationError(f"{path}: must be one of {', '.join(VERIFY_DEPTHS)}")
    return value


def _k_c(value, path: str) -> Fraction:
    if isinstance(value, bool):
        raise ValidationError(f"{path}: expected a number")
    try:
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    raise ValidationError(f"{path}: expected a number or fraction string")


def _parse_op(raw, path: str, n: int) -> ScenarioOp:
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: expected an object")
    kind = raw.get("kind")
    if kind not in _OP_KEYS:
        raise ValidationError(f"{path}.kind: must be 'read' or 'update'")
    _object(raw, path, _OP_KEYS[kind])
    dropouts = raw.get("dropouts", [])
    if not isinstance(dropouts, list):
        raise ValidationError(f"{path}.dropouts: expected a list")
    seen = set()
    for k, d in enumerate(dropouts):
        _int(d, f"{path}.dropouts[{k}]")
        if not 1 <= d <= n:
            raise ValidationError(f"{path}.dropouts[{k}]: server {d} outside [1, {n}]")
        if d in seen:
            raise ValidationError(f"{path}.dropouts[{k}]: duplicate server {d}")
        seen.add(d)
    x = _int(raw.get("x", 0), f"{path}.x", minimum=0)
    inc = raw.get("increment", "random")
    if isinstance(inc, list):
        inc = [_int(v, f"{path}.increment[{k}]") for k, v in enumerate(inc)]
    elif inc != "random":
        raise ValidationError(f"{path}.increment: expected 'random' or a list of integers")
    exp = raw.get("expected_infeasible", False)
    if not isinstance(exp, bool):
        raise ValidationError(f"{path}.expected_infeasible: expected true or false")
    depth = _depth(raw["verify"], f"{path}.verify") if "verify" in raw else None
    return ScenarioOp(SlotOp(kind, tuple(sorted(dropouts)), x, inc), exp, depth)


def parse_scenario(text: bytes | str) -> Scenario:
    """Parse and fully validate a scenario; nothing runs until this succeeds."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"scenario is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc

    doc = _object(doc, "scenario", _TOP_KEYS)
    if "params" not in doc:
        raise ValidationError("scenario: missing key params")
    prm = _object(doc["params"], "params", _PARAM_KEYS)
    for key in sorted(_PARAM_KEYS - set(prm)):
        raise ValidationError(f"params: missing key {key}")
    n = _int(prm["n"], "params.n", minimum=1)
    r_r = _int(prm["r_r"], "params.r_r", minimum=1)
    k_c = _k_c(prm["k_c"], "params.k_c")
    seed = _int(doc.get("seed", 0), "seed", minimum=0)
    q = _int(doc["q"], "q", minimum=2) if doc.get("q") is not None else None
    depth = _depth(doc["verify"], "verify") if "verify" in doc else "quick"

    sc = Scenario(n, r_r, k_c, seed, q, depth)
    try:
        p = sc.params()
    except InvalidParams as exc:
        raise ValidationError(f"params: {exc}") from exc

    ops = doc.get("ops", [])
    if not isinstance(ops, list):
        raise ValidationError("ops: expected a list")
    for k, raw in enumerate(ops):
        op = _parse_op(raw, f"ops[{k}]", n)
        inc = op.op.increment
        if isinstance(inc, list):
            if len(inc) != p.L:
                raise ValidationError(f"ops[{k}].increment: expected L={p.L} symbols, got {len(inc)}")
            if any(not 0 <= v < p.q for v in inc):
                raise ValidationError(f"ops[{k}].increment: symbols must lie in [0, {p.q})")
        sc.ops.append(op)
    return sc


def load_bundled(name: str = "paper_example.json") -> Scenario:
    return parse_scenario(resources.files("rdcds.scenarios").joinpath(name).read_bytes())


@dataclass
class RunReport:
    params: SystemParams
    seed: int
    init_verification: list[Verdict]
    rows: list[SlotReport]
    expected_infeasible: list[bool]
    state: SystemState

    def problems(self) -> list[str]:
        out = [f"init: verdict {v.name} failed {v.detail}".rstrip() for v in self.init_verification if not v.passed]
        for row, exp in zip(self.rows, self.expected_infeasible):
            tag = f"slot {row.slot} ({row.kind})"
            if row.feasible == exp:
                out.append(f"{tag}: feasible={row.feasible} but expected_infeasible={exp}")
            for v in row.verification:
                if not v.passed:
                    out.append(f"{tag}: verdict {v.name} failed {v.detail}".rstrip())
            c = row.cost
            if c is not None and not c.clamped and not c.matches_bound:
                out.append(f"{tag}: cost {c.cost} differs from bound {c.bound}")
        return out

    @property
    def exit_status(self) -> int:
        return 1 if self.problems() else 0

    def to_dict(self) -> dict[str, Any]:
        p = self.params
        rows = [r.to_dict() | {"expected_infeasible": e} for r, e in zip(self.rows, self.expected_infeasible)]
        probs = self.problems()
        return {
            "params": {
                "n": p.n, "r_r": p.r_r,
                "k_c": f"{p.k_c_raw.numerator}/{p.k_c_raw.denominator}",
                "k_c_effective": p.k_c, "q": p.q, "L": p.L,
            },
            "seed": self.seed,
            "init_verification": [v.to_dict() for v in self.init_verification],
            "ops": rows,
            "summary": {
                "ops": len(self.rows),
                "feasible": sum(r.feasible for r in self.rows),
                "cost_mismatches": sum(
                    1 for r in self.rows if r.cost is not None and not r.cost.clamped and not r.cost.matches_bound
                ),
                "failed_verdicts": sum(not v.passed for v in self.init_verification)
                + sum(not v.passed for r in self.rows for v in r.verification),
                "problems": probs,
                "exit_status": 1 if probs else 0,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        p = self.params
        lines = [f"N={p.n} R_r={p.r_r} K_c={p.k_c_raw} q={p.q} L={p.L} seed={self.seed}"]
        init = self.init_verification
        lines.append(f"init: {sum(v.passed for v in init)}/{len(init)} verdicts pass")
        header = ("slot", "kind", "|D|", "X", "feasible", "cost", "bound", "match", "verdicts")
        table = [header]
        for r in self.rows:
            c = r.cost
            cost = "-" if c is None else str(c.cost)
            bound = "-" if c is None else str(c.bound)
            match = "-" if c is None else ("clamped" if c.clamped else ("yes" if c.matches_bound else "NO"))
            ok = sum(v.passed for v in r.verification)
            table.append((str(r.slot), r.kind, str(len(r.dropouts)), str(r.x) if r.kind == "update" else "-",
                          "yes" if r.feasible else "no", cost, bound, match, f"{ok}/{len(r.verification)}"))
        widths = [max(len(row[k]) for row in table) for k in range(len(header))]
        for row in table:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        probs = self.problems()
        lines.append("all checks pass" if not probs else f"{len(probs)} problem(s):")
        lines.extend(f"  {msg}" for msg in probs)
        return "\n".join(lines) + "\n"


def run(scenario: Scenario, seed: int | None = None, verify: str | None = None) -> RunReport:
    """Execute every op in order; ``verify`` overrides both scenario and per-op depth."""
    p = scenario.params()
    seed = scenario.seed if seed is None else seed
    state = init_system(p, seed=seed)
    init_depth = verify or scenario.verify
    init = verify_state(state, init_depth)
    rows, expected = [], []
    for sop in scenario.ops:
        depth = verify or sop.verify or scenario.verify
        rows.append(step(state, sop.op, depth))
        expected.append(sop.expected_infeasible)
    return RunReport(p, seed, init, rows, expected, state)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdcds", description="Run coded-storage scenarios and check costs.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a JSON scenario file")
    r.add_argument("file", help="scenario path, or 'example' for the bundled worked example")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--verify", choices=VERIFY_DEPTHS, help="verification depth for every slot")
    r.add_argument("--format", choices=("text", "json"), default="text")
    r.add_argument("--snapshot", metavar="PATH", help="write the final state snapshot here")
    r.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        if args.file == "example":
            sc = load_bundled()
        else:
            with open(args.file, "rb") as fh:
                sc = parse_scenario(fh.read())
        if args.seed is not None and args.seed < 0:
            raise ValidationError("--seed must be non-negative")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run(sc, seed=args.seed, verify=args.verify)
    except RDCDSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(report.to_json() if args.format == "json" else report.to_text())
    if args.snapshot:
        snapshot.dump_file(report.state, args.snapshot)
    return report.exit_status


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
