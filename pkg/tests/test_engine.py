import json

import numpy as np
import pytest

from rdcds.engine import SlotOp, init_system, step, verify_state
from rdcds.errors import IndexOutOfRange, LengthMismatch
from rdcds.params import derive_params


def names(verdicts):
    return {v.name: v.passed for v in verdicts}


def test_init_shapes():
    s = init_system(derive_params(6, 4, 2), seed=1)
    assert s.servers.shape == (6, 6)
    s = init_system(derive_params(4, 2, 1), seed=1)
    assert s.servers.shape == (4, 6)


def test_init_explicit_message():
    p = derive_params(6, 4, 2)
    s = init_system(p, w0=list(range(12)), seed=0)
    assert s.ref_message.tolist() == list(range(12))
    with pytest.raises(LengthMismatch):
        init_system(p, w0=[1, 2, 3])


def test_fresh_state_passes_full_verification():
    s = init_system(derive_params(6, 4, 2), seed=3)
    assert all(v.passed for v in verify_state(s, "full"))


def test_corruption_is_located():
    s = init_system(derive_params(6, 4, 2), seed=3)
    s.servers[2, 4] = (s.servers[2, 4] + 1) % s.params.q
    bad = [v for v in verify_state(s, "quick") if v.name == "consistency"][0]
    assert not bad.passed
    assert "server 3" in bad.detail and "column 5" in bad.detail


def test_noise_corruption_caught():
    s = init_system(derive_params(6, 4, 2), seed=3)
    s.ref_noise[1][0, 0] = (s.ref_noise[1][0, 0] + 1) % s.params.q
    v = names(verify_state(s, "quick"))
    assert not v["reference_matrix"]


def test_worked_example_slots():
    s = init_system(derive_params(6, 4, 2), seed=5)
    r = step(s, SlotOp("read", (6,)), "full")
    assert str(r.cost.cost) == "5/3" and r.recovered_message == s.ref_message.tolist()
    r = step(s, SlotOp("read", (3, 6)), "full")
    assert r.cost.cost == 2 and r.passed
    w0 = s.ref_message.copy()
    before = s.servers.copy()
    r = step(s, SlotOp("update", (5,), 0), "full")
    assert str(r.cost.cost) == "5/3" and r.passed
    assert np.array_equal(before[4], s.servers[4])
    assert not np.array_equal(w0, s.ref_message)
    r = step(s, SlotOp("update", (5,), 1), "full")
    assert str(r.cost.cost) == "5/2" and r.passed
    assert {"null_property", "x_security", "steady_state_security", "additivity"} <= set(names(r.verification))
    assert s.slot == 4


def test_read_purity_and_slot_advance():
    s = init_system(derive_params(5, 3, 2), seed=0)
    before = s.servers.copy()
    step(s, SlotOp("read", (1, 2)))
    assert np.array_equal(before, s.servers) and s.slot == 1


def test_infeasible_ops_leave_state_untouched():
    s = init_system(derive_params(6, 4, 2), seed=2)
    snap = (s.servers.copy(), s.ref_message.copy(), s.slot)
    r = step(s, SlotOp("update", (1, 2, 3), 0))
    assert not r.feasible and r.cost is None and r.verification == []
    r = step(s, SlotOp("update", (1, 2), 1))
    assert not r.feasible
    r = step(s, SlotOp("read", (1, 2, 3)))
    assert not r.feasible
    assert np.array_equal(snap[0], s.servers) and np.array_equal(snap[1], s.ref_message) and s.slot == snap[2]


def test_explicit_increment():
    p = derive_params(6, 4, 2)
    s = init_system(p, w0=[0] * 12, seed=0)
    step(s, SlotOp("update", (), 0, list(range(12))))
    assert s.ref_message.tolist() == list(range(12))
    r = step(s, SlotOp("read", (1, 2)))
    assert r.recovered_message == list(range(12))
    with pytest.raises(LengthMismatch):
        step(s, SlotOp("update", (), 0, [1, 2]))


def test_bad_op():
    s = init_system(derive_params(6, 4, 2))
    with pytest.raises(IndexOutOfRange):
        step(s, SlotOp("read", (9,)))
    with pytest.raises(ValueError):
        step(s, SlotOp("erase", ()))


def test_reports_deterministic():
    def trace(seed):
        s = init_system(derive_params(6, 4, 2), seed=seed)
        ops = [SlotOp("update", (2,), 1), SlotOp("read", (4,)), SlotOp("update", (), 2)]
        return json.dumps([step(s, op, "full").to_dict() for op in ops])

    assert trace(9) == trace(9)
    assert trace(9) != trace(10)


def test_long_mixed_run_stays_consistent():
    p = derive_params(7, 5, 2)
    s = init_system(p, seed=4)
    rng = np.random.default_rng(4)
    for t in range(25):
        k = int(rng.integers(0, 3))
        D = tuple(sorted(rng.choice(np.arange(1, 8), size=k, replace=False).tolist()))
        op = SlotOp("read", D) if t % 3 == 0 else SlotOp("update", D, int(rng.integers(0, 2)))
        r = step(s, op, "quick")
        assert r.passed
    assert all(v.passed for v in verify_state(s, "full"))
