import json
import struct

import pytest

from rdcds import snapshot
from rdcds.engine import SlotOp, init_system, step
from rdcds.errors import SnapshotError
from rdcds.params import derive_params


def make_state(seed=1):
    s = init_system(derive_params(6, 4, 2), seed=seed)
    step(s, SlotOp("update", (5,), 1))
    return s


def test_roundtrip_is_canonical():
    s = make_state()
    blob = snapshot.dump(s)
    assert blob[:4] == b"RDCD"
    assert snapshot.dump(snapshot.load(blob)) == blob
    # header (4 + 8*10) + 6x6 storage + 12 message + 2x(3+1+2) noise
    assert len(blob) == 84 + 8 * (36 + 12 + 12)


def test_reload_continues_identically():
    s = make_state(3)
    r = snapshot.load(snapshot.dump(s))
    for op in [SlotOp("update", (2,), 0), SlotOp("read", (1, 6)), SlotOp("update", (), 2)]:
        a, b = step(s, op, "full"), step(r, op, "full")
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_fractional_storage_factor_survives():
    s = init_system(derive_params(6, 4, 2.5), seed=0)
    r = snapshot.load(snapshot.dump(s))
    assert r.params.k_c_raw == s.params.k_c_raw


def test_file_helpers(tmp_path):
    s = make_state()
    path = tmp_path / "state.bin"
    snapshot.dump_file(s, path)
    assert snapshot.dump(snapshot.load_file(path)) == snapshot.dump(s)


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + struct.pack("<Q", 99) + b[12:],
    lambda b: b[:-8],
    lambda b: b + b"\0" * 8,
    lambda b: b[:20],
    lambda b: b[:-8] + struct.pack("<Q", 13),
])
def test_corrupt_snapshots_rejected(mutate):
    with pytest.raises(SnapshotError):
        snapshot.load(mutate(snapshot.dump(make_state())))


def test_header_params_must_be_valid():
    blob = bytearray(snapshot.dump(make_state()))
    struct.pack_into("<Q", blob, 12 + 8 * 2, 9)  # R_r > N
    with pytest.raises(SnapshotError):
        snapshot.load(bytes(blob))
