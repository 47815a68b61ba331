import json
import struct
from datetime import datetime, timezone

import numpy as np
import pytest

from novelty.feature_store import (
    FeaturePack,
    ValidationError,
    load_follows,
    load_shots,
    normalize_tags,
    parse_timestamp,
    read_pack,
    write_pack,
)


def make_pack(rows, ids=None, kind="unknown"):
    data = np.asarray(rows, dtype=np.float64).reshape(len(rows), -1)
    ids = ids or [f"s{i}" for i in range(len(rows))]
    return FeaturePack(ids=ids, data=data, kind=kind)


def test_empty_pack_round_trip(tmp_path):
    pack = FeaturePack(ids=[], data=np.zeros((0, 47)), kind="compositional")
    write_pack(pack, tmp_path)
    assert (tmp_path / "ids.txt").read_bytes() == b""
    assert (tmp_path / "data.f32le").read_bytes() == b""
    assert "n=0" in (tmp_path / "meta").read_text()
    back = read_pack(tmp_path)
    assert back.n == 0 and back.dim == 47


def test_bytes_layout_matches_hex_dump(tmp_path):
    # Expected bytes derived with struct.pack as an independent decoder.
    pack = make_pack([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    write_pack(pack, tmp_path)
    raw = (tmp_path / "data.f32le").read_bytes()
    assert len(raw) == 24
    assert struct.unpack("<f", raw[0:4])[0] == 1.0
    assert raw == struct.pack("<6f", 1, 2, 3, 4, 5, 6)
    assert (tmp_path / "ids.txt").read_bytes() == b"s0\ns1\n"


def test_round_trip_identity(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.normal(size=(5, 7)).astype(np.float32).astype(np.float64)
    pack = FeaturePack(ids=[f"id{i}" for i in range(5)], data=data, kind="embedding")
    write_pack(pack, tmp_path)
    back = read_pack(tmp_path)
    assert back.ids == pack.ids
    assert back.kind == "embedding"
    np.testing.assert_array_equal(back.data, pack.data)  # bitwise: f32-representable in
    # and the raw bytes round-trip too
    write_pack(back, tmp_path / "again")
    assert (tmp_path / "data.f32le").read_bytes() == (
        tmp_path / "again" / "data.f32le"
    ).read_bytes()


def test_truncated_data_reports_byte_counts(tmp_path):
    pack = make_pack([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    write_pack(pack, tmp_path)
    raw = (tmp_path / "data.f32le").read_bytes()
    (tmp_path / "data.f32le").write_bytes(raw[:-4])
    with pytest.raises(ValidationError, match="20 bytes.*expected 24"):
        read_pack(tmp_path)


def test_nan_row_rejected_with_index(tmp_path):
    pack = make_pack([[1.0, 2.0], [3.0, 4.0]])
    write_pack(pack, tmp_path)
    # Overwrite the first float with the quiet-NaN bit pattern 0x7FC00000.
    raw = bytearray((tmp_path / "data.f32le").read_bytes())
    raw[0:4] = bytes.fromhex("0000C07F")  # little-endian 0x7FC00000
    (tmp_path / "data.f32le").write_bytes(bytes(raw))
    with pytest.raises(ValidationError, match="row 0"):
        read_pack(tmp_path)


def test_duplicate_ids_rejected(tmp_path):
    pack = make_pack([[1.0], [2.0]], ids=["a", "a"])
    with pytest.raises(ValidationError, match="duplicate"):
        write_pack(pack, tmp_path)


def test_write_validates_before_touching_disk(tmp_path):
    pack = make_pack([[np.nan]])
    target = tmp_path / "out"
    with pytest.raises(ValidationError):
        write_pack(pack, target)
    assert not (target / "data.f32le").exists()


def shots_file(tmp_path, records):
    path = tmp_path / "shots.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def rec(sid, ts, user="u1", tags=(), **kw):
    return {
        "shot_id": sid,
        "user_id": user,
        "timestamp": ts,
        "tags": list(tags),
        "likes": kw.get("likes", 0),
        "views": kw.get("views", 0),
    }


def test_load_shots_sorts_by_timestamp(tmp_path):
    path = shots_file(
        tmp_path,
        [
            rec("c", "2014-03-01T00:00:00Z"),
            rec("a", "2014-01-01T00:00:00Z"),
            rec("b", "2014-02-01T00:00:00Z"),
        ],
    )
    shots = load_shots(path)
    assert [s.shot_id for s in shots] == ["a", "b", "c"]


def test_load_shots_tie_breaks_by_shot_id(tmp_path):
    path = shots_file(
        tmp_path,
        [rec("z2", "2014-01-01T00:00:00Z"), rec("z1", "2014-01-01T00:00:00Z")],
    )
    shots = load_shots(path)
    assert [s.shot_id for s in shots] == ["z1", "z2"]


def test_load_shots_deterministic(tmp_path):
    recs = [rec(f"s{i}", f"2014-01-0{1 + i % 5}T00:00:0{i % 10}Z") for i in range(20)]
    path = shots_file(tmp_path, recs)
    first = load_shots(path)
    second = load_shots(path)
    assert [s.shot_id for s in first] == [s.shot_id for s in second]


def test_load_shots_duplicate_id(tmp_path):
    path = shots_file(
        tmp_path,
        [rec("a", "2014-01-01T00:00:00Z"), rec("a", "2014-01-02T00:00:00Z")],
    )
    with pytest.raises(ValidationError, match="line 2.*duplicate"):
        load_shots(path)


def test_load_shots_bad_timestamp(tmp_path):
    path = shots_file(tmp_path, [rec("a", "not-a-time")])
    with pytest.raises(ValidationError, match="line 1"):
        load_shots(path)


def test_load_shots_normalizes_tags(tmp_path):
    path = shots_file(tmp_path, [rec("a", "2014-01-01T00:00:00Z", tags=["UI ", "ui", "Logo"])])
    (shot,) = load_shots(path)
    assert shot.tags == ("ui", "logo")


def test_load_follows_self_edge(tmp_path):
    path = tmp_path / "follows.csv"
    path.write_text("u1,u2,2014-01-01T00:00:00Z\nu1,u1,2014-01-01T00:00:00Z\n")
    with pytest.raises(ValidationError, match="line 2.*self-follow"):
        load_follows(path)


def test_load_follows_parses(tmp_path):
    path = tmp_path / "follows.csv"
    path.write_text("u1,u2,2014-06-01T12:30:00Z\n")
    ((src, dst, ts),) = load_follows(path)
    assert (src, dst) == ("u1", "u2")
    assert ts == datetime(2014, 6, 1, 12, 30, tzinfo=timezone.utc)


def test_parse_timestamp_variants():
    base = datetime(2014, 1, 2, 3, 4, 5, tzinfo=timezone.utc)
    assert parse_timestamp("2014-01-02T03:04:05Z") == base
    assert parse_timestamp("2014-01-02T03:04:05+00:00") == base
    assert parse_timestamp("2014-01-02T04:04:05+01:00") == base
    with pytest.raises(ValidationError):
        parse_timestamp("05/01/2014")


def test_normalize_tags_order_and_dedupe():
    assert normalize_tags(["B", " a", "b", "", "A"]) == ["b", "a"]
