"""Shot/follow input parsing and the bit-exact feature-pack container.

A feature pack is a directory with three files:

* ``meta`` -- text, ``key=value`` lines: n, dim, created, kind.
* ``ids.txt`` -- one shot_id per line, LF separated.
* ``data.f32le`` -- raw little-endian float32, row-major, n*dim*4 bytes.

Floats are 32-bit on disk to keep 2048-dim packs compact; everything is
widened to float64 in memory so downstream EM numerics are not starved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

META_NAME = "meta"
IDS_NAME = "ids.txt"
DATA_NAME = "data.f32le"


class ValidationError(ValueError):
    """Raised when an input file or pack violates its format contract."""


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp to an aware datetime (second resolution)."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValidationError(f"unparseable timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_tags(tags: list[str]) -> list[str]:
    """Unicode-lowercase + trim, drop empties, dedupe keeping first occurrence."""
    seen: set[str] = set()
    out: list[str] = []
    for tag in tags:
        t = tag.strip().lower()
        if t and t not in seen:
            seen.add(t)
            out.append(t)
    return out


@dataclass(frozen=True)
class ShotRecord:
    """One image post: id, author, UTC timestamp, tags, engagement counts."""

    shot_id: str
    user_id: str
    timestamp: datetime
    tags: tuple[str, ...] = ()
    likes: int = 0
    views: int = 0
    media_ref: str | None = None


@dataclass
class FeaturePack:
    """Id-indexed dense feature matrix (one row per shot)."""

    ids: list[str]
    data: np.ndarray  # (n, dim) float64
    kind: str = "unknown"

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValidationError(f"data must be 2-D, got shape {self.data.shape}")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def row(self, shot_id: str) -> np.ndarray:
        return self.data[self.index()[shot_id]]

    def index(self) -> dict[str, int]:
        if not hasattr(self, "_index"):
            self._index = {sid: i for i, sid in enumerate(self.ids)}
        return self._index

    def validate(self) -> None:
        if len(self.ids) != self.data.shape[0]:
            raise ValidationError(
                f"id count {len(self.ids)} != row count {self.data.shape[0]}"
            )
        if self.data.shape[1] < 1:
            raise ValidationError("dim must be positive")
        if len(set(self.ids)) != len(self.ids):
            dupes = sorted({s for s in self.ids if self.ids.count(s) > 1})
            raise ValidationError(f"duplicate ids: {dupes[:5]}")
        bad = ~np.isfinite(self.data)
        if bad.any():
            row = int(np.nonzero(bad.any(axis=1))[0][0])
            raise ValidationError(f"non-finite value in row {row}")


def write_pack(
    pack: FeaturePack,
    directory: str | Path,
    created: datetime | None = None,
) -> None:
    """Write a pack to *directory*; validates invariants before touching disk.

    ``created`` defaults to now; pass a fixed instant when byte-identical
    reruns matter (the synthetic generator does).
    """
    pack.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if created is None:
        created = datetime.now(timezone.utc)
    meta = (
        f"n={pack.n}\n"
        f"dim={pack.dim}\n"
        f"created={format_timestamp(created)}\n"
        f"kind={pack.kind}\n"
    )
    (directory / META_NAME).write_text(meta, encoding="utf-8")
    ids_text = "".join(f"{sid}\n" for sid in pack.ids)
    (directory / IDS_NAME).write_bytes(ids_text.encode("utf-8"))
    raw = np.ascontiguousarray(pack.data, dtype="<f4").tobytes()
    (directory / DATA_NAME).write_bytes(raw)


def read_pack(directory: str | Path) -> FeaturePack:
    """Read and validate a pack directory written by :func:`write_pack`."""
    directory = Path(directory)
    meta_path = directory / META_NAME
    if not meta_path.exists():
        raise ValidationError(f"missing {META_NAME} in {directory}")
    meta: dict[str, str] = {}
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or "=" not in line:
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    try:
        n = int(meta["n"])
        dim = int(meta["dim"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad meta in {directory}: {exc}") from exc
    if dim < 1:
        raise ValidationError(f"dim must be positive, got {dim}")

    ids_raw = (directory / IDS_NAME).read_bytes().decode("utf-8")
    ids = ids_raw.splitlines()
    if len(ids) != n:
        raise ValidationError(f"ids.txt has {len(ids)} lines, meta says n={n}")
    if len(set(ids)) != len(ids):
        dupes = sorted({s for s in ids if ids.count(s) > 1})
        raise ValidationError(f"duplicate ids: {dupes[:5]}")

    raw = (directory / DATA_NAME).read_bytes()
    expected = n * dim * 4
    if len(raw) != expected:
        raise ValidationError(
            f"data.f32le has {len(raw)} bytes, expected {expected} (n={n}, dim={dim})"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(n, dim).astype(np.float64)
    bad = ~np.isfinite(data)
    if bad.any():
        row = int(np.nonzero(bad.any(axis=1))[0][0])
        raise ValidationError(f"non-finite value in row {row}")
    return FeaturePack(ids=ids, data=data, kind=meta.get("kind", "unknown"))


def load_shots(path: str | Path) -> list[ShotRecord]:
    """Load newline-delimited JSON shot records.

    Records come back sorted by timestamp ascending, ties broken by
    shot_id, so downstream temporal folds see a total order.
    """
    records: list[ShotRecord] = []
    seen_ids: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                shot_id = str(obj["shot_id"])
                user_id = str(obj["user_id"])
                ts = parse_timestamp(str(obj["timestamp"]))
            except KeyError as exc:
                raise ValidationError(f"line {lineno}: missing field {exc}") from exc
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            if shot_id in seen_ids:
                raise ValidationError(
                    f"line {lineno}: duplicate shot_id {shot_id!r}"
                    f" (first seen on line {seen_ids[shot_id]})"
                )
            seen_ids[shot_id] = lineno
            likes = int(obj.get("likes", 0))
            views = int(obj.get("views", 0))
            if likes < 0 or views < 0:
                raise ValidationError(f"line {lineno}: negative likes/views")
            tags = obj.get("tags", [])
            if not isinstance(tags, list):
                raise ValidationError(f"line {lineno}: tags must be an array")
            records.append(
                ShotRecord(
                    shot_id=shot_id,
                    user_id=user_id,
                    timestamp=ts,
                    tags=tuple(normalize_tags([str(t) for t in tags])),
                    likes=likes,
                    views=views,
                    media_ref=obj.get("media_ref"),
                )
            )
    records.sort(key=lambda r: (r.timestamp, r.shot_id))
    return records


def load_follows(path: str | Path) -> list[tuple[str, str, datetime]]:
    """Load CSV follow edges ``src,dst,timestamp``; rejects self-follows."""
    edges: list[tuple[str, str, datetime]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValidationError(
                    f"line {lineno}: expected src,dst,timestamp, got {len(parts)} fields"
                )
            src, dst, ts_text = (p.strip() for p in parts)
            if not src or not dst:
                raise ValidationError(f"line {lineno}: empty node id")
            if src == dst:
                raise ValidationError(f"line {lineno}: self-follow edge {src!r}")
            try:
                ts = parse_timestamp(ts_text)
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from exc
            edges.append((src, dst, ts))
    return edges


def write_shots(records: list[ShotRecord], path: str | Path) -> None:
    """Write shot records as newline-delimited JSON (inverse of load_shots)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            obj = {
                "shot_id": rec.shot_id,
                "user_id": rec.user_id,
                "timestamp": format_timestamp(rec.timestamp),
                "tags": list(rec.tags),
                "likes": rec.likes,
                "views": rec.views,
            }
            if rec.media_ref is not None:
                obj["media_ref"] = rec.media_ref
            fh.write(json.dumps(obj, separators=(",", ":"), sort_keys=False))
            fh.write("\n")


def write_follows(edges: list[tuple[str, str, datetime]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for src, dst, ts in edges:
            fh.write(f"{src},{dst},{format_timestamp(ts)}\n")
