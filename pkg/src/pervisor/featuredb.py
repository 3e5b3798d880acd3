"""Persistent per-object feature store (PVDB binary format).

Layout, little-endian throughout:
  header : magic "PVDB", version u16 = 1, object_count u32, feature_count u32
  objects: object_id u32, name_len u16 + UTF-8, meta_len u16 + UTF-8
  records: object_id u32, x f32, y f32, scale f32, orientation f32,
           sign i8, 64 x f32 descriptor
  trailer: CRC-32 of all preceding bytes (u32)

The KD-forest is not persisted; rebuild it from (db, seed) at load time.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import match, surf
from .imagecore import GrayImage

MAGIC = b"PVDB"
VERSION = 1


class DbFormatError(Exception):
    """Unreadable PVDB file."""


class DbMagicError(DbFormatError):
    """File does not start with the PVDB magic."""


class DbVersionError(DbFormatError):
    """Unsupported format version."""


class DbTruncatedError(DbFormatError):
    """File ends before the declared tables and trailer."""


class DbChecksumError(DbFormatError):
    """CRC-32 trailer does not match the file contents."""


@dataclass(frozen=True)
class ObjectEntry:
    object_id: int
    name: str
    metadata: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("object name must be non-empty")
        if not (0 <= self.object_id <= 0xFFFFFFFF):
            raise ValueError("object_id must fit in u32")


@dataclass(frozen=True)
class FeatureRecord:
    object_id: int
    x: float
    y: float
    scale: float
    orientation: float
    laplacian_sign: int
    descriptor: np.ndarray  # float32 (64,); f32 so disk round-trips are exact

    def __post_init__(self):
        d = np.ascontiguousarray(self.descriptor, dtype=np.float32)
        if d.shape != (64,):
            raise ValueError("descriptor must have 64 components")
        d.setflags(write=False)
        object.__setattr__(self, "descriptor", d)
        # Quantize to the on-disk f32 precision so save/load is the identity.
        for name in ("x", "y", "scale", "orientation"):
            object.__setattr__(self, name, float(np.float32(getattr(self, name))))
        if self.laplacian_sign not in (-1, 1):
            raise ValueError("laplacian_sign must be -1 or +1")


@dataclass
class FeatureDb:
    objects: list[ObjectEntry] = field(default_factory=list)
    records: list[FeatureRecord] = field(default_factory=list)

    def next_object_id(self) -> int:
        return max((o.object_id for o in self.objects), default=-1) + 1

    def object_by_id(self, object_id: int) -> ObjectEntry:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def feature_count(self, object_id: int) -> int:
        return sum(1 for r in self.records if r.object_id == object_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureDb):
            return NotImplemented
        if self.objects != other.objects or len(self.records) != len(other.records):
            return False
        for a, b in zip(self.records, other.records):
            if (
                a.object_id != b.object_id
                or a.x != b.x
                or a.y != b.y
                or a.scale != b.scale
                or a.orientation != b.orientation
                or a.laplacian_sign != b.laplacian_sign
                or not np.array_equal(a.descriptor, b.descriptor)
            ):
                return False
        return True


def add_object(
    db: FeatureDb,
    name: str,
    metadata: str,
    img: GrayImage,
    threshold: float = surf.DEFAULT_THRESHOLD,
) -> tuple[int, int]:
    """Extract features from img and store them under a new object.

    Returns (object_id, feature_count); a zero count is legal (the object
    is stored anyway) and up to the caller to warn about.
    """
    object_id = db.next_object_id()
    entry = ObjectEntry(object_id=object_id, name=name, metadata=metadata)
    result = surf.extract(img, threshold)
    db.objects.append(entry)
    for pt, desc in result.features:
        db.records.append(
            FeatureRecord(
                object_id=object_id,
                x=pt.x,
                y=pt.y,
                scale=pt.scale,
                orientation=pt.orientation,
                laplacian_sign=pt.laplacian_sign,
                descriptor=desc.values.astype(np.float32),
            )
        )
    return object_id, len(result.features)


def _encode(db: FeatureDb) -> bytes:
    parts = [MAGIC, struct.pack("<HII", VERSION, len(db.objects), len(db.records))]
    for o in db.objects:
        name = o.name.encode("utf-8")
        meta = o.metadata.encode("utf-8")
        parts.append(struct.pack("<IH", o.object_id, len(name)))
        parts.append(name)
        parts.append(struct.pack("<H", len(meta)))
        parts.append(meta)
    for r in db.records:
        parts.append(
            struct.pack(
                "<Iffffb", r.object_id, r.x, r.y, r.scale, r.orientation,
                r.laplacian_sign,
            )
        )
        parts.append(r.descriptor.astype("<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save(db: FeatureDb, path) -> None:
    with open(path, "wb") as f:
        f.write(_encode(db))


def load(path) -> FeatureDb:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise DbMagicError(f"bad magic {data[:4]!r}")
    if len(data) < 14 + 4:
        raise DbTruncatedError("file shorter than header + trailer")
    body, trailer = data[:-4], data[-4:]
    (crc,) = struct.unpack("<I", trailer)
    if zlib.crc32(body) != crc:
        raise DbChecksumError("CRC-32 mismatch")
    version, object_count, feature_count = struct.unpack_from("<HII", body, 4)
    if version != VERSION:
        raise DbVersionError(f"unsupported version {version}")
    off = 14
    db = FeatureDb()
    try:
        for _ in range(object_count):
            object_id, name_len = struct.unpack_from("<IH", body, off)
            off += 6
            name = body[off : off + name_len].decode("utf-8")
            off += name_len
            (meta_len,) = struct.unpack_from("<H", body, off)
            off += 2
            meta = body[off : off + meta_len].decode("utf-8")
            off += meta_len
            db.objects.append(ObjectEntry(object_id, name, meta))
        rec = struct.Struct("<Iffffb")
        for _ in range(feature_count):
            object_id, x, y, scale, orientation, sign = rec.unpack_from(body, off)
            off += rec.size
            desc = np.frombuffer(body, dtype="<f4", count=64, offset=off).copy()
            off += 64 * 4
            db.records.append(
                FeatureRecord(object_id, x, y, scale, orientation, sign, desc)
            )
    except (struct.error, ValueError) as exc:
        raise DbTruncatedError(f"table data truncated: {exc}") from exc
    if off != len(body):
        raise DbFormatError(f"{len(body) - off} trailing bytes after feature table")
    return db


def build_index(
    db: FeatureDb,
    num_trees: int = match.DEFAULT_NUM_TREES,
    seed: int = 42,
) -> match.KdForest:
    """KD-forest over every record; payload id = record index."""
    if not db.records:
        raise match.EmptyIndexError("database has no features to index")
    points = np.stack([r.descriptor.astype(np.float64) for r in db.records])
    signs = np.array([r.laplacian_sign for r in db.records], dtype=np.int8)
    return match.build_forest(points, signs, num_trees=num_trees, seed=seed)
