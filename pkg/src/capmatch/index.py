"""Dense embedding index: exact top-k search and bit-exact persistence.

The on-disk `.cme` format (little-endian):

    magic "CMEB" | version u32=1 | dim u32 | count u64
    | provider_id: u32 length + UTF-8 bytes
    | count x [u32 id_len | id UTF-8 | dim x f32]
    | crc32c u32 over all preceding bytes

Caption caches are UTF-8 JSON-lines sorted by image_id.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    CapmatchError,
    ChecksumMismatchError,
    DimMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    NonFiniteError,
    ParseError,
    TruncatedError,
    VersionUnsupportedError,
)
from .records import CaptionRecord
from .vectors import UNIT_NORM_TOL

MAGIC = b"CMEB"
FORMAT_VERSION = 1


def _crc32c_table() -> list[int]:
    poly = 0x82F63B78
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _crc32c_table()


def crc32c(data: bytes, crc: int = 0) -> int:
    """CRC-32C (Castagnoli) checksum."""
    crc ^= 0xFFFFFFFF
    for b in data:
        crc = _CRC_TABLE[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


@dataclass(frozen=True)
class EmbeddingIndex:
    """Immutable matrix of unit-normalized rows keyed by sorted ids."""

    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray
    provider_id: str

    def __post_init__(self):
        if len(self.ids) == 0:
            raise EmptyIndexError("index must contain at least one row")
        if any(a >= b for a, b in zip(self.ids, self.ids[1:])):
            raise DuplicateIdError("ids must be strictly sorted ascending")
        m = np.asarray(self.matrix, dtype=np.float32)
        if m.shape != (len(self.ids), self.dim):
            raise DimMismatchError(
                f"matrix shape {m.shape} does not match {len(self.ids)} x {self.dim}"
            )
        if not np.all(np.isfinite(m)):
            raise NonFiniteError("index contains NaN or Inf")
        norms = np.sqrt(np.einsum("ij,ij->i", m.astype(np.float64), m.astype(np.float64)))
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise CapmatchError(
                f"row {self.ids[bad]!r} has norm {norms[bad]}, expected 1 within {UNIT_NORM_TOL}"
            )
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, image_id: str) -> np.ndarray:
        i = self.ids.index(image_id)
        return self.matrix[i]


@dataclass(frozen=True)
class RankedResult:
    """Retrieval ranking: (id, score) entries, score desc then id asc."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("scores must be non-increasing")
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("ranked ids must be unique")

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def build_index(pairs, provider_id: str) -> EmbeddingIndex:
    """Build a canonical index from (id, embedding) pairs.

    Rows are stored in id-ascending order regardless of input order, so the
    same set of pairs always produces the same index bytes.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyIndexError("cannot build an index from zero pairs")
    ids = [p[0] for p in pairs]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateIdError(f"duplicate ids: {dup}")
    dim = len(np.asarray(pairs[0][1]).reshape(-1))
    for pid, vec in pairs:
        if len(np.asarray(vec).reshape(-1)) != dim:
            raise DimMismatchError(f"{pid!r}: expected dim {dim}")
    pairs.sort(key=lambda p: p[0])
    matrix = np.stack([np.asarray(v, dtype=np.float32).reshape(-1) for _, v in pairs])
    return EmbeddingIndex(
        dim=dim, ids=tuple(p[0] for p in pairs), matrix=matrix, provider_id=provider_id
    )


def top_k(index: EmbeddingIndex, query: np.ndarray, k: int) -> RankedResult:
    """Exact top-k by dot-product similarity.

    Scores accumulate in float64 and are clamped to [-1, 1]; ties break by
    id ascending. Returns min(k, rows) entries.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query).reshape(-1)
    if q.size != index.dim:
        raise DimMismatchError(f"query dim {q.size} != index dim {index.dim}")
    sims = index.matrix.astype(np.float64) @ q.astype(np.float64)
    np.clip(sims, -1.0, 1.0, out=sims)
    order = np.argsort(-sims, kind="stable")[: min(k, len(index))]
    return RankedResult(
        entries=tuple((index.ids[i], float(sims[i])) for i in order)
    )


def save_index(index: EmbeddingIndex, path: str | Path) -> None:
    """Write the binary .cme form; load gives back bit-identical contents."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<I", index.dim)
    out += struct.pack("<Q", len(index))
    pid = index.provider_id.encode("utf-8")
    out += struct.pack("<I", len(pid))
    out += pid
    for i, image_id in enumerate(index.ids):
        encoded = image_id.encode("utf-8")
        out += struct.pack("<I", len(encoded))
        out += encoded
        out += index.matrix[i].astype("<f4").tobytes()
    out += struct.pack("<I", crc32c(bytes(out)))
    Path(path).write_bytes(bytes(out))


class _Cursor:
    def __init__(self, data: bytes, limit: int):
        self.data = data
        self.pos = 0
        self.limit = limit

    def take(self, n: int) -> bytes:
        if self.pos + n > self.limit:
            raise TruncatedError(f"needed {n} bytes at offset {self.pos}, file ends early")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_index(path: str | Path) -> EmbeddingIndex:
    """Read a .cme file.

    Raises:
        BadMagicError / VersionUnsupportedError / TruncatedError /
        ChecksumMismatchError for the corresponding corruptions.
    """
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise TruncatedError(f"{path}: shorter than the magic header")
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path}: magic {data[:4]!r} != {MAGIC!r}")
    if len(data) < 8:
        raise TruncatedError(f"{path}: file ends inside the version field")
    (version,) = struct.unpack("<I", data[4:8])
    if version != FORMAT_VERSION:
        raise VersionUnsupportedError(f"{path}: version {version} not supported")
    if len(data) < 12:
        raise TruncatedError(f"{path}: file ends inside the header")

    cur = _Cursor(data, limit=len(data) - 4)
    cur.pos = 8
    dim = cur.u32()
    count = cur.u64()
    provider_id = cur.take(cur.u32()).decode("utf-8")
    if count * (4 + dim * 4) > cur.limit - cur.pos:
        raise TruncatedError(
            f"{path}: header declares {count} rows of dim {dim}, file is too short"
        )
    ids = []
    rows = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        ids.append(cur.take(cur.u32()).decode("utf-8"))
        rows[i] = np.frombuffer(cur.take(dim * 4), dtype="<f4")
    if cur.pos != cur.limit:
        raise TruncatedError(f"{path}: {cur.limit - cur.pos} unexpected bytes before checksum")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    actual_crc = crc32c(data[:-4])
    if stored_crc != actual_crc:
        raise ChecksumMismatchError(
            f"{path}: crc32c {actual_crc:#010x} != stored {stored_crc:#010x}"
        )
    return EmbeddingIndex(dim=dim, ids=tuple(ids), matrix=rows, provider_id=provider_id)


def save_captions(records, path: str | Path) -> None:
    """Write caption records as JSON-lines sorted by image_id."""
    lines = []
    for rec in sorted(records, key=lambda r: r.image_id):
        lines.append(
            json.dumps(
                {"image_id": rec.image_id, "caption": rec.caption, "provider_id": rec.provider_id},
                sort_keys=True,
                ensure_ascii=False,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_captions(path: str | Path) -> list[CaptionRecord]:
    """Read a captions JSON-lines file.

    Raises:
        ParseError: bad JSON or invariant violations, with the line number.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                records.append(
                    CaptionRecord(
                        image_id=doc["image_id"],
                        caption=doc["caption"],
                        provider_id=doc["provider_id"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, CapmatchError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return records
