"""Caption and embedding providers.

Two families implement the same interfaces: the reference providers here
(bit-deterministic, hash-based, reading synthetic text-file "images") and
the remote providers in ``remote`` (HTTP clients for the inference
service). Pipeline code only sees the protocols.
"""

import re
from functools import lru_cache
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import EmptyTokenError, NoTokensError, UnsupportedBinaryError, ZeroVectorError
from .hashing import fnv1a64, uniform_block
from .records import CaptionRecord, ImageRecord

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


@runtime_checkable
class TextEmbedder(Protocol):
    provider_id: str
    dim: int

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]: ...


@runtime_checkable
class ImageEmbedder(Protocol):
    provider_id: str
    dim: int

    def embed_images(self, records: Sequence[ImageRecord]) -> list[np.ndarray]: ...


@runtime_checkable
class Captioner(Protocol):
    provider_id: str
    prompt: str

    def caption(self, record: ImageRecord) -> CaptionRecord: ...


@lru_cache(maxsize=1 << 16)
def _token_unit_f64(token: str, dim: int) -> np.ndarray:
    """Unit token vector kept in float64; rounding to float32 is deferred
    to the public surface so sums of token vectors stay exact."""
    seed = fnv1a64(token.encode("utf-8"))
    raw = uniform_block(seed, dim)
    norm = float(np.sqrt(np.dot(raw, raw)))
    if norm < 1e-12:
        raise ZeroVectorError(f"token {token!r} drew a zero vector")
    v = raw / norm
    v.flags.writeable = False
    return v


def reference_token_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic unit vector for one token.

    The token is lowercased, hashed with FNV-1a to seed a splitmix64 draw
    of ``dim`` values in [-1, 1), then L2-normalized and rounded to float32.
    Identical tokens give bit-identical vectors on every platform.
    """
    if not token:
        raise EmptyTokenError("token must be non-empty")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    return _token_unit_f64(token.lower(), dim).astype(np.float32)


def reference_embed_text(text: str, dim: int) -> np.ndarray:
    """Embed text as the normalized sum of its token vectors.

    Token multiplicity scales the sum but not its direction, so repeated
    tokens do not change the embedding.
    """
    tokens = tokenize(text)
    if not tokens:
        raise NoTokensError(f"no alphanumeric tokens in {text!r}")
    acc = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        acc += _token_unit_f64(tok, dim)
    norm = float(np.sqrt(np.dot(acc, acc)))
    if norm < 1e-12:
        raise ZeroVectorError("token vectors cancelled out")
    return (acc / norm).astype(np.float32)


def _read_text_file(path: Path) -> str:
    data = path.read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UnsupportedBinaryError(
            f"{path} is not UTF-8 text; the reference provider only reads "
            f"synthetic text-file images"
        ) from exc


def reference_embed_image(record: ImageRecord, dim: int, root: str | Path = ".") -> np.ndarray:
    """Embed a synthetic text-file "image" by embedding its contents."""
    return reference_embed_text(_read_text_file(Path(root) / record.path), dim)


def reference_caption(
    record: ImageRecord, known_domains: Sequence[str], root: str | Path = "."
) -> CaptionRecord:
    """Caption a synthetic image by stripping domain tokens from its contents.

    Mimics the way a real captioner abstracts domain identifiers away: every
    token equal to a known domain name is dropped, the rest are rejoined
    with single spaces.
    """
    tokens = tokenize(_read_text_file(Path(root) / record.path))
    domains = {d.lower() for d in known_domains}
    kept = [t for t in tokens if t not in domains]
    if not kept:
        raise NoTokensError(f"{record.id}: every token was a domain name")
    return CaptionRecord(image_id=record.id, caption=" ".join(kept), provider_id="ref-cap")


class ReferenceTextEmbedder:
    """Hash-based text embedder; pure and bit-deterministic."""

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.provider_id = f"ref-text-d{dim}"

    def embed_texts(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [reference_embed_text(t, self.dim) for t in texts]


class ReferenceImageEmbedder:
    """Hash-based image embedder over synthetic text-file images."""

    def __init__(self, dim: int = 64, root: str | Path = "."):
        if dim < 2:
            raise ValueError(f"dim must be >= 2, got {dim}")
        self.dim = dim
        self.root = Path(root)
        self.provider_id = f"ref-image-d{dim}"

    def embed_images(self, records: Sequence[ImageRecord]) -> list[np.ndarray]:
        return [reference_embed_image(r, self.dim, self.root) for r in records]


class ReferenceCaptioner:
    """Captioner that strips domain tokens from synthetic image contents."""

    provider_id = "ref-cap"

    def __init__(self, known_domains: Sequence[str] = (), prompt: str = "", root: str | Path = "."):
        self.known_domains = tuple(known_domains)
        self.prompt = prompt
        self.root = Path(root)

    def caption(self, record: ImageRecord) -> CaptionRecord:
        return reference_caption(record, self.known_domains, self.root)
