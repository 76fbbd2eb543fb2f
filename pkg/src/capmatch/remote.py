"""HTTP clients for the inference service.

The service owns the real captioning and embedding models; these clients
speak its JSON protocol (/v1/info, /v1/caption, /v1/embed/text,
/v1/embed/image). Responses are re-normalized locally so downstream math
never depends on service-side normalization.
"""

import base64
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

import httpx
import numpy as np

from .errors import (
    CountMismatchError,
    DimMismatchError,
    EmptyCaptionError,
    ServiceError,
    TransportError,
)
from .records import CaptionRecord, ImageRecord
from .vectors import l2_normalize


@dataclass(frozen=True)
class RemoteEndpoint:
    """Where the inference service lives and how hard to push it.

    ``retries`` counts re-attempts after the first try; backoff doubles
    per retry (0.5s, 1s, 2s with the defaults). ``max_inflight`` caps
    concurrent chunk requests.
    """

    base_url: str
    timeout: float = 30.0
    max_batch: int = 64
    retries: int = 3
    backoff: float = 0.5
    max_inflight: int = 4

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"invalid base_url {self.base_url!r}")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def _request(endpoint: RemoteEndpoint, client: httpx.Client, method: str, path: str, json_body=None) -> dict:
    url = endpoint.base_url.rstrip("/") + path
    last_exc: Exception | None = None
    for attempt in range(endpoint.retries + 1):
        try:
            resp = client.request(method, url, json=json_body, timeout=endpoint.timeout)
        except httpx.HTTPError as exc:
            last_exc = exc
            if attempt < endpoint.retries:
                time.sleep(endpoint.backoff * (2**attempt))
            continue
        if resp.status_code // 100 != 2:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise ServiceError(resp.status_code, str(detail))
        try:
            return resp.json()
        except ValueError as exc:
            raise ServiceError(resp.status_code, f"invalid JSON body: {exc}") from exc
    raise TransportError(
        f"{method} {url} failed after {endpoint.retries + 1} attempt(s): {last_exc}"
    )


def fetch_info(endpoint: RemoteEndpoint, client: httpx.Client | None = None) -> dict:
    """GET /v1/info: model ids, embedding dim, max batch size."""
    own = client is None
    client = client or httpx.Client()
    try:
        return _request(endpoint, client, "GET", "/v1/info")
    finally:
        if own:
            client.close()


def _chunks(items, size):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _parse_embeddings(doc: dict, expected_count: int, expected_dim: int) -> list[np.ndarray]:
    embeddings = doc.get("embeddings")
    if embeddings is None:
        raise ServiceError(200, "response missing 'embeddings'")
    if len(embeddings) != expected_count:
        raise CountMismatchError(
            f"requested {expected_count} embeddings, got {len(embeddings)}"
        )
    out = []
    for vec in embeddings:
        if len(vec) != expected_dim:
            raise DimMismatchError(f"service returned dim {len(vec)}, expected {expected_dim}")
        out.append(l2_normalize(np.asarray(vec, dtype=np.float64)))
    return out


def _batched_embed(endpoint: RemoteEndpoint, client, path: str, key: str, items: list, dim: int) -> list[np.ndarray]:
    chunks = list(_chunks(items, endpoint.max_batch))

    def one(chunk):
        doc = _request(endpoint, client, "POST", path, {key: chunk})
        return _parse_embeddings(doc, len(chunk), dim)

    if len(chunks) == 1:
        parts = [one(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=endpoint.max_inflight) as pool:
            parts = list(pool.map(one, chunks))
    return [v for part in parts for v in part]


def remote_embed_text(
    endpoint: RemoteEndpoint, texts: list[str], client: httpx.Client | None = None, dim: int | None = None
) -> list[np.ndarray]:
    """Embed texts through the service, chunked to max_batch, order-preserving."""
    if not texts:
        raise ValueError("texts must be non-empty")
    own = client is None
    client = client or httpx.Client()
    try:
        if dim is None:
            dim = int(fetch_info(endpoint, client)["dim"])
        return _batched_embed(endpoint, client, "/v1/embed/text", "texts", list(texts), dim)
    finally:
        if own:
            client.close()


def _read_image_b64(record: ImageRecord, root: Path) -> str:
    return base64.b64encode((root / record.path).read_bytes()).decode("ascii")


def remote_embed_image(
    endpoint: RemoteEndpoint,
    records: list[ImageRecord],
    root: str | Path = ".",
    client: httpx.Client | None = None,
    dim: int | None = None,
) -> list[np.ndarray]:
    """Embed image files through the service.

    All files are read (and base64-encoded) before any network call, so an
    unreadable path fails fast.
    """
    if not records:
        raise ValueError("records must be non-empty")
    root = Path(root)
    payloads = [_read_image_b64(r, root) for r in records]
    own = client is None
    client = client or httpx.Client()
    try:
        if dim is None:
            dim = int(fetch_info(endpoint, client)["dim"])
        return _batched_embed(endpoint, client, "/v1/embed/image", "images_b64", payloads, dim)
    finally:
        if own:
            client.close()


def remote_caption(
    endpoint: RemoteEndpoint,
    record: ImageRecord,
    prompt: str = "",
    root: str | Path = ".",
    client: httpx.Client | None = None,
    provider_id: str | None = None,
) -> CaptionRecord:
    """Caption one image file through the service."""
    payload = _read_image_b64(record, Path(root))
    own = client is None
    client = client or httpx.Client()
    try:
        if provider_id is None:
            provider_id = str(fetch_info(endpoint, client)["caption_model_id"])
        doc = _request(endpoint, client, "POST", "/v1/caption", {"image_b64": payload, "prompt": prompt})
        caption = doc.get("caption", "")
        if not caption or not caption.strip():
            raise EmptyCaptionError(f"service returned a blank caption for {record.id!r}")
        return CaptionRecord(image_id=record.id, caption=caption, provider_id=provider_id)
    finally:
        if own:
            client.close()


class _RemoteBase:
    def __init__(self, endpoint: RemoteEndpoint):
        self.endpoint = endpoint
        self._client = httpx.Client()
        self._info: dict | None = None

    @property
    def info(self) -> dict:
        if self._info is None:
            self._info = fetch_info(self.endpoint, self._client)
        return self._info

    @property
    def dim(self) -> int:
        return int(self.info["dim"])

    def close(self):
        self._client.close()


class RemoteTextEmbedder(_RemoteBase):
    """TextEmbedder backed by the inference service."""

    @property
    def provider_id(self) -> str:
        return str(self.info["embed_model_id"])

    def embed_texts(self, texts) -> list[np.ndarray]:
        return remote_embed_text(self.endpoint, list(texts), client=self._client, dim=self.dim)


class RemoteImageEmbedder(_RemoteBase):
    """ImageEmbedder backed by the inference service."""

    def __init__(self, endpoint: RemoteEndpoint, root: str | Path = "."):
        super().__init__(endpoint)
        self.root = Path(root)

    @property
    def provider_id(self) -> str:
        return str(self.info["embed_model_id"])

    def embed_images(self, records) -> list[np.ndarray]:
        return remote_embed_image(
            self.endpoint, list(records), root=self.root, client=self._client, dim=self.dim
        )


class RemoteCaptioner(_RemoteBase):
    """Captioner backed by the inference service."""

    def __init__(self, endpoint: RemoteEndpoint, prompt: str = "", root: str | Path = "."):
        super().__init__(endpoint)
        self.prompt = prompt
        self.root = Path(root)

    @property
    def provider_id(self) -> str:
        return str(self.info["caption_model_id"])

    def caption(self, record: ImageRecord) -> CaptionRecord:
        return remote_caption(
            self.endpoint,
            record,
            prompt=self.prompt,
            root=self.root,
            client=self._client,
            provider_id=self.provider_id,
        )
