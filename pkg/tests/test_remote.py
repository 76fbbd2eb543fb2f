"""Remote provider clients against a local stub service."""

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from capmatch.errors import (
    CountMismatchError,
    EmptyCaptionError,
    ServiceError,
    TransportError,
)
from capmatch.records import ImageRecord
from capmatch.remote import (
    RemoteCaptioner,
    RemoteEndpoint,
    RemoteImageEmbedder,
    RemoteTextEmbedder,
    remote_caption,
    remote_embed_image,
    remote_embed_text,
)

DIM = 8


class _StubHandler(BaseHTTPRequestHandler):
    server_version = "stub/0"

    def log_message(self, *args):
        pass

    def _json(self, code, doc):
        body = json.dumps(doc).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _vec(self, i, scale=1.0):
        v = np.zeros(DIM)
        v[i % DIM] = scale  # deliberately unnormalized when scale != 1
        return v.tolist()

    def do_GET(self):
        if self.path == "/v1/info":
            self.server.calls.append(("info", None))
            self._json(200, {
                "caption_model_id": "stub-captioner",
                "embed_model_id": "stub-embedder",
                "dim": DIM,
                "max_batch": 4,
            })
        else:
            self._json(404, {"detail": "not found"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        doc = json.loads(self.rfile.read(length))
        mode = self.server.mode
        if self.path == "/v1/embed/text":
            texts = doc["texts"]
            self.server.calls.append(("embed_text", len(texts)))
            if mode == "short":
                self._json(200, {"embeddings": [self._vec(0)] * (len(texts) - 1), "dim": DIM})
            elif mode == "boom":
                self._json(500, {"detail": "inference exploded"})
            else:
                # hot position derives from the text so ordering is observable
                idx = [int("".join(c for c in t if c.isdigit()) or 0) for t in texts]
                vecs = [self._vec(i, scale=3.0) for i in idx]
                self._json(200, {"embeddings": vecs, "dim": DIM})
        elif self.path == "/v1/embed/image":
            images = doc["images_b64"]
            self.server.calls.append(("embed_image", len(images)))
            vecs = [self._vec(len(base64.b64decode(b))) for b in images]
            self._json(200, {"embeddings": vecs, "dim": DIM})
        elif self.path == "/v1/caption":
            self.server.calls.append(("caption", doc.get("prompt", "")))
            if mode == "blank":
                self._json(200, {"caption": "  "})
            else:
                payload = base64.b64decode(doc["image_b64"])
                self._json(200, {"caption": f"an image of {len(payload)} bytes"})
        else:
            self._json(404, {"detail": "not found"})


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.mode = "ok"
    server.calls = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def _endpoint(server, **kw):
    kw.setdefault("max_batch", 4)
    kw.setdefault("retries", 0)
    return RemoteEndpoint(base_url=f"http://127.0.0.1:{server.server_address[1]}", **kw)


def test_endpoint_validation():
    with pytest.raises(ValueError):
        RemoteEndpoint(base_url="not a url")
    with pytest.raises(ValueError):
        RemoteEndpoint(base_url="http://x", max_batch=0)


def test_embed_text_single(stub_server):
    vecs = remote_embed_text(_endpoint(stub_server), ["a photo of a dog"])
    assert len(vecs) == 1
    assert vecs[0].shape == (DIM,)
    # service returned scale-3 vectors; client renormalizes
    assert abs(np.linalg.norm(vecs[0]) - 1.0) <= 1e-5


def test_embed_text_chunking_preserves_order(stub_server):
    texts = [f"text {i}" for i in range(10)]
    vecs = remote_embed_text(_endpoint(stub_server), texts)
    assert len(vecs) == 10
    sizes = [n for kind, n in stub_server.calls if kind == "embed_text"]
    assert sizes == [4, 4, 2]
    for i, v in enumerate(vecs):
        assert v[i % DIM] == pytest.approx(1.0)


def test_embed_text_count_mismatch(stub_server):
    stub_server.mode = "short"
    with pytest.raises(CountMismatchError):
        remote_embed_text(_endpoint(stub_server), ["a", "b", "c"])


def test_embed_text_service_error_carries_body(stub_server):
    stub_server.mode = "boom"
    with pytest.raises(ServiceError) as exc:
        remote_embed_text(_endpoint(stub_server), ["a"])
    assert exc.value.status_code == 500
    assert "inference exploded" in str(exc.value)


def test_embed_text_rejects_empty_input(stub_server):
    with pytest.raises(ValueError):
        remote_embed_text(_endpoint(stub_server), [])


def test_transport_error_after_retries():
    # nothing listens on this port
    endpoint = RemoteEndpoint(
        base_url="http://127.0.0.1:9", retries=2, backoff=0.01, timeout=0.2
    )
    with pytest.raises(TransportError) as exc:
        remote_embed_text(endpoint, ["a"], dim=DIM)
    assert "3 attempt(s)" in str(exc.value)


def test_embed_image_reads_before_network(stub_server, tmp_path):
    rec = ImageRecord(id="x", path="missing.png", domain="d")
    with pytest.raises(OSError):
        remote_embed_image(_endpoint(stub_server), [rec], root=tmp_path)
    assert stub_server.calls == []  # failed before any request


def test_embed_image_order_preserved(stub_server, tmp_path):
    recs = []
    for i in range(3):
        (tmp_path / f"{i}.png").write_bytes(bytes(range(i + 1)))
        recs.append(ImageRecord(id=f"r{i}", path=f"{i}.png", domain="d"))
    vecs = remote_embed_image(_endpoint(stub_server), recs, root=tmp_path)
    assert len(vecs) == 3
    for i, v in enumerate(vecs):
        # stub one-hots by decoded payload length, which is i+1 bytes
        assert v[(i + 1) % DIM] == pytest.approx(1.0)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-5


def test_caption_roundtrip(stub_server, tmp_path):
    (tmp_path / "img.png").write_bytes(b"12345")
    rec = ImageRecord(id="x", path="img.png", domain="d")
    cap = remote_caption(_endpoint(stub_server), rec, prompt="", root=tmp_path)
    assert cap.caption == "an image of 5 bytes"
    assert cap.provider_id == "stub-captioner"
    prompts = [p for kind, p in stub_server.calls if kind == "caption"]
    assert prompts == [""]


def test_caption_blank_is_error(stub_server, tmp_path):
    stub_server.mode = "blank"
    (tmp_path / "img.png").write_bytes(b"x")
    rec = ImageRecord(id="x", path="img.png", domain="d")
    with pytest.raises(EmptyCaptionError):
        remote_caption(_endpoint(stub_server), rec, root=tmp_path)


def test_provider_classes_pull_info(stub_server, tmp_path):
    text = RemoteTextEmbedder(_endpoint(stub_server))
    assert text.dim == DIM
    assert text.provider_id == "stub-embedder"
    assert len(text.embed_texts(["x", "y"])) == 2

    (tmp_path / "img.png").write_bytes(b"abc")
    rec = ImageRecord(id="x", path="img.png", domain="d")
    image = RemoteImageEmbedder(_endpoint(stub_server), root=tmp_path)
    assert image.provider_id == "stub-embedder"
    assert image.embed_images([rec])[0].shape == (DIM,)

    captioner = RemoteCaptioner(_endpoint(stub_server), root=tmp_path)
    assert captioner.provider_id == "stub-captioner"
    assert captioner.caption(rec).caption.startswith("an image of")
