"""Model backends for the inference service.

``TransformersBackend`` hosts the real pretrained checkpoints (a BLIP-2
captioner and a CLIP dual encoder). ``HashBackend`` is a weight-free
deterministic stand-in with the same surface, used for protocol tests and
desk-scale development where downloading checkpoints is not an option.
"""

import hashlib
from typing import Protocol

import numpy as np
from PIL import Image

DEFAULT_CAPTION_MODEL = "Salesforce/blip2-opt-2.7b"
DEFAULT_EMBED_MODEL = "laion/CLIP-ViT-H-14-laion2B-s32B-b79K"


class Backend(Protocol):
    caption_model_id: str
    embed_model_id: str
    dim: int

    def load(self) -> None: ...

    def caption(self, image: Image.Image, prompt: str) -> str: ...

    def embed_texts(self, texts: list[str]) -> np.ndarray: ...

    def embed_images(self, images: list[Image.Image]) -> np.ndarray: ...


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (matrix / norms).astype(np.float32)


class HashBackend:
    """Deterministic hash-based captioner/encoder pair.

    Text embeddings are normalized sums of per-token vectors seeded from a
    token digest, so captions sharing words land close together. Image
    embeddings and captions are seeded from the raw pixel bytes: identical
    images always produce identical outputs.
    """

    caption_model_id = "hash-captioner-v1"
    embed_model_id = "hash-embedder-v1"

    def __init__(self, dim: int = 1024):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def load(self) -> None:
        pass

    def _seeded_vector(self, key: bytes) -> np.ndarray:
        seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
        rng = np.random.default_rng(seed)
        return rng.uniform(-1.0, 1.0, self.dim)

    def caption(self, image: Image.Image, prompt: str) -> str:
        digest = hashlib.blake2b(image.tobytes(), digest_size=4).hexdigest()
        base = f"an image of {image.width}x{image.height} pixels sig{digest}"
        return f"{prompt.strip()} {base}" if prompt.strip() else base

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            for token in text.lower().split():
                out[i] += self._seeded_vector(b"tok:" + token.encode("utf-8"))
        return _normalize_rows(out)

    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        out = np.stack([self._seeded_vector(b"img:" + im.tobytes()) for im in images])
        return _normalize_rows(out)


class TransformersBackend:
    """Real checkpoints via the transformers library.

    Captioning decodes greedily (no sampling, max 40 new tokens) so
    repeated requests agree. Embeddings come from the dual encoder's text
    and image towers, normalized. Weights load once at startup.
    """

    def __init__(
        self,
        caption_model_id: str = DEFAULT_CAPTION_MODEL,
        embed_model_id: str = DEFAULT_EMBED_MODEL,
        device: str = "cpu",
        max_new_tokens: int = 40,
    ):
        self.caption_model_id = caption_model_id
        self.embed_model_id = embed_model_id
        self.device = device
        self.max_new_tokens = max_new_tokens
        self.dim = 0  # known after load()

    def load(self) -> None:
        import torch  # noqa: F401
        from transformers import (
            AutoProcessor,
            Blip2ForConditionalGeneration,
            CLIPModel,
            CLIPProcessor,
        )

        self._caption_processor = AutoProcessor.from_pretrained(self.caption_model_id)
        self._caption_model = (
            Blip2ForConditionalGeneration.from_pretrained(self.caption_model_id)
            .to(self.device)
            .eval()
        )
        self._clip_processor = CLIPProcessor.from_pretrained(self.embed_model_id)
        self._clip = CLIPModel.from_pretrained(self.embed_model_id).to(self.device).eval()
        self.dim = int(self._clip.config.projection_dim)

    def caption(self, image: Image.Image, prompt: str) -> str:
        import torch

        inputs = self._caption_processor(
            images=image.convert("RGB"), text=prompt or None, return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            ids = self._caption_model.generate(
                **inputs, do_sample=False, num_beams=1, max_new_tokens=self.max_new_tokens
            )
        return self._caption_processor.batch_decode(ids, skip_special_tokens=True)[0].strip()

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        import torch

        inputs = self._clip_processor(
            text=texts, return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with torch.no_grad():
            feats = self._clip.get_text_features(**inputs)
        return _normalize_rows(feats.cpu().numpy().astype(np.float64))

    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        import torch

        inputs = self._clip_processor(
            images=[im.convert("RGB") for im in images], return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            feats = self._clip.get_image_features(**inputs)
        return _normalize_rows(feats.cpu().numpy().astype(np.float64))


def make_backend(name: str, **kwargs) -> Backend:
    if name == "hash":
        kwargs.pop("caption_model_id", None)
        kwargs.pop("embed_model_id", None)
        return HashBackend(**{k: v for k, v in kwargs.items() if k == "dim"})
    if name == "transformers":
        kwargs.pop("dim", None)
        return TransformersBackend(**kwargs)
    raise ValueError(f"unknown backend {name!r}")
