"""The caption-matching retrieval pipeline.

Database images are captioned, captions embedded as text into an index,
and query images embedded as images and ranked against it. Oracle mode
bypasses captioning and feeds ground-truth class labels through the same
text path, giving the upper bound a perfect captioner would reach.

``CaptionMatchRetriever`` wraps the pipeline in a fit/query estimator so it
composes with sklearn-style tooling (get_params, clone).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import (
    AllFailedError,
    CapmatchError,
    DimMismatchError,
    DuplicateIdError,
    MissingCategoryError,
    PartialFailureError,
)
from .index import EmbeddingIndex, RankedResult, build_index, top_k
from .providers import Captioner, ImageEmbedder, TextEmbedder
from .records import CaptionRecord, ImageRecord
from .vectors import check_embedding

ORACLE_PROVIDER_ID = "oracle"
CLASS_PLACEHOLDER = "{class}"


@dataclass(frozen=True)
class RetrievalConfig:
    """How queries are ranked: result count, pipeline mode, oracle template."""

    k: int = 10
    mode: str = "caption"
    oracle_template: str = CLASS_PLACEHOLDER

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.mode not in ("caption", "oracle"):
            raise ValueError(f"mode must be 'caption' or 'oracle', got {self.mode!r}")
        if self.mode == "oracle" and CLASS_PLACEHOLDER not in self.oracle_template:
            raise ValueError(f"oracle template must contain {CLASS_PLACEHOLDER!r}")


def caption_database(targets, captioner: Captioner) -> list[CaptionRecord]:
    """Caption every target image, id ascending.

    Individual failures do not stop the pass; they are collected and
    reported at the end.

    Raises:
        AllFailedError: no targets, or every caption failed.
        PartialFailureError: some failed; carries the surviving records
            (``.records``) and the failed ids (``.failed_ids``).
    """
    targets = sorted(targets, key=lambda r: r.id)
    if not targets:
        raise AllFailedError("no target images to caption")
    records: list[CaptionRecord] = []
    failed: list[str] = []
    for rec in targets:
        try:
            records.append(captioner.caption(rec))
        except (CapmatchError, OSError) as exc:
            failed.append(rec.id)
            warnings.warn(f"captioning {rec.id!r} failed: {exc}", stacklevel=2)
    if not records:
        raise AllFailedError(f"all {len(targets)} captions failed")
    if failed:
        raise PartialFailureError(failed, records)
    return records


def oracle_captions(targets, template: str = CLASS_PLACEHOLDER) -> list[CaptionRecord]:
    """Build captions from ground-truth class labels, id ascending.

    Raises:
        MissingCategoryError: any target is unlabeled (all offenders listed).
    """
    targets = sorted(targets, key=lambda r: r.id)
    unlabeled = [r.id for r in targets if r.category is None]
    if unlabeled:
        raise MissingCategoryError(unlabeled)
    return [
        CaptionRecord(
            image_id=r.id,
            caption=template.replace(CLASS_PLACEHOLDER, r.category),
            provider_id=ORACLE_PROVIDER_ID,
        )
        for r in targets
    ]


def embed_captions(records, embedder: TextEmbedder) -> EmbeddingIndex:
    """Embed caption records into an index keyed by image_id."""
    records = list(records)
    if not records:
        raise CapmatchError("no caption records to embed")
    ids = [r.image_id for r in records]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateIdError(f"duplicate image_id in captions: {dup}")
    try:
        vectors = embedder.embed_texts([r.caption for r in records])
    except CapmatchError:
        # batch failed: rerun per item so the error names the offender
        for rec in records:
            try:
                embedder.embed_texts([rec.caption])
            except CapmatchError as item_exc:
                item_exc.args = (f"image {rec.image_id!r}: {item_exc}",)
                raise
        raise
    vectors = [check_embedding(v, embedder.dim) for v in vectors]
    return build_index(list(zip(ids, vectors)), provider_id=embedder.provider_id)


def query(
    query_image: ImageRecord,
    index: EmbeddingIndex,
    image_embedder: ImageEmbedder,
    cfg: RetrievalConfig,
) -> RankedResult:
    """Embed one query image and rank it against the caption index.

    If the query's own id is present in the index (same-domain evaluation)
    it is excluded before ranking.
    """
    if image_embedder.dim != index.dim:
        raise DimMismatchError(
            f"image embedder dim {image_embedder.dim} != index dim {index.dim}"
        )
    v = check_embedding(image_embedder.embed_images([query_image])[0], index.dim)
    if query_image.id in index.ids:
        keep = [i for i, x in enumerate(index.ids) if x != query_image.id]
        index = EmbeddingIndex(
            dim=index.dim,
            ids=tuple(index.ids[i] for i in keep),
            matrix=index.matrix[keep],
            provider_id=index.provider_id,
        )
    return top_k(index, v, cfg.k)


class CaptionMatchRetriever(BaseEstimator):
    """Cross-domain retriever: fit on a target database, rank query images.

    Parameters
    ----------
    captioner : Captioner or None
        Used in "caption" mode to describe each fitted image. Unused in
        "oracle" mode.
    text_embedder : TextEmbedder
        Embeds captions into the shared space.
    image_embedder : ImageEmbedder
        Embeds query images into the same space; must match dims.
    mode : str
        "caption" (generated captions) or "oracle" (class labels).
    oracle_template : str
        Template for oracle captions; "{class}" is replaced by the label.
    k : int
        Default result count for ``rank`` and ``kneighbors``.

    Attributes
    ----------
    index_ : EmbeddingIndex
        Caption embeddings of the fitted database.
    caption_records_ : list[CaptionRecord]
        Captions backing the index.
    failed_ids_ : list[str]
        Ids whose captioning failed and were excluded.
    """

    def __init__(
        self,
        captioner: Captioner | None = None,
        text_embedder: TextEmbedder | None = None,
        image_embedder: ImageEmbedder | None = None,
        mode: str = "caption",
        oracle_template: str = CLASS_PLACEHOLDER,
        k: int = 10,
    ):
        self.captioner = captioner
        self.text_embedder = text_embedder
        self.image_embedder = image_embedder
        self.mode = mode
        self.oracle_template = oracle_template
        self.k = k

    def _config(self, k: int | None = None) -> RetrievalConfig:
        return RetrievalConfig(
            k=self.k if k is None else k, mode=self.mode, oracle_template=self.oracle_template
        )

    def fit(self, X, y=None):
        """Caption (or oracle-label) and embed the target database ``X``."""
        cfg = self._config()
        if self.text_embedder is None or self.image_embedder is None:
            raise ValueError("text_embedder and image_embedder are required")
        if cfg.mode == "oracle":
            captions = oracle_captions(X, cfg.oracle_template)
            self.failed_ids_ = []
        else:
            if self.captioner is None:
                raise ValueError("captioner is required in caption mode")
            try:
                captions = caption_database(X, self.captioner)
                self.failed_ids_ = []
            except PartialFailureError as exc:
                captions = exc.records
                self.failed_ids_ = exc.failed_ids
        self.caption_records_ = captions
        self.index_ = embed_captions(captions, self.text_embedder)
        return self

    def _check_fitted(self):
        if not hasattr(self, "index_"):
            raise NotFittedError("fit the retriever before querying")

    def rank(self, record: ImageRecord, k: int | None = None) -> RankedResult:
        """Full ranked result for one query image."""
        self._check_fitted()
        return query(record, self.index_, self.image_embedder, self._config(k))

    def kneighbors(self, records, k: int | None = None):
        """Rank a batch of queries.

        Returns (scores, ids): an (n, k) float array and the matching list
        of id lists. Rows are padded with NaN/None when the index is
        smaller than k.
        """
        self._check_fitted()
        results = [self.rank(r, k) for r in records]
        width = self.k if k is None else k
        scores = np.full((len(results), width), np.nan)
        ids: list[list[str | None]] = []
        for i, res in enumerate(results):
            scores[i, : len(res)] = res.scores
            ids.append(list(res.ids) + [None] * (width - len(res)))
        return scores, ids

    def predict(self, records) -> list[str]:
        """Top-1 retrieved id for each query image."""
        self._check_fitted()
        return [self.rank(r, k=1).ids[0] for r in records]
