"""Caption-matching cross-domain image retrieval.

Database images are described by generated captions, captions are embedded
as text, query images are embedded as images, and retrieval is ranked
dot-product similarity in the shared embedding space.
"""

__version__ = "0.1.0"

from .dataset import (
    CategoryFilter,
    Manifest,
    filter_categories,
    generate_synthetic_dataset,
    load_manifest,
    save_manifest,
    scan_directory,
)
from .evaluation import (
    DomainPair,
    EvalReport,
    PairMetrics,
    emit_report,
    evaluate_pair,
    export_embeddings_2d,
    load_report,
    relevance,
    sweep_pairs,
)
from .index import (
    EmbeddingIndex,
    RankedResult,
    build_index,
    load_captions,
    load_index,
    save_captions,
    save_index,
    top_k,
)
from .metrics import average_precision, precision_at_k
from .providers import (
    ReferenceCaptioner,
    ReferenceImageEmbedder,
    ReferenceTextEmbedder,
    reference_caption,
    reference_embed_image,
    reference_embed_text,
    reference_token_vector,
)
from .records import CaptionRecord, ImageRecord
from .remote import (
    RemoteCaptioner,
    RemoteEndpoint,
    RemoteImageEmbedder,
    RemoteTextEmbedder,
)
from .retrieval import (
    CaptionMatchRetriever,
    RetrievalConfig,
    caption_database,
    embed_captions,
    oracle_captions,
    query,
)
from .vectors import dot_similarity, l2_normalize

__all__ = [
    "CaptionMatchRetriever",
    "CaptionRecord",
    "CategoryFilter",
    "DomainPair",
    "EmbeddingIndex",
    "EvalReport",
    "ImageRecord",
    "Manifest",
    "PairMetrics",
    "RankedResult",
    "ReferenceCaptioner",
    "ReferenceImageEmbedder",
    "ReferenceTextEmbedder",
    "RemoteCaptioner",
    "RemoteEndpoint",
    "RemoteImageEmbedder",
    "RemoteTextEmbedder",
    "RetrievalConfig",
    "average_precision",
    "build_index",
    "caption_database",
    "dot_similarity",
    "embed_captions",
    "emit_report",
    "evaluate_pair",
    "export_embeddings_2d",
    "filter_categories",
    "generate_synthetic_dataset",
    "l2_normalize",
    "load_captions",
    "load_index",
    "load_manifest",
    "load_report",
    "oracle_captions",
    "precision_at_k",
    "query",
    "reference_caption",
    "reference_embed_image",
    "reference_embed_text",
    "reference_token_vector",
    "relevance",
    "save_captions",
    "save_index",
    "save_manifest",
    "scan_directory",
    "sweep_pairs",
    "top_k",
]
