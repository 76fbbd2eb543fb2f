import pytest

from capmatch import (
    CaptionMatchRetriever,
    ReferenceCaptioner,
    ReferenceImageEmbedder,
    ReferenceTextEmbedder,
    generate_synthetic_dataset,
)

SYNTH_SPEC = dict(n_domains=3, n_categories=5, per_cell=4, seed=42)
DIM = 64


@pytest.fixture(scope="session")
def synth_manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth") / "data"
    return generate_synthetic_dataset(root, **SYNTH_SPEC)


def make_retriever(manifest, mode="caption", dim=DIM, **kwargs):
    return CaptionMatchRetriever(
        captioner=ReferenceCaptioner(known_domains=sorted(manifest.domains), root=manifest.root),
        text_embedder=ReferenceTextEmbedder(dim=dim),
        image_embedder=ReferenceImageEmbedder(dim=dim, root=manifest.root),
        mode=mode,
        **kwargs,
    )
