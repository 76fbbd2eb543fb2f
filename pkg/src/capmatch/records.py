"""Value types for images and captions.

Domains and categories are plain lowercase strings; ``normalize_name``
applies the ingest rule (case-insensitive comparison via lowercasing).
Records are frozen dataclasses: safe to share between threads.
"""

from dataclasses import dataclass

from .errors import CapmatchError


def normalize_name(name: str) -> str:
    """Lowercase a domain or category name; reject empty ones."""
    name = name.strip().lower()
    if not name:
        raise CapmatchError("domain/category name must be non-empty")
    return name


@dataclass(frozen=True, slots=True)
class ImageRecord:
    """One database or query image.

    ``path`` is stored relative to the owning manifest's root. ``category``
    is None for unlabeled databases.
    """

    id: str
    path: str
    domain: str
    category: str | None = None

    def __post_init__(self):
        if not self.id:
            raise CapmatchError("image id must be non-empty")
        if not self.domain:
            raise CapmatchError(f"image {self.id!r}: domain must be non-empty")
        if self.category == "":
            raise CapmatchError(f"image {self.id!r}: category must be non-empty or absent")


@dataclass(frozen=True, slots=True)
class CaptionRecord:
    """Generated or oracle caption for one image."""

    image_id: str
    caption: str
    provider_id: str

    def __post_init__(self):
        if not self.image_id:
            raise CapmatchError("caption image_id must be non-empty")
        if not self.caption:
            raise CapmatchError(f"caption for {self.image_id!r} must be non-empty")
