"""Dataset manifests: directory scanning, category filtering, synthetic data.

Datasets ship as ``<root>/<domain>/<category>/<file>`` trees. A Manifest is
the canonical in-memory view: image records sorted by id, domain and
category names lowercased. The on-disk form is canonical JSON so that
identical trees always produce identical manifest bytes.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    CapmatchError,
    DatasetNotFoundError,
    DuplicateIdError,
    EmptyDatasetError,
    EmptyResultError,
    MalformedLayoutError,
    ParseError,
)
from .hashing import SplitMix64
from .records import ImageRecord, normalize_name

DIRECTORY_LAYOUT = "domain/category/image"


@dataclass(frozen=True)
class Manifest:
    """Immutable collection of image records with derived domain/category sets.

    ``domains`` and ``categories`` are carried explicitly so that filtering
    can keep the domain set stable even when a domain loses all images; they
    do not participate in equality (round-trip identity is defined on the
    records themselves).
    """

    dataset_name: str
    root: str
    images: tuple[ImageRecord, ...]
    domains: frozenset[str] = field(default=None, compare=False)  # type: ignore[assignment]
    categories: frozenset[str] = field(default=None, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        images = tuple(sorted(self.images, key=lambda r: r.id))
        seen = set()
        for rec in images:
            if rec.id in seen:
                raise DuplicateIdError(f"duplicate image id {rec.id!r}")
            seen.add(rec.id)
        object.__setattr__(self, "images", images)
        if self.domains is None:
            object.__setattr__(self, "domains", frozenset(r.domain for r in images))
        if self.categories is None:
            object.__setattr__(
                self,
                "categories",
                frozenset(r.category for r in images if r.category is not None),
            )
        for rec in images:
            if rec.domain not in self.domains:
                raise CapmatchError(f"image {rec.id!r} has domain outside the manifest set")
            if rec.category is not None and rec.category not in self.categories:
                raise CapmatchError(f"image {rec.id!r} has category outside the manifest set")

    def __len__(self) -> int:
        return len(self.images)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.images}

    def in_domain(self, domain: str) -> list[ImageRecord]:
        domain = normalize_name(domain)
        return [r for r in self.images if r.domain == domain]


@dataclass(frozen=True)
class CategoryFilter:
    """Keep categories with strictly more than ``min_samples`` images.

    ``scope`` is "dataset-wide" (one count per category) or "per-domain"
    (the category must pass in every domain of the manifest).
    """

    min_samples: int
    scope: str = "per-domain"

    def __post_init__(self):
        if self.min_samples < 0:
            raise ValueError("min_samples must be >= 0")
        if self.scope not in ("per-domain", "dataset-wide"):
            raise ValueError(f"unknown scope {self.scope!r}")


def scan_directory(root: str | Path, layout: str = DIRECTORY_LAYOUT) -> Manifest:
    """Scan a domain/category/image tree into a Manifest.

    Record ids are ``<domain>/<category>/<filename>`` with domain and
    category lowercased; paths keep the on-disk casing so files stay
    resolvable. Hidden files (dot-prefixed) are ignored.

    Raises:
        DatasetNotFoundError: root does not exist.
        MalformedLayoutError: files at the wrong tree depth.
        EmptyDatasetError: no image files found.
    """
    if layout != DIRECTORY_LAYOUT:
        raise ValueError(f"unsupported layout {layout!r}")
    root = Path(root)
    if not root.is_dir():
        raise DatasetNotFoundError(f"dataset root {root} does not exist")

    records = []
    for domain_dir in sorted(root.iterdir()):
        if domain_dir.name.startswith("."):
            continue
        if not domain_dir.is_dir():
            raise MalformedLayoutError(f"file at domain level: {domain_dir}")
        domain = normalize_name(domain_dir.name)
        for cat_dir in sorted(domain_dir.iterdir()):
            if cat_dir.name.startswith("."):
                continue
            if not cat_dir.is_dir():
                raise MalformedLayoutError(f"file at category level: {cat_dir}")
            category = normalize_name(cat_dir.name)
            for f in sorted(cat_dir.iterdir()):
                if f.name.startswith("."):
                    continue
                if f.is_dir():
                    raise MalformedLayoutError(f"directory at image level: {f}")
                records.append(
                    ImageRecord(
                        id=f"{domain}/{category}/{f.name}",
                        path=f"{domain_dir.name}/{cat_dir.name}/{f.name}",
                        domain=domain,
                        category=category,
                    )
                )
    if not records:
        raise EmptyDatasetError(f"no image files under {root}")
    return Manifest(dataset_name=root.name, root=str(root), images=tuple(records))


def filter_categories(manifest: Manifest, flt: CategoryFilter) -> Manifest:
    """Drop categories that do not pass the sample-count filter.

    Counting is strict: a category needs count > min_samples. Unlabeled
    images are untouched. The domain set is carried over unchanged.

    Raises:
        EmptyResultError: the filter removed every category.
    """
    counts: dict[tuple[str, str], int] = {}
    totals: dict[str, int] = {}
    for rec in manifest.images:
        if rec.category is None:
            continue
        totals[rec.category] = totals.get(rec.category, 0) + 1
        key = (rec.category, rec.domain)
        counts[key] = counts.get(key, 0) + 1

    if flt.scope == "dataset-wide":
        surviving = {c for c, n in totals.items() if n > flt.min_samples}
    else:
        surviving = {
            c
            for c in totals
            if all(counts.get((c, d), 0) > flt.min_samples for d in manifest.domains)
        }

    if manifest.categories and not surviving:
        raise EmptyResultError(
            f"no category has more than {flt.min_samples} samples ({flt.scope})"
        )
    images = tuple(
        r for r in manifest.images if r.category is None or r.category in surviving
    )
    return Manifest(
        dataset_name=manifest.dataset_name,
        root=manifest.root,
        images=images,
        domains=manifest.domains,
        categories=frozenset(surviving),
    )


def generate_synthetic_dataset(
    out: str | Path, n_domains: int, n_categories: int, per_cell: int, seed: int
) -> Manifest:
    """Write a deterministic synthetic domain/category tree and scan it.

    Each "image" is a UTF-8 text file containing ``<domain> <category>
    mod<k>``. The modifier ``k`` is drawn once per category from a
    splitmix64 stream seeded with ``seed``, so files of the same category
    share content across domains - the cross-domain signal the caption
    pipeline retrieves on. Same seed, same tree, byte for byte.
    """
    if n_domains < 1 or n_categories < 1 or per_cell < 1:
        raise ValueError("n_domains, n_categories and per_cell must all be >= 1")
    out = Path(out)
    stream = SplitMix64(seed)
    modifiers = [stream.next() % 1_000_000 for _ in range(n_categories)]
    for d in range(n_domains):
        for c in range(n_categories):
            cell = out / f"d{d}" / f"c{c}"
            cell.mkdir(parents=True, exist_ok=True)
            content = f"d{d} c{c} mod{modifiers[c]}"
            for i in range(per_cell):
                (cell / f"i{i}.txt").write_text(content, encoding="utf-8")
    return scan_directory(out)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write the canonical JSON form (sorted keys, id-ascending images)."""
    images = []
    for rec in manifest.images:
        entry = {"id": rec.id, "path": rec.path, "domain": rec.domain}
        if rec.category is not None:
            entry["category"] = rec.category
        images.append(entry)
    doc = {"dataset_name": manifest.dataset_name, "root": manifest.root, "images": images}
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    """Load a manifest JSON file.

    Raises:
        ParseError: malformed JSON, missing fields, or duplicate ids; the
            message carries the offending location.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc

    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    try:
        name = doc["dataset_name"]
        root = doc["root"]
        raw_images = doc["images"]
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc.args[0]!r}") from exc
    if not isinstance(raw_images, list):
        raise ParseError(f"{path}: 'images' must be a list")

    records = []
    for i, entry in enumerate(raw_images):
        try:
            records.append(
                ImageRecord(
                    id=entry["id"],
                    path=entry["path"],
                    domain=entry["domain"],
                    category=entry.get("category"),
                )
            )
        except (KeyError, TypeError, CapmatchError) as exc:
            raise ParseError(f"{path}: images[{i}]: {exc}") from exc
    try:
        return Manifest(dataset_name=name, root=root, images=tuple(records))
    except CapmatchError as exc:
        raise ParseError(f"{path}: {exc}") from exc
