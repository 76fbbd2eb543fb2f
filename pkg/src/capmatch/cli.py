"""Command-line surface.

Subcommands wire files to the pipeline: gen-synth, ingest, caption, embed,
query, evaluate, export-embeddings. Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .dataset import (
    CategoryFilter,
    generate_synthetic_dataset,
    load_manifest,
    save_manifest,
    scan_directory,
)
from .errors import CapmatchError, PartialFailureError
from .evaluation import emit_report, export_embeddings_2d, sweep_pairs
from .index import load_captions, load_index, save_captions, save_index
from .providers import ReferenceCaptioner, ReferenceImageEmbedder, ReferenceTextEmbedder
from .records import ImageRecord
from .remote import RemoteCaptioner, RemoteEndpoint, RemoteImageEmbedder, RemoteTextEmbedder
from .retrieval import (
    CaptionMatchRetriever,
    RetrievalConfig,
    caption_database,
    embed_captions,
    oracle_captions,
    query as run_query,
)

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _endpoint_from(args) -> RemoteEndpoint:
    url = args.endpoint or os.environ.get("CM_ENDPOINT")
    if not url:
        raise CapmatchError("remote provider needs --endpoint or CM_ENDPOINT")
    return RemoteEndpoint(
        base_url=url,
        timeout=args.timeout,
        max_batch=args.max_batch,
        retries=args.retries,
        max_inflight=args.jobs,
    )


def _text_embedder(args):
    if args.provider == "remote":
        return RemoteTextEmbedder(_endpoint_from(args))
    return ReferenceTextEmbedder(dim=args.dim)


def _image_embedder(args, root):
    if args.provider == "remote":
        return RemoteImageEmbedder(_endpoint_from(args), root=root)
    return ReferenceImageEmbedder(dim=args.dim, root=root)


def _captioner(args, manifest):
    if args.provider == "remote":
        return RemoteCaptioner(_endpoint_from(args), prompt=args.prompt, root=manifest.root)
    return ReferenceCaptioner(
        known_domains=sorted(manifest.domains), prompt=args.prompt, root=manifest.root
    )


def cmd_gen_synth(args) -> int:
    manifest = generate_synthetic_dataset(
        args.out, args.domains, args.categories, args.per_cell, args.seed
    )
    print(
        f"wrote {len(manifest)} files under {args.out}: "
        f"{len(manifest.domains)} domains, {len(manifest.categories)} categories"
    )
    return 0


def cmd_ingest(args) -> int:
    manifest = scan_directory(args.root)
    save_manifest(manifest, args.out)
    print(
        f"{len(manifest.domains)} domains, {len(manifest.categories)} categories, "
        f"{len(manifest)} images -> {args.out}"
    )
    return 0


def cmd_caption(args) -> int:
    manifest = load_manifest(args.manifest)
    targets = manifest.in_domain(args.domain)
    if args.oracle:
        records = oracle_captions(targets, args.oracle_template)
        failed: list[str] = []
    else:
        captioner = _captioner(args, manifest)
        try:
            records = caption_database(targets, captioner)
            failed = []
        except PartialFailureError as exc:
            records = exc.records
            failed = exc.failed_ids
    save_captions(records, args.out)
    print(f"{len(records)} captions -> {args.out}")
    if failed:
        print(f"failed ids: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def cmd_embed(args) -> int:
    if args.captions:
        records = load_captions(args.captions)
        embedder = _text_embedder(args)
        index = embed_captions(records, embedder)
    else:
        manifest = load_manifest(args.images)
        targets = manifest.in_domain(args.domain) if args.domain else list(manifest.images)
        embedder = _image_embedder(args, manifest.root)
        from .index import build_index
        from .vectors import check_embedding

        vectors = embedder.embed_images(targets)
        pairs = [
            (rec.id, check_embedding(v, embedder.dim)) for rec, v in zip(targets, vectors)
        ]
        index = build_index(pairs, provider_id=embedder.provider_id)
    save_index(index, args.out)
    print(f"{len(index)} embeddings (dim {index.dim}, {index.provider_id}) -> {args.out}")
    return 0


def cmd_query(args) -> int:
    index = load_index(args.index)
    record = None
    root = "."
    if args.manifest:
        manifest = load_manifest(args.manifest)
        root = manifest.root
        for rec in manifest.images:
            if rec.path == args.image or rec.id == args.image:
                record = rec
                break
    if record is None:
        record = ImageRecord(id=args.image, path=args.image, domain="query")
        root = "."
    embedder = _image_embedder(args, root)
    captions = {}
    if args.captions:
        captions = {r.image_id: r.caption for r in load_captions(args.captions)}
    result = run_query(record, index, embedder, RetrievalConfig(k=args.k))
    for rank, (image_id, score) in enumerate(result.entries, start=1):
        line = f"{rank} {score:.4f} {image_id}"
        if image_id in captions:
            line += f" {captions[image_id]}"
        print(line)
    return 0


def cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    pairs = "all" if args.pairs == "all" else [
        tuple(p.split("-", 1)) for p in args.pairs.split(",") if p
    ]
    flt = None
    if args.min_samples is not None:
        flt = CategoryFilter(min_samples=args.min_samples, scope=args.filter_scope)
    retriever = CaptionMatchRetriever(
        captioner=None if args.oracle else _captioner(args, manifest),
        text_embedder=_text_embedder(args),
        image_embedder=_image_embedder(args, manifest.root),
        mode="oracle" if args.oracle else "caption",
        oracle_template=args.oracle_template,
    )
    report = sweep_pairs(manifest, pairs, retriever, metrics, category_filter=flt)
    emit_report(report, args.format, args.out)
    avg = ", ".join(f"{n}={report.averages[n]:.4f}" for n in report.metric_names)
    print(f"{len(report.pairs)} pairs -> {args.out} (Avg: {avg})")
    return 0


def cmd_export_embeddings(args) -> int:
    index = load_index(args.index)
    manifest = load_manifest(args.manifest)
    by_id = manifest.by_id()
    labels = {}
    for image_id in index.ids:
        rec = by_id.get(image_id)
        if rec is not None:
            labels[image_id] = rec.domain if args.label_by == "domain" else (rec.category or "")
    export_embeddings_2d(index, labels, args.out)
    print(f"{len(index)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="capmatch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"capmatch {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_provider_flags(p):
        p.add_argument("--provider", choices=["reference", "remote"], default="reference")
        p.add_argument("--dim", type=int, default=64, help="reference embedding dim")
        p.add_argument("--endpoint", default=None, help="inference service URL (or CM_ENDPOINT)")
        p.add_argument("--timeout", type=float, default=30.0)
        p.add_argument("--max-batch", type=int, default=64)
        p.add_argument("--retries", type=int, default=3)
        p.add_argument("--jobs", type=int, default=4, help="max in-flight requests")

    p = sub.add_parser("gen-synth", help="write a deterministic synthetic dataset tree")
    p.add_argument("--out", required=True)
    p.add_argument("--domains", type=int, required=True)
    p.add_argument("--categories", type=int, required=True)
    p.add_argument("--per-cell", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("ingest", help="scan a domain/category tree into a manifest")
    p.add_argument("--root", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("caption", help="caption one domain of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", action="store_true", help="use class labels instead of captions")
    p.add_argument("--oracle-template", default="{class}")
    p.add_argument("--prompt", default="")
    add_provider_flags(p)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("embed", help="embed captions (or images) into a .cme index")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--captions", help="captions JSONL to embed as text")
    group.add_argument("--images", help="manifest whose images to embed")
    p.add_argument("--domain", default=None, help="restrict --images to one domain")
    p.add_argument("--out", required=True)
    add_provider_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("query", help="rank an index against one query image")
    p.add_argument("--image", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--captions", default=None, help="captions JSONL for display")
    p.add_argument("--k", type=int, default=10)
    add_provider_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="sweep domain pairs and write a metric report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pairs", default="all", help='"all" or comma list like d0-d1,d1-d0')
    p.add_argument("--metrics", default="p@1,p@5,p@15,map")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--oracle-template", default="{class}")
    p.add_argument("--prompt", default="")
    p.add_argument("--min-samples", type=int, default=None)
    p.add_argument("--filter-scope", choices=["per-domain", "dataset-wide"], default="per-domain")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    add_provider_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-embeddings", help="dump index vectors with labels as CSV")
    p.add_argument("--index", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--label-by", choices=["category", "domain"], default="category")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CapmatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
