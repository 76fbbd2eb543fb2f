"""Domain-pair evaluation: P@k and mAP@All sweeps with report emission.

A pair A-B queries every image of domain A against the database of domain
B. Retrieved items are correct when categories match. Queries whose
category is absent from the target database are skipped and tallied.
Report averages are unweighted means over pairs.
"""

import csv
import json
import re
from dataclasses import InitVar, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from sklearn.base import clone

from .dataset import CategoryFilter, Manifest, filter_categories
from .errors import (
    CapmatchError,
    MissingLabelError,
    NoQueriesError,
    NoTargetsError,
    ParseError,
    UnknownIdError,
    UnlabeledError,
)
from .index import EmbeddingIndex
from .metrics import average_precision, precision_at_k
from .records import ImageRecord, normalize_name

_METRIC_RE = re.compile(r"^p@(\d+)$")


@dataclass(frozen=True)
class DomainPair:
    """Ordered evaluation direction: queries from one domain, database from another."""

    query_domain: str
    target_domain: str
    allow_same: InitVar[bool] = False

    def __post_init__(self, allow_same: bool):
        object.__setattr__(self, "query_domain", normalize_name(self.query_domain))
        object.__setattr__(self, "target_domain", normalize_name(self.target_domain))
        if self.query_domain == self.target_domain and not allow_same:
            raise ValueError(
                f"same-domain pair {self.label!r} requires allow_same=True"
            )

    @property
    def label(self) -> str:
        return f"{self.query_domain}-{self.target_domain}"


@dataclass(frozen=True)
class PairMetrics:
    """Metric values for one domain pair."""

    pair: DomainPair
    p_at: dict[int, float]
    map_at_all: float | None
    n_queries: int
    n_skipped: int = 0

    def value(self, metric: str) -> float:
        if metric == "map":
            if self.map_at_all is None:
                raise KeyError("map was not computed for this pair")
            return self.map_at_all
        m = _METRIC_RE.match(metric)
        if not m:
            raise KeyError(f"unknown metric {metric!r}")
        return self.p_at[int(m.group(1))]


@dataclass(frozen=True)
class EvalReport:
    """Per-pair metric table plus unweighted averages."""

    dataset_name: str
    pairs: tuple[PairMetrics, ...]
    averages: dict[str, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.averages is None:
            names = self.metric_names
            avgs = {
                name: sum(p.value(name) for p in self.pairs) / len(self.pairs)
                for name in names
            }
            object.__setattr__(self, "averages", avgs)

    @property
    def metric_names(self) -> list[str]:
        if not self.pairs:
            return []
        names = [f"p@{k}" for k in sorted(self.pairs[0].p_at)]
        if self.pairs[0].map_at_all is not None:
            names.append("map")
        return names


def parse_metrics(names) -> tuple[list[int], bool]:
    """Parse metric names like ["p@1", "p@5", "map"] into (ks, want_map)."""
    ks: set[int] = set()
    want_map = False
    for name in names:
        name = name.strip().lower()
        if name == "map":
            want_map = True
            continue
        m = _METRIC_RE.match(name)
        if not m or int(m.group(1)) < 1:
            raise ValueError(f"unknown metric {name!r}; expected p@<k> or map")
        ks.add(int(m.group(1)))
    if not ks and not want_map:
        raise ValueError("at least one metric is required")
    return sorted(ks), want_map


def relevance(query: ImageRecord, result_id: str, manifest: Manifest) -> bool:
    """True iff the retrieved image shares the query's category."""
    by_id = manifest.by_id()
    if query.id not in by_id:
        raise UnknownIdError(f"query id {query.id!r} not in manifest")
    result = by_id.get(result_id)
    if result is None:
        raise UnknownIdError(f"result id {result_id!r} not in manifest")
    if query.category is None:
        raise UnlabeledError(f"query {query.id!r} has no category")
    if result.category is None:
        raise UnlabeledError(f"result {result_id!r} has no category")
    return query.category == result.category


def _evaluate_fitted(manifest, pair, fitted, ks, want_map) -> PairMetrics:
    queries = manifest.in_domain(pair.query_domain)
    if not queries:
        raise NoQueriesError(f"no query images in domain {pair.query_domain!r}")
    category_of = {r.id: r.category for r in manifest.images}
    index_ids = fitted.index_.ids

    p_sums = {k: 0.0 for k in ks}
    ap_sum = 0.0
    evaluated = 0
    skipped = 0
    for q in queries:
        if q.category is None:
            raise UnlabeledError(f"query {q.id!r} has no category")
        universe = [i for i in index_ids if i != q.id]
        total_relevant = sum(1 for i in universe if category_of[i] == q.category)
        if total_relevant == 0:
            skipped += 1
            continue
        ranking = fitted.rank(q, k=len(universe))
        rel = [category_of[i] == q.category for i in ranking.ids]
        for k in ks:
            p_sums[k] += precision_at_k(rel, k)
        if want_map:
            ap_sum += average_precision(rel, total_relevant)
        evaluated += 1
    if evaluated == 0:
        raise NoQueriesError(
            f"every query of {pair.label!r} was skipped (no relevant targets)"
        )
    return PairMetrics(
        pair=pair,
        p_at={k: p_sums[k] / evaluated for k in ks},
        map_at_all=(ap_sum / evaluated) if want_map else None,
        n_queries=evaluated,
        n_skipped=skipped,
    )


def evaluate_pair(manifest: Manifest, pair: DomainPair, retriever, metrics) -> PairMetrics:
    """Run the retrieval pipeline for one ordered domain pair.

    ``retriever`` is an unfitted CaptionMatchRetriever prototype; it is
    cloned and fitted on the pair's target domain.
    """
    ks, want_map = parse_metrics(metrics)
    targets = manifest.in_domain(pair.target_domain)
    if not targets:
        raise NoTargetsError(f"no target images in domain {pair.target_domain!r}")
    fitted = clone(retriever).fit(targets)
    return _evaluate_fitted(manifest, pair, fitted, ks, want_map)


def _restrict(manifest: Manifest, domains: set[str]) -> Manifest:
    return Manifest(
        dataset_name=manifest.dataset_name,
        root=manifest.root,
        images=tuple(r for r in manifest.images if r.domain in domains),
        domains=frozenset(domains),
    )


def expand_pairs(manifest: Manifest, pairs) -> list[DomainPair]:
    """Expand "all"/"all-ordered" or normalize an explicit pair list.

    Output is deterministic: sorted by (query_domain, target_domain),
    duplicates removed.
    """
    if isinstance(pairs, str):
        if pairs not in ("all", "all-ordered"):
            raise ValueError(f"unknown pair spec {pairs!r}")
        domains = sorted(manifest.domains)
        expanded = [
            DomainPair(q, t) for q in domains for t in domains if q != t
        ]
    else:
        expanded = []
        for p in pairs:
            if isinstance(p, DomainPair):
                expanded.append(p)
            else:
                q, t = p
                expanded.append(DomainPair(q, t))
        expanded = sorted(set(expanded), key=lambda p: (p.query_domain, p.target_domain))
    for p in expanded:
        for d in (p.query_domain, p.target_domain):
            if d not in manifest.domains:
                raise CapmatchError(f"domain {d!r} not in manifest")
    if not expanded:
        raise ValueError("no pairs to evaluate")
    return expanded


def sweep_pairs(
    manifest: Manifest,
    pairs,
    retriever,
    metrics,
    category_filter: CategoryFilter | None = None,
) -> EvalReport:
    """Evaluate a list of pairs (or "all" ordered pairs) into a report.

    With a per-domain category filter, each pair keeps only categories that
    pass the sample-count threshold in BOTH of its domains; a dataset-wide
    filter is applied once up front. Captioning is reused across pairs that
    share a target domain whenever the target database does not depend on
    the pair.
    """
    ks, want_map = parse_metrics(metrics)
    pair_list = expand_pairs(manifest, pairs)

    base = manifest
    per_pair_filter = None
    if category_filter is not None:
        if category_filter.scope == "dataset-wide":
            base = filter_categories(base, category_filter)
        else:
            per_pair_filter = category_filter

    results = []
    fitted_cache: dict[str, object] = {}
    for pair in pair_list:
        try:
            if per_pair_filter is not None:
                sub = _restrict(base, {pair.query_domain, pair.target_domain})
                sub = filter_categories(sub, per_pair_filter)
                targets = sub.in_domain(pair.target_domain)
                if not targets:
                    raise NoTargetsError(f"no target images in {pair.target_domain!r}")
                fitted = clone(retriever).fit(targets)
                results.append(_evaluate_fitted(sub, pair, fitted, ks, want_map))
            else:
                fitted = fitted_cache.get(pair.target_domain)
                if fitted is None:
                    targets = base.in_domain(pair.target_domain)
                    if not targets:
                        raise NoTargetsError(f"no target images in {pair.target_domain!r}")
                    fitted = clone(retriever).fit(targets)
                    fitted_cache[pair.target_domain] = fitted
                results.append(_evaluate_fitted(base, pair, fitted, ks, want_map))
        except Exception as exc:
            if exc.args and isinstance(exc.args[0], str):
                exc.args = (f"pair {pair.label}: {exc.args[0]}",) + exc.args[1:]
            raise
    return EvalReport(dataset_name=manifest.dataset_name, pairs=tuple(results))


def _format_cell(value: float) -> str:
    return str(Decimal(repr(value)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP))


def emit_report(report: EvalReport, fmt: str, path: str | Path) -> None:
    """Write a report as CSV (pair rows plus Avg, 4 decimals) or JSON."""
    path = Path(path)
    names = report.metric_names
    if fmt == "csv":
        lines = ["pair," + ",".join(names)]
        for pm in report.pairs:
            lines.append(
                pm.pair.label + "," + ",".join(_format_cell(pm.value(n)) for n in names)
            )
        lines.append("Avg," + ",".join(_format_cell(report.averages[n]) for n in names))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        doc = {
            "dataset_name": report.dataset_name,
            "metrics": names,
            "pairs": [
                {
                    "pair": pm.pair.label,
                    "query_domain": pm.pair.query_domain,
                    "target_domain": pm.pair.target_domain,
                    "values": {n: pm.value(n) for n in names},
                    "n_queries": pm.n_queries,
                    "n_skipped": pm.n_skipped,
                }
                for pm in report.pairs
            ],
            "averages": {n: report.averages[n] for n in names},
        }
        path.write_text(
            json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path: str | Path) -> EvalReport:
    """Read back a JSON report written by emit_report."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        pairs = []
        for entry in doc["pairs"]:
            values = entry["values"]
            p_at = {
                int(n[2:]): v for n, v in values.items() if n.startswith("p@")
            }
            pairs.append(
                PairMetrics(
                    pair=DomainPair(entry["query_domain"], entry["target_domain"]),
                    p_at=p_at,
                    map_at_all=values.get("map"),
                    n_queries=entry["n_queries"],
                    n_skipped=entry["n_skipped"],
                )
            )
        return EvalReport(
            dataset_name=doc["dataset_name"],
            pairs=tuple(pairs),
            averages=dict(doc["averages"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def export_embeddings_2d(index: EmbeddingIndex, labels, path: str | Path) -> None:
    """Write "id,label,v0..v{dim-1}" CSV for external projection tools.

    Values carry 9 significant digits so float32 coordinates round-trip.

    Raises:
        MissingLabelError: an index id has no label.
    """
    missing = [i for i in index.ids if i not in labels]
    if missing:
        raise MissingLabelError(f"no label for: {missing}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + [f"v{j}" for j in range(index.dim)])
        for i, image_id in enumerate(index.ids):
            row = [image_id, labels[image_id]]
            row.extend(f"{v:.9g}" for v in index.matrix[i])
            writer.writerow(row)
