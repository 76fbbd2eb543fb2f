"""Acceptance suite: every criterion with its pinned tolerance.

Each test prints one PASS line when its criterion holds; run with
``pytest tests/test_acceptance.py -v -s`` to see them. Full-scale
benchmark numbers need GPU inference over the real datasets and live in
the README runbook, not here.
"""

import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from capmatch.cli import main as cli_main
from capmatch.dataset import generate_synthetic_dataset, scan_directory
from capmatch.errors import (
    BadMagicError,
    ChecksumMismatchError,
    TruncatedError,
)
from capmatch.evaluation import expand_pairs, sweep_pairs
from capmatch.index import build_index, load_captions, load_index, save_captions, save_index, top_k
from capmatch.metrics import average_precision, precision_at_k
from capmatch.records import CaptionRecord
from capmatch.vectors import l2_normalize

from conftest import make_retriever

GOLDEN_REPORT = Path(__file__).parent / "data" / "golden_synth_report.csv"


def _ap_brute_force(rel, total_relevant):
    total = 0.0
    for pos in range(len(rel)):
        if rel[pos]:
            total += sum(rel[: pos + 1]) / (pos + 1)
    return total / total_relevant


def test_metric_oracle_equivalence():
    """AP and P@k match brute-force definitions exhaustively, length <= 8."""
    start = time.perf_counter()
    cases = 0
    for length in range(1, 9):
        for bits in itertools.product([False, True], repeat=length):
            rel = list(bits)
            total = sum(rel)
            if total:
                assert average_precision(rel, total) == _ap_brute_force(rel, total)
            for k in range(1, 9):
                assert precision_at_k(rel, k) == sum(rel[:k]) / k
                cases += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"metric oracle suite took {elapsed:.2f}s"
    print(f"\nPASS metric-oracle-equivalence ({cases} cases, {elapsed:.2f}s)")


def test_top_k_exactness_1000_seeded_instances():
    """top_k equals full-sort brute force, including tie-break order."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240817)
    for trial in range(1000):
        n = int(rng.integers(1, 201))
        dim = int(rng.integers(2, 33))
        k = int(rng.integers(1, 21))
        mat = rng.standard_normal((n, dim))
        if n >= 4 and trial % 3 == 0:
            mat[1] = mat[0]  # force exact score ties
            mat[3] = mat[2]
        pairs = [(f"r{i:03d}", l2_normalize(mat[i])) for i in range(n)]
        idx = build_index(pairs, "p")
        q = l2_normalize(rng.standard_normal(dim))
        got = top_k(idx, q, k)

        scored = []
        for pid, vec in pairs:
            s = float(np.asarray(vec, dtype=np.float64) @ np.asarray(q, dtype=np.float64))
            scored.append((pid, min(1.0, max(-1.0, s))))
        scored.sort(key=lambda e: (-e[1], e[0]))
        want = scored[: min(k, n)]
        assert got.ids == [w[0] for w in want], f"trial {trial}"
        # ranking and ties are exact; scores may differ in the last f64 ulp
        # because blas matrix-vector and per-row dots accumulate differently
        assert np.allclose(got.scores, [w[1] for w in want], rtol=0, atol=1e-9)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"top-k suite took {elapsed:.2f}s"
    print(f"\nPASS top-k-exactness (1000 instances, {elapsed:.2f}s)")


def test_synthetic_end_to_end_caption_matching(tmp_path):
    """3x5x4 synthetic sweep: P@1 = 1.0 and mAP >= 0.99 on all 6 pairs."""
    start = time.perf_counter()
    m = generate_synthetic_dataset(tmp_path / "data", 3, 5, 4, 42)
    report = sweep_pairs(m, "all", make_retriever(m, dim=64), ["p@1", "map"])
    assert len(report.pairs) == 6
    for pm in report.pairs:
        assert pm.p_at[1] == 1.0, f"{pm.pair.label}: P@1 = {pm.p_at[1]}"
        assert pm.map_at_all >= 0.99, f"{pm.pair.label}: mAP = {pm.map_at_all}"

    from capmatch.evaluation import emit_report

    out = tmp_path / "report.csv"
    emit_report(report, "csv", out)
    assert out.read_bytes() == GOLDEN_REPORT.read_bytes(), "report drifted from golden"
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"end-to-end suite took {elapsed:.2f}s"
    print(f"\nPASS synthetic-end-to-end-cm (6 pairs, {elapsed:.2f}s)")


def test_oracle_mode_dominates_captions(tmp_path):
    """Oracle P@1 = 1.0 everywhere; oracle >= caption for every metric."""
    m = generate_synthetic_dataset(tmp_path / "data", 3, 5, 4, 42)
    metrics = ["p@1", "p@5", "p@15", "map"]
    caption_report = sweep_pairs(m, "all", make_retriever(m, mode="caption"), metrics)
    oracle_report = sweep_pairs(m, "all", make_retriever(m, mode="oracle"), metrics)
    for cap_pm, ora_pm in zip(caption_report.pairs, oracle_report.pairs):
        assert ora_pm.pair == cap_pm.pair
        assert ora_pm.p_at[1] == 1.0, f"{ora_pm.pair.label}: oracle P@1 = {ora_pm.p_at[1]}"
        for name in metrics:
            assert ora_pm.value(name) >= cap_pm.value(name), (
                f"{ora_pm.pair.label} {name}: oracle {ora_pm.value(name)} "
                f"< caption {cap_pm.value(name)}"
            )
    print("\nPASS oracle-mode-dominance (6 pairs x 4 metrics)")


def test_persistence_1000_random_round_trips(tmp_path):
    """Bit-identical .cme and captions round-trips; designated corruption errors."""
    rng = np.random.default_rng(99)
    cme = tmp_path / "x.cme"
    caps = tmp_path / "caps.jsonl"
    for trial in range(1000):
        n = int(rng.integers(1, 17))
        dim = int(rng.integers(2, 17))
        pairs = [(f"id{i:02d}", l2_normalize(rng.standard_normal(dim))) for i in range(n)]
        idx = build_index(pairs, f"prov{trial % 7}")
        save_index(idx, cme)
        loaded = load_index(cme)
        assert loaded.ids == idx.ids
        assert loaded.matrix.tobytes() == idx.matrix.tobytes()
        assert loaded.provider_id == idx.provider_id
        save_index(loaded, tmp_path / "y.cme")
        assert cme.read_bytes() == (tmp_path / "y.cme").read_bytes()

        records = [
            CaptionRecord(f"id{i:02d}", f"caption {rng.integers(1e6)}", "p")
            for i in range(n)
        ]
        save_captions(records, caps)
        assert load_captions(caps) == sorted(records, key=lambda r: r.image_id)
        save_captions(load_captions(caps), tmp_path / "caps2.jsonl")
        assert caps.read_bytes() == (tmp_path / "caps2.jsonl").read_bytes()

    good = cme.read_bytes()
    bad_magic = b"XXXX" + good[4:]
    (tmp_path / "bad_magic.cme").write_bytes(bad_magic)
    with pytest.raises(BadMagicError):
        load_index(tmp_path / "bad_magic.cme")

    (tmp_path / "trunc.cme").write_bytes(good[: len(good) - 7])
    with pytest.raises(TruncatedError):
        load_index(tmp_path / "trunc.cme")

    corrupted = bytearray(good)
    corrupted[len(good) // 2] ^= 0x01
    (tmp_path / "crc.cme").write_bytes(bytes(corrupted))
    with pytest.raises(ChecksumMismatchError):
        load_index(tmp_path / "crc.cme")
    print("\nPASS persistence-round-trips (1000 indices + corruption guards)")


def _cli_pipeline(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    for argv in (
        ["gen-synth", "--out", "data", "--domains", "3", "--categories", "5",
         "--per-cell", "4", "--seed", "42"],
        ["ingest", "--root", "data", "--out", "m.json"],
        ["caption", "--manifest", "m.json", "--domain", "d1", "--out", "caps.jsonl"],
        ["embed", "--captions", "caps.jsonl", "--out", "d1.cme"],
        ["evaluate", "--manifest", "m.json", "--pairs", "all", "--metrics", "p@1,map",
         "--out", "report.csv", "--format", "csv"],
    ):
        assert cli_main(argv) == 0
    return {
        name: (workdir / name).read_bytes()
        for name in ("m.json", "caps.jsonl", "d1.cme", "report.csv")
    }


def test_cli_pipeline_determinism(tmp_path, monkeypatch, capsys):
    """Two full CLI runs produce byte-identical manifests, caches, reports."""
    a = tmp_path / "run_a"
    b = tmp_path / "run_b"
    a.mkdir()
    b.mkdir()
    out_a = _cli_pipeline(a, monkeypatch)
    out_b = _cli_pipeline(b, monkeypatch)
    capsys.readouterr()
    assert out_a == out_b
    assert out_a["report.csv"] == GOLDEN_REPORT.read_bytes()
    print("\nPASS cli-pipeline-determinism (4 artifacts byte-identical)")


def test_pair_sweep_shapes(tmp_path):
    """"all" yields n(n-1) rows; Office-Home layout yields its 12 pairs."""
    for n in (2, 3, 4, 6):
        m = generate_synthetic_dataset(tmp_path / f"n{n}", n, 2, 1, 11)
        report = sweep_pairs(m, "all", make_retriever(m), ["p@1"])
        assert len(report.pairs) == n * (n - 1)

    office_home = tmp_path / "office_home"
    for d in ("Art", "Clipart", "Product", "Real World"):
        for c in ("bike", "kettle"):
            cell = office_home / d / c
            cell.mkdir(parents=True)
            (cell / "0.txt").write_text(f"{d.lower()} {c} shared", encoding="utf-8")
    m = scan_directory(office_home)
    labels = [p.label for p in expand_pairs(m, "all")]
    assert labels == [
        "art-clipart", "art-product", "art-real world",
        "clipart-art", "clipart-product", "clipart-real world",
        "product-art", "product-clipart", "product-real world",
        "real world-art", "real world-clipart", "real world-product",
    ]
    print("\nPASS pair-sweep-shapes (n(n-1) rows and Office-Home header order)")
