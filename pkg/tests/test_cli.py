import json

import pytest

from capmatch.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _pipeline(workdir, monkeypatch, capsys, oracle=False):
    """gen-synth -> ingest -> caption -> embed -> evaluate inside workdir."""
    monkeypatch.chdir(workdir)
    outputs = {}
    assert _run(capsys, "gen-synth", "--out", "data", "--domains", "3",
                "--categories", "5", "--per-cell", "4", "--seed", "42")[0] == 0
    assert _run(capsys, "ingest", "--root", "data", "--out", "m.json")[0] == 0
    cap_args = ["caption", "--manifest", "m.json", "--domain", "d1", "--out", "caps.jsonl"]
    if oracle:
        cap_args.append("--oracle")
    assert _run(capsys, *cap_args)[0] == 0
    assert _run(capsys, "embed", "--captions", "caps.jsonl", "--out", "d1.cme")[0] == 0
    eval_args = ["evaluate", "--manifest", "m.json", "--pairs", "all",
                 "--metrics", "p@1,map", "--out", "report.csv", "--format", "csv"]
    if oracle:
        eval_args.append("--oracle")
    assert _run(capsys, *eval_args)[0] == 0
    for name in ("m.json", "caps.jsonl", "d1.cme", "report.csv"):
        outputs[name] = (workdir / name).read_bytes()
    return outputs


def test_missing_required_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--out", "m.json"])
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_unknown_command_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_runtime_error_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = _run(capsys, "ingest", "--root", str(empty), "--out", str(tmp_path / "m.json"))
    assert code == 2
    assert "no image files" in err


def test_ingest_summary_line(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _run(capsys, "gen-synth", "--out", "data", "--domains", "2", "--categories", "3",
         "--per-cell", "1", "--seed", "7")
    code, out, _ = _run(capsys, "ingest", "--root", "data", "--out", "m.json")
    assert code == 0
    assert "2 domains, 3 categories, 6 images" in out


def test_full_pipeline_and_query(tmp_path, monkeypatch, capsys):
    _pipeline(tmp_path, monkeypatch, capsys)
    report = (tmp_path / "report.csv").read_text().strip().split("\n")
    assert report[0] == "pair,p@1,map"
    assert len(report) == 8  # header + 6 pairs + Avg
    assert all(line.endswith("1.0000,1.0000") for line in report[1:])

    code, out, _ = _run(capsys, "query", "--image", "data/d0/c2/i0.txt",
                        "--index", "d1.cme", "--captions", "caps.jsonl", "--k", "5")
    assert code == 0
    lines = out.strip().split("\n")
    assert len(lines) == 5
    first = lines[0].split()
    assert first[0] == "1"
    assert first[2].startswith("d1/c2/")
    scores = [float(line.split()[1]) for line in lines]
    assert scores == sorted(scores, reverse=True)


def test_oracle_flag_pipeline(tmp_path, monkeypatch, capsys):
    _pipeline(tmp_path, monkeypatch, capsys, oracle=True)
    caps = [json.loads(line) for line in (tmp_path / "caps.jsonl").read_text().splitlines()]
    assert all(c["provider_id"] == "oracle" for c in caps)
    assert caps[0]["caption"] == "c0"


def test_pipeline_byte_determinism(tmp_path, monkeypatch, capsys):
    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    run_a.mkdir()
    run_b.mkdir()
    out_a = _pipeline(run_a, monkeypatch, capsys)
    out_b = _pipeline(run_b, monkeypatch, capsys)
    assert out_a == out_b


def test_evaluate_json_format(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _run(capsys, "gen-synth", "--out", "data", "--domains", "2", "--categories", "2",
         "--per-cell", "2", "--seed", "42")
    _run(capsys, "ingest", "--root", "data", "--out", "m.json")
    code, _, _ = _run(capsys, "evaluate", "--manifest", "m.json", "--pairs", "d0-d1",
                      "--metrics", "p@1", "--out", "r.json", "--format", "json")
    assert code == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["pairs"][0]["pair"] == "d0-d1"
    assert doc["averages"]["p@1"] == 1.0


def test_embed_images_mode(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _run(capsys, "gen-synth", "--out", "data", "--domains", "2", "--categories", "2",
         "--per-cell", "1", "--seed", "42")
    _run(capsys, "ingest", "--root", "data", "--out", "m.json")
    code, out, _ = _run(capsys, "embed", "--images", "m.json", "--domain", "d0",
                        "--out", "d0img.cme")
    assert code == 0
    assert "2 embeddings" in out


def test_export_embeddings_command(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _run(capsys, "gen-synth", "--out", "data", "--domains", "2", "--categories", "2",
         "--per-cell", "1", "--seed", "42")
    _run(capsys, "ingest", "--root", "data", "--out", "m.json")
    _run(capsys, "caption", "--manifest", "m.json", "--domain", "d1", "--out", "caps.jsonl")
    _run(capsys, "embed", "--captions", "caps.jsonl", "--out", "d1.cme")
    code, _, _ = _run(capsys, "export-embeddings", "--index", "d1.cme",
                      "--manifest", "m.json", "--label-by", "category", "--out", "emb.csv")
    assert code == 0
    lines = (tmp_path / "emb.csv").read_text().strip().split("\n")
    assert lines[0].startswith("id,label,v0")
    assert len(lines) == 3


def test_partial_caption_failure_exits_2(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    _run(capsys, "gen-synth", "--out", "data", "--domains", "2", "--categories", "2",
         "--per-cell", "2", "--seed", "42")
    _run(capsys, "ingest", "--root", "data", "--out", "m.json")
    (tmp_path / "data" / "d1" / "c0" / "i0.txt").unlink()
    with pytest.warns(UserWarning):
        code, _, err = _run(capsys, "caption", "--manifest", "m.json", "--domain", "d1",
                            "--out", "caps.jsonl")
    assert code == 2
    assert "d1/c0/i0.txt" in err
    # survivors were still written
    assert len((tmp_path / "caps.jsonl").read_text().splitlines()) == 3
