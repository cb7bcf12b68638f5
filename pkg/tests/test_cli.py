import json
from pathlib import Path

import pytest

from conftest import FIG_TAGS, FIG_WORDS, corpus_record, write_jsonl
from phrasemine.cli import main

CORPUS_SENTENCES = [
    ("s1", FIG_WORDS, FIG_TAGS),
    ("s2", ["neural", "network", "models"], ["JJ", "NN", "NNS"]),
    ("s3", ["the", "market", "rallied"], ["DT", "NN", "VBD"]),
]


@pytest.fixture()
def corpus_path(tmp_path) -> Path:
    rec1 = corpus_record("d1", CORPUS_SENTENCES[:2], ["neural networks", "medical monitoring"])
    rec2 = corpus_record("d2", CORPUS_SENTENCES[2:], ["stock market"])
    return write_jsonl(tmp_path / "corpus.jsonl", [rec1, rec2])


def run(*args) -> int:
    return main(list(args))


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        assert run("annotate") == 1  # missing --corpus
        assert "corpus" in capsys.readouterr().err

    def test_unknown_subcommand_is_1(self):
        assert run("frobnicate") == 1

    def test_data_error_is_2(self, corpus_path, capsys):
        code = run("impact", "--corpus", str(corpus_path), "--sentence-id", "nope")
        assert code == 2
        assert "data error" in capsys.readouterr().err

    def test_backend_error_is_3(self, corpus_path, capsys):
        code = run(
            "annotate",
            "--corpus", str(corpus_path),
            "--backend", "remote",
            "--url", "http://127.0.0.1:1",
            "--retries", "0",
            "--timeout", "0.5",
            "--output", "-",
        )
        assert code == 3
        assert "backend error" in capsys.readouterr().err

    def test_help_is_0(self):
        assert run("--help") == 0
        assert run("annotate", "--help") == 0


class TestAnnotate:
    def test_silver_output_schema(self, corpus_path, tmp_path):
        out = tmp_path / "silver.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out), "--seed", "7") == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert [l["sentence_id"] for l in lines] == ["s1", "s2", "s3"]
        for line in lines:
            assert line["source"] == "annotator"
            for phrase in line["phrases"]:
                assert phrase["end"] - phrase["start"] >= 2
                assert phrase["surface"]

    def test_determinism_byte_identical(self, corpus_path, tmp_path):
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (out1, out2):
            assert run("annotate", "--corpus", str(corpus_path), "--output", str(out), "--seed", "7") == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_cache_on_off_byte_identical(self, corpus_path, tmp_path):
        on, off = tmp_path / "on.jsonl", tmp_path / "off.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(on), "--seed", "7", "--cache-size", "100000") == 0
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(off), "--seed", "7", "--cache-size", "0") == 0
        assert on.read_bytes() == off.read_bytes()

    def test_parallel_matches_serial(self, corpus_path, tmp_path):
        serial, parallel = tmp_path / "s.jsonl", tmp_path / "p.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(serial), "--seed", "7") == 0
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(parallel), "--seed", "7", "--jobs", "4") == 0
        assert serial.read_bytes() == parallel.read_bytes()

    def test_config_echo_written(self, corpus_path, tmp_path):
        out = tmp_path / "silver.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out), "--seed", "9") == 0
        echo = json.loads((tmp_path / "silver.jsonl.config.json").read_text())
        assert echo["command"] == "annotate"
        assert echo["seed"] == 9
        assert echo["q"] == 40.0


class TestImpact:
    def test_csv_shape(self, corpus_path, tmp_path, capsys):
        out = tmp_path / "m.csv"
        assert run("impact", "--corpus", str(corpus_path), "--sentence-id", "s2", "--output", str(out)) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "neural,network,models"
        assert len(lines) == 4
        assert all(len(line.split(",")) == 3 for line in lines[1:])


class TestPipelineFlow:
    def test_export_import_merge_eval(self, corpus_path, tmp_path, capsys):
        silver = tmp_path / "silver.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(silver), "--seed", "7") == 0

        train = tmp_path / "train.jsonl"
        assert run("export-train", "--corpus", str(corpus_path), "--silver", str(silver), "--output", str(train)) == 0
        for line in train.read_text().splitlines():
            obj = json.loads(line)
            assert set(obj) == {"sentence_id", "source", "target"}

        generated = write_jsonl(
            tmp_path / "gen.jsonl",
            [
                {"sentence_id": "s1", "target_text": "medical monitoring , made-up nonsense"},
                {"sentence_id": "s2", "target_text": "neural network"},
                {"sentence_id": "s3", "target_text": ""},
            ],
        )
        grounded = tmp_path / "grounded.jsonl"
        assert run("import-generated", "--corpus", str(corpus_path), "--generated", str(generated), "--output", str(grounded)) == 0
        err = capsys.readouterr().err
        assert "1 hallucinated" in err

        merged = tmp_path / "merged.jsonl"
        assert run("merge", "--left", str(silver), "--right", str(grounded), "--output", str(merged)) == 0
        merged_lines = [json.loads(l) for l in merged.read_text().splitlines()]
        assert all(l["source"] == "merged" for l in merged_lines)

        report_path = tmp_path / "report.json"
        assert run("eval-sentence", "--pred", str(merged), "--gold", str(silver), "--output", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert report["recall"] == 1.0  # merged is a superset of silver

    def test_merge_keeps_one_sided_empty_sentences(self, tmp_path):
        left = write_jsonl(
            tmp_path / "left.jsonl",
            [
                {"sentence_id": "sa", "source": "annotator", "phrases": []},
                {"sentence_id": "sb", "source": "annotator",
                 "phrases": [{"start": 0, "end": 2, "surface": "x y"}]},
            ],
        )
        right = write_jsonl(
            tmp_path / "right.jsonl",
            [{"sentence_id": "sb", "source": "generator", "phrases": []}],
        )
        out = tmp_path / "merged.jsonl"
        assert run("merge", "--left", str(left), "--right", str(right), "--output", str(out)) == 0
        lines = {json.loads(l)["sentence_id"]: json.loads(l) for l in out.read_text().splitlines()}
        assert lines["sa"]["phrases"] == [] and lines["sa"]["source"] == "merged"
        assert len(lines["sb"]["phrases"]) == 1

    def test_eval_sentence_pred_equals_gold(self, corpus_path, tmp_path, capsys):
        silver = tmp_path / "silver.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(silver), "--seed", "7") == 0
        assert run("eval-sentence", "--pred", str(silver), "--gold", str(silver)) == 0
        out = capsys.readouterr().out
        report = json.loads(out)
        assert report["f1"] == 1.0

    def test_eval_sentence_gold_schema(self, corpus_path, tmp_path, capsys):
        pred = write_jsonl(
            tmp_path / "pred.jsonl",
            [{"sentence_id": "s1", "source": "annotator",
              "phrases": [{"start": 0, "end": 2, "surface": "sensor selection"}]}],
        )
        gold = write_jsonl(
            tmp_path / "gold.jsonl",
            [{"sentence_id": "s1", "gold": [{"start": 0, "end": 2}, {"start": 4, "end": 7}]}],
        )
        assert run("eval-sentence", "--pred", str(pred), "--gold", str(gold)) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["tp"] == 1 and report["fn"] == 1
        assert report["f1"] == pytest.approx(2 / 3)

    def test_eval_doc(self, corpus_path, tmp_path, capsys):
        pred = write_jsonl(
            tmp_path / "pred.jsonl",
            [
                {"sentence_id": "s1", "source": "merged",
                 "phrases": [{"start": 5, "end": 7, "surface": "medical monitoring"}]},
                {"sentence_id": "s2", "source": "merged",
                 "phrases": [{"start": 0, "end": 2, "surface": "neural network"}]},
                {"sentence_id": "s3", "source": "merged",
                 "phrases": [{"start": 1, "end": 3, "surface": "market rallied"}]},
            ],
        )
        csv_path = tmp_path / "report.csv"
        assert run("eval-doc", "--corpus", str(corpus_path), "--pred", str(pred), "--csv", str(csv_path)) == 0
        report = json.loads(capsys.readouterr().out)
        # d1 gold: "neural networks" matches, "medical monitoring" matches -> f1 = 1.0
        d1 = next(r for r in report["per_document"] if r["doc_id"] == "d1")
        assert d1["f1"] == 1.0
        d2 = next(r for r in report["per_document"] if r["doc_id"] == "d2")
        assert d2["f1"] == 0.0
        assert report["f1_at_10"] == pytest.approx(0.5)
        assert csv_path.read_text().startswith("doc_id,")


class TestConfigResolution:
    def test_config_file_supplies_defaults(self, corpus_path, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 7\nq = 40\n# comment\ncache-size = 1000\n")
        out_cfg = tmp_path / "via_cfg.jsonl"
        out_flag = tmp_path / "via_flag.jsonl"
        assert run("--config", str(cfg), "annotate", "--corpus", str(corpus_path), "--output", str(out_cfg)) == 0
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out_flag), "--seed", "7") == 0
        assert out_cfg.read_bytes() == out_flag.read_bytes()

    def test_flag_overrides_config_file(self, corpus_path, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 1\n")
        out_override = tmp_path / "override.jsonl"
        out_direct = tmp_path / "direct.jsonl"
        assert run("--config", str(cfg), "annotate", "--corpus", str(corpus_path), "--output", str(out_override), "--seed", "7") == 0
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out_direct), "--seed", "7") == 0
        assert out_override.read_bytes() == out_direct.read_bytes()

    def test_env_var_seed(self, corpus_path, tmp_path, monkeypatch):
        monkeypatch.setenv("PHRASEMINE_SEED", "7")
        out_env = tmp_path / "env.jsonl"
        out_flag = tmp_path / "flag.jsonl"
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out_env)) == 0
        monkeypatch.delenv("PHRASEMINE_SEED")
        assert run("annotate", "--corpus", str(corpus_path), "--output", str(out_flag), "--seed", "7") == 0
        assert out_env.read_bytes() == out_flag.read_bytes()

    def test_bad_config_file_is_usage_error(self, corpus_path, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this line has no equals sign\n")
        assert run("--config", str(cfg), "annotate", "--corpus", str(corpus_path)) == 1

    def test_invalid_q_rejected(self, corpus_path):
        assert run("annotate", "--corpus", str(corpus_path), "--q", "0") == 1
        assert run("annotate", "--corpus", str(corpus_path), "--q", "101") == 1


def test_no_partial_output_on_failure(tmp_path):
    """A crash mid-run must not leave the output file behind."""
    bad_corpus = tmp_path / "bad.jsonl"
    bad_corpus.write_text('{"id": "d", "sentences": []}\n{broken\n')
    out = tmp_path / "out.jsonl"
    code = main(["annotate", "--corpus", str(bad_corpus), "--output", str(out), "--seed", "1"])
    assert code == 2
    assert not out.exists()
    assert not list(tmp_path.glob("*.tmp"))
