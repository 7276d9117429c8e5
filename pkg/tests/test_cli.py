from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml

from esgclarity.cli import main
from esgclarity.fixtures import (
    make_clarity_dataset,
    simulate_zero_shot_transcript,
    write_clarity_csv,
    write_fixture_corpus,
)
from esgclarity.zeroshot import load_prompt_template


@pytest.fixture
def workspace(tmp_path):
    corpus_dir = tmp_path / "corpus"
    work_dir = tmp_path / "artifacts"
    write_fixture_corpus(corpus_dir, n_docs=3, seed=100)
    cfg = {
        "corpus": {"input_dir": str(corpus_dir), "work_dir": str(work_dir)},
        "clarity": {
            "contrastive_encoder": "local:sentence-micro",
            "prompt_encoder": "local:mlm-micro",
            "r_per_item": 2,
            "contrastive_epochs": 1,
            "prompt_epochs": 2,
            "num_virtual_tokens": 4,
        },
        "splits": {"seed": 0},
    }
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    dataset_csv = tmp_path / "dataset.csv"
    write_clarity_csv(make_clarity_dataset(n=120, seed=2, noise=0.05), dataset_csv)
    return {"config": str(cfg_path), "work": work_dir, "dataset": dataset_csv,
            "tmp": tmp_path}


def run(workspace, *argv):
    return main(["--config", workspace["config"], *argv])


class TestPipeline:
    def test_full_pipeline(self, workspace, capsys):
        work = workspace["work"]

        assert run(workspace, "ingest") == 0
        sentences = (work / "sentences.jsonl").read_text().splitlines()
        assert len(sentences) >= 20
        first = json.loads(sentences[0])
        assert set(first) == {"sentence_id", "doc_id", "section_name", "index", "text"}

        assert run(workspace, "train-relevance") == 0
        assert (work / "relevance_model.json").is_file()

        assert run(workspace, "classify-relevance") == 0
        esg = (work / "esg_sentences.jsonl").read_text().splitlines()
        assert 0 < len(esg) < len(sentences)

        assert run(workspace, "import-dataset", "--path", str(workspace["dataset"])) == 0
        report = json.loads((work / "import_report.json").read_text())
        assert report["imported"] == 120

        assert run(workspace, "train-clarity", "--method", "contrastive") == 0
        manifest = json.loads((work / "clarity_contrastive" / "manifest.json").read_text())
        assert manifest["kind"] == "ContrastiveHead"

        assert run(workspace, "classify-clarity", "--method", "contrastive") == 0
        preds = [json.loads(l) for l in (work / "predictions.jsonl").read_text().splitlines()]
        assert len(preds) == len(esg)
        assert set(preds[0]) == {"sentence_id", "label", "probs"}

        assert run(workspace, "score") == 0
        ratings = (work / "ratings.csv").read_text().splitlines()
        assert ratings[0] == "doc_id,X_S,X_A,X_G,ratio,score,rank,rating"
        assert len(ratings) == 4  # 3 documents

        assert run(workspace, "rank") == 0
        out = capsys.readouterr().out
        assert "rating=" in out

        assert run(workspace, "evaluate", "--method", "finetuned") == 0
        eval_report = json.loads((work / "eval_finetuned_contrastive.json").read_text())
        assert 0.0 <= eval_report["macro_f1"] <= 1.0

        assert run(workspace, "report") == 0
        html_files = list((work / "reports").glob("*.html"))
        assert len(html_files) == 3
        assert (work / "comparison.md").is_file()

    def test_score_on_explicit_predictions_file(self, workspace, tmp_path):
        preds = tmp_path / "p.jsonl"
        rows = [
            {"sentence_id": "d1:0", "label": "Specific", "probs": [1, 0, 0]},
            {"sentence_id": "d1:1", "label": "Ambiguous", "probs": [0, 1, 0]},
            {"sentence_id": "d2:0", "label": "Generic", "probs": [0, 0, 1]},
            {"sentence_id": "d3:0", "label": "Specific", "probs": [1, 0, 0]},
        ]
        preds.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        assert run(workspace, "score", "--predictions", str(preds)) == 0
        lines = (workspace["work"] / "ratings.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_zeroshot_replay_evaluate(self, workspace):
        from esgclarity.annotation import import_gold_dataset, make_splits, split_items

        run(workspace, "import-dataset", "--path", str(workspace["dataset"]))
        gold, _ = import_gold_dataset(
            workspace["work"] / "gold.jsonl", text_column="text", label_column="label"
        )
        splits = make_splits(gold, seed=0)
        _, _, test = split_items(gold, splits)
        keyed = [(f"test:{i}", text, label) for i, (text, label) in enumerate(test)]
        transcript = workspace["tmp"] / "transcript.jsonl"
        simulate_zero_shot_transcript(keyed, load_prompt_template(), transcript, seed=4)

        assert run(workspace, "evaluate", "--method", "zeroshot",
                   "--client", "replay", "--transcript", str(transcript)) == 0
        report = json.loads((workspace["work"] / "eval_zeroshot.json").read_text())
        assert report["n"] == len(test)
        assert 0.0 < report["macro_f1"] < 1.0


class TestDeterminism:
    def test_ingest_byte_identical_rerun(self, workspace):
        run(workspace, "ingest")
        first = (workspace["work"] / "sentences.jsonl").read_bytes()
        run(workspace, "ingest")
        assert (workspace["work"] / "sentences.jsonl").read_bytes() == first

    def test_score_byte_identical_rerun(self, workspace, tmp_path):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            json.dumps({"sentence_id": "d1:0", "label": "Specific", "probs": [1, 0, 0]}),
            encoding="utf-8",
        )
        run(workspace, "score", "--predictions", str(preds))
        first = (workspace["work"] / "ratings.csv").read_bytes()
        first_json = (workspace["work"] / "ratings.json").read_bytes()
        run(workspace, "score", "--predictions", str(preds))
        assert (workspace["work"] / "ratings.csv").read_bytes() == first
        assert (workspace["work"] / "ratings.json").read_bytes() == first_json

    def test_artifacts_carry_config_digest(self, workspace, tmp_path):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            json.dumps({"sentence_id": "d1:0", "label": "Specific", "probs": [1, 0, 0]}),
            encoding="utf-8",
        )
        run(workspace, "score", "--predictions", str(preds))
        from esgclarity.config import load_config

        digest = load_config(workspace["config"]).digest()
        meta = json.loads((workspace["work"] / "ratings.csv.meta.json").read_text())
        assert meta["config_digest"] == digest
        payload = json.loads((workspace["work"] / "ratings.json").read_text())
        assert payload["config_digest"] == digest


class TestErrors:
    def test_bad_config_machine_readable_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("corpus:\n  nonsense_key: 1\n", encoding="utf-8")
        code = main(["--config", str(bad), "ingest"])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "ConfigInvalid"
        assert "nonsense_key" in err["message"]

    def test_missing_input_error(self, workspace, capsys):
        code = run(workspace, "classify-relevance")
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "InputMissing"

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["--config", str(tmp_path / "none.yaml"), "ingest"])
        assert code == 2
        assert json.loads(capsys.readouterr().err.strip())["error"] == "ConfigInvalid"
