"""Operator CLI: one subcommand per pipeline stage.

Every subcommand reads/writes only the documented JSON Lines/CSV
artifacts under the configured work dir, exits 0 on success, and on
failure prints one machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import EsgClarityError, InputMissing

log = logging.getLogger("esgclarity")


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise InputMissing(f"{path} is missing; {hint}")
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommand implementations


def cmd_ingest(cfg: PipelineConfig, args) -> int:
    from .errors import EmptyExtraction, NoSectionFound, UnreadableFile
    from .ingest import (
        extract_strategy_section,
        load_abbreviations,
        load_document,
        segment_sentences,
        write_sentences_jsonl,
    )

    input_dir = Path(cfg.corpus.input_dir)
    if not input_dir.is_dir():
        raise InputMissing(f"corpus.input_dir {input_dir} is not a directory")
    abbreviations = load_abbreviations(cfg.corpus.abbreviations_path)
    records = []
    skipped = []
    for path in sorted(input_dir.iterdir()):
        if path.suffix.lower() not in (".txt", ".pdf", ".md"):
            continue
        try:
            doc = load_document(path)
            section = extract_strategy_section(doc, cfg.corpus.heading_patterns)
            records.extend(segment_sentences(section, abbreviations))
        except (UnreadableFile, EmptyExtraction, NoSectionFound) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            skipped.append({"file": path.name, "reason": str(exc)})
    out = cfg.work_path("sentences.jsonl")
    n = write_sentences_jsonl(records, out)
    _write_json(
        cfg.work_path("ingest_report.json"),
        {"config_digest": cfg.digest(), "sentences": n, "skipped": skipped},
    )
    print(f"ingest: {n} sentences -> {out} ({len(skipped)} document(s) skipped)")
    return 0


def cmd_train_relevance(cfg: PipelineConfig, args) -> int:
    from .ingest import read_sentences_jsonl
    from .relevance import load_lexicon, train_relevance, weak_label_lexicon

    sentences_path = _require(cfg.work_path("sentences.jsonl"), "run ingest first")
    sentences = read_sentences_jsonl(sentences_path)
    lexicon = load_lexicon(cfg.relevance.lexicon_path)
    labeled = [(s, weak_label_lexicon(s, lexicon)) for s in sentences]
    model = train_relevance(
        labeled, cs_grid=cfg.relevance.cs_grid, seed=cfg.relevance.seed,
        threshold=cfg.relevance.threshold,
    )
    out = cfg.work_path("relevance_model.json")
    model.training_meta["config_digest"] = cfg.digest()
    model.save(out)
    print(f"train-relevance: model on {len(labeled)} weak-labeled sentences -> {out}")
    return 0


def cmd_classify_relevance(cfg: PipelineConfig, args) -> int:
    from .ingest import read_sentences_jsonl, write_sentences_jsonl
    from .labels import RelevanceLabel
    from .relevance import LinearRelevanceModel, predict_relevance_batch

    model = LinearRelevanceModel.load(
        _require(cfg.work_path("relevance_model.json"), "run train-relevance first")
    )
    sentences = read_sentences_jsonl(
        _require(cfg.work_path("sentences.jsonl"), "run ingest first")
    )
    preds = predict_relevance_batch(model, sentences)
    esg = [s for s, (label, _) in zip(sentences, preds) if label == RelevanceLabel.ESG]
    out_pred = cfg.work_path("relevance_predictions.jsonl")
    with out_pred.open("w", encoding="utf-8") as f:
        for s, (label, score) in zip(sentences, preds):
            f.write(
                json.dumps(
                    {"sentence_id": s.sentence_id, "label": label.value, "score": score}
                )
                + "\n"
            )
    out_esg = cfg.work_path("esg_sentences.jsonl")
    write_sentences_jsonl(esg, out_esg)
    print(f"classify-relevance: {len(esg)}/{len(sentences)} ESG sentences -> {out_esg}")
    return 0


def cmd_import_dataset(cfg: PipelineConfig, args) -> int:
    from .annotation import import_gold_dataset, write_gold_jsonl

    src = Path(args.path or cfg.dataset.path or "")
    if not src.is_file():
        raise InputMissing("pass --path or set dataset.path to the released dataset file")
    gold, report = import_gold_dataset(
        src, text_column=cfg.dataset.text_column, label_column=cfg.dataset.label_column
    )
    out = cfg.work_path("gold.jsonl")
    write_gold_jsonl(gold, out)
    _write_json(
        cfg.work_path("import_report.json"),
        {"config_digest": cfg.digest(), "version": gold.version, **report},
    )
    print(f"import-dataset: {report['imported']} items -> {out} (dropped: {report['dropped']})")
    return 0


def _load_gold(cfg: PipelineConfig):
    from .annotation import import_gold_dataset

    gold_path = _require(cfg.work_path("gold.jsonl"), "run import-dataset first")
    gold, _ = import_gold_dataset(gold_path, text_column="text", label_column="label")
    return gold


def cmd_train_clarity(cfg: PipelineConfig, args) -> int:
    from .annotation import make_splits, split_items
    from .clarity import (
        evaluate_clarity,
        finetune_encoder_contrastive,
        generate_contrastive_pairs,
        load_encoder,
        train_head,
        train_prompt_tuned,
    )

    gold = _load_gold(cfg)
    splits = make_splits(gold, fractions=cfg.splits.fractions, seed=cfg.splits.seed)
    train, validation, _ = split_items(gold, splits)
    c = cfg.clarity
    if args.method == "contrastive":
        pairs = generate_contrastive_pairs(train, r_per_item=c.r_per_item, seed=c.seed)
        tuned = finetune_encoder_contrastive(
            load_encoder(c.contrastive_encoder),
            pairs,
            epochs=c.contrastive_epochs,
            learning_rate=c.contrastive_lr,
            batch_size=c.contrastive_batch_size,
        )
        model = train_head(tuned, train, seed=c.seed)
        out = cfg.work_path("clarity_contrastive")
    else:
        model = train_prompt_tuned(
            load_encoder(c.prompt_encoder),
            train,
            num_virtual_tokens=c.num_virtual_tokens,
            epochs=c.prompt_epochs,
            seed=c.seed,
            learning_rate=c.prompt_lr,
            batch_size=c.prompt_batch_size,
        )
        out = cfg.work_path("clarity_prompt")
    model.training_meta["config_digest"] = cfg.digest()
    model.save(out)
    val_report = evaluate_clarity(model, validation) if validation else None
    msg = f"train-clarity[{args.method}]: model {model.version} -> {out}"
    if val_report:
        msg += f" (validation macro F1 {val_report.macro_f1:.4f})"
    print(msg)
    return 0


def _model_dir(cfg: PipelineConfig, method: str) -> Path:
    name = "clarity_contrastive" if method == "contrastive" else "clarity_prompt"
    d = cfg.work_path(name)
    if not (d / "manifest.json").is_file():
        raise InputMissing(f"{d} has no trained model; run train-clarity first")
    return d


def cmd_classify_clarity(cfg: PipelineConfig, args) -> int:
    from .artifacts import write_predictions_jsonl
    from .clarity import ClarityModel
    from .ingest import read_sentences_jsonl

    model = ClarityModel.load(_model_dir(cfg, args.method))
    sentences = read_sentences_jsonl(
        _require(
            cfg.work_path("esg_sentences.jsonl"),
            "run classify-relevance first",
        )
    )
    preds = model.predict_batch([s.text for s in sentences])
    out = cfg.work_path("predictions.jsonl")
    write_predictions_jsonl(
        (
            (s.sentence_id, label, probs.tolist())
            for s, (label, probs) in zip(sentences, preds)
        ),
        out,
    )
    print(f"classify-clarity: {len(sentences)} predictions -> {out}")
    return 0


def cmd_score(cfg: PipelineConfig, args) -> int:
    from .artifacts import read_predictions_jsonl
    from .scoring import (
        ScoreConfig,
        assign_ratings,
        count_labels,
        language_score,
        write_ratings_csv,
        write_ratings_json,
    )

    rows = read_predictions_jsonl(
        Path(args.predictions) if args.predictions else
        _require(cfg.work_path("predictions.jsonl"), "run classify-clarity first")
    )
    counts = count_labels([(r.sentence_id, r.label) for r in rows])
    score_cfg = ScoreConfig(
        scaling=cfg.score.scaling, config_version=cfg.score.config_version
    )
    scores = [language_score(c, score_cfg) for c in counts]
    table = assign_ratings(scores)
    csv_path = cfg.work_path("ratings.csv")
    write_ratings_csv(table, scores, csv_path, config_digest=cfg.digest())
    write_ratings_json(table, scores, score_cfg, cfg.work_path("ratings.json"),
                       config_digest=cfg.digest())
    print(f"score: {len(scores)} documents -> {csv_path}")
    return 0


def cmd_rank(cfg: PipelineConfig, args) -> int:
    ratings_path = _require(cfg.work_path("ratings.json"), "run score first")
    payload = json.loads(ratings_path.read_text(encoding="utf-8"))
    for e in payload["entries"]:
        print(f"{e['rank']:>4}  rating={e['rating']}  score={e['score']:.4f}  {e['doc_id']}")
    return 0


def cmd_evaluate(cfg: PipelineConfig, args) -> int:
    from .annotation import make_splits, split_items

    gold = _load_gold(cfg)
    splits = make_splits(gold, fractions=cfg.splits.fractions, seed=cfg.splits.seed)
    _, _, test = split_items(gold, splits)

    if args.method == "zeroshot":
        from .zeroshot import (
            ReplayClient,
            RemoteClient,
            classify_zero_shot,
            evaluate_zero_shot,
            load_prompt_template,
        )

        template = load_prompt_template(cfg.zeroshot.template_path)
        client_kind = args.client or cfg.zeroshot.client
        if client_kind == "replay":
            client = ReplayClient(
                args.transcript or cfg.zeroshot.transcript_path
                or cfg.work_path("zeroshot_transcript.jsonl")
            )
        else:
            client = RemoteClient(
                endpoint=cfg.zeroshot.endpoint or "",
                model=cfg.zeroshot.model or "",
                api_key_env=cfg.zeroshot.api_key_env,
                requests_per_second=cfg.zeroshot.requests_per_second,
                max_retries=cfg.zeroshot.max_retries,
                journal_path=cfg.work_path("zeroshot_journal.jsonl"),
            )
        items = [(f"test:{i}", text) for i, (text, _) in enumerate(test)]
        verdicts = classify_zero_shot(client, template, items)
        report = evaluate_zero_shot(verdicts, test)
        out = cfg.work_path("eval_zeroshot.json")
        name = cfg.zeroshot.model or "zeroshot-replay"
    else:
        from .clarity import ClarityModel, evaluate_clarity

        model = ClarityModel.load(_model_dir(cfg, args.clarity_method))
        report = evaluate_clarity(model, test)
        out = cfg.work_path(f"eval_finetuned_{args.clarity_method}.json")
        name = f"{args.clarity_method}:{model.encoder.name}"

    _write_json(out, {"config_digest": cfg.digest(), "name": name, **report.as_dict()})
    print(
        f"evaluate[{args.method}]: accuracy {report.accuracy:.4f} "
        f"macro F1 {report.macro_f1:.4f} -> {out}"
    )
    return 0


def cmd_report(cfg: PipelineConfig, args) -> int:
    from .artifacts import read_predictions_jsonl
    from .ingest import read_sentences_jsonl
    from .reporting import (
        ComparisonEntry,
        DocumentReport,
        MetricsReport,
        ClassMetrics,
        comparison_csv,
        comparison_report,
        render_document_report,
    )
    from .scoring import ScoreConfig, assign_ratings, count_labels, language_score

    sentences = read_sentences_jsonl(
        _require(cfg.work_path("esg_sentences.jsonl"), "run classify-relevance first")
    )
    rows = read_predictions_jsonl(
        _require(cfg.work_path("predictions.jsonl"), "run classify-clarity first")
    )
    label_by_sid = {r.sentence_id: r.label for r in rows}
    counts = count_labels([(r.sentence_id, r.label) for r in rows])
    score_cfg = ScoreConfig(scaling=cfg.score.scaling, config_version=cfg.score.config_version)
    scores = {c.doc_id: language_score(c, score_cfg) for c in counts}
    table = assign_ratings(list(scores.values())).by_doc()

    out_dir = cfg.work_path("reports")
    out_dir.mkdir(parents=True, exist_ok=True)
    by_doc: dict[str, list] = {}
    for s in sentences:
        by_doc.setdefault(s.doc_id, []).append(s)
    written = 0
    for doc_id, doc_sentences in sorted(by_doc.items()):
        doc_sentences.sort(key=lambda s: s.index)
        spans = tuple(
            (s.text, label_by_sid.get(s.sentence_id)) for s in doc_sentences
        )
        if doc_id not in scores:
            continue
        entry = table.get(doc_id)
        report = DocumentReport(
            doc_id=doc_id,
            spans=spans,
            score=scores[doc_id],
            rank=entry.rank if entry else None,
            rating=entry.rating if entry else None,
        )
        (out_dir / f"{doc_id}.html").write_text(
            render_document_report(report, "html"), encoding="utf-8"
        )
        (out_dir / f"{doc_id}.md").write_text(
            render_document_report(report, "markdown"), encoding="utf-8"
        )
        written += 1

    entries = []
    for eval_file in sorted(Path(cfg.corpus.work_dir).glob("eval_*.json")):
        obj = json.loads(eval_file.read_text(encoding="utf-8"))
        family = "zeroshot" if "zeroshot" in eval_file.stem else "finetuned"
        report = MetricsReport(
            classes=tuple(obj["classes"]),
            accuracy=obj["accuracy"],
            macro_precision=obj["macro_precision"],
            macro_recall=obj["macro_recall"],
            macro_f1=obj["macro_f1"],
            per_class={
                k: ClassMetrics(**v) for k, v in obj["per_class"].items()
            },
            confusion=tuple(tuple(r) for r in obj["confusion"]),
            confusion_labels=tuple(obj["confusion_labels"]),
            n=obj["n"],
        )
        entries.append(ComparisonEntry(obj.get("name", eval_file.stem), family, report))
    if entries:
        cfg.work_path("comparison.md").write_text(comparison_report(entries), encoding="utf-8")
        cfg.work_path("comparison.csv").write_text(comparison_csv(entries), encoding="utf-8")
    print(f"report: {written} document report(s), {len(entries)} method row(s) -> {out_dir}")
    return 0


def cmd_annotate_serve(cfg: PipelineConfig, args) -> int:
    import uvicorn

    from .service import build_state, create_app

    state = build_state(cfg)
    app = create_app(state)
    uvicorn.run(app, host=cfg.service.host, port=args.port or cfg.service.port,
                log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esgclarity",
        description="ESG prospectus language-clarity pipeline",
    )
    parser.add_argument("--config", required=True, help="path to the pipeline config YAML")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", help="extract strategy-section sentences from the corpus")
    sub.add_parser("train-relevance", help="train the ESG/non-ESG filter on weak labels")
    sub.add_parser("classify-relevance", help="filter ingested sentences to ESG ones")

    p = sub.add_parser("import-dataset", help="import a released clarity dataset")
    p.add_argument("--path", help="dataset file (CSV or JSONL)")

    p = sub.add_parser("train-clarity", help="train a clarity classifier")
    p.add_argument("--method", choices=("contrastive", "prompt"), required=True)

    p = sub.add_parser("classify-clarity", help="label ESG sentences by clarity")
    p.add_argument("--method", choices=("contrastive", "prompt"), default="contrastive")

    p = sub.add_parser("score", help="score and rate documents from predictions")
    p.add_argument("--predictions", help="predictions JSONL (default: work dir)")

    sub.add_parser("rank", help="print the ranked universe")

    p = sub.add_parser("evaluate", help="evaluate a classifier on the test split")
    p.add_argument("--method", choices=("finetuned", "zeroshot"), required=True)
    p.add_argument("--clarity-method", choices=("contrastive", "prompt"),
                   default="contrastive")
    p.add_argument("--client", choices=("replay", "remote"))
    p.add_argument("--transcript", help="replay transcript path")

    sub.add_parser("report", help="write document reports and the comparison table")

    p = sub.add_parser("annotate-serve", help="serve the annotation workbench API")
    p.add_argument("--port", type=int)

    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "train-relevance": cmd_train_relevance,
    "classify-relevance": cmd_classify_relevance,
    "import-dataset": cmd_import_dataset,
    "train-clarity": cmd_train_clarity,
    "classify-clarity": cmd_classify_clarity,
    "score": cmd_score,
    "rank": cmd_rank,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "annotate-serve": cmd_annotate_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        return _HANDLERS[args.command](cfg, args)
    except EsgClarityError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
