"""Local HTTP+JSON service hosting the human-in-the-loop annotation round.

Thin adapter: every endpoint delegates to exactly one module operation.
Annotation writes serialize through the store's single-writer contract;
at most one background retrain job runs at a time.
"""

from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import annotation as ann
from .config import PipelineConfig
from .errors import DuplicateAnnotation, InsufficientOverlap, UnknownSentence
from .ingest import SentenceRecord, read_sentences_jsonl
from .labels import AnnotationLabel
from .reporting import DocumentReport
from .scoring import ScoreConfig, assign_ratings, count_labels, language_score

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# background jobs


@dataclass
class JobStatus:
    job_id: str
    kind: str
    state: str = "queued"  # queued -> running -> done | failed
    progress: float = 0.0
    message: str = ""

    _ORDER = ("queued", "running", "done", "failed")

    def advance(self, state: str, progress: float | None = None, message: str = "") -> None:
        if self._ORDER.index(state) < self._ORDER.index(self.state):
            raise ValueError(f"job state cannot move backwards ({self.state} -> {state})")
        self.state = state
        if progress is not None:
            self.progress = progress
        if message:
            self.message = message

    def as_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state,
            "progress": self.progress,
            "message": self.message,
        }


class JobRunner:
    """One background job at a time; starting a second returns None."""

    def __init__(self):
        self._jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()
        self._active: str | None = None
        self._counter = itertools.count(1)

    def start(self, kind: str, fn: Callable[[JobStatus], None]) -> JobStatus | None:
        with self._lock:
            if self._active is not None and self._jobs[self._active].state in ("queued", "running"):
                return None
            status = JobStatus(job_id=f"job-{next(self._counter)}", kind=kind)
            self._jobs[status.job_id] = status
            self._active = status.job_id

        def runner():
            status.advance("running", 0.0)
            try:
                fn(status)
                status.advance("done", 1.0)
            except Exception as exc:  # surfaced through /api/jobs
                log.exception("job %s failed", status.job_id)
                status.advance("failed", message=f"{type(exc).__name__}: {exc}")

        threading.Thread(target=runner, name=status.job_id, daemon=True).start()
        return status

    def get(self, job_id: str) -> JobStatus | None:
        return self._jobs.get(job_id)

    def wait_all(self, timeout: float = 120.0) -> None:
        for t in threading.enumerate():
            if t.name.startswith("job-"):
                t.join(timeout)


# ---------------------------------------------------------------------------
# service state


@dataclass
class ServiceState:
    store: ann.AnnotationStore
    config: PipelineConfig
    model: object | None = None
    proposals: dict[str, ann.WeakLabelProposal] = field(default_factory=dict)
    jobs: JobRunner = field(default_factory=JobRunner)
    round_history: list[dict] = field(default_factory=list)
    retrainer: Callable | None = None  # (resolved labels, JobStatus) -> model

    def refresh_proposals(self) -> None:
        if self.model is None:
            self.proposals = {}
            return
        annotated = {r.sentence_id for r in self.store.records()}
        pending = [s for s in self.store.sentences() if s.sentence_id not in annotated]
        self.proposals = {
            p.sentence_id: p for p in ann.propose_weak_labels(self.model, pending)
        }


def default_retrainer(state: ServiceState):
    """Contrastive retrain on all resolved labels, using config
    hyperparameters; saves the artifact under the work dir."""
    from .clarity import (
        finetune_encoder_contrastive,
        generate_contrastive_pairs,
        load_encoder,
        train_head,
    )

    cfg = state.config.clarity

    def retrain(resolved, status: JobStatus):
        if not resolved:
            raise ValueError("no resolved labels to train on")
        status.advance("running", 0.1, "generating pairs")
        pairs = generate_contrastive_pairs(
            resolved, r_per_item=cfg.r_per_item, seed=cfg.seed, strict=False
        )
        encoder = load_encoder(cfg.contrastive_encoder)
        status.advance("running", 0.3, "contrastive fine-tuning")
        tuned = finetune_encoder_contrastive(
            encoder,
            pairs,
            epochs=cfg.contrastive_epochs,
            learning_rate=cfg.contrastive_lr,
            batch_size=cfg.contrastive_batch_size,
        )
        status.advance("running", 0.8, "fitting head")
        model = train_head(tuned, resolved, seed=cfg.seed)
        model.save(state.config.work_path("clarity_contrastive"))
        return model

    return retrain


# ---------------------------------------------------------------------------
# request bodies


class AnnotationIn(BaseModel):
    sentence_id: str
    annotator_id: str
    label: str
    round: int | None = None


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="esgclarity annotation service")
    app.state.service = state
    # local single-user tool; the workbench may be served from any origin
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/api/queue")
    def queue(annotator: str = "", limit: int = 20):
        seen_by = {
            (r.sentence_id, r.annotator_id) for r in state.store.records()
        }
        items = []
        for s in state.store.sentences():
            if annotator and (s.sentence_id, annotator) in seen_by:
                continue
            if not annotator and any(
                key[0] == s.sentence_id for key in seen_by
            ):
                continue
            p = state.proposals.get(s.sentence_id)
            items.append(
                {
                    "sentence_id": s.sentence_id,
                    "text": s.text,
                    "doc_id": s.doc_id,
                    "proposed": p.proposed.value if p else None,
                    "confidence": p.confidence if p else None,
                    "round": state.store.max_round() + 1,
                    "document_link": f"/api/documents/{s.doc_id}/report",
                }
            )
        items.sort(key=lambda i: (i["confidence"] if i["confidence"] is not None else -1.0,
                                  i["sentence_id"]))
        return {"items": items[: max(limit, 0)]}

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationIn):
        try:
            label = AnnotationLabel(body.label)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"bad label token {body.label!r}")
        round_no = body.round if body.round is not None else state.store.max_round() + 1
        record = ann.AnnotationRecord(
            sentence_id=body.sentence_id,
            annotator_id=body.annotator_id,
            label=label,
            round=round_no,
        )
        try:
            stored = state.store.record(record)
        except UnknownSentence as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DuplicateAnnotation as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.proposals.pop(body.sentence_id, None)
        return {"stored": stored.as_dict()}

    @app.post("/api/retrain")
    def retrain():
        resolved = [(s.text, label) for s, label in state.store.resolved_labels()]
        retrain_fn = state.retrainer or default_retrainer(state)

        def job(status: JobStatus):
            model = retrain_fn(resolved, status)
            state.model = model
            state.refresh_proposals()
            state.round_history.append(
                {
                    "round": state.store.max_round(),
                    "resolved": len(resolved),
                    "model_version": getattr(model, "version", "unversioned"),
                }
            )

        status = state.jobs.start("retrain", job)
        if status is None:
            raise HTTPException(status_code=409, detail="a retrain job is already running")
        return {"job_id": status.job_id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        status = state.jobs.get(job_id)
        if status is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        return status.as_dict()

    @app.get("/api/stats")
    def stats():
        records = state.store.records()
        by_label: dict[str, int] = {}
        for per in state.store.latest_by_annotator().values():
            for r in per.values():
                by_label[r.label.value] = by_label.get(r.label.value, 0) + 1
        kappa_rows = []
        raw = None
        try:
            agreement = ann.compute_agreement(records)
            raw = agreement.raw_agreement
            kappa_rows = [
                {
                    "annotator_a": a,
                    "annotator_b": b,
                    "kappa": k,
                    "shared": agreement.shared_counts.get((a, b), 0),
                }
                for (a, b), k in sorted(agreement.kappa.items())
            ]
        except InsufficientOverlap:
            pass
        return {
            "corpus_size": len(state.store.sentences()),
            "record_count": len(records),
            "annotated_sentences": len({r.sentence_id for r in records}),
            "resolved_count": len(state.store.resolved_labels()),
            "label_distribution": by_label,
            "raw_agreement": raw,
            "kappa": kappa_rows,
            "rounds": state.round_history,
            "model_version": getattr(state.model, "version", None),
        }

    @app.get("/api/documents/{doc_id}/report")
    def document_report(doc_id: str):
        sentences = [s for s in state.store.sentences() if s.doc_id == doc_id]
        if not sentences:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id}")
        if state.model is None:
            raise HTTPException(status_code=409, detail="no trained model yet")
        sentences.sort(key=lambda s: s.index)
        preds = state.model.predict_batch([s.text for s in sentences])
        spans = tuple((s.text, label) for s, (label, _) in zip(sentences, preds))
        counts = count_labels(
            [(s.sentence_id, label) for s, (label, _) in zip(sentences, preds)],
            universe=[doc_id],
        )
        score = language_score(counts[0], ScoreConfig(**state.config.score.__dict__))
        report = DocumentReport(doc_id=doc_id, spans=spans, score=score)
        return report.as_dict()

    @app.get("/api/ratings")
    def ratings():
        if state.model is None:
            return {"entries": [], "degenerate": True}
        sentences = sorted(state.store.sentences(), key=lambda s: s.sentence_id)
        preds = state.model.predict_batch([s.text for s in sentences])
        pairs = [(s.sentence_id, label) for s, (label, _) in zip(sentences, preds)]
        counts = count_labels(pairs)
        cfg = ScoreConfig(**state.config.score.__dict__)
        scores = [language_score(c, cfg) for c in counts]
        table = assign_ratings(scores)
        return {
            "degenerate": table.degenerate,
            "entries": [
                {"doc_id": e.doc_id, "score": e.score, "rank": e.rank, "rating": e.rating}
                for e in table.entries
            ],
        }

    return app


def build_state(config: PipelineConfig) -> ServiceState:
    """Assemble service state from the configured artifacts: annotation
    targets are the ESG-filtered sentences when present, every ingested
    sentence otherwise."""
    work = Path(config.corpus.work_dir)
    sentence_file = None
    for candidate in ("esg_sentences.jsonl", "sentences.jsonl"):
        if (work / candidate).is_file():
            sentence_file = work / candidate
            break
    if sentence_file is None:
        raise FileNotFoundError(
            f"no sentences.jsonl under {work}; run the ingest subcommand first"
        )
    corpus = read_sentences_jsonl(sentence_file)
    store = ann.AnnotationStore(corpus, journal_path=work / "annotations.jsonl")
    state = ServiceState(store=store, config=config)
    model_dir = work / "clarity_contrastive"
    if (model_dir / "manifest.json").is_file():
        from .clarity import ClarityModel

        state.model = ClarityModel.load(model_dir)
        state.refresh_proposals()
    return state
