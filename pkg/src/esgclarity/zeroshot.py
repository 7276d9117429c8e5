"""Zero-shot clarity classification through a pluggable generative client.

Free-text model responses are parsed into labels (or Abstain) and
scored by the same metrics engine as the fine-tuned models, so the
comparison between the two is computed by one code path. Every live
run journals request/response pairs to a transcript, making it
replayable offline bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

from .errors import ClientMisconfigured, TranscriptMissingEntry
from .labels import CLARITY_ORDER, ClarityLabel
from .reporting import ABSTAIN, MetricsReport, compute_metrics

log = logging.getLogger(__name__)

_DEFAULT_TEMPLATE_FILE = Path(__file__).parent / "data" / "prompt_template.json"


@dataclass(frozen=True)
class PromptTemplate:
    system_preamble: str
    per_example_format: str
    answer_instruction: str
    version: str = "unversioned"

    def __post_init__(self):
        if self.per_example_format.count("{sentence}") != 1:
            raise ValueError("per_example_format needs exactly one {sentence} slot")
        missing = [
            c.value for c in CLARITY_ORDER if c.value not in self.system_preamble
        ]
        if missing:
            raise ValueError(f"preamble must name every label; missing {missing}")


def load_prompt_template(path: str | Path | None = None) -> PromptTemplate:
    p = Path(path) if path else _DEFAULT_TEMPLATE_FILE
    obj = json.loads(p.read_text(encoding="utf-8"))
    return PromptTemplate(
        system_preamble=obj["system_preamble"],
        per_example_format=obj["per_example_format"],
        answer_instruction=obj["answer_instruction"],
        version=obj.get("version", "unversioned"),
    )


def build_prompt(sentence: str, template: PromptTemplate) -> str:
    if not sentence.strip():
        log.warning("building a prompt for an empty sentence")
    return "\n\n".join(
        [
            template.system_preamble,
            template.per_example_format.replace("{sentence}", sentence),
            template.answer_instruction,
        ]
    )


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ParsedVerdict:
    label: ClarityLabel | None  # None = Abstain
    raw_response: str
    transport_error: bool = False

    @property
    def label_name(self) -> str:
        return self.label.value if self.label else ABSTAIN


_LABEL_WORD_RES = {
    c: re.compile(rf"\b{c.value.lower()}\b") for c in CLARITY_ORDER
}


def parse_verdict(response: str) -> ParsedVerdict:
    """Total parse: exactly one distinct label token (whole word,
    case-insensitive) yields that label; zero or several yield Abstain."""
    lowered = response.lower()
    found = [c for c, rx in _LABEL_WORD_RES.items() if rx.search(lowered)]
    label = found[0] if len(found) == 1 else None
    return ParsedVerdict(label=label, raw_response=response)


# ---------------------------------------------------------------------------
# clients


class ReplayClient:
    """Deterministic offline client backed by a transcript file.

    Transcript: JSON Lines of {sentence_id, prompt_digest, response}.
    """

    kind = "replay"

    def __init__(self, transcript_path: str | Path):
        self._entries: dict[str, dict] = {}
        p = Path(transcript_path)
        if not p.is_file():
            raise ClientMisconfigured(f"transcript not found: {p}")
        for line in p.read_text(encoding="utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                self._entries[obj["sentence_id"]] = obj

    def complete(self, sentence_id: str, prompt: str) -> str:
        entry = self._entries.get(sentence_id)
        if entry is None:
            raise TranscriptMissingEntry(sentence_id)
        digest = prompt_digest(prompt)
        if entry.get("prompt_digest") not in (None, digest):
            raise TranscriptMissingEntry(
                f"{sentence_id}: transcript was recorded for a different prompt "
                f"({entry.get('prompt_digest')} != {digest})"
            )
        return entry["response"]


class RemoteClient:
    """OpenAI-style chat-completions client.

    Endpoint and model come from config; the API key only ever from the
    environment. Requests are rate-limited and journaled so any live
    run can be replayed.
    """

    kind = "remote_api"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "ESG_ZEROSHOT_API_KEY",
        requests_per_second: float = 1.0,
        max_retries: int = 3,
        journal_path: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        if not endpoint or not model:
            raise ClientMisconfigured("remote client needs an endpoint and a model")
        key = os.environ.get(api_key_env, "")
        if not key:
            raise ClientMisconfigured(f"set {api_key_env} in the environment")
        self._endpoint = endpoint
        self._model = model
        self._key = key
        self._min_interval = 1.0 / requests_per_second if requests_per_second > 0 else 0.0
        self._max_retries = max_retries
        self._journal_path = Path(journal_path) if journal_path else None
        self._client = httpx.Client(transport=transport, timeout=60.0)
        self._last_request = 0.0

    def complete(self, sentence_id: str, prompt: str) -> str:
        wait = self._min_interval - (time.monotonic() - self._last_request)
        if wait > 0:
            time.sleep(wait)
        delay = 0.5
        last_error: Exception | None = None
        for attempt in range(self._max_retries + 1):
            self._last_request = time.monotonic()
            try:
                resp = self._client.post(
                    self._endpoint,
                    headers={"Authorization": f"Bearer {self._key}"},
                    json={
                        "model": self._model,
                        "messages": [{"role": "user", "content": prompt}],
                        "temperature": 0,
                    },
                )
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
                self._journal(sentence_id, prompt, text)
                return text
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self._max_retries:
                    time.sleep(delay)
                    delay *= 2
        raise last_error  # type: ignore[misc]

    def _journal(self, sentence_id: str, prompt: str, response: str) -> None:
        if not self._journal_path:
            return
        with self._journal_path.open("a", encoding="utf-8") as f:
            f.write(
                json.dumps(
                    {
                        "sentence_id": sentence_id,
                        "prompt_digest": prompt_digest(prompt),
                        "response": response,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def classify_zero_shot(
    client, template: PromptTemplate, sentences: Sequence
) -> list[ParsedVerdict]:
    """One verdict per sentence. Remote transport failures that survive
    the retry policy are recorded as Abstain with the error flag set;
    replay gaps raise TranscriptMissingEntry."""
    verdicts: list[ParsedVerdict] = []
    for s in sentences:
        sentence_id = getattr(s, "sentence_id", None) or s[0]
        text = getattr(s, "text", None) or s[1]
        prompt = build_prompt(text, template)
        try:
            response = client.complete(sentence_id, prompt)
        except TranscriptMissingEntry:
            raise
        except ClientMisconfigured:
            raise
        except Exception as exc:
            log.warning("%s: remote call failed after retries: %s", sentence_id, exc)
            verdicts.append(
                ParsedVerdict(label=None, raw_response=str(exc), transport_error=True)
            )
            continue
        verdicts.append(parse_verdict(response))
    return verdicts


def evaluate_zero_shot(
    verdicts: Sequence[ParsedVerdict], gold: Sequence[tuple[str, ClarityLabel]]
) -> MetricsReport:
    """Abstain counts as a wrong prediction everywhere: it adds to every
    gold class's misses and contributes no true positives."""
    if len(verdicts) != len(gold):
        raise ValueError("verdict list and gold set differ in length")
    pairs = [
        (label, v.label_name) for (_, label), v in zip(gold, verdicts)
    ]
    return compute_metrics(pairs, classes=CLARITY_ORDER)
