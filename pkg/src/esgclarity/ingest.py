"""Prospectus ingestion: documents -> strategy section -> sentence records.

The extraction backend is pluggable. Plain UTF-8 text is first-class so
the whole pipeline runs without any PDF dependency; a minimal built-in
PDF extractor (FlateDecode/ASCII85 content streams, Tj/TJ/' text
operators) covers text-based PDFs. Image-only PDFs surface
EmptyExtraction and are skipped upstream.
"""

from __future__ import annotations

import base64
import json
import logging
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import EmptyExtraction, NoSectionFound, UnreadableFile

log = logging.getLogger(__name__)

CANONICAL_SECTION_NAME = "Principal Investment Strategy"

#: Line-anchored, case-insensitive heading matchers; first match wins.
DEFAULT_HEADING_PATTERNS: tuple[str, ...] = (
    r"principal\s+investment\s+strateg(?:y|ies)\s*:?",
    r"investment\s+strateg(?:y|ies)\s*:?",
)

#: Abbreviations whose trailing period never ends a sentence. Shipped as a
#: data file (data/abbreviations.txt) and user-extensible via config.
_DEFAULT_ABBREVIATIONS_FILE = Path(__file__).parent / "data" / "abbreviations.txt"


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    source_path: str
    pages: tuple[str, ...]
    extraction_meta: dict = field(default_factory=dict)

    def full_text(self) -> str:
        """The joined document text; page boundaries become newlines."""
        return "\n".join(self.pages)


@dataclass(frozen=True)
class Section:
    doc_id: str
    name: str
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class SentenceRecord:
    sentence_id: str
    doc_id: str
    section_name: str
    index: int
    text: str


# ---------------------------------------------------------------------------
# document loading


def _extract_text(path: Path) -> list[str]:
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise UnreadableFile(f"{path}: not valid UTF-8 text") from exc
    return [text]


_STREAM_RE = re.compile(rb"<<(.{0,600}?)>>\s*stream\r?\n(.*?)endstream", re.DOTALL)
_TEXT_OP_RE = re.compile(
    rb"\((?:[^()\\]|\\.)*\)\s*(?:Tj|')|\[(?:[^\[\]\\]|\\.)*\]\s*TJ"
)
_PDF_STR_RE = re.compile(rb"\((?:[^()\\]|\\.)*\)")
_PDF_ESCAPES = {
    b"n": b"\n", b"r": b"\r", b"t": b"\t", b"b": b"\b", b"f": b"\f",
    b"(": b"(", b")": b")", b"\\": b"\\",
}


def _pdf_unescape(raw: bytes) -> bytes:
    out, i = bytearray(), 0
    while i < len(raw):
        ch = raw[i : i + 1]
        if ch == b"\\" and i + 1 < len(raw):
            nxt = raw[i + 1 : i + 2]
            if nxt in _PDF_ESCAPES:
                out += _PDF_ESCAPES[nxt]
                i += 2
                continue
            if nxt.isdigit():  # octal escape, up to 3 digits
                j = 1
                while j <= 3 and raw[i + j : i + j + 1].isdigit():
                    j += 1
                out.append(int(raw[i + 1 : i + j], 8) & 0xFF)
                i += j
                continue
        out += ch
        i += 1
    return bytes(out)


def _decode_stream(dict_bytes: bytes, raw: bytes) -> bytes | None:
    if b"ASCII85Decode" in dict_bytes:
        try:
            raw = base64.a85decode(raw.rstrip(), adobe=True)
        except ValueError:
            return None
    if b"FlateDecode" in dict_bytes:
        try:
            raw = zlib.decompress(raw)
        except zlib.error:
            return None
    return raw


def _extract_pdf(path: Path) -> list[str]:
    """Minimal text extraction from uncompressed/Flate/ASCII85 PDFs.

    One content stream containing BT/ET text blocks is treated as one
    page, in file order; each Tj/TJ run becomes a line. Good enough for
    digitally produced prospectuses; not an OCR substitute.
    """
    data = path.read_bytes()
    if not data.startswith(b"%PDF"):
        raise UnreadableFile(f"{path}: not a PDF file")
    pages: list[str] = []
    for m in _STREAM_RE.finditer(data):
        content = _decode_stream(m.group(1), m.group(2))
        if content is None or b"BT" not in content:
            continue
        parts: list[str] = []
        for op in _TEXT_OP_RE.finditer(content):
            chunk = op.group(0)
            strings = _PDF_STR_RE.findall(chunk)
            parts.append(
                "".join(_pdf_unescape(s[1:-1]).decode("latin-1") for s in strings)
            )
        text = "\n".join(p for p in parts if p)
        if text.strip():
            pages.append(text)
    return pages


#: Extraction backends by name; register new ones to support other formats.
EXTRACTORS: dict[str, Callable[[Path], list[str]]] = {
    "text": _extract_text,
    "pdf-builtin": _extract_pdf,
}


def load_document(path: str | Path, extractor: str | None = None) -> RawDocument:
    """Read one document into pages of plain text.

    The backend is chosen by file suffix unless `extractor` names one
    explicitly. Raises UnreadableFile for missing/corrupt input and
    EmptyExtraction when no text is recoverable.
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"{path}: no such file")
    name = extractor or ("pdf-builtin" if path.suffix.lower() == ".pdf" else "text")
    if name not in EXTRACTORS:
        raise UnreadableFile(f"unknown extractor {name!r}")
    pages = EXTRACTORS[name](path)
    if not any(p.strip() for p in pages):
        raise EmptyExtraction(f"{path}: no text recoverable")
    return RawDocument(
        doc_id=path.stem,
        source_path=str(path),
        pages=tuple(pages),
        extraction_meta={"page_count": len(pages), "extractor": name},
    )


# ---------------------------------------------------------------------------
# section extraction

_SMALL_WORDS = {"of", "the", "and", "in", "to", "for", "a", "an", "or", "with", "on"}


def _is_heading_line(line: str) -> bool:
    """Heuristic for the document's heading style: short, title-cased or
    all-caps, no sentence-final punctuation."""
    stripped = line.strip()
    if not stripped or len(stripped) > 80:
        return False
    if stripped[-1] in ".!?,;":
        return False
    words = re.findall(r"[A-Za-z][A-Za-z'&-]*", stripped)
    if not words:
        return False
    if stripped == stripped.upper():
        return True
    return all(w[0].isupper() or w.lower() in _SMALL_WORDS for w in words)


def extract_strategy_section(
    doc: RawDocument, heading_patterns: Sequence[str] = DEFAULT_HEADING_PATTERNS
) -> Section:
    """Locate the investment-strategy section by rule-based sectioning.

    The section starts after the first line matching any pattern and runs
    to the next heading-styled line or end of document. Raises
    NoSectionFound when nothing matches; callers skip and log, never
    silently score.
    """
    if not heading_patterns:
        raise ValueError("heading_patterns must be non-empty")
    compiled = [re.compile(p, re.IGNORECASE) for p in heading_patterns]
    text = doc.full_text()

    lines: list[tuple[int, str]] = []  # (start offset, line text)
    offset = 0
    for line in text.split("\n"):
        lines.append((offset, line))
        offset += len(line) + 1

    match_idx: int | None = None
    match_count = 0
    for i, (_, line) in enumerate(lines):
        if any(rx.fullmatch(line.strip()) for rx in compiled):
            match_count += 1
            if match_idx is None:
                match_idx = i
    if match_idx is None:
        raise NoSectionFound(f"{doc.doc_id}: no strategy heading matched")
    if match_count > 1:
        log.warning(
            "%s: %d strategy headings matched; using the first (multi-fund prospectus?)",
            doc.doc_id,
            match_count,
        )

    start = lines[match_idx][0] + len(lines[match_idx][1]) + 1
    end = len(text)
    for off, line in lines[match_idx + 1 :]:
        if _is_heading_line(line):
            end = off
            break
    start = min(start, len(text))

    body = text[start:end]
    lead = len(body) - len(body.lstrip())
    trail = len(body) - len(body.rstrip())
    start += lead
    end -= trail
    return Section(
        doc_id=doc.doc_id,
        name=CANONICAL_SECTION_NAME,
        text=text[start:end],
        char_span=(start, end),
    )


# ---------------------------------------------------------------------------
# sentence segmentation


def load_abbreviations(path: str | Path | None = None) -> frozenset[str]:
    """Protected abbreviations, lowercased, one per line, '#' comments."""
    p = Path(path) if path else _DEFAULT_ABBREVIATIONS_FILE
    terms = set()
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(line.lower())
    return frozenset(terms)


_OPENERS = {"(": ")", "[": "]"}
_CLOSERS = {")": "(", "]": "["}


def segment_sentences(
    section: Section, abbreviations: frozenset[str] | None = None
) -> list[SentenceRecord]:
    """Split a section into sentence records.

    Splits on sentence-final punctuation followed by whitespace and an
    upper-case/digit/opening character, protecting abbreviations,
    decimals, and any span inside unclosed parentheses. Joining the
    resulting texts with single spaces reproduces the whitespace-
    normalized section text.
    """
    if not section.text.strip():
        raise ValueError("section text is empty")
    if abbreviations is None:
        abbreviations = load_abbreviations()

    text = section.text
    boundaries: list[int] = []
    depth = 0
    for i, ch in enumerate(text):
        if ch in _OPENERS:
            depth += 1
        elif ch in _CLOSERS:
            depth = max(0, depth - 1)
        if ch not in ".!?" or depth > 0:
            continue
        # include trailing closers/quotes in the sentence
        j = i + 1
        while j < len(text) and text[j] in "\"')]":
            j += 1
        if j < len(text) and not text[j].isspace():
            continue  # mid-token period (decimal, U.S.-style compound)
        k = j
        while k < len(text) and text[k].isspace():
            k += 1
        if k < len(text) and not (text[k].isupper() or text[k].isdigit() or text[k] in "\"'(["):
            continue
        if ch == ".":
            # token ending at this period, e.g. 'U.S.' or 'No.'
            t = i
            while t > 0 and not text[t - 1].isspace() and text[t - 1] not in "()[]":
                t -= 1
            if text[t : i + 1].lower() in abbreviations:
                continue
        boundaries.append(j)

    records: list[SentenceRecord] = []
    prev = 0
    for b in boundaries + [len(text)]:
        chunk = text[prev:b].strip()
        prev = b
        if not chunk:
            continue
        idx = len(records)
        records.append(
            SentenceRecord(
                sentence_id=f"{section.doc_id}:{idx}",
                doc_id=section.doc_id,
                section_name=section.name,
                index=idx,
                text=" ".join(chunk.split()),
            )
        )
    return records


# ---------------------------------------------------------------------------
# JSONL serialization (one object per sentence)


def write_sentences_jsonl(records: Iterable[SentenceRecord], path: str | Path) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as f:
        for r in records:
            f.write(
                json.dumps(
                    {
                        "sentence_id": r.sentence_id,
                        "doc_id": r.doc_id,
                        "section_name": r.section_name,
                        "index": r.index,
                        "text": r.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            n += 1
    return n


def read_sentences_jsonl(path: str | Path) -> list[SentenceRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(
                SentenceRecord(
                    sentence_id=obj["sentence_id"],
                    doc_id=obj["doc_id"],
                    section_name=obj["section_name"],
                    index=obj["index"],
                    text=obj["text"],
                )
            )
    return records
