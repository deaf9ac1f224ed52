"""Pluggable span extractors behind a single contract.

Three kinds ship here: the capitalisation/number noun-phrase baseline, a
gold oracle backed by the triple store (test harness for the full
pipeline), and an HTTP client for remote extractors speaking the wire
protocol (POST /extract). All spans carry byte offsets into the document
text exactly as held/transmitted, and every extractor's output is
re-validated locally: slice equality, offset bounds, score range.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .corpus import Lexicon, byte_length, byte_slice, find_anchor, to_byte_offset
from .kg import TriplePattern, TripleStore

logger = logging.getLogger(__name__)

SETTING_SP = "sp"
SETTING_PO = "po"


class ExtractorUnavailableError(Exception):
    """The remote endpoint could not be reached or timed out."""


class ProtocolError(Exception):
    """The remote endpoint answered with an invalid envelope."""


@dataclass(frozen=True)
class ExtractionRequest:
    """One question against a set of candidate documents."""

    question: str
    documents: tuple[tuple[str, str], ...]
    max_answers: int = 10
    window_chars: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "documents", tuple(tuple(d) for d in self.documents))
        if not self.documents:
            raise ValueError("documents must be non-empty")
        if self.max_answers < 1:
            raise ValueError("max_answers must be >= 1")


@dataclass(frozen=True, slots=True)
class AnswerSpan:
    """An extracted candidate answer with byte offsets and a score in [0, 1]."""

    doc_iri: str
    start: int
    end: int
    text: str
    score: float

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span range {self.start}..{self.end}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def span_sort_key(span: AnswerSpan) -> tuple[float, str, int]:
    return (-span.score, span.doc_iri, span.start)


@dataclass(frozen=True)
class ExtractionContext:
    """Query-side information extractors may need beyond the raw request."""

    predicate: str | None = None
    predicate_label: str | None = None
    pattern: TriplePattern | None = None
    setting: str | None = None


class Extractor(Protocol):
    id: str

    def extract(self, request: ExtractionRequest, context: ExtractionContext) -> list[AnswerSpan]:
        ...


def validate_span(span: AnswerSpan, text: str) -> bool:
    """Offset bounds and slice equality against the document text."""
    if span.end > byte_length(text):
        return False
    try:
        return byte_slice(text, span.start, span.end) == span.text
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# Baseline: nearest noun phrase to the predicate mention.

_WORD = re.compile(r"\w+", re.UNICODE)


def _np_token(token: str) -> bool:
    first = token[0]
    return first.isupper() or first.isdigit()


def extract_baseline(request: ExtractionRequest, predicate_label: str) -> list[AnswerSpan]:
    """Noun phrases nearest the first predicate mention, scored 1/(1+d).

    Noun phrases are maximal runs of capitalized or numeric tokens with
    nothing but whitespace between them (a period ends a phrase); d is
    the token-index distance between the nearest edges of the phrase and
    the mention. Phrases overlapping the mention itself are skipped so
    the predicate is never its own answer. Documents without the mention
    contribute nothing.
    """
    if not predicate_label:
        raise ValueError("predicate_label must be non-empty")
    label_tokens = [t.lower() for t in _WORD.findall(predicate_label)]
    if not label_tokens:
        raise ValueError("predicate_label has no word tokens")
    spans: list[AnswerSpan] = []
    for doc_iri, text in request.documents:
        tokens = list(_WORD.finditer(text))
        lowered = [m.group().lower() for m in tokens]

        def adjacent(j: int) -> bool:
            gap = text[tokens[j].end() : tokens[j + 1].start()]
            return gap == "" or gap.isspace()

        mention = None
        for i in range(len(tokens) - len(label_tokens) + 1):
            if lowered[i : i + len(label_tokens)] == label_tokens and all(
                adjacent(k) for k in range(i, i + len(label_tokens) - 1)
            ):
                mention = (i, i + len(label_tokens) - 1)
                break
        if mention is None:
            continue
        m0, m1 = mention
        i = 0
        while i < len(tokens):
            if not _np_token(tokens[i].group()):
                i += 1
                continue
            j = i
            while j + 1 < len(tokens) and _np_token(tokens[j + 1].group()) and adjacent(j):
                j += 1
            if j < m0 or i > m1:  # skip phrases overlapping the mention
                d = m0 - j if j < m0 else i - m1
                start = to_byte_offset(text, tokens[i].start())
                end = to_byte_offset(text, tokens[j].end())
                spans.append(
                    AnswerSpan(
                        doc_iri=doc_iri,
                        start=start,
                        end=end,
                        text=byte_slice(text, start, end),
                        score=1.0 / (1.0 + d),
                    )
                )
            i = j + 1
    spans.sort(key=span_sort_key)
    return spans[: request.max_answers]


class BaselineExtractor:
    """Registry adapter around :func:`extract_baseline`."""

    id = "baseline"

    def extract(self, request: ExtractionRequest, context: ExtractionContext) -> list[AnswerSpan]:
        if not context.predicate_label:
            raise ValueError("baseline extractor needs a predicate label in the context")
        return extract_baseline(request, context.predicate_label)


# ---------------------------------------------------------------------------
# Gold oracle: true answers from the store, anchored in the candidate docs.


def extract_gold(
    request: ExtractionRequest,
    store: TripleStore,
    lexicon: Lexicon,
    pattern: TriplePattern,
) -> list[AnswerSpan]:
    """Anchor every true answer's label in the supplied documents, score 1.

    The pattern must be slot-filling (exactly one variable, predicate
    bound). Answers whose label appears in no candidate document yield
    no span; ties are broken by document IRI then offset.
    """
    variables = pattern.variables()
    if len(variables) != 1 or pattern.p.is_variable:
        raise ValueError("gold extractor needs an SP- or PO-shaped pattern")
    var = variables[0]
    answers: set[str] = set()
    for binding in store.match_pattern(pattern):
        label = lexicon.label_terms(binding[var])
        if label:
            answers.add(label)
    spans: list[AnswerSpan] = []
    for doc_iri, text in request.documents:
        for label in sorted(answers):
            anchor = find_anchor(text, label)
            if anchor is not None:
                spans.append(
                    AnswerSpan(
                        doc_iri=doc_iri,
                        start=anchor.start,
                        end=anchor.end,
                        text=byte_slice(text, anchor.start, anchor.end),
                        score=1.0,
                    )
                )
    spans.sort(key=span_sort_key)
    return spans[: request.max_answers]


class GoldExtractor:
    """Deterministic oracle extractor; requires the ground-truth store."""

    id = "gold"

    def __init__(self, store: TripleStore, lexicon: Lexicon):
        self._store = store
        self._lexicon = lexicon

    def extract(self, request: ExtractionRequest, context: ExtractionContext) -> list[AnswerSpan]:
        if context.pattern is None:
            raise ValueError("gold extractor needs the query pattern in the context")
        return extract_gold(request, self._store, self._lexicon, context.pattern)


# ---------------------------------------------------------------------------
# Remote extractors: the wire protocol client.


class RemoteExtractor:
    """Client for extractors serving POST /extract.

    Responses are validated locally; malformed spans are dropped and
    counted, out-of-range scores clamped with a warning. An in-flight
    cap bounds concurrent requests per endpoint.
    """

    def __init__(
        self,
        endpoint: str,
        extractor_id: str = "remote",
        timeout: float = 30.0,
        max_in_flight: int = 4,
        session: requests.Session | None = None,
    ):
        self.id = extractor_id
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(max_in_flight)
        self.dropped_spans = 0
        self.clamped_scores = 0

    def extract(self, request: ExtractionRequest, context: ExtractionContext) -> list[AnswerSpan]:
        return self._call(request)

    def _call(self, request: ExtractionRequest) -> list[AnswerSpan]:
        body = {
            "question": request.question,
            "documents": [{"id": iri, "text": text} for iri, text in request.documents],
            "max_answers": request.max_answers,
        }
        if request.window_chars is not None:
            body["window_chars"] = request.window_chars
        try:
            response = self._gated_post(body)
        except requests.RequestException as exc:
            raise ExtractorUnavailableError(f"{self.endpoint}: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"{self.endpoint} answered HTTP {response.status_code}")
        try:
            payload = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProtocolError(f"{self.endpoint}: response is not JSON") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("answers"), list):
            raise ProtocolError(f"{self.endpoint}: missing 'answers' list")
        texts = dict(request.documents)
        spans: list[AnswerSpan] = []
        for raw in payload["answers"]:
            span = self._parse_span(raw, texts)
            if span is None:
                self.dropped_spans += 1
                logger.warning("dropping malformed span from %s: %r", self.endpoint, raw)
            else:
                spans.append(span)
        spans.sort(key=span_sort_key)
        return spans[: request.max_answers]

    def _gated_post(self, body: dict) -> requests.Response:
        with self._gate:
            return self._session.post(
                self.endpoint + "/extract", json=body, timeout=self.timeout
            )

    def _parse_span(self, raw: object, texts: dict[str, str]) -> AnswerSpan | None:
        if not isinstance(raw, dict):
            return None
        try:
            doc_id = raw["doc_id"]
            start = int(raw["start"])
            end = int(raw["end"])
            text = raw["text"]
            score = float(raw["score"])
        except (KeyError, TypeError, ValueError):
            return None
        if doc_id not in texts or not isinstance(text, str):
            return None
        if not 0.0 <= score <= 1.0:
            self.clamped_scores += 1
            logger.warning("clamping score %s from %s", score, self.endpoint)
            score = min(1.0, max(0.0, score))
        try:
            span = AnswerSpan(doc_iri=doc_id, start=start, end=end, text=text, score=score)
        except ValueError:
            return None
        if not validate_span(span, texts[doc_id]):
            return None
        return span


def extract_remote(endpoint: str, request: ExtractionRequest, timeout: float = 30.0) -> list[AnswerSpan]:
    """One-shot remote extraction without keeping a client around."""
    return RemoteExtractor(endpoint, timeout=timeout).extract(request, ExtractionContext())


# ---------------------------------------------------------------------------
# Registry: which extractor serves which (predicate, setting).


@dataclass(frozen=True)
class ExtractorDescriptor:
    """Registry row mapping predicates/settings to an extractor."""

    id: str
    kind: str  # baseline | gold | remote
    supported_settings: tuple[str, ...] = (SETTING_SP, SETTING_PO)
    predicate_scope: str | tuple[str, ...] = "all"
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("baseline", "gold", "remote"):
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError(f"remote extractor {self.id!r} needs an endpoint")
        for s in self.supported_settings:
            if s not in (SETTING_SP, SETTING_PO):
                raise ValueError(f"unknown setting {s!r}")

    def matches(self, predicate: str, setting: str) -> bool:
        if setting not in self.supported_settings:
            return False
        if self.predicate_scope == "all":
            return True
        return predicate in self.predicate_scope


class ExtractorRegistry:
    """Ordered list of descriptors with instantiated extractors.

    Resolution returns the first descriptor matching (predicate,
    setting); callers fall back to the baseline when nothing matches.
    """

    def __init__(self, entries: Sequence[tuple[ExtractorDescriptor, Extractor]] = ()):
        self._entries = list(entries)
        ids = [d.id for d, _ in self._entries]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate extractor ids in registry")

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        store: TripleStore | None = None,
        lexicon: Lexicon | None = None,
        timeout: float = 30.0,
        max_in_flight: int = 4,
    ) -> "ExtractorRegistry":
        """Load a JSON list of descriptors and build their extractors."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, list):
            raise ValueError("registry file must hold a JSON list")
        entries = []
        for item in raw:
            descriptor = ExtractorDescriptor(
                id=item["id"],
                kind=item["kind"],
                supported_settings=tuple(item.get("supported_settings", [SETTING_SP, SETTING_PO])),
                predicate_scope=(
                    "all"
                    if item.get("predicate_scope", "all") == "all"
                    else tuple(item["predicate_scope"])
                ),
                endpoint=item.get("endpoint"),
            )
            cap = int(item.get("max_in_flight", max_in_flight))
            entries.append((descriptor, cls._build(descriptor, store, lexicon, timeout, cap)))
        return cls(entries)

    @staticmethod
    def _build(
        descriptor: ExtractorDescriptor,
        store: TripleStore | None,
        lexicon: Lexicon | None,
        timeout: float,
        max_in_flight: int,
    ) -> Extractor:
        if descriptor.kind == "baseline":
            return BaselineExtractor()
        if descriptor.kind == "gold":
            if store is None or lexicon is None:
                raise ValueError(f"gold extractor {descriptor.id!r} needs a store and lexicon")
            return GoldExtractor(store, lexicon)
        return RemoteExtractor(
            descriptor.endpoint or "",
            extractor_id=descriptor.id,
            timeout=timeout,
            max_in_flight=max_in_flight,
        )

    def resolve(self, predicate: str, setting: str) -> tuple[ExtractorDescriptor, Extractor] | None:
        for descriptor, extractor in self._entries:
            if descriptor.matches(predicate, setting):
                return descriptor, extractor
        return None

    def __len__(self) -> int:
        return len(self._entries)
