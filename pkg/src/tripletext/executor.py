"""Slot-filling query execution over the corpus, no database in the loop.

One pattern flows through: lexicalize -> candidate search -> span
extraction -> dedupe/rank/cut-off -> translate answers back to IRIs.
Fully bound patterns are verified by running the object-slot procedure
and checking the bound object survives.
"""

from __future__ import annotations

import logging
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import Corpus, Lexicon
from .extractors import (
    SETTING_PO,
    SETTING_SP,
    AnswerSpan,
    BaselineExtractor,
    ExtractionContext,
    ExtractionRequest,
    Extractor,
    ExtractorRegistry,
    span_sort_key,
)
from .kg import Binding, Term, TriplePattern
from .search import SearchIndex

logger = logging.getLogger(__name__)

SP = "sp"
PO = "po"
FULLY_BOUND = "fully_bound"
UNSUPPORTED = "unsupported"


class LexicalizationError(Exception):
    """A bound IRI in the pattern has no label."""


class UnsupportedPatternError(Exception):
    """Pattern shape outside SP / PO / fully bound."""


@dataclass(frozen=True)
class ExecutorConfig:
    """Serving knobs; defaults are recorded configuration, not paper values."""

    candidate_docs: int = 10
    max_answers: int = 10
    score_cutoff: float = 0.1
    parallel_extraction: bool = False

    def __post_init__(self) -> None:
        if self.candidate_docs < 1:
            raise ValueError("candidate_docs must be >= 1")
        if self.max_answers < 1:
            raise ValueError("max_answers must be >= 1")
        if not 0.0 <= self.score_cutoff <= 1.0:
            raise ValueError("score_cutoff must be within [0, 1]")

    def to_dict(self) -> dict:
        return {
            "candidate_docs": self.candidate_docs,
            "max_answers": self.max_answers,
            "score_cutoff": self.score_cutoff,
            "parallel_extraction": self.parallel_extraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutorConfig":
        return cls(
            candidate_docs=d.get("candidate_docs", 10),
            max_answers=d.get("max_answers", 10),
            score_cutoff=d.get("score_cutoff", 0.1),
            parallel_extraction=d.get("parallel_extraction", False),
        )


@dataclass(frozen=True)
class RankedBinding:
    binding: Binding
    score: float
    evidence: AnswerSpan


@dataclass(frozen=True)
class QueryResult:
    pattern: TriplePattern
    bindings: tuple[RankedBinding, ...]
    estimated_total: int


def classify_pattern(tp: TriplePattern) -> str:
    """SP, PO, FULLY_BOUND, or UNSUPPORTED (variable predicate, >=2 vars)."""
    s_var, p_var, o_var = tp.s.is_variable, tp.p.is_variable, tp.o.is_variable
    if p_var:
        return UNSUPPORTED
    if not s_var and not o_var:
        return FULLY_BOUND
    if not s_var and o_var:
        return SP
    if s_var and not o_var:
        return PO
    return UNSUPPORTED


def build_model_query(tp: TriplePattern, lexicon: Lexicon) -> str:
    """Lexicalize the bound entity and predicate into the model query string."""
    shape = classify_pattern(tp)
    if shape not in (SP, PO):
        raise UnsupportedPatternError(f"cannot build a model query for shape {shape}")
    entity = tp.s if shape == SP else tp.o
    parts = []
    for term in (entity, tp.p):
        label = lexicon.label_terms(term)
        if not label:
            raise LexicalizationError(f"no label for {term.value}")
        parts.append(label)
    return " ".join(parts)


_STRIP_CHARS = string.punctuation + string.whitespace


def normalize_answer_key(text: str) -> str:
    """Dedup key: lowercase, collapse whitespace, trim edge punctuation."""
    collapsed = " ".join(text.lower().split())
    return collapsed.strip(_STRIP_CHARS)


class QAExecutor:
    """Answers slot-filling triple patterns against the indexed corpus.

    All backing state is read-only, so instances are safe to share
    between request-handling threads.
    """

    def __init__(
        self,
        corpus: Corpus,
        index: SearchIndex,
        lexicon: Lexicon,
        registry: ExtractorRegistry | None = None,
        config: ExecutorConfig = ExecutorConfig(),
    ):
        self.corpus = corpus
        self.index = index
        self.lexicon = lexicon
        self.registry = registry or ExtractorRegistry()
        self.config = config
        self._fallback = BaselineExtractor()

    def answer_pattern(self, tp: TriplePattern) -> QueryResult:
        shape = classify_pattern(tp)
        if shape == UNSUPPORTED:
            raise UnsupportedPatternError(f"unsupported pattern shape for {tp}")
        if shape == FULLY_BOUND:
            working = TriplePattern(tp.s, tp.p, Term.var("o"))
            setting = SETTING_SP
        else:
            working = tp
            setting = SETTING_SP if shape == SP else SETTING_PO
        var = working.variables()[0]

        query = build_model_query(working, self.lexicon)
        hits = self.index.search(query, self.config.candidate_docs)
        documents = []
        for iri, _score in hits:
            doc = self.corpus.get(iri)
            if doc is not None:
                documents.append((iri, doc.text))
        if not documents:
            return QueryResult(pattern=tp, bindings=(), estimated_total=0)

        predicate = working.p.value
        resolved = self.registry.resolve(predicate, setting)
        extractor: Extractor = resolved[1] if resolved else self._fallback
        context = ExtractionContext(
            predicate=predicate,
            predicate_label=self.lexicon.label_terms(working.p),
            pattern=working,
            setting=setting,
        )
        request = ExtractionRequest(
            question=query,
            documents=tuple(documents),
            max_answers=self.config.max_answers,
        )
        spans = self._run_extractor(extractor, request, context)
        spans = sorted(spans, key=span_sort_key)

        best: dict[str, AnswerSpan] = {}
        for span in spans:  # first hit per key has max score by sort order
            key = normalize_answer_key(span.text)
            if key and key not in best:
                best[key] = span
        survivors = [s for s in best.values() if s.score >= self.config.score_cutoff]
        survivors.sort(key=span_sort_key)

        if shape == FULLY_BOUND:
            for span in survivors:
                if self.lexicon.iri_of(span.text) == tp.o:
                    ranked = (RankedBinding(Binding.empty(), span.score, span),)
                    return QueryResult(pattern=tp, bindings=ranked, estimated_total=1)
            return QueryResult(pattern=tp, bindings=(), estimated_total=0)

        ranked = tuple(
            RankedBinding(Binding({var: self.lexicon.iri_of(span.text)}), span.score, span)
            for span in survivors
        )
        return QueryResult(pattern=tp, bindings=ranked, estimated_total=len(ranked))

    def _run_extractor(
        self, extractor: Extractor, request: ExtractionRequest, context: ExtractionContext
    ) -> list[AnswerSpan]:
        if not self.config.parallel_extraction or len(request.documents) == 1:
            return extractor.extract(request, context)
        # Optional fan-out: one single-document request per candidate,
        # merged and re-sorted so the outcome matches sequential mode.
        def one(doc: tuple[str, str]) -> list[AnswerSpan]:
            sub = ExtractionRequest(
                question=request.question,
                documents=(doc,),
                max_answers=request.max_answers,
                window_chars=request.window_chars,
            )
            return extractor.extract(sub, context)

        with ThreadPoolExecutor(max_workers=min(8, len(request.documents))) as pool:
            chunks = list(pool.map(one, request.documents))
        merged = [span for chunk in chunks for span in chunk]
        merged.sort(key=span_sort_key)
        return merged[: request.max_answers]
