"""Question-answering backends behind one tiny interface.

A backend answers (question, text) with character-offset spans scored in
[0, 1]; the HTTP layer owns the byte-offset conversion. Two backends
ship: a transformers pipeline for any locally available extractive QA
model (``hf:<model-id>``), and a deterministic lexical-overlap scorer
(``overlap``) that needs no model weights at all, for air-gapped
environments and tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class CharSpan:
    start: int
    end: int
    score: float


class Backend(Protocol):
    model_id: str

    def answer(self, question: str, text: str, max_answers: int) -> list[CharSpan]:
        ...


class BackendError(Exception):
    """The configured backend cannot be constructed."""


_WORD = re.compile(r"\w+", re.UNICODE)
_SENTENCE_END = re.compile(r"[.!?]+(?:\s+|$)")

_STOPWORDS = {
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has",
    "in", "is", "it", "its", "of", "on", "or", "the", "to", "was", "were", "with",
}


def _sentences(text: str) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        bounds.append((start, match.end()))
        start = match.end()
    if start < len(text):
        bounds.append((start, len(text)))
    return bounds or [(0, len(text))]


class OverlapBackend:
    """Lexical scorer: best question-overlap sentence, non-echo phrases win.

    For every sentence sharing vocabulary with the question, candidate
    spans are whitespace-contiguous runs of capitalized or numeric
    tokens. Runs that merely echo question tokens are skipped. A span
    scores sentence-overlap plus proximity to the nearest question-token
    mention, squashed monotonically into (0, 1) by x / (1 + x).
    """

    model_id = "overlap"

    def answer(self, question: str, text: str, max_answers: int) -> list[CharSpan]:
        question_tokens = {
            t.lower() for t in _WORD.findall(question) if t.lower() not in _STOPWORDS
        }
        if not question_tokens:
            return []
        spans: list[CharSpan] = []
        for s_start, s_end in _sentences(text):
            sentence = text[s_start:s_end]
            tokens = list(_WORD.finditer(sentence))
            lowered = [m.group().lower() for m in tokens]
            mention_idx = [i for i, tok in enumerate(lowered) if tok in question_tokens]
            if not mention_idx:
                continue
            overlap = len(set(lowered) & question_tokens)
            i = 0
            while i < len(tokens):
                first = tokens[i].group()
                if not (first[0].isupper() or first[0].isdigit()):
                    i += 1
                    continue
                j = i
                while (
                    j + 1 < len(tokens)
                    and (tokens[j + 1].group()[0].isupper() or tokens[j + 1].group()[0].isdigit())
                    and sentence[tokens[j].end() : tokens[j + 1].start()].isspace()
                ):
                    j += 1
                run_tokens = set(lowered[i : j + 1])
                # Echoes of the question and bare stopword runs ("The")
                # are never answers.
                if run_tokens - question_tokens - _STOPWORDS:
                    distance = min(
                        abs(i - m) if m < i else (m - j if m > j else 0) for m in mention_idx
                    )
                    raw = overlap + 1.0 / (1.0 + distance)
                    spans.append(
                        CharSpan(
                            start=s_start + tokens[i].start(),
                            end=s_start + tokens[j].end(),
                            score=raw / (1.0 + raw),
                        )
                    )
                i = j + 1
        spans.sort(key=lambda s: (-s.score, s.start))
        return spans[:max_answers]


class TransformersBackend:
    """Any extractive QA model the transformers pipeline can load locally."""

    def __init__(self, model_id: str, device: str | None = None):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise BackendError(
                "transformers is not installed; install qa-sidecar[model] or use the overlap backend"
            ) from exc
        try:
            kwargs = {"device": device} if device else {}
            self._pipe = pipeline("question-answering", model=model_id, **kwargs)
        except Exception as exc:  # model missing, no network, bad id
            raise BackendError(f"cannot load QA model {model_id!r}: {exc}") from exc
        self.model_id = model_id

    def answer(self, question: str, text: str, max_answers: int) -> list[CharSpan]:
        raw = self._pipe(question=question, context=text, top_k=max_answers)
        if isinstance(raw, dict):
            raw = [raw]
        spans = []
        for item in raw:
            start, end = int(item["start"]), int(item["end"])
            if end <= start:
                continue
            score = min(1.0, max(0.0, float(item["score"])))
            spans.append(CharSpan(start=start, end=end, score=score))
        spans.sort(key=lambda s: (-s.score, s.start))
        return spans[:max_answers]


def make_backend(model: str, device: str | None = None) -> Backend:
    """``overlap`` or ``hf:<model-id>``."""
    if model == "overlap":
        return OverlapBackend()
    if model.startswith("hf:"):
        return TransformersBackend(model[3:], device=device)
    raise BackendError(f"unknown model spec {model!r} (use 'overlap' or 'hf:<model-id>')")
