"""Document store, IRI/label lexicon, answer anchoring and windowing.

All persisted and wire-visible offsets are byte offsets into the UTF-8
encoding of a document's text, always on character boundaries. Window
sizes, by contrast, are character budgets. The helpers at the top of
this module convert between the two views.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator, Mapping, Union

from .kg import Term, TripleStore

logger = logging.getLogger(__name__)


def to_byte_offset(text: str, char_index: int) -> int:
    """Byte offset of the character at ``char_index`` in UTF-8."""
    return len(text[:char_index].encode("utf-8"))


def from_byte_offset(text: str, byte_offset: int) -> int:
    """Character index for a UTF-8 byte offset; rejects mid-character offsets."""
    encoded = text.encode("utf-8")
    if not 0 <= byte_offset <= len(encoded):
        raise ValueError(f"byte offset {byte_offset} out of range 0..{len(encoded)}")
    prefix = encoded[:byte_offset]
    try:
        return len(prefix.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ValueError(f"byte offset {byte_offset} is not on a character boundary") from exc


def byte_slice(text: str, start: int, end: int) -> str:
    """Substring addressed by UTF-8 byte offsets."""
    encoded = text.encode("utf-8")
    if not 0 <= start <= end <= len(encoded):
        raise ValueError(f"byte range {start}..{end} out of range 0..{len(encoded)}")
    try:
        return encoded[start:end].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValueError(f"byte range {start}..{end} splits a character") from exc


def byte_length(text: str) -> int:
    return len(text.encode("utf-8"))


@dataclass(frozen=True, slots=True)
class Anchor:
    """Half-open byte range locating an answer inside a document text."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid anchor range {self.start}..{self.end}")

    def to_dict(self) -> dict[str, int]:
        return {"start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, d: Mapping[str, int]) -> "Anchor":
        return cls(d["start"], d["end"])


@dataclass(frozen=True, slots=True)
class Document:
    """An entity's textual description, keyed by the entity IRI."""

    iri: str
    title: str
    text: str


class Corpus:
    """Immutable collection of documents, unique per entity IRI."""

    def __init__(self, documents: Mapping[str, Document] | list[Document]):
        if isinstance(documents, list):
            mapping: dict[str, Document] = {}
            for doc in documents:
                if doc.iri in mapping:
                    raise ValueError(f"duplicate document IRI: {doc.iri}")
                mapping[doc.iri] = doc
            documents = mapping
        self._docs = dict(documents)

    @classmethod
    def from_jsonl(cls, source: Union[str, Path, IO[str]]) -> "Corpus":
        """Load documents from JSON-Lines with fields iri, title, text."""
        if isinstance(source, (str, Path)):
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        else:
            lines = source.read().splitlines()
        docs = []
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                docs.append(Document(iri=obj["iri"], title=obj.get("title", ""), text=obj["text"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"bad corpus line {lineno}: {exc}") from exc
        return cls(docs)

    def get(self, iri: str) -> Document | None:
        return self._docs.get(iri)

    def __contains__(self, iri: str) -> bool:
        return iri in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        for iri in sorted(self._docs):
            yield self._docs[iri]


def _normalize_label(label: str) -> str:
    return " ".join(label.split()).casefold()


class Lexicon:
    """Bidirectional IRI/label mapping.

    Reverse lookups order competing IRIs by their triple frequency in the
    originating store (descending, ties lexicographic) so the most
    connected entity wins ambiguous labels. Empty labels are dropped.
    """

    def __init__(self, labels: Mapping[str, str], frequencies: Mapping[str, int] | None = None):
        freqs = frequencies or {}
        self._labels: dict[str, str] = {}
        exact: dict[str, list[str]] = {}
        norm: dict[str, list[str]] = {}
        for iri, label in labels.items():
            if not label:
                continue
            self._labels[iri] = label
            exact.setdefault(label, []).append(iri)
            norm.setdefault(_normalize_label(label), []).append(iri)
        order = lambda iri: (-freqs.get(iri, 0), iri)
        self._exact = {k: sorted(set(v), key=order) for k, v in exact.items()}
        self._norm = {k: sorted(set(v), key=order) for k, v in norm.items()}

    @classmethod
    def from_store(cls, store: TripleStore) -> "Lexicon":
        """Build from the store's label-predicate triples.

        Entities with several labels keep the lexicographically smallest,
        for reproducibility.
        """
        labels: dict[str, str] = {}
        for t in sorted(store.triples_for_predicate(store.label_predicate), key=lambda t: t.sort_key()):
            if t.o.is_literal and t.s.value not in labels:
                labels[t.s.value] = t.o.value
        freqs = {iri: store.term_frequency(iri) for iri in labels}
        return cls(labels, freqs)

    @classmethod
    def from_tsv(cls, source: Union[str, Path, IO[str]]) -> "Lexicon":
        """Two-column TSV fallback: iri <tab> label."""
        if isinstance(source, (str, Path)):
            lines = Path(source).read_text(encoding="utf-8").splitlines()
        else:
            lines = source.read().splitlines()
        labels: dict[str, str] = {}
        for line in lines:
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) >= 2 and parts[0] not in labels:
                labels[parts[0]] = parts[1]
        return cls(labels)

    def __len__(self) -> int:
        return len(self._labels)

    def __contains__(self, iri: str) -> bool:
        return iri in self._labels

    def label_of(self, iri: str) -> str | None:
        """The label of an IRI, or None when unknown."""
        return self._labels.get(iri)

    def iri_of(self, answer: str) -> Term:
        """Translate an answer string back into identifier space.

        Exact label match wins; then a case-insensitive, whitespace
        collapsed match; an unresolvable answer is returned as a literal
        term rather than dropped.
        """
        hit = self._exact.get(answer)
        if hit:
            return Term.iri(hit[0])
        hit = self._norm.get(_normalize_label(answer))
        if hit:
            return Term.iri(hit[0])
        return Term.literal(answer)

    def label_terms(self, term: Term) -> str | None:
        """Lexicalize any bound term: literals are their own label."""
        if term.is_literal:
            return term.value
        return self.label_of(term.value)


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def _boundary_match(text: str, start: int, end: int) -> bool:
    if start > 0 and _is_word_char(text[start - 1]) and _is_word_char(text[start]):
        return False
    if end < len(text) and _is_word_char(text[end - 1]) and _is_word_char(text[end]):
        return False
    return True


def _scan(haystack: str, needle: str, original: str) -> Anchor | None:
    pos = 0
    while True:
        idx = haystack.find(needle, pos)
        if idx < 0:
            return None
        end = idx + len(needle)
        if _boundary_match(original, idx, end):
            return Anchor(to_byte_offset(original, idx), to_byte_offset(original, end))
        pos = idx + 1


def find_anchor(text: str, answer: str) -> Anchor | None:
    """First word-bounded occurrence of ``answer`` in ``text``.

    Case-sensitive occurrences win; a case-insensitive pass is the
    fallback. Matches must start and end at word boundaries so that
    e.g. "art" does not anchor inside "Sparta". Returns byte offsets.
    """
    if not answer:
        raise ValueError("answer must be non-empty")
    anchor = _scan(text, answer, text)
    if anchor is not None:
        return anchor
    lowered_text = text.lower()
    lowered_answer = answer.lower()
    if len(lowered_text) == len(text):
        return _scan(lowered_text, lowered_answer, text)
    # Rare case: lowering shifted lengths (e.g. 'İ'); compare per position.
    for idx in range(len(text)):
        end = idx + len(answer)
        if end > len(text):
            break
        if text[idx:end].lower() == lowered_answer and _boundary_match(text, idx, end):
            return Anchor(to_byte_offset(text, idx), to_byte_offset(text, end))
    return None


def window(text: str, anchor: Anchor, window_chars: int) -> tuple[str, Anchor]:
    """Cut a window of roughly ``window_chars`` characters around an anchor.

    The window is centred on the anchor midpoint, clamped to the text,
    then both edges are pushed outward to the nearest whitespace or text
    boundary so no word is cut; the result can therefore exceed the
    character budget by the tails of the two edge words. Returns the
    window text and the anchor re-based to window byte coordinates.
    """
    c_start = from_byte_offset(text, anchor.start)
    c_end = from_byte_offset(text, anchor.end)
    span = c_end - c_start
    if window_chars < span:
        raise ValueError(f"window of {window_chars} chars cannot contain a {span}-char anchor")
    n = len(text)
    extra = window_chars - span
    lo = c_start - extra // 2
    hi = c_end + (extra - extra // 2)
    if lo < 0:
        hi = min(n, hi - lo)
        lo = 0
    if hi > n:
        lo = max(0, lo - (hi - n))
        hi = n
    while 0 < lo < n and not text[lo].isspace() and not text[lo - 1].isspace():
        lo -= 1
    while hi < n and not text[hi].isspace() and not text[hi - 1].isspace():
        hi += 1
    cut = text[lo:hi]
    rebased = Anchor(
        to_byte_offset(cut, c_start - lo),
        to_byte_offset(cut, c_end - lo),
    )
    return cut, rebased
