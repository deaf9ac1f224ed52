"""Line-oriented N-Triples and TSV ingestion into a TripleStore.

Blank nodes are recognised and skipped with a counter: the text engine
cannot lexicalize them, so they are excluded at the door rather than
carried dead weight. Literal language tags and datatypes are parsed and
discarded, keeping only the lexical form.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Union

from .kg import RDFS_LABEL, WIKIDATA_INSTANCE_OF, Term, Triple, TripleStore

logger = logging.getLogger(__name__)

Source = Union[str, Path, IO[str], IO[bytes]]


class IngestError(Exception):
    """The source could not be read at all."""


@dataclass(frozen=True)
class IngestConfig:
    """Names the predicates that carry entity types and labels."""

    type_predicate: str = WIKIDATA_INSTANCE_OF
    label_predicate: str = RDFS_LABEL

    def to_dict(self) -> dict[str, str]:
        return {"type_predicate": self.type_predicate, "label_predicate": self.label_predicate}

    @classmethod
    def from_dict(cls, d: dict) -> "IngestConfig":
        return cls(
            type_predicate=d.get("type_predicate", WIKIDATA_INSTANCE_OF),
            label_predicate=d.get("label_predicate", RDFS_LABEL),
        )


@dataclass
class IngestReport:
    """Outcome of one ingestion run: the store plus skip accounting."""

    store: TripleStore
    parsed: int = 0
    skipped_blank_nodes: int = 0
    skipped_malformed: int = 0

    @property
    def skipped(self) -> int:
        return self.skipped_blank_nodes + self.skipped_malformed


_LINE = re.compile(
    r"^\s*(?:<(?P<s>[^<>\s]*)>|(?P<s_bn>_:\S+))"
    r"\s+<(?P<p>[^<>\s]*)>"
    r"\s+(?:<(?P<o>[^<>\s]*)>|(?P<o_bn>_:\S+)"
    r'|"(?P<lit>(?:[^"\\]|\\.)*)"(?:\^\^<[^<>\s]*>|@[A-Za-z]+(?:-[A-Za-z0-9]+)*)?)'
    r"\s*\.\s*(?:#.*)?$"
)

_ECHARS = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_ESCAPE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)")


def _unescape(raw: str) -> str:
    def repl(m: re.Match) -> str:
        esc = m.group(1)
        if esc[0] in "uU":
            return chr(int(esc[1:], 16))
        if esc in _ECHARS:
            return _ECHARS[esc]
        raise ValueError(f"bad escape sequence \\{esc}")

    return _ESCAPE.sub(repl, raw)


_BLANK_SENTINEL = object()


def _parse_line(line: str):
    """One Triple, None for blank/comment lines, or the blank-node sentinel."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    m = _LINE.match(line)
    if m is None:
        raise ValueError(f"malformed N-Triples line: {stripped[:120]!r}")
    if m.group("s_bn") is not None or m.group("o_bn") is not None:
        return _BLANK_SENTINEL
    subject = Term.iri(_unescape(m.group("s")))
    predicate = Term.iri(_unescape(m.group("p")))
    if m.group("o") is not None:
        obj = Term.iri(_unescape(m.group("o")))
    else:
        obj = Term.literal(_unescape(m.group("lit")))
    return Triple(subject, predicate, obj)


def _open_lines(source: Source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
    if isinstance(source, io.TextIOBase):
        return source.read().splitlines()
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8").splitlines()
    return data.splitlines()


def ingest_ntriples(source: Source, config: IngestConfig = IngestConfig()) -> IngestReport:
    """Parse line-oriented N-Triples into a store, skipping bad lines.

    Lines containing blank nodes or parse errors are skipped and counted,
    never fatal. An unreadable source raises IngestError; an empty result
    is only a logged warning.
    """
    triples: list[Triple] = []
    blank = malformed = 0
    for lineno, line in enumerate(_open_lines(source), start=1):
        try:
            parsed = _parse_line(line)
        except ValueError as exc:
            malformed += 1
            logger.debug("line %d skipped: %s", lineno, exc)
            continue
        if parsed is None:
            continue
        if parsed is _BLANK_SENTINEL:
            blank += 1
            continue
        triples.append(parsed)
    if not triples:
        logger.warning("ingestion produced an empty store")
    store = TripleStore(
        triples, type_predicate=config.type_predicate, label_predicate=config.label_predicate
    )
    return IngestReport(
        store=store,
        parsed=len(triples),
        skipped_blank_nodes=blank,
        skipped_malformed=malformed,
    )


def ingest_tsv(source: Source, config: IngestConfig = IngestConfig()) -> IngestReport:
    """Fallback ingestion: subject, predicate, object, object_kind columns."""
    triples: list[Triple] = []
    malformed = 0
    for lineno, line in enumerate(_open_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4 or parts[3] not in ("iri", "literal"):
            malformed += 1
            logger.debug("TSV line %d skipped", lineno)
            continue
        s, p, o, okind = parts
        try:
            obj = Term.iri(o) if okind == "iri" else Term.literal(o)
            triples.append(Triple(Term.iri(s), Term.iri(p), obj))
        except ValueError:
            malformed += 1
    if not triples:
        logger.warning("ingestion produced an empty store")
    store = TripleStore(
        triples, type_predicate=config.type_predicate, label_predicate=config.label_predicate
    )
    return IngestReport(store=store, parsed=len(triples), skipped_malformed=malformed)


def write_tsv(store: TripleStore, path: str | Path) -> None:
    """Persist a store as the TSV fallback format, sorted for reproducibility."""
    lines = []
    for t in sorted(store.triples, key=Triple.sort_key):
        lines.append(f"{t.s.value}\t{t.p.value}\t{t.o.value}\t{t.o.kind}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
