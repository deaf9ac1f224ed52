"""BM25 full-text index over the corpus, the candidate-selection stage.

Replaces an external search engine with a small, deterministic inverted
index. The idf uses the "plus one" variant so scores stay strictly
positive for any document containing at least one query token.
"""

from __future__ import annotations

import json
import math
import re
import struct
import zlib
from pathlib import Path

from .corpus import Corpus

_MAGIC = b"TTXINDEX"
_VERSION = 1
_HEADER = struct.Struct(">8sIQ")

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN.findall(text.lower())


class IndexFormatError(Exception):
    """The index file is not in a readable format/version."""


class SearchIndex:
    """Immutable BM25 index; build once, query from any number of threads."""

    def __init__(
        self,
        postings: dict[str, dict[str, int]],
        doc_lengths: dict[str, int],
        k1: float = 1.2,
        b: float = 0.75,
    ):
        self._postings = postings
        self._doc_lengths = doc_lengths
        self.k1 = k1
        self.b = b
        n = len(doc_lengths)
        self._avgdl = (sum(doc_lengths.values()) / n) if n else 0.0

    @classmethod
    def build(cls, corpus: Corpus, k1: float = 1.2, b: float = 0.75) -> "SearchIndex":
        """Index title and body of every document."""
        postings: dict[str, dict[str, int]] = {}
        doc_lengths: dict[str, int] = {}
        for doc in corpus:
            tokens = tokenize(doc.title + " " + doc.text if doc.title else doc.text)
            doc_lengths[doc.iri] = len(tokens)
            for token in tokens:
                bucket = postings.setdefault(token, {})
                bucket[doc.iri] = bucket.get(doc.iri, 0) + 1
        return cls(postings, doc_lengths, k1=k1, b=b)

    def __len__(self) -> int:
        return len(self._doc_lengths)

    def _idf(self, token: str) -> float:
        df = len(self._postings.get(token, ()))
        n = len(self._doc_lengths)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        """Top-k documents by BM25, ties broken by document IRI ascending.

        Only documents containing at least one query token are returned.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        scores: dict[str, float] = {}
        for token in tokenize(query):
            bucket = self._postings.get(token)
            if not bucket:
                continue
            idf = self._idf(token)
            for iri, tf in bucket.items():
                dl = self._doc_lengths[iri]
                denom = tf + self.k1 * (1.0 - self.b + self.b * dl / self._avgdl)
                scores[iri] = scores.get(iri, 0.0) + idf * tf * (self.k1 + 1.0) / denom
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return ranked[:k]

    def save(self, path: str | Path) -> None:
        """Write the single-file binary format (see docs/index_format.md)."""
        payload = json.dumps(
            {
                "k1": self.k1,
                "b": self.b,
                "doc_lengths": self._doc_lengths,
                "postings": self._postings,
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        blob = zlib.compress(payload, level=6)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, len(blob)))
            fh.write(blob)

    @classmethod
    def load(cls, path: str | Path) -> "SearchIndex":
        with open(path, "rb") as fh:
            header = fh.read(_HEADER.size)
            if len(header) != _HEADER.size:
                raise IndexFormatError("truncated index header")
            magic, version, length = _HEADER.unpack(header)
            if magic != _MAGIC:
                raise IndexFormatError(f"bad magic {magic!r}")
            if version != _VERSION:
                raise IndexFormatError(f"unsupported index version {version}")
            blob = fh.read(length)
        if len(blob) != length:
            raise IndexFormatError("truncated index payload")
        data = json.loads(zlib.decompress(blob).decode("utf-8"))
        return cls(
            postings=data["postings"],
            doc_lengths=data["doc_lengths"],
            k1=data["k1"],
            b=data["b"],
        )
