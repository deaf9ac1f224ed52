"""Client-side BGP planning over a fragment endpoint.

Greedy strategy: probe page 1 of every currently answerable pattern,
commit to the one with the smallest estimate, enumerate its matches page
by page, substitute each binding into the rest, recurse. Patterns that
become fully bound are verified through the service. Row scores
aggregate by minimum over the contributing triples.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from urllib.parse import urlencode

import requests

from .executor import UNSUPPORTED, classify_pattern
from .kg import Binding, Term, Triple, TriplePattern, substitute
from .service import pattern_params
from .sparql import SelectQuery

logger = logging.getLogger(__name__)


class TransportError(Exception):
    """The endpoint could not be reached or answered garbage."""


class FragmentRequestError(Exception):
    """The endpoint answered with an error envelope."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class RemoteFragment:
    matches: tuple[tuple[Triple, float], ...]
    estimated_total: int
    has_next: bool


@dataclass
class ClientStats:
    requests: int = 0
    pages_fetched: int = 0
    bindings_substituted: int = 0


@dataclass(frozen=True)
class SolutionRow:
    binding: Binding
    score: float

    def to_dict(self) -> dict:
        return {
            "binding": {name: term.to_dict() for name, term in self.binding.items()},
            "score": self.score,
        }


@dataclass(frozen=True)
class SolutionTable:
    columns: tuple[str, ...]
    rows: tuple[SolutionRow, ...]
    warnings: tuple[str, ...] = ()
    stats: ClientStats = field(default_factory=ClientStats)

    def to_json_bytes(self) -> bytes:
        payload = {
            "columns": list(self.columns),
            "rows": [row.to_dict() for row in self.rows],
            "warnings": list(self.warnings),
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def to_tsv(self) -> str:
        def cell(term: Term) -> str:
            return f'"{term.value}"' if term.is_literal else term.value

        lines = ["\t".join(self.columns + ("score",))]
        for row in self.rows:
            values = [cell(row.binding[name]) for name in self.columns]
            values.append(f"{row.score:.6f}")
            lines.append("\t".join(values))
        return "\n".join(lines) + "\n"


class FragmentClient:
    """Thin HTTP client for the fragment endpoint, with request counting."""

    def __init__(self, endpoint: str, session: requests.Session | None = None, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()
        self.stats = ClientStats()

    def fetch(self, pattern: TriplePattern, page: int) -> RemoteFragment:
        params = pattern_params(pattern) + [("page", str(page))]
        url = f"{self.endpoint}/fragment?{urlencode(params)}"
        self.stats.requests += 1
        self.stats.pages_fetched += 1
        try:
            response = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{url}: {exc}") from exc
        try:
            payload = response.json()
        except ValueError as exc:
            raise TransportError(f"{url}: non-JSON response") from exc
        if response.status_code != 200:
            raise FragmentRequestError(
                payload.get("code", "UNKNOWN"), payload.get("message", response.text[:200])
            )
        matches = tuple(
            (Triple.from_dict(m["triple"]), float(m["score"])) for m in payload["matches"]
        )
        return RemoteFragment(
            matches=matches,
            estimated_total=int(payload["estimated_total"]),
            has_next=payload.get("next_page") is not None,
        )

    def fetch_all(self, pattern: TriplePattern, first: RemoteFragment) -> list[tuple[Triple, float]]:
        """All matches, following pagination from an already fetched page 1."""
        matches = list(first.matches)
        page = 1
        fragment = first
        while fragment.has_next:
            page += 1
            fragment = self.fetch(pattern, page)
            matches.extend(fragment.matches)
        return matches


def _binding_from_match(pattern: TriplePattern, triple: Triple) -> Binding | None:
    assignment: dict[str, Term] = {}
    for pat_term, got_term in ((pattern.s, triple.s), (pattern.p, triple.p), (pattern.o, triple.o)):
        if pat_term.is_variable:
            prev = assignment.get(pat_term.value)
            if prev is not None and prev != got_term:
                return None
            assignment[pat_term.value] = got_term
        elif pat_term != got_term:
            return None
    return Binding(assignment)


def plan_and_execute(
    query: SelectQuery,
    endpoint: str | None = None,
    client: FragmentClient | None = None,
) -> SolutionTable:
    """Run a SELECT/BGP query against a fragment endpoint.

    Results are projected, deduplicated (max score wins), and sorted, so
    the row set does not depend on the plan order.
    """
    if client is None:
        if endpoint is None:
            raise ValueError("either endpoint or client is required")
        client = FragmentClient(endpoint)
    warnings: list[str] = []
    collected: dict[tuple, SolutionRow] = {}
    columns = query.projected()

    def record(binding: Binding, score: float) -> None:
        projected = Binding({name: binding[name] for name in columns})
        key = tuple((name, term.kind, term.value) for name, term in projected.items())
        row = SolutionRow(binding=projected, score=score if math.isfinite(score) else 1.0)
        prev = collected.get(key)
        if prev is None or row.score > prev.score:
            collected[key] = row

    def solve(patterns: list[TriplePattern], acc: Binding, score: float) -> None:
        if not patterns:
            record(acc, score)
            return
        best_idx = -1
        best_fragment: RemoteFragment | None = None
        for idx, tp in enumerate(patterns):
            if classify_pattern(tp) == UNSUPPORTED:
                continue
            fragment = client.fetch(tp, 1)
            if best_fragment is None or fragment.estimated_total < best_fragment.estimated_total:
                best_idx = idx
                best_fragment = fragment
        if best_fragment is None:
            warnings.append(
                "skipped branch: no supported pattern among "
                + "; ".join(str(tp) for tp in patterns)
            )
            return
        chosen = patterns[best_idx]
        rest = patterns[:best_idx] + patterns[best_idx + 1 :]
        for triple, tscore in client.fetch_all(chosen, best_fragment):
            u = _binding_from_match(chosen, triple)
            if u is None:
                continue
            client.stats.bindings_substituted += 1
            try:
                new_acc = acc.merged(u)
            except ValueError:
                continue
            try:
                new_rest = [substitute(tp, u) for tp in rest]
            except ValueError as exc:
                # e.g. a literal answer bound into a subject slot: no triple
                # can ever match, so the branch dies with a note.
                warnings.append(f"skipped branch: {exc}")
                continue
            solve(new_rest, new_acc, min(score, tscore))

    solve(list(query.bgp), Binding.empty(), math.inf)
    rows = tuple(sorted(collected.values(), key=lambda row: tuple(
        (name, term.kind, term.value) for name, term in row.binding.items()
    )))
    return SolutionTable(columns=columns, rows=rows, warnings=tuple(warnings), stats=client.stats)
