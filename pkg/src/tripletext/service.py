"""Triple-pattern fragment HTTP facade over the QA executor.

JSON in place of the usual RDF serialisations, with a one-to-one field
mapping to fragment concepts: ``matches`` are the data triples,
``estimated_total`` the count control, ``next_page`` the hypermedia
control. Per-triple scores are an extension, flagged in the envelope.
Responses are canonical JSON so identical requests yield byte-identical
bodies.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import metadata
from urllib.parse import parse_qs, quote, urlsplit

from .executor import QAExecutor, LexicalizationError, UnsupportedPatternError, classify_pattern, UNSUPPORTED
from .extractors import ExtractorUnavailableError, ProtocolError
from .kg import Term, Triple, TriplePattern, matching_triple

logger = logging.getLogger(__name__)

VARIABLE_MARKER = "_"
DEFAULT_PAGE_SIZE = 100

CODE_BAD_PATTERN = "BAD_PATTERN"
CODE_UNSUPPORTED = "UNSUPPORTED_PATTERN"
CODE_UPSTREAM = "UPSTREAM_EXTRACTOR_ERROR"


class PatternParamError(ValueError):
    """Malformed fragment request parameters."""


@dataclass(frozen=True)
class FragmentPage:
    pattern: TriplePattern
    matches: tuple[tuple[Triple, float], ...]
    estimated_total: int
    page: int
    page_size: int
    next_page: str | None

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.to_dict(),
            "matches": [{"triple": t.to_dict(), "score": s} for t, s in self.matches],
            "estimated_total": self.estimated_total,
            "page": self.page,
            "page_size": self.page_size,
            "next_page": self.next_page,
            "extensions": ["triple-scores"],
        }


def canonical_json(obj: object) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def parse_pattern_params(params: dict[str, str]) -> TriplePattern:
    """Build a pattern from s/p/o query parameters.

    ``_`` (or a missing parameter) marks a variable, quoted strings are
    literals (object position only), anything else is an IRI.
    """

    def parse(position: str, allow_literal: bool) -> Term:
        raw = params.get(position, VARIABLE_MARKER)
        if raw == VARIABLE_MARKER:
            return Term.var(position)
        if raw.startswith('"'):
            if not allow_literal:
                raise PatternParamError(f"literal not allowed in {position!r}")
            if len(raw) < 2 or not raw.endswith('"'):
                raise PatternParamError(f"unterminated literal in {position!r}")
            return Term.literal(raw[1:-1])
        try:
            return Term.iri(raw)
        except ValueError as exc:
            raise PatternParamError(f"bad IRI in {position!r}: {exc}") from exc

    try:
        return TriplePattern(parse("s", False), parse("p", False), parse("o", True))
    except ValueError as exc:
        raise PatternParamError(str(exc)) from exc


def pattern_params(tp: TriplePattern) -> list[tuple[str, str]]:
    """Canonical query parameters for a pattern (inverse of the parser)."""

    def unparse(term: Term) -> str:
        if term.is_variable:
            return VARIABLE_MARKER
        if term.is_literal:
            return f'"{term.value}"'
        return term.value

    return [("s", unparse(tp.s)), ("p", unparse(tp.p)), ("o", unparse(tp.o))]


def materialize_matches(result) -> list[tuple[Triple, float]]:
    """Bindings to matching triples; duplicate triples keep their best score.

    Bindings arrive ranked, so the first occurrence of a triple carries
    its maximum score.
    """
    seen: set[Triple] = set()
    matches: list[tuple[Triple, float]] = []
    for ranked in result.bindings:
        triple = matching_triple(result.pattern, ranked.binding)
        if triple not in seen:
            seen.add(triple)
            matches.append((triple, ranked.score))
    return matches


def build_fragment_page(
    pattern: TriplePattern,
    matches: list[tuple[Triple, float]],
    page: int,
    page_size: int,
) -> FragmentPage:
    """Slice one page out of the materialized matches."""
    if page < 1:
        raise PatternParamError("page must be >= 1")
    if page_size < 1:
        raise PatternParamError("page_size must be >= 1")
    total = len(matches)
    start = (page - 1) * page_size
    chunk = tuple(matches[start : start + page_size])
    next_page = None
    if page * page_size < total:
        query = "&".join(
            f"{key}={quote(value, safe='')}" for key, value in pattern_params(pattern)
        )
        next_page = f"/fragment?{query}&page={page + 1}"
    return FragmentPage(
        pattern=pattern,
        matches=chunk,
        estimated_total=total,
        page=page,
        page_size=page_size,
        next_page=next_page,
    )


class TpfService:
    """Request-level logic, independent of the HTTP plumbing."""

    def __init__(self, executor: QAExecutor, page_size: int = DEFAULT_PAGE_SIZE):
        self.executor = executor
        self.page_size = page_size

    def serve_fragment(self, params: dict[str, str]) -> FragmentPage:
        """Answer one fragment request; raises typed errors for the handler."""
        pattern = parse_pattern_params(params)
        raw_page = params.get("page", "1")
        try:
            page = int(raw_page)
        except ValueError as exc:
            raise PatternParamError(f"bad page number {raw_page!r}") from exc
        if page < 1:
            raise PatternParamError(f"page must be >= 1, got {page}")
        if classify_pattern(pattern) == UNSUPPORTED:
            raise UnsupportedPatternError(
                "only patterns with a bound predicate and at most one variable are supported"
            )
        result = self.executor.answer_pattern(pattern)
        matches = materialize_matches(result)
        return build_fragment_page(pattern, matches, page, self.page_size)

    def health(self) -> dict:
        try:
            version = metadata.version("tripletext")
        except metadata.PackageNotFoundError:
            version = "unknown"
        return {"name": "tripletext", "status": "ok", "version": version}


class _Handler(BaseHTTPRequestHandler):
    service: TpfService  # set by the server factory

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        split = urlsplit(self.path)
        if split.path == "/health":
            self._send(200, self.service.health())
            return
        if split.path != "/fragment":
            self._send(404, {"code": "NOT_FOUND", "message": f"no route {split.path}"})
            return
        params = {k: v[0] for k, v in parse_qs(split.query, keep_blank_values=True).items()}
        try:
            fragment = self.service.serve_fragment(params)
        except PatternParamError as exc:
            self._send(400, {"code": CODE_BAD_PATTERN, "message": str(exc)})
        except UnsupportedPatternError as exc:
            self._send(400, {"code": CODE_UNSUPPORTED, "message": str(exc)})
        except LexicalizationError as exc:
            self._send(400, {"code": CODE_BAD_PATTERN, "message": str(exc)})
        except (ExtractorUnavailableError, ProtocolError) as exc:
            self._send(502, {"code": CODE_UPSTREAM, "message": str(exc)})
        except Exception as exc:  # pragma: no cover - last resort
            logger.exception("fragment request failed")
            self._send(500, {"code": "INTERNAL", "message": str(exc)})
        else:
            self._send(200, fragment.to_dict())

    def _send(self, status: int, payload: dict) -> None:
        body = canonical_json(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt: str, *args) -> None:  # route to logging, not stderr
        logger.debug("%s - %s", self.address_string(), fmt % args)


class TpfServer:
    """Threaded HTTP server wrapper; state is read-only across requests."""

    def __init__(self, service: TpfService, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"service": service})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
            self._thread = None

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> "TpfServer":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()
