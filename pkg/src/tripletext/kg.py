"""RDF term model and an in-memory triple store with pattern matching.

The store is immutable after construction and safe for any number of
concurrent readers. It doubles as the ground-truth oracle for the text
query engine: ``match_pattern`` answers any pattern shape by exact
lookup, which the rest of the system only ever approximates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

IRI = "iri"
LITERAL = "literal"
VARIABLE = "variable"

#: Default predicate IRIs, overridable through IngestConfig.
WIKIDATA_INSTANCE_OF = "http://www.wikidata.org/prop/direct/P31"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"

_VAR_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True, slots=True)
class Term:
    """An IRI, a literal (lexical form only), or a named variable."""

    kind: str
    value: str

    def __post_init__(self) -> None:
        if self.kind == IRI:
            if not self.value or any(ch.isspace() for ch in self.value):
                raise ValueError(f"invalid IRI: {self.value!r}")
        elif self.kind == VARIABLE:
            if not _VAR_NAME.match(self.value):
                raise ValueError(f"invalid variable name: {self.value!r}")
        elif self.kind != LITERAL:
            raise ValueError(f"unknown term kind: {self.kind!r}")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(IRI, value)

    @classmethod
    def literal(cls, value: str) -> "Term":
        return cls(LITERAL, value)

    @classmethod
    def var(cls, name: str) -> "Term":
        return cls(VARIABLE, name)

    @property
    def is_iri(self) -> bool:
        return self.kind == IRI

    @property
    def is_literal(self) -> bool:
        return self.kind == LITERAL

    @property
    def is_variable(self) -> bool:
        return self.kind == VARIABLE

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "Term":
        return cls(d["kind"], d["value"])


@dataclass(frozen=True, slots=True)
class Triple:
    """A ground RDF triple: subject and predicate IRIs, IRI or literal object."""

    s: Term
    p: Term
    o: Term

    def __post_init__(self) -> None:
        if not self.s.is_iri:
            raise ValueError(f"triple subject must be an IRI, got {self.s}")
        if not self.p.is_iri:
            raise ValueError(f"triple predicate must be an IRI, got {self.p}")
        if self.o.is_variable:
            raise ValueError(f"triple object must not be a variable, got {self.o}")

    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.s.value, self.p.value, self.o.value, self.o.kind)

    def to_dict(self) -> dict[str, dict[str, str]]:
        return {"s": self.s.to_dict(), "p": self.p.to_dict(), "o": self.o.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Mapping[str, str]]) -> "Triple":
        return cls(Term.from_dict(d["s"]), Term.from_dict(d["p"]), Term.from_dict(d["o"]))


@dataclass(frozen=True, slots=True)
class TriplePattern:
    """A triple where any component may be a variable (object may be a literal)."""

    s: Term
    p: Term
    o: Term

    def __post_init__(self) -> None:
        if self.s.is_literal:
            raise ValueError("pattern subject must be an IRI or a variable")
        if self.p.is_literal:
            raise ValueError("pattern predicate must be an IRI or a variable")

    def variables(self) -> tuple[str, ...]:
        """Variable names in subject, predicate, object order, deduplicated."""
        seen: list[str] = []
        for term in (self.s, self.p, self.o):
            if term.is_variable and term.value not in seen:
                seen.append(term.value)
        return tuple(seen)

    @property
    def is_ground(self) -> bool:
        return not self.variables()

    def as_triple(self) -> Triple:
        if not self.is_ground:
            raise ValueError(f"pattern has unbound variables: {self.variables()}")
        return Triple(self.s, self.p, self.o)

    def to_dict(self) -> dict[str, dict[str, str]]:
        return {"s": self.s.to_dict(), "p": self.p.to_dict(), "o": self.o.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Mapping[str, str]]) -> "TriplePattern":
        return cls(Term.from_dict(d["s"]), Term.from_dict(d["p"]), Term.from_dict(d["o"]))


class Binding:
    """An immutable, hashable mapping from variable names to bound terms."""

    __slots__ = ("_items",)

    def __init__(self, assignments: Mapping[str, Term] | Iterable[tuple[str, Term]] = ()):
        pairs = sorted(dict(assignments).items())
        for name, term in pairs:
            if term.is_variable:
                raise ValueError(f"variable {name!r} bound to another variable {term.value!r}")
        self._items: tuple[tuple[str, Term], ...] = tuple(pairs)

    @classmethod
    def empty(cls) -> "Binding":
        return cls()

    def __getitem__(self, name: str) -> Term:
        for key, term in self._items:
            if key == name:
                return term
        raise KeyError(name)

    def get(self, name: str, default: Term | None = None) -> Term | None:
        for key, term in self._items:
            if key == name:
                return term
        return default

    def __contains__(self, name: object) -> bool:
        return any(key == name for key, _ in self._items)

    def keys(self) -> tuple[str, ...]:
        return tuple(key for key, _ in self._items)

    def items(self) -> tuple[tuple[str, Term], ...]:
        return self._items

    def merged(self, other: "Binding") -> "Binding":
        """Union of two bindings; raises on conflicting assignments."""
        combined = dict(self._items)
        for name, term in other.items():
            if name in combined and combined[name] != term:
                raise ValueError(f"conflicting binding for {name!r}")
            combined[name] = term
        return Binding(combined)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keys())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Binding) and self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={t.value!r}" for k, t in self._items)
        return f"Binding({inner})"


def substitute(tp: TriplePattern, binding: Binding) -> TriplePattern:
    """Replace variables in ``tp`` that are bound in ``binding``."""

    def sub(term: Term) -> Term:
        if term.is_variable:
            bound = binding.get(term.value)
            if bound is not None:
                return bound
        return term

    return TriplePattern(sub(tp.s), sub(tp.p), sub(tp.o))


def matching_triple(tp: TriplePattern, binding: Binding) -> Triple:
    """The ground triple obtained by applying ``binding`` to ``tp``."""
    return substitute(tp, binding).as_triple()


class TripleStore:
    """Set of triples with subject/predicate/object indexes and a type map.

    Immutable after construction; index lookups are required to agree
    with a linear scan (tested against a reference implementation).
    """

    def __init__(
        self,
        triples: Iterable[Triple],
        type_predicate: str = WIKIDATA_INSTANCE_OF,
        label_predicate: str = RDFS_LABEL,
    ):
        self._triples = frozenset(triples)
        self.type_predicate = type_predicate
        self.label_predicate = label_predicate

        by_s: dict[str, set[Triple]] = {}
        by_p: dict[str, set[Triple]] = {}
        by_o: dict[tuple[str, str], set[Triple]] = {}
        by_ps: dict[tuple[str, str], set[Triple]] = {}
        by_po: dict[tuple[str, str, str], set[Triple]] = {}
        types: dict[str, set[str]] = {}
        for t in self._triples:
            okey = (t.o.kind, t.o.value)
            by_s.setdefault(t.s.value, set()).add(t)
            by_p.setdefault(t.p.value, set()).add(t)
            by_o.setdefault(okey, set()).add(t)
            by_ps.setdefault((t.p.value, t.s.value), set()).add(t)
            by_po.setdefault((t.p.value, t.o.kind, t.o.value), set()).add(t)
            if t.p.value == type_predicate and t.o.is_iri:
                types.setdefault(t.s.value, set()).add(t.o.value)
        self._by_s = by_s
        self._by_p = by_p
        self._by_o = by_o
        self._by_ps = by_ps
        self._by_po = by_po
        self._types = {e: frozenset(ts) for e, ts in types.items()}

    @property
    def triples(self) -> frozenset[Triple]:
        return self._triples

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triples

    def predicates(self) -> list[str]:
        """All predicate IRIs, sorted."""
        return sorted(self._by_p)

    def triples_for_predicate(self, predicate: str) -> list[Triple]:
        """Triples with the given predicate in lexicographic (s, p, o) order."""
        return sorted(self._by_p.get(predicate, ()), key=Triple.sort_key)

    def entity_types(self, entity: str) -> frozenset[str]:
        """The (possibly empty) set of type IRIs of an entity."""
        return self._types.get(entity, frozenset())

    def term_frequency(self, iri: str) -> int:
        """Number of stored triples mentioning ``iri`` in any position."""
        mentions: set[Triple] = set()
        mentions.update(self._by_s.get(iri, ()))
        mentions.update(self._by_p.get(iri, ()))
        mentions.update(self._by_o.get((IRI, iri), ()))
        return len(mentions)

    def _candidates(self, tp: TriplePattern) -> Iterable[Triple]:
        s_bound = not tp.s.is_variable
        p_bound = not tp.p.is_variable
        o_bound = not tp.o.is_variable
        if p_bound and s_bound:
            return self._by_ps.get((tp.p.value, tp.s.value), ())
        if p_bound and o_bound:
            return self._by_po.get((tp.p.value, tp.o.kind, tp.o.value), ())
        if s_bound:
            return self._by_s.get(tp.s.value, ())
        if o_bound:
            return self._by_o.get((tp.o.kind, tp.o.value), ())
        if p_bound:
            return self._by_p.get(tp.p.value, ())
        return self._triples

    def match_pattern(self, tp: TriplePattern) -> set[Binding]:
        """All bindings u with u[tp] in the store; domain = variables of tp.

        A fully bound pattern yields one empty binding when the triple is
        stored, otherwise the empty set. Repeated variables must bind
        consistently (e.g. ``(?x, p, ?x)`` only matches s == o).
        """
        results: set[Binding] = set()
        for t in self._candidates(tp):
            assignment: dict[str, Term] = {}
            ok = True
            for pat_term, got_term in ((tp.s, t.s), (tp.p, t.p), (tp.o, t.o)):
                if pat_term.is_variable:
                    prev = assignment.get(pat_term.value)
                    if prev is not None and prev != got_term:
                        ok = False
                        break
                    assignment[pat_term.value] = got_term
                elif pat_term != got_term:
                    ok = False
                    break
            if ok:
                results.add(Binding(assignment))
        return results
