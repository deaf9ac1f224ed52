"""BGP planning over a live fragment endpoint vs. the store join oracle."""

import random

import pytest

from tripletext.client import (
    FragmentClient,
    TransportError,
    plan_and_execute,
)
from tripletext.executor import ExecutorConfig
from tripletext.kg import Term, TriplePattern
from tripletext.service import TpfServer, TpfService
from tripletext.sparql import SelectQuery, parse_select

from synthdata import brute_force_join, build_world

IRI = Term.iri
VAR = Term.var


@pytest.fixture(scope="module")
def live():
    world = build_world(303)
    executor = world.executor(ExecutorConfig(max_answers=32))
    service = TpfService(executor, page_size=5)  # small pages exercise pagination
    with TpfServer(service) as server:
        yield world, server


def rows_as_set(table):
    return {
        tuple((name, term.kind, term.value) for name, term in row.binding.items())
        for row in table.rows
    }


def query_of(patterns, projection=None) -> SelectQuery:
    return SelectQuery(prefixes={}, projection=projection, bgp=tuple(patterns))


class TestSinglePattern:
    def test_equals_fragment_bindings(self, live):
        world, server = live
        base = world.store.triples_for_predicate(world.relation_predicates[0])[0]
        pattern = TriplePattern(base.s, base.p, VAR("o"))
        table = plan_and_execute(query_of([pattern]), server.url)
        expected = {(("o", u["o"].kind, u["o"].value),) for u in world.store.match_pattern(pattern)}
        assert rows_as_set(table) == expected

    def test_scores_attached(self, live):
        world, server = live
        base = world.store.triples_for_predicate(world.relation_predicates[0])[0]
        table = plan_and_execute(query_of([TriplePattern(base.s, base.p, VAR("o"))]), server.url)
        assert all(0.0 <= row.score <= 1.0 for row in table.rows)


def join_patterns(world, rng):
    """A 2-pattern chain: (s, p1, ?x) . (?x, p2, ?y), guaranteed non-empty."""
    for p1 in world.relation_predicates:
        for t1 in world.store.triples_for_predicate(p1):
            for p2 in world.relation_predicates:
                mids = world.store.match_pattern(
                    TriplePattern(t1.o, IRI(p2), VAR("y"))
                )
                if mids:
                    return [
                        TriplePattern(t1.s, IRI(p1), VAR("x")),
                        TriplePattern(VAR("x"), IRI(p2), VAR("y")),
                    ]
    return None


class TestJoins:
    @pytest.mark.parametrize("seed", [1, 2])
    def test_chain_join_equals_oracle(self, live, seed):
        world, server = live
        rng = random.Random(seed)
        patterns = join_patterns(world, rng)
        assert patterns is not None
        table = plan_and_execute(query_of(patterns), server.url)
        assert rows_as_set(table) == brute_force_join(world.store, patterns)

    def test_star_join_equals_oracle(self, live):
        world, server = live
        p1 = world.relation_predicates[0]
        triples = world.store.triples_for_predicate(p1)
        t1 = triples[0]
        # Find a second constraint on the same subject for a star shape.
        second = next(
            (t for t in world.store.triples_for_predicate(p1) if t.s == t1.s and t.o != t1.o),
            None,
        )
        patterns = [
            TriplePattern(VAR("who"), IRI(p1), t1.o),
        ]
        if second is not None:
            patterns.append(TriplePattern(VAR("who"), IRI(p1), second.o))
        table = plan_and_execute(query_of(patterns), server.url)
        assert rows_as_set(table) == brute_force_join(world.store, patterns)

    def test_empty_first_pattern_short_circuits(self, live):
        world, server = live
        predicate = world.relation_predicates[0]
        # An entity that lexicalizes but has no triples for the predicate.
        childless = next(
            e
            for e in sorted({t.s.value for t in world.store.triples})
            if world.lexicon.label_of(e)
            and e.startswith("http://example.org/e/")
            and not any(t.s.value == e for t in world.store.triples_for_predicate(predicate))
        )
        patterns = [
            TriplePattern(IRI(childless), IRI(predicate), VAR("x")),
            TriplePattern(VAR("x"), IRI(predicate), VAR("y")),
        ]
        client = FragmentClient(server.url)
        table = plan_and_execute(query_of(patterns), client=client)
        assert table.rows == ()
        # One probe for the empty supported pattern; the two-variable pattern
        # is unsupported pre-substitution, so no requests target it.
        assert client.stats.requests == 1
        assert client.stats.bindings_substituted == 0

    def test_plan_order_independence(self, live):
        world, server = live
        patterns = join_patterns(world, random.Random(0))
        table_fwd = plan_and_execute(query_of(patterns), server.url)
        table_rev = plan_and_execute(query_of(list(reversed(patterns))), server.url)
        assert rows_as_set(table_fwd) == rows_as_set(table_rev)

    def test_projection_and_dedup(self, live):
        world, server = live
        patterns = join_patterns(world, random.Random(0))
        table = plan_and_execute(query_of(patterns, projection=("y",)), server.url)
        assert table.columns == ("y",)
        keys = [tuple((n, t.kind, t.value) for n, t in row.binding.items()) for row in table.rows]
        assert len(keys) == len(set(keys))

    def test_row_score_is_minimum(self, live):
        world, server = live
        patterns = join_patterns(world, random.Random(0))
        table = plan_and_execute(query_of(patterns), server.url)
        assert all(row.score == 1.0 for row in table.rows)  # gold path scores

    def test_request_accounting_bound(self, live):
        world, server = live
        patterns = join_patterns(world, random.Random(0))
        client = FragmentClient(server.url)
        plan_and_execute(query_of(patterns), client=client)
        stats = client.stats
        assert stats.requests <= 1 + stats.pages_fetched + stats.bindings_substituted


class TestDeterminism:
    def test_byte_identical_runs(self, live):
        world, server = live
        patterns = join_patterns(world, random.Random(0))
        query = query_of(patterns)
        first = plan_and_execute(query, server.url).to_json_bytes()
        second = plan_and_execute(query, server.url).to_json_bytes()
        assert first == second


class TestTransport:
    def test_unreachable_endpoint(self):
        query = parse_select("SELECT ?x WHERE { <http://x/a> <http://x/p> ?x . }")
        with pytest.raises(TransportError):
            plan_and_execute(query, "http://127.0.0.1:1")

    def test_tsv_rendering(self, live):
        world, server = live
        base = world.store.triples_for_predicate(world.relation_predicates[0])[0]
        table = plan_and_execute(query_of([TriplePattern(base.s, base.p, VAR("o"))]), server.url)
        tsv = table.to_tsv()
        lines = tsv.strip().split("\n")
        assert lines[0] == "o\tscore"
        assert len(lines) == 1 + len(table.rows)
