"""Term model, store indexes, and pattern matching against a linear scan."""

import random

import pytest

from tripletext.kg import (
    Binding,
    Term,
    Triple,
    TriplePattern,
    TripleStore,
    matching_triple,
    substitute,
)

from synthdata import build_world, entity_iri, predicate_iri


def tp(s, p, o):
    return TriplePattern(s, p, o)


@pytest.fixture
def small_store():
    a, b, c = Term.iri("http://x/a"), Term.iri("http://x/b"), Term.iri("http://x/c")
    p, q = Term.iri("http://x/p"), Term.iri("http://x/q")
    return TripleStore([Triple(a, p, b), Triple(a, p, c), Triple(b, q, c)])


class TestTerm:
    def test_iri_rejects_whitespace_and_empty(self):
        with pytest.raises(ValueError):
            Term.iri("http://x/a b")
        with pytest.raises(ValueError):
            Term.iri("")

    def test_variable_name_rules(self):
        assert Term.var("x0_Y").value == "x0_Y"
        for bad in ("", "0x", "?x", "x-y"):
            with pytest.raises(ValueError):
                Term.var(bad)

    def test_literal_any_string(self):
        assert Term.literal("").value == ""
        assert Term.literal("two words").is_literal

    def test_dict_round_trip(self):
        term = Term.literal("Amsterdam")
        assert Term.from_dict(term.to_dict()) == term


class TestTriple:
    def test_rejects_variables(self):
        v = Term.var("x")
        a, p = Term.iri("http://x/a"), Term.iri("http://x/p")
        with pytest.raises(ValueError):
            Triple(v, p, a)
        with pytest.raises(ValueError):
            Triple(a, p, v)

    def test_literal_object_allowed(self):
        a, p = Term.iri("http://x/a"), Term.iri("http://x/p")
        assert Triple(a, p, Term.literal("text")).o.is_literal

    def test_pattern_variables_deduplicated(self):
        x = Term.var("x")
        pattern = tp(x, Term.iri("http://x/p"), x)
        assert pattern.variables() == ("x",)


class TestBinding:
    def test_rejects_variable_values(self):
        with pytest.raises(ValueError):
            Binding({"x": Term.var("y")})

    def test_hash_and_equality(self):
        b1 = Binding({"x": Term.iri("http://x/a"), "y": Term.literal("l")})
        b2 = Binding({"y": Term.literal("l"), "x": Term.iri("http://x/a")})
        assert b1 == b2
        assert len({b1, b2}) == 1

    def test_merged_conflict(self):
        b1 = Binding({"x": Term.iri("http://x/a")})
        with pytest.raises(ValueError):
            b1.merged(Binding({"x": Term.iri("http://x/b")}))


class TestMatchPattern:
    def test_object_slot(self, small_store):
        a, p = Term.iri("http://x/a"), Term.iri("http://x/p")
        got = small_store.match_pattern(tp(a, p, Term.var("o")))
        assert got == {
            Binding({"o": Term.iri("http://x/b")}),
            Binding({"o": Term.iri("http://x/c")}),
        }

    def test_fully_bound_present(self, small_store):
        a, p, b = Term.iri("http://x/a"), Term.iri("http://x/p"), Term.iri("http://x/b")
        assert small_store.match_pattern(tp(a, p, b)) == {Binding.empty()}

    def test_fully_bound_absent(self, small_store):
        a, p = Term.iri("http://x/a"), Term.iri("http://x/p")
        assert small_store.match_pattern(tp(a, p, Term.iri("http://x/zz"))) == set()

    def test_all_variables(self, small_store):
        got = small_store.match_pattern(tp(Term.var("s"), Term.var("p"), Term.var("o")))
        assert len(got) == 3

    def test_repeated_variable_requires_equality(self):
        a, p = Term.iri("http://x/a"), Term.iri("http://x/p")
        store = TripleStore([Triple(a, p, a), Triple(a, p, Term.iri("http://x/b"))])
        x = Term.var("x")
        got = store.match_pattern(tp(x, p, x))
        assert got == {Binding({"x": a})}

    def test_substitution_soundness_and_completeness(self, small_store):
        pattern = tp(Term.var("s"), Term.iri("http://x/p"), Term.var("o"))
        bindings = small_store.match_pattern(pattern)
        for u in bindings:
            assert matching_triple(pattern, u) in small_store
        matching = [t for t in small_store.triples if t.p.value == "http://x/p"]
        assert len(bindings) == len(matching)


class TestEntityTypes:
    def test_types_from_type_predicate(self):
        e = Term.iri("http://x/e")
        t1, t2 = Term.iri("http://x/T1"), Term.iri("http://x/T2")
        typ = Term.iri("http://x/type")
        store = TripleStore([Triple(e, typ, t1), Triple(e, typ, t2)], type_predicate="http://x/type")
        assert store.entity_types("http://x/e") == {"http://x/T1", "http://x/T2"}

    def test_absent_entity_is_empty(self, small_store):
        assert small_store.entity_types("http://x/nowhere") == frozenset()

    def test_single_type(self):
        e, t1 = Term.iri("http://x/e"), Term.iri("http://x/T1")
        typ = Term.iri("http://x/type")
        store = TripleStore([Triple(e, typ, t1)], type_predicate="http://x/type")
        assert store.entity_types("http://x/e") == {"http://x/T1"}


def linear_scan_match(store, pattern):
    """Index-free reference for match_pattern."""
    out = set()
    for t in store.triples:
        assignment = {}
        ok = True
        for pat, got in ((pattern.s, t.s), (pattern.p, t.p), (pattern.o, t.o)):
            if pat.is_variable:
                if pat.value in assignment and assignment[pat.value] != got:
                    ok = False
                    break
                assignment[pat.value] = got
            elif pat != got:
                ok = False
                break
        if ok:
            out.add(Binding(assignment))
    return out


def random_pattern(rng, store):
    triples = sorted(store.triples, key=Triple.sort_key)
    base = rng.choice(triples)
    variables = [Term.var("s"), Term.var("p"), Term.var("o")]
    terms = []
    for i, term in enumerate((base.s, base.p, base.o)):
        roll = rng.random()
        if roll < 0.45:
            terms.append(variables[i])
        elif roll < 0.55 and i != 1:
            other = rng.choice(triples)  # often a non-matching component
            terms.append((other.s, other.p, other.o)[i])
        else:
            terms.append(term)
    return TriplePattern(*terms)


def test_index_scan_equivalence_random_stores():
    rng = random.Random(20240817)
    for _ in range(10):
        world = build_world(rng.randrange(1 << 30), n_entities=15, n_predicates=3)
        for _ in range(20):
            pattern = random_pattern(rng, world.store)
            assert world.store.match_pattern(pattern) == linear_scan_match(world.store, pattern)


def test_store_set_semantics():
    a, p, b = Term.iri("http://x/a"), Term.iri("http://x/p"), Term.iri("http://x/b")
    assert len(TripleStore([Triple(a, p, b), Triple(a, p, b)])) == 1


def test_substitute_partial():
    pattern = tp(Term.var("x"), Term.iri("http://x/p"), Term.var("y"))
    half = substitute(pattern, Binding({"x": Term.iri("http://x/a")}))
    assert half.s == Term.iri("http://x/a")
    assert half.o.is_variable


def test_triples_for_predicate_sorted(small_store):
    got = small_store.triples_for_predicate("http://x/p")
    assert got == sorted(got, key=Triple.sort_key)
    assert {t.p.value for t in got} == {"http://x/p"}


def test_world_generator_consistency():
    world = build_world(7)
    assert len(world.corpus) > 0
    e0 = entity_iri(0)
    assert world.lexicon.label_of(predicate_iri(0)) is not None
    assert world.store.entity_types(e0)
