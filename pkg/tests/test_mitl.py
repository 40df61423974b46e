from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from mitlguard.errors import EmptyInterval, MitlSyntaxError, UndeclaredAtom
from mitlguard.mitl import (
    Always, And, Atom, Eventually, Interval, Not, TimedWord, TrueF, Until, Verdict, evaluate, horizon_bound, normalize,
    parse_mitl, to_text,
)
from oracles import random_extension, random_formula, random_word, sat_word


def test_parse_eventually_comparison_atom():
    f = parse_mitl("F[0,5] (x2_le_10)")
    assert f == Eventually(Interval.of(0, 5), Atom("x2_le_10"))


def test_parse_until_with_declared_props():
    assert parse_mitl("a U[1,2] b", {"a", "b"}) == Until(Interval.of(1, 2), Atom("a"), Atom("b"))


def test_parse_empty_interval():
    with pytest.raises(EmptyInterval):
        parse_mitl("F[2,1] a")


def test_parse_undeclared_atom():
    with pytest.raises(UndeclaredAtom):
        parse_mitl("a U[1,2] c", {"a", "b"})


def test_syntax_error_has_position():
    with pytest.raises(MitlSyntaxError) as e:
        parse_mitl("(a &\n b")
    assert e.value.line == 2


def test_comparison_atoms_are_canonicalised():
    assert parse_mitl("x2 <= 10") == Atom("x2_le_10")
    assert parse_mitl("x1 >= 0.3") == Atom("x1_ge_0p3")


def test_precedence():
    f = parse_mitl("a -> b | !c & d")
    g = parse_mitl("a -> (b | ((!c) & d))")
    assert f == g


@pytest.mark.parametrize("text", [
    "F[0,5] a", "G[1,3] (a | b)", "a U[0,2] (b & !c)", "(F[0,2] a) -> (G[0,4] b)", "!(a U[1,2] b) & true",
    "F[0,inf] a", "F[0.5,1.5] a",
])
def test_round_trip(text):
    f = parse_mitl(text)
    assert parse_mitl(to_text(f)) == f


def test_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(300):
        f = random_formula(rng, 4)
        assert parse_mitl(to_text(f)) == f


def test_normalize_examples():
    a = Atom("a")
    iv = Interval.of(0, 3)
    assert normalize(Eventually(iv, a)) == Until(iv, TrueF(), a)
    assert normalize(Always(iv, a)) == Not(Until(iv, TrueF(), Not(a)))
    assert normalize(a) == a


def test_normalize_preserves_semantics():
    rng = np.random.default_rng(1)
    for _ in range(300):
        f = random_formula(rng, 3)
        w = random_word(rng, int(rng.integers(0, 6)), at_zero=True)
        assert evaluate(f, w, 0) is evaluate(normalize(f), w, 0)


def test_evaluate_examples():
    f = parse_mitl("F[0,5] a")
    w = TimedWord.make([((), 1), ({"a"}, 3), ((), 6)])
    assert evaluate(f, w, 0) is Verdict.SATISFIED
    w = TimedWord.make([((), 1), ((), 3), ((), 6)])
    assert evaluate(f, w, 0) is Verdict.VIOLATED


def test_evaluate_inconclusive_before_deadline():
    f = parse_mitl("F[0,5] a")
    w = TimedWord.make([((), 1), ((), 3)])
    assert evaluate(f, w, 0) is Verdict.INCONCLUSIVE


def test_until_against_brute_force():
    f = parse_mitl("a U[1,2] b")
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(200):
        w = random_word(rng, 6, props=("a", "b"), at_zero=True)
        v = evaluate(f, w, 0)
        if v is not Verdict.INCONCLUSIVE:
            checked += 1
            assert v is Verdict.of(sat_word(f, w))
    assert checked > 100


def test_definite_verdicts_match_brute_force_on_extensions():
    rng = np.random.default_rng(3)
    for _ in range(1500):
        f = random_formula(rng, 3)
        w = random_word(rng, int(rng.integers(0, 7)), at_zero=bool(rng.integers(0, 2)))
        v = evaluate(f, w, 0)
        if v is Verdict.INCONCLUSIVE:
            continue
        assert sat_word(f, w) is (v is Verdict.SATISFIED)
        for _ in range(3):
            ext = random_extension(rng, w, int(rng.integers(1, 6)))
            assert sat_word(f, ext) is (v is Verdict.SATISFIED)


def test_monotone_extension():
    rng = np.random.default_rng(4)
    for _ in range(500):
        f = random_formula(rng, 3)
        w = random_word(rng, int(rng.integers(0, 5)))
        v = evaluate(f, w, 0)
        ext = random_extension(rng, w, 4)
        if v is not Verdict.INCONCLUSIVE:
            assert evaluate(f, ext, 0) is v


def test_definite_past_horizon_bound():
    rng = np.random.default_rng(5)
    for _ in range(300):
        f = random_formula(rng, 3)
        b = horizon_bound(f)
        w = random_word(rng, 12, at_zero=True)
        if w.horizon > b:
            assert evaluate(f, w, 0) is not Verdict.INCONCLUSIVE


def test_horizon_bound():
    assert horizon_bound(parse_mitl("F[0,5] G[1,2] a")) == 7
    assert horizon_bound(parse_mitl("a")) == 0
    assert horizon_bound(parse_mitl("F[0,inf] a")) is None


def test_true_is_always_true():
    assert evaluate(TrueF(), TimedWord.make([]), 0) is Verdict.SATISFIED


def test_atom_beyond_horizon_is_inconclusive():
    w = TimedWord.make([({"a"}, 1)])
    assert evaluate(Atom("a"), w, Fraction(1)) is Verdict.SATISFIED
    assert evaluate(Atom("a"), w, Fraction(1, 2)) is Verdict.VIOLATED
    assert evaluate(Atom("a"), w, Fraction(2)) is Verdict.INCONCLUSIVE


def test_timed_word_rejects_non_monotone():
    with pytest.raises(ValueError):
        TimedWord.make([((), 2), ((), 2)])


def test_conjunction_short_circuits_unknown():
    w = TimedWord.make([((), 1)])
    f = And(parse_mitl("F[0,1] a"), parse_mitl("F[0,9] b"))
    assert evaluate(f, w, 0) is Verdict.VIOLATED
