import pytest
from hypothesis import given, strategies as st

from merifold.words import (
    CyclicWord,
    ParseError,
    RankMismatch,
    Word,
    exponent_sums,
    is_conjugate,
    parse_letters,
    reduce_word,
)

from oracles import brute_conjugate, reduced_words


def w(text, rank=2):
    return Word.parse(text, rank)


class TestReduce:
    def test_cancellation(self):
        assert reduce_word([1, -1], 2) == Word.identity(2)

    def test_identity(self):
        assert reduce_word([], 2) == Word.identity(2)

    def test_already_reduced_omega_y1(self):
        word = w("x2 X1 X2 x1 X2")
        assert len(word) == 5
        assert word.letters == (2, -1, -2, 1, -2)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            Word([3], 2)

    @given(st.lists(st.integers(-3, 3).filter(lambda a: a != 0), max_size=30))
    def test_idempotent(self, raw):
        once = reduce_word(raw, 3)
        assert reduce_word(once.letters, 3) == once

    @given(st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=16))
    def test_inverse_cancels(self, raw):
        u = reduce_word(raw, 2)
        assert u * ~u == Word.identity(2)


class TestParsing:
    def test_tokens(self):
        assert parse_letters("x1 X1") == [1, -1]
        assert parse_letters("x2X1X2x1") == [2, -1, -2, 1]
        assert parse_letters("aBA") == [1, -2, -1]
        assert parse_letters("1") == []

    def test_error_position(self):
        with pytest.raises(ParseError):
            parse_letters("x1 ?")

    def test_round_trip(self):
        for text in ("x2 X1 X2 x1", "x1", "1"):
            word = w(text)
            assert Word.parse(str(word), 2) == word

    @given(st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=12))
    def test_round_trip_random(self, raw):
        word = reduce_word(raw, 2)
        assert Word.parse(str(word), 2) == word


class TestConjugacy:
    def test_explicit_conjniugate(self):
        c = is_conjugate(w("x1"), w("x2 x1 X2"))
        assert c is not None
        assert c * w("x2 x1 X2") * ~c == w("x1")

    def test_distinct_classes(self):
        assert is_conjugate(w("x1"), w("x2")) is None

    def test_inverse_not_conjugate(self):
        assert is_conjugate(w("x1"), w("X1")) is None

    def test_rank_mismatch(self):
        with pytest.raises(RankMismatch):
            is_conjugate(Word([1], 1), Word([1], 2))

    def test_against_brute_force(self):
        # desk-size sweep; conjugators up to length 12 per the brute oracle
        words = [u for u in reduced_words(2, 3)]
        for u in words:
            for v in words:
                got = is_conjugate(u, v)
                expect = brute_conjugate(u, v, 4)
                assert (got is None) == (expect is None), (u, v)
                if got is not None:
                    assert got * v * ~got == u


class TestExponentSums:
    def test_meridian_word(self):
        assert exponent_sums(w("x2 X1 X2 x1")) == (0, 0)

    def test_omega_y1(self):
        assert exponent_sums(w("x2 X1 X2 x1 X2")) == (0, -1)

    def test_identity(self):
        assert exponent_sums(Word.identity(2)) == (0, 0)

    @given(
        st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=10),
        st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=10),
    )
    def test_additive(self, raw_u, raw_v):
        u, v = reduce_word(raw_u, 2), reduce_word(raw_v, 2)
        assert exponent_sums(u * v) == tuple(
            a + b for a, b in zip(exponent_sums(u), exponent_sums(v))
        )

    @given(
        st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=10),
        st.lists(st.integers(-2, 2).filter(lambda a: a != 0), max_size=6),
    )
    def test_conjugation_invariant(self, raw_u, raw_c):
        u, c = reduce_word(raw_u, 2), reduce_word(raw_c, 2)
        assert exponent_sums(c * u * ~c) == exponent_sums(u)


class TestCyclicWord:
    def test_rotation_equal(self):
        assert CyclicWord(w("x1 x2")) == CyclicWord(w("x2 x1"))

    def test_conjugates_collapse(self):
        u = w("x2 X1 X2 x1")
        assert CyclicWord(u.conjugate(w("x1 x2"))) == CyclicWord(u)
