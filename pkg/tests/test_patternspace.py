import random

import pytest
from hypothesis import given, settings, strategies as st

from merifold.words import Word
from merifold.stallings import EngineError, pullback_intersections
from merifold import patternspace as ps
from merifold.patternspace import (
    L_V,
    M_V,
    PatternElement,
    U_ALPHA,
    U_OMEGA,
    boundary_map,
    britton_reduce,
    conjsep_check,
    in_star_form,
    lemma4_decide,
    preimage,
    star_exponents,
)

from oracles import reduced_words, subgroup_ball


def w(text):
    return Word.parse(text, 2)


def y(text):
    return Word.parse(text, 2)


class TestBoundaryMaps:
    def test_alpha_meridian(self):
        assert boundary_map("alpha", y("x1 x2")) == M_V

    def test_omega_meridian_collapses(self):
        assert boundary_map("omega", y("x1 x2")) == M_V

    def test_identity(self):
        assert boundary_map("alpha", Word.identity(2)) == Word.identity(2)

    def test_preimage_round_trip(self):
        for text in ("x1", "x1 x2", "x2 X1", "x1 x1 X2"):
            c = y(text)
            for side in ("alpha", "omega"):
                img = boundary_map(side, c)
                back = preimage(side, img)
                assert back == c  # boundary maps are injective

    def test_preimage_none_off_image(self):
        assert preimage("omega", w("x1")) is None


class TestBritton:
    def test_defining_relation(self):
        # lV x2 lV^-1 = x1
        elt = britton_reduce([Word.identity(2), 1, w("x2"), -1, Word.identity(2)])
        assert elt == PatternElement.fiber(w("x1"))

    def test_irreducible_conjugate(self):
        elt = britton_reduce([Word.identity(2), 1, w("x1"), -1, Word.identity(2)])
        assert elt.stable_length() == 2  # x1 not in U_omega: no pinch

    def test_plain_word(self):
        elt = britton_reduce([w("x2 X1")])
        assert elt == PatternElement.fiber(w("x2 X1"))

    def test_idempotent_and_nonincreasing(self):
        rng = random.Random(5)
        for _ in range(40):
            pieces = [Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 3))], 2)]
            for _ in range(rng.randint(0, 3)):
                pieces.append(rng.choice([1, -1]))
                pieces.append(Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 3))], 2))
            elt = britton_reduce(pieces)
            assert elt.stable_length() <= (len(pieces) - 1) // 2
            again = britton_reduce(
                [elt.words[0]]
                + [x for e, word in zip(elt.exps, elt.words[1:]) for x in (e, word)]
            )
            assert again == elt


class TestPatternElementArithmetic:
    def test_group_axioms_random(self):
        rng = random.Random(11)

        def rand_elt():
            pieces = [Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 2))], 2)]
            for _ in range(rng.randint(0, 2)):
                pieces.append(rng.choice([1, -1]))
                pieces.append(Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 2))], 2))
            return britton_reduce(pieces)

        for _ in range(60):
            a, b, c = rand_elt(), rand_elt(), rand_elt()
            assert (a * b) * c == a * (b * c)
            assert a * ~a == PatternElement.identity()
            assert ~(a * b) == ~b * ~a

    def test_stable_sum_homomorphism(self):
        a = britton_reduce([w("x1"), 1, w("x2"), 1, Word.identity(2)])
        b = britton_reduce([Word.identity(2), -1, w("x1 x2"), ])
        assert (a * b).stable_sum() == a.stable_sum() + b.stable_sum()

    def test_cv_is_z_squared(self):
        m = PatternElement.fiber(M_V)
        assert L_V * m * ~L_V == m
        elt = (m**3) * (L_V**-2)
        assert elt.cv_coordinates() == (3, -2)
        assert PatternElement.fiber(w("x1")).cv_coordinates() is None
        assert PatternElement.identity().cv_coordinates() == (0, 0)


class TestConjsep:
    def test_pullback_not_empty_but_meridian_only(self):
        # the literal separability claim fails on m_V = a(y1y2) = w(y1y2);
        # the sharpest true statement is that every intersection is a
        # conjugate of <m_V>, which the report certifies.
        report = conjsep_check()
        assert not report.pullback_empty
        assert report.meridian_only
        assert len(report.components) == 1
        rep, rank, cyc = report.components[0]
        assert rep == Word.identity(2) and rank == 1 and cyc

    def test_self_pullbacks_nonempty(self):
        assert pullback_intersections(U_ALPHA, U_ALPHA)
        assert pullback_intersections(U_OMEGA, U_OMEGA)


class TestStarForm:
    def test_examples(self):
        assert star_exponents(w("x1 x1 x1")) == [3]
        assert star_exponents(M_V) == [0, -1, 1]
        assert star_exponents(w("x2 x1 X2")) == [0, 1]
        assert star_exponents(w("x2 x2")) is None
        assert star_exponents(w("X2 x1 x2")) is None

    def test_matches_membership_alpha(self):
        for word in reduced_words(2, 6):
            assert in_star_form(word, "alpha") == U_ALPHA.contains(word), word

    def test_matches_membership_omega(self):
        for word in reduced_words(2, 6):
            assert in_star_form(word, "omega") == U_OMEGA.contains(word), word


def brute_case1(side, a, ball):
    return a in ball


def brute_case2(side, a, ball):
    x = ps._SIDE_CYCLIC[side]
    g = ps._SIDE_G[side]
    for eps in (0, 1):
        for k in range(-(len(a) + 2), len(a) + 3):
            u = a * x ** (-k) * g ** (-eps)
            if u in ball:
                return True
    return False


def brute_case3(side, a, ball):
    g = ps._SIDE_G[side]
    for eps in (0, 1, -1):
        for u1 in ball:
            if len(u1) > len(a) + 4:
                continue
            u2 = ~(u1 * g**eps) * a
            if u2 in ball:
                return True
    return False


@pytest.fixture(scope="module")
def balls():
    out = {}
    for side, gens in (("alpha", ps.ALPHA_IMAGES), ("omega", ps.OMEGA_IMAGES)):
        out[side] = subgroup_ball(list(gens), 8)
    return out


class TestLemma4:
    def test_case1_examples(self):
        assert lemma4_decide("1", "alpha", w("x1")).truth
        assert not lemma4_decide("1", "alpha", w("x2")).truth
        assert lemma4_decide("1", "omega", w("x2")).truth

    def test_case2_example(self):
        d = lemma4_decide("2", "alpha", w("x2 x1 x1 x1"))
        assert d.truth
        assert d.data["u"] == Word.identity(2)
        assert d.data["eps"] == 1 and d.data["k"] == 3

    def test_case3_example_false(self):
        assert not lemma4_decide("3", "alpha", w("x2 x2")).truth

    def test_case3_example_true(self):
        d = lemma4_decide("3", "alpha", w("x1 x2 x1"))
        assert d.truth
        u1, eps, u2 = d.data["u1"], d.data["eps"], d.data["u2"]
        assert U_ALPHA.contains(u1) and U_ALPHA.contains(u2)
        assert u1 * ps._SIDE_G["alpha"] ** eps * u2 == w("x1 x2 x1")

    def test_against_brute_force_short(self, balls):
        # full length-6 sweep is acceptance criterion 2; here length <= 4
        for a in reduced_words(2, 4):
            for side in ("alpha", "omega"):
                ball = balls[side]
                assert lemma4_decide("1", side, a).truth == brute_case1(side, a, ball), (a, side)
                assert lemma4_decide("2", side, a).truth == brute_case2(side, a, ball), (a, side)
                assert lemma4_decide("3", side, a).truth == brute_case3(side, a, ball), (a, side)

    def test_lemma_equivalences_hold(self, balls):
        # case 1 truth is membership; case 2/3 decompositions certify truth
        for a in reduced_words(2, 4):
            for side in ("alpha", "omega"):
                d1 = lemma4_decide("1", side, a)
                assert d1.truth == ps.side_graph(side).contains(a)
                d2 = lemma4_decide("2", side, a)
                if d2.truth:
                    u, eps, k = d2.data["u"], d2.data["eps"], d2.data["k"]
                    g, x = ps._SIDE_G[side], ps._SIDE_CYCLIC[side]
                    assert ps.side_graph(side).contains(u)
                    assert u * g**eps * x**k == a
