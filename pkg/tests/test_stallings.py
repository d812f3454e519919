import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from merifold.words import Word
from merifold.stallings import (
    CoverPos,
    SubgroupGraph,
    based_intersection,
    cover_trace,
    double_coset_witness,
    in_product,
    intersection_with_conjugate,
    position_of,
    pullback_intersections,
    solve_power_coset,
)

from oracles import freely_generates, reduced_words, subgroup_ball


def w(text, rank=2):
    return Word.parse(text, rank)


def sg(*texts, rank=2):
    return SubgroupGraph.from_generators([w(t, rank) for t in texts], rank)


U_ALPHA = sg("x2 X1 X2", "x1")
U_OMEGA = sg("x2 X1 X2 x1 X2", "x2")
M_V = w("x2 X1 X2 x1")


class TestConstruction:
    def test_figure_seven_shape(self):
        # x1-loops at both vertices, one x2-edge base -> other
        g = U_ALPHA
        assert g.n_vertices() == 2
        assert g.n_edges() == 3
        assert g.succ[0][1] == 0
        assert g.succ[0][2] == 1
        assert g.succ[1][1] == 1

    def test_trivial(self):
        g = SubgroupGraph.from_generators([], rank=2)
        assert g.n_vertices() == 1 and g.n_edges() == 0
        assert g.subgroup_rank() == 0

    def test_two_letter_cycle(self):
        g = sg("x1 x2")
        assert g.n_vertices() == 2
        assert g.n_edges() == 2
        assert g.subgroup_rank() == 1

    def test_same_subgroup_both_generating_sets(self):
        # figure caption vs boundary-map convention: same subgroup
        other = sg("x2 x1 X2", "x1")
        assert U_ALPHA.same_subgroup(other)

    def test_full_fiber(self):
        g = sg("x1", "x2", "x3", rank=3)
        assert g.is_full_free_group()
        assert g.subgroup_rank() == 3


class TestMembership:
    def test_meridian_in_alpha(self):
        assert U_ALPHA.contains(M_V)

    def test_x2_not_in_alpha(self):
        assert not U_ALPHA.contains(w("x2"))

    def test_identity_everywhere(self):
        assert U_ALPHA.contains(Word.identity(2))
        assert U_OMEGA.contains(Word.identity(2))

    def test_witness_reduces_to_member(self):
        for text in ("x2 X1 X2 x1", "x1", "x2 X1 X2", "x1 x2 X1 X2 x1 X1"):
            word = w(text)
            if not U_ALPHA.contains(word):
                continue
            witness = U_ALPHA.membership_witness(word)
            assert witness is not None
            assert U_ALPHA.evaluate_witness(witness) == word

    def test_witness_none_for_nonmember(self):
        assert U_ALPHA.membership_witness(w("x2")) is None

    def test_membership_matches_ball(self):
        gens = [w("x2 x1 X2"), w("x1 x2")]
        g = SubgroupGraph.from_generators(gens)
        ball = subgroup_ball(gens, 4)
        for word in ball:
            assert g.contains(word)
            witness = g.membership_witness(word)
            assert g.evaluate_witness(witness) == word

    @settings(max_examples=40)
    @given(st.data())
    def test_random_generators_sound_and_complete(self, data):
        k = data.draw(st.integers(1, 3))
        gens = []
        for _ in range(k):
            raw = data.draw(st.lists(st.integers(-2, 2).filter(lambda a: a != 0), min_size=1, max_size=4))
            gens.append(Word(raw, 2))
        gens = [g for g in gens if len(g) > 0]
        if not gens:
            return
        graph = SubgroupGraph.from_generators(gens)
        for word in subgroup_ball(gens, 3):
            assert graph.contains(word)
        for word in reduced_words(2, 4):
            if graph.contains(word):
                witness = graph.membership_witness(word)
                assert graph.evaluate_witness(witness) == word


class TestRank:
    def test_alpha_rank(self):
        assert U_ALPHA.subgroup_rank() == 2

    def test_rank_at_most_generators(self):
        rng = random.Random(7)
        for _ in range(60):
            k = rng.randint(1, 3)
            gens = []
            for _ in range(k):
                n = rng.randint(1, 4)
                raw = [rng.choice([1, -1, 2, -2]) for _ in range(n)]
                word = Word(raw, 2)
                if word:
                    gens.append(word)
            if not gens:
                continue
            g = SubgroupGraph.from_generators(gens)
            assert g.subgroup_rank() <= len(gens)
            # equality iff the generators freely generate (Nielsen oracle)
            assert (g.subgroup_rank() == len(gens)) == freely_generates(gens)


class TestLiftProfile:
    def test_x1_closes_everywhere_on_alpha(self):
        prof = U_ALPHA.closed_lift_profile(w("x1"))
        assert prof.at(0) == 1 and prof.at(1) == 1

    def test_meridian_closes_only_at_base(self):
        prof = U_ALPHA.closed_lift_profile(M_V)
        assert prof.at(0) == 1
        assert prof.at(1) is None

    def test_nowhere_closed(self):
        g = sg("x1")
        prof = g.closed_lift_profile(w("x2"))
        assert prof.nowhere_closed()

    def test_divisibility(self):
        g = sg("x1 x1 x1")
        prof = g.closed_lift_profile(w("x1"))
        for v, p in prof.table.items():
            assert p == 3  # closing powers at each vertex are multiples of p

    def test_rejects_trivial(self):
        with pytest.raises(ValueError):
            U_ALPHA.closed_lift_profile(Word.identity(2))


class TestPullback:
    def test_alpha_omega_contains_meridian_component(self):
        # The fiber product provably contains the m_V cycle: both boundary
        # images contain m_V, so the intersection at g=1 is nontrivial.
        comps = pullback_intersections(U_ALPHA, U_OMEGA)
        assert len(comps) == 1
        rep, core = comps[0]
        assert rep == Word.identity(2)
        assert core.subgroup_rank() == 1
        assert core.contains(M_V)

    def test_self_intersection_diagonal(self):
        comps = pullback_intersections(U_ALPHA, U_ALPHA)
        reps = [rep for rep, _ in comps]
        assert Word.identity(2) in reps
        diag = [core for rep, core in comps if rep == Word.identity(2)][0]
        assert diag.subgroup_rank() == 2

    def test_disjoint_cyclics(self):
        assert pullback_intersections(sg("x1"), sg("x2")) == []

    def test_brute_force_agreement(self):
        rng = random.Random(3)
        for _ in range(10):
            gensH = [Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(1, 3))], 2) for _ in range(2)]
            gensK = [Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(1, 3))], 2) for _ in range(2)]
            gensH = [g for g in gensH if g]
            gensK = [g for g in gensK if g]
            if not gensH or not gensK:
                continue
            H = SubgroupGraph.from_generators(gensH)
            K = SubgroupGraph.from_generators(gensK)
            comps = pullback_intersections(H, K)
            ballK = subgroup_ball(gensK, 3)
            for g in reduced_words(2, 3):
                nontrivial = any(
                    H.contains(g * u * ~g) for u in ballK if u and len(g * u * ~g) > 0
                )
                if nontrivial:
                    # g's double coset must appear among the components
                    assert any(
                        double_coset_witness(H, rep, K, g) is not None
                        for rep, _ in comps
                    ), (gensH, gensK, g)


class TestDoubleCoset:
    def test_witness_round_trip(self):
        V = U_ALPHA
        W = U_OMEGA
        g = w("x2")
        h = w("x1") * g * w("x2")
        res = double_coset_witness(V, g, W, h)
        assert res is not None
        v, u = res
        assert v * g * u == h

    def test_negative(self):
        V = sg("x1")
        W = sg("x2")
        assert double_coset_witness(V, Word.identity(2), W, w("x1 x2 x1")) is None

    def test_brute_force_sweep(self):
        V = sg("x1", "x2 x1 X2")
        W = sg("x2")
        ballV = subgroup_ball([w("x1"), w("x2 x1 X2")], 2)
        ballW = subgroup_ball([w("x2")], 2)
        g = w("x1 x2")
        members = {v * g * u for v in ballV for u in ballW}
        for h in reduced_words(2, 4):
            got = double_coset_witness(V, g, W, h)
            if h in members:
                assert got is not None
                vv, uu = got
                assert vv * g * uu == h
            if got is not None:
                vv, uu = got
                assert V.contains(vv) and W.contains(uu)


class TestPowerCoset:
    def test_simple_power(self):
        g = sg("x1 x1 x1")
        zs = solve_power_coset(g, Word.identity(2), w("x1"), Word.identity(2))
        assert 3 in zs and -3 in zs and 0 in zs
        assert 1 not in zs and 2 not in zs

    def test_conjugated(self):
        g = U_ALPHA
        zs = solve_power_coset(g, w("x2"), w("x1"), w("X2"))
        # x2 x1^x X2 in U_alpha for all x
        for x in range(-4, 5):
            assert x in zs

    def test_empty(self):
        g = sg("x1")
        zs = solve_power_coset(g, Word.identity(2), w("x2"), Word.identity(2))
        assert 0 in zs  # q1 * m^0 * q2 = identity is a member
        assert 1 not in zs and -1 not in zs

    def test_brute_force_sweep(self):
        rng = random.Random(11)
        for _ in range(25):
            gens = [Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(1, 4))], 2) for _ in range(2)]
            gens = [g for g in gens if g]
            if not gens:
                continue
            graph = SubgroupGraph.from_generators(gens)
            q1 = Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 3))], 2)
            q2 = Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 3))], 2)
            m = Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(1, 3))], 2)
            if not m:
                continue
            zs = solve_power_coset(graph, q1, m, q2)
            for x in range(-7, 8):
                expected = graph.contains(q1 * m**x * q2)
                assert (x in zs) == expected, (gens, q1, m, q2, x)


class TestNormalizer:
    def test_alpha_self_normalizing(self):
        assert U_ALPHA.normalizer().same_subgroup(U_ALPHA)

    def test_omega_self_normalizing(self):
        assert U_OMEGA.normalizer().same_subgroup(U_OMEGA)

    def test_cyclic_root_extraction(self):
        g = SubgroupGraph.from_generators([Word([1, 1], 1)], 1)
        n = g.normalizer()
        assert n.same_subgroup(SubgroupGraph.from_generators([Word([1], 1)], 1))

    def test_brute_force_small(self):
        for gens in ([w("x1 x2")], [w("x2 x1 X2")], [w("x1"), w("x2 x2")]):
            g = SubgroupGraph.from_generators(gens)
            n = g.normalizer()
            for c in reduced_words(2, 3):
                normalizes = all(
                    g.contains(c * b * ~c) for b in g.basis_words()
                ) and all(g.contains(~c * b * c) for b in g.basis_words())
                assert n.contains(c) == normalizes, (gens, c)


class TestIntersections:
    def test_based_intersection(self):
        got = based_intersection(U_ALPHA, U_OMEGA)
        assert got.subgroup_rank() == 1
        assert got.contains(M_V)

    def test_intersection_with_conjugate_x2_squared(self):
        got = intersection_with_conjugate(U_ALPHA, U_ALPHA, w("x2 x2"))
        assert got.subgroup_rank() == 0

    def test_intersection_with_conjugate_x2(self):
        got = intersection_with_conjugate(U_ALPHA, U_ALPHA, w("x2"))
        assert got.subgroup_rank() == 1
        assert got.contains(w("x2 x1 X2"))


class TestCover:
    def test_cover_trace_bidirectional(self):
        word = w("x2 x2 x1")
        pos = position_of(U_ALPHA, word)
        back = cover_trace(U_ALPHA, pos, (~word).letters)
        assert back == CoverPos(U_ALPHA.base)

    def test_export_deterministic(self):
        a = U_ALPHA.to_dot()
        b = SubgroupGraph.from_generators([w("x2 X1 X2"), w("x1")]).to_dot()
        assert a == b
