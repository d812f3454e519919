import random

import pytest

from merifold.words import Word
from merifold.patternspace import PatternElement, L_V, M_V
from merifold import agraphs as ag
from merifold.agraphs import (
    AGraph,
    EGroup,
    MeridianSpec,
    VGroup,
    auxiliary_move,
    build_initial,
    classify,
    extract_generators,
    fold_step,
    goodify,
    is_folded,
    is_good,
    lift,
    member,
    rank_good,
)


def w(text):
    return Word.parse(text, 2)


def random_spec(rng, max_path=2, max_word=3):
    words = []
    exps = []
    k = rng.randint(1, max_path)
    for i in range(k + 1):
        n = rng.randint(0, max_word)
        words.append(Word([rng.choice([1, -1, 2, -2]) for _ in range(n)], 2))
    for _ in range(k):
        exps.append(rng.choice([1, -1]))
    return MeridianSpec(tuple(words), tuple(exps), rng.choice([1, 2]))


class TestBuildInitial:
    def test_star_shape(self):
        specs = [MeridianSpec.plain(1), MeridianSpec.plain(2), MeridianSpec.plain(1)]
        B = build_initial(specs)
        assert B.is_tree()
        assert B.n_edges_geometric() == 6
        assert rank_good(B) == 3
        assert is_good(B)

    def test_empty(self):
        B = build_initial([])
        assert B.n_vertices() == 1 and rank_good(B) == 0

    def test_mu_matches_spec_generator(self):
        rng = random.Random(4)
        for _ in range(20):
            spec = random_spec(rng)
            B = build_initial([spec])
            leg_end = max(B.vgroups)
            mu = B.mu_to(leg_end)
            assert mu == spec.conjugator()

    def test_represented_generators(self):
        spec = MeridianSpec.plain(1)
        B = build_initial([spec])
        gens = B.represented_generators()
        assert gens == [spec.generator()]


class TestAuxiliaryMoves:
    def test_neutrality(self):
        rng = random.Random(8)
        B, _ = goodify([MeridianSpec.plain(1), MeridianSpec.plain(2)])
        gens = B.represented_generators()
        for _ in range(100):
            kind = rng.choice(["A0", "A1", "A2"])
            if kind == "A0":
                site = rng.choice([v for v in B.vgroups if v != B.base])
                data = Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 2))], 2)
            elif kind == "A1":
                site = rng.choice(B.directed())
                bu = B.vgroups[B.src(site)]
                if bu.is_trivial():
                    data = Word.identity(2)
                else:
                    g = bu.generators()[0]
                    data = g ** rng.randint(-1, 1)
            else:
                site = rng.choice(B.directed())
                data = Word([rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 2))], 2)
            B2 = auxiliary_move(B, kind, site, data)
            assert B2.complexity() == B.complexity()
            folded, _ = is_folded(B2)
            if folded:
                for g in gens:
                    assert member(B2, g)

    def test_a0_rejects_nonmember_at_base(self):
        B, _ = goodify([MeridianSpec.plain(1)])
        if not B.vgroups[B.base].is_trivial():
            with pytest.raises(ValueError):
                auxiliary_move(B, "A0", B.base, w("x2"))


class TestGoodifyExamples:
    def test_single_meridian(self):
        B, cert = goodify([MeridianSpec.plain(1)])
        assert is_folded(B)[0]
        pieces = classify(B)
        assert len(pieces) == 1 and pieces[0].kind == "cyclic"
        assert rank_good(B) == 1
        assert cert.rank == 1
        assert member(B, MeridianSpec.plain(1).generator())

    def test_two_meridians(self):
        specs = [MeridianSpec.plain(1), MeridianSpec.plain(2)]
        B, cert = goodify(specs)
        assert is_folded(B)[0]
        assert rank_good(B) <= 2
        for s in specs:
            assert member(B, s.generator())
        # m_V lies in the output; its factor is meridian-capable of size >= 2
        assert member(B, PatternElement.fiber(M_V))
        assert any(f["meridianCapable"] and f["size"] >= 2 for f in cert.factors)
        assert cert.peripheral_ok

    def test_pinch_discovered(self):
        # lV x2 lV^-1 = x1, so the two meridians generate a rank-1 subgroup
        specs = [
            MeridianSpec.plain(1),
            MeridianSpec.from_element(L_V, 2),
        ]
        B, cert = goodify(specs)
        assert rank_good(B) == 1
        for s in specs:
            assert member(B, s.generator())

    def test_rank_bounded_by_spec_count(self):
        rng = random.Random(17)
        for _ in range(25):
            k = rng.randint(1, 3)
            specs = [random_spec(rng) for _ in range(k)]
            B, cert = goodify(specs)
            assert is_folded(B)[0]
            assert is_good(B)
            assert rank_good(B) <= k
            for s in specs:
                assert member(B, s.generator()), (s, [str(x) for x in specs])

    def test_complexity_strictly_decreases(self):
        rng = random.Random(23)
        specs = [random_spec(rng) for _ in range(3)]
        B = build_initial(specs)
        seen = [B.complexity()]
        for _ in range(200):
            folded, _ = is_folded(B)
            if folded:
                break
            _, B = fold_step(B)
            seen.append(B.complexity())
        assert all(a > b for a, b in zip(seen, seen[1:]))

    def test_nonmember_rejected(self):
        B, _ = goodify([MeridianSpec.plain(1)])
        assert not member(B, PatternElement.fiber(w("x2")))
        assert not member(B, L_V)


class TestRankFormula:
    def test_extracted_size_matches(self):
        rng = random.Random(29)
        for _ in range(15):
            k = rng.randint(1, 3)
            specs = [random_spec(rng) for _ in range(k)]
            B, _ = goodify(specs)
            gens = extract_generators(B)
            assert len(gens) == rank_good(B)
            for _, g in gens:
                assert member(B, g)

    def test_fig_eleven_shape(self):
        # two meridians folding to one non-cyclic piece with v_full = 1
        B, _ = goodify([MeridianSpec.plain(1), MeridianSpec.plain(2)])
        pieces = classify(B)
        noncyc = [p for p in pieces if p.kind == "noncyclic"]
        assert noncyc and rank_good(B) == sum(
            1 if p.kind == "cyclic" else p.v_full + 1 for p in pieces
        )


class TestIsFolded:
    def test_initial_two_legs_unfolded(self):
        B = build_initial([MeridianSpec.plain(1), MeridianSpec.plain(2)])
        folded, violations = is_folded(B)
        assert not folded
        assert violations and violations[0][0] == "IA"

    def test_iia_violation(self):
        B = AGraph()
        v = B.new_vertex(VGroup.full())
        B.add_edge(B.base, v, 1, Word.identity(2), Word.identity(2))
        B2 = B.copy()
        B2.vgroups[B.base] = VGroup.full()
        folded, violations = is_folded(B2)
        assert not folded
        assert any(kind == "IIA" for kind, *_ in violations)
