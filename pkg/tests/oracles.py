"""Independent brute-force oracles used to check the engine.

Everything here is deliberately naive: exhaustive enumeration, Nielsen
reduction, and ball-based searches.  Nothing imports the decision paths it
is checking beyond basic Word arithmetic.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Optional

from merifold.words import Word, free_reduce


def reduced_words(rank: int, max_len: int) -> Iterator[Word]:
    """All freely reduced words of length <= max_len, shortest first."""
    yield Word.identity(rank)
    letters = [a for i in range(1, rank + 1) for a in (i, -i)]
    frontier: list[tuple[int, ...]] = [()]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            for a in letters:
                if w and w[-1] == -a:
                    continue
                nw = w + (a,)
                nxt.append(nw)
                yield Word(nw, rank, _reduced=True)
        frontier = nxt


def subgroup_ball(gens: Iterable[Word], factors: int) -> set[Word]:
    """All products of <= ``factors`` generators or inverses."""
    gens = list(gens)
    rank = gens[0].rank if gens else 1
    ball = {Word.identity(rank)}
    frontier = {Word.identity(rank)}
    for _ in range(factors):
        nxt = set()
        for w in frontier:
            for g in gens:
                for h in (g, ~g):
                    nxt.add(w * h)
        nxt -= ball
        ball |= nxt
        frontier = nxt
    return ball


def brute_conjugate(u: Word, v: Word, max_conj_len: int) -> Optional[Word]:
    for c in reduced_words(u.rank, max_conj_len):
        if c * v * ~c == u:
            return c
    return None


def nielsen_reduce(gens: list[Word]) -> list[Word]:
    """Nielsen reduction by greedy length descent; returns a reduced tuple.

    The nontrivial survivors freely generate the same subgroup; for a set
    that freely generates, the count of survivors equals the input size.
    """
    ws = [g for g in gens]
    changed = True
    while changed:
        changed = False
        ws = [w for w in ws if len(w) > 0]
        ws.sort(key=lambda w: (len(w), w.letters))
        for i in range(len(ws)):
            for j in range(len(ws)):
                if i == j:
                    continue
                for cand in (ws[i] * ws[j], ws[i] * ~ws[j], ~ws[j] * ws[i], ws[j] * ws[i]):
                    if len(cand) < len(ws[i]):
                        ws[i] = cand
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return [w for w in ws if len(w) > 0]


def freely_generates(gens: list[Word]) -> bool:
    """True iff the list is a free basis of the subgroup it generates."""
    reduced = nielsen_reduce(list(gens))
    return len(reduced) == len(gens) and all(len(w) > 0 for w in reduced)
