"""The braid-space and cable-space groups F_n x| Z.

For an n-braid whose closure is a knot, the complement of the closed braid
in the solid torus fibers over the circle with fiber an n-punctured disk;
its group is F(x1..xn) semidirect Z where conjugation by the stable
generator t realizes the braid's Artin automorphism:

    t x_i t^-1 = a_i x_{tau(i)} a_i^-1,   tau an n-cycle.

Convention: sigma_i maps x_i -> x_i x_{i+1} x_i^-1 and x_{i+1} -> x_i,
and a braid word acts as the left-to-right composite.  Cable spaces use
the rotation action (all a_i trivial).  Elements carry the unique normal
form (fiber word, shift).

The meridional-subgroup verifier checks, instance by instance, the
dichotomy for subgroups generated by conjugates of x1: either the whole
fiber, or freely generated by conjugates of single fiber generators with
peripheral intersections controlled to single meridian conjugates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .words import Word, CyclicWord, exponent_sums
from .stallings import EngineError, SubgroupGraph


class NotAKnot(ValueError):
    """The braid closure is a link, not a knot (permutation not an n-cycle)."""


class FalsifiedAxiom(RuntimeError):
    """A cited statement failed on a concrete instance; aborts pipelines."""


@dataclass(frozen=True)
class BraidWord:
    """A word in the braid generators sigma_1..sigma_{n-1}."""

    n: int
    letters: tuple[tuple[int, int], ...]  # (index, sign)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("braids need at least 2 strands")
        for i, s in self.letters:
            if not (1 <= i <= self.n - 1) or s not in (1, -1):
                raise ValueError(f"bad braid letter ({i}, {s})")

    @staticmethod
    def parse(text: str, n: int) -> "BraidWord":
        letters = []
        for tok in text.split():
            if not tok or tok[0] not in "sS" or not tok[1:].isdigit():
                raise ValueError(f"bad braid token {tok!r} (use s<i> / S<i>)")
            letters.append((int(tok[1:]), 1 if tok[0] == "s" else -1))
        return BraidWord(n, tuple(letters))

    def inverse(self) -> "BraidWord":
        return BraidWord(self.n, tuple((i, -s) for i, s in reversed(self.letters)))

    def __str__(self) -> str:
        return " ".join(("s" if s > 0 else "S") + str(i) for i, s in self.letters) or "1"


def _apply_artin_letter(n: int, i: int, sign: int, w: Word) -> Word:
    """Image of w under the automorphism of a single braid generator."""
    out: list[int] = []
    for a in w.letters:
        j = abs(a)
        if sign > 0:
            if j == i:
                img = (i, i + 1, -i)
            elif j == i + 1:
                img = (i,)
            else:
                img = (j,)
        else:
            if j == i:
                img = (i + 1,)
            elif j == i + 1:
                img = (-(i + 1), i, i + 1)
            else:
                img = (j,)
        out.extend(img if a > 0 else tuple(-b for b in reversed(img)))
    return Word(out, n)


def _strict_conjugate_form(w: Word) -> tuple[Word, int]:
    """Write a conjugate-of-a-positive-generator as (conjugator, index)."""
    L = len(w)
    if L % 2 != 1:
        raise EngineError(f"{w} is not a conjugate of a generator")
    m = L // 2
    mid = w.letters[m]
    if mid < 0:
        raise EngineError(f"{w} conjugates an inverse generator")
    for k in range(m):
        if w.letters[k] != -w.letters[L - 1 - k]:
            raise EngineError(f"{w} is not in strict conjugate form")
    return Word(w.letters[:m], w.rank, _reduced=True), mid


@dataclass(frozen=True)
class SemidirectElement:
    """Normal form w * t^z with w in the fiber free group."""

    w: Word
    z: int

    def __str__(self) -> str:
        if self.z == 0:
            return str(self.w)
        t = f"t^{self.z}" if self.z != 1 else "t"
        return f"{self.w} {t}" if self.w else t


@dataclass(frozen=True)
class PeripheralData:
    m_V: Word
    l_V: "SemidirectElement"
    P_V_gens: tuple
    C_V_gens: tuple


class BraidSpaceGroup:
    """F(x1..xn) x| <t> with the action of a braid or cable rotation."""

    def __init__(self, n: int, tau: tuple[int, ...], act_pos: Optional[tuple[Word, ...]], act_neg: Optional[tuple[Word, ...]], flavor: tuple):
        self.n = n
        self.tau = tau  # tau[i-1] = image of i
        self._act_pos = act_pos  # None for cable: pure index shift
        self._act_neg = act_neg
        self.flavor = flavor
        if sorted(tau) != list(range(1, n + 1)):
            raise ValueError("tau is not a permutation")
        if not _is_n_cycle(tau):
            raise NotAKnot("associated permutation is not an n-cycle")

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_braid(beta: BraidWord) -> "BraidSpaceGroup":
        n = beta.n
        images = [Word.gen(i, n) for i in range(1, n + 1)]
        for i, s in beta.letters:
            images = [_apply_artin_letter(n, i, s, w) for w in images]
        tau = []
        for j in range(1, n + 1):
            _, t = _strict_conjugate_form(images[j - 1])
            tau.append(t)
        tau = tuple(tau)
        if not _is_n_cycle(tau):
            raise NotAKnot("closure is a link, not a knot")
        inv_images = [Word.gen(i, n) for i in range(1, n + 1)]
        for i, s in beta.inverse().letters:
            inv_images = [_apply_artin_letter(n, i, s, w) for w in inv_images]
        return BraidSpaceGroup(n, tau, tuple(images), tuple(inv_images), ("braid", beta))

    @staticmethod
    def cable(n: int, m: int) -> "BraidSpaceGroup":
        import math

        if n < 2 or math.gcd(n, m) != 1:
            raise ValueError("cable space needs n >= 2 and gcd(n, m) = 1")
        tau = tuple(((i - 1 + m) % n) + 1 for i in range(1, n + 1))
        return BraidSpaceGroup(n, tau, None, None, ("cable", n, m))

    # -- the action ---------------------------------------------------------

    def action_words(self) -> tuple[Word, ...]:
        """The a_i with t x_i t^-1 = a_i x_{tau(i)} a_i^-1."""
        out = []
        for i in range(1, self.n + 1):
            img = self.phi(Word.gen(i, self.n), 1)
            a, t = _strict_conjugate_form(img)
            assert t == self.tau[i - 1]
            out.append(a)
        return tuple(out)

    def phi(self, w: Word, z: int) -> Word:
        """t^z w t^-z."""
        if w.rank != self.n:
            raise ValueError("fiber word of wrong rank")
        if self.flavor[0] == "cable":
            m = self.flavor[2] * z
            return Word(
                tuple(
                    (1 if a > 0 else -1) * (((abs(a) - 1 + m) % self.n) + 1)
                    for a in w.letters
                ),
                self.n,
                _reduced=True,
            )
        images = self._act_pos if z > 0 else self._act_neg
        for _ in range(abs(z)):
            out: list[int] = []
            for a in w.letters:
                img = images[abs(a) - 1]
                out.extend(img.letters if a > 0 else (~img).letters)
            w = Word(out, self.n)
        return w

    def tau_power(self, i: int, z: int) -> int:
        j = i
        if z >= 0:
            for _ in range(z % _order(self.tau)):
                j = self.tau[j - 1]
        else:
            inv = _invert_perm(self.tau)
            for _ in range((-z) % _order(self.tau)):
                j = inv[j - 1]
        return j

    # -- element arithmetic ---------------------------------------------------

    def element(self, w: Word, z: int) -> SemidirectElement:
        return SemidirectElement(w, z)

    def identity(self) -> SemidirectElement:
        return SemidirectElement(Word.identity(self.n), 0)

    def multiply(self, g: SemidirectElement, h: SemidirectElement) -> SemidirectElement:
        return SemidirectElement(g.w * self.phi(h.w, g.z), g.z + h.z)

    def inverse(self, g: SemidirectElement) -> SemidirectElement:
        return SemidirectElement(self.phi(~g.w, -g.z), -g.z)

    def push_into_fiber(self, g: SemidirectElement, k: int = 1) -> Word:
        """The fiber word g x1^k g^-1 (shifts cancel)."""
        return g.w * self.phi(Word.gen(1, self.n) ** k, g.z) * ~g.w

    def centralizer_of_meridian(self, g: SemidirectElement) -> bool:
        """g x1 g^-1 == x1, decided by the closed form z = 0 mod n, w in <x1>.

        Only supported on cable spaces, where the action words are trivial.
        """
        if self.flavor[0] != "cable":
            raise ValueError("centralizer criterion is cable-specific")
        closed = g.z % self.n == 0 and all(abs(a) == 1 for a in g.w.letters)
        direct = self.push_into_fiber(g, 1) == Word.gen(1, self.n)
        if closed != direct:
            raise FalsifiedAxiom("cable centralizer criterion disagreed with direct computation")
        return closed

    # -- peripheral structure ---------------------------------------------------

    def peripheral_data(self) -> PeripheralData:
        m_V = Word(tuple(range(1, self.n + 1)), self.n, _reduced=True)
        assert exponent_sums(m_V) == tuple([1] * self.n)
        l_V = SemidirectElement(Word.identity(self.n), 1)
        P_V = (Word.gen(1, self.n), SemidirectElement(Word.identity(self.n), self.n))
        C_V = (m_V, l_V)
        return PeripheralData(m_V, l_V, P_V, C_V)

    def m_V(self) -> Word:
        return self.peripheral_data().m_V

    def commuting_longitude(self) -> SemidirectElement:
        """The fiber-corrected longitude u*t that commutes with m_V.

        For braids the Artin action fixes x1..xn, so u = 1; for cables the
        rotation conjugates m_V by the prefix x1..xm, which u cancels.
        """
        if self.flavor[0] == "braid":
            assert self.phi(self.m_V(), 1) == self.m_V()
            return SemidirectElement(Word.identity(self.n), 1)
        m = self.flavor[2] % self.n
        u = Word(tuple(range(1, m + 1)), self.n, _reduced=True)
        ell = SemidirectElement(u, 1)
        assert self.multiply(self.multiply(ell, SemidirectElement(self.m_V(), 0)), self.inverse(ell)) == SemidirectElement(self.m_V(), 0)
        return ell

    def in_P_V(self, g: SemidirectElement) -> bool:
        return g.z % self.n == 0 and all(abs(a) == 1 for a in g.w.letters)

    def __repr__(self) -> str:
        return f"BraidSpaceGroup(n={self.n}, flavor={self.flavor[0]})"


def _is_n_cycle(tau: tuple[int, ...]) -> bool:
    n = len(tau)
    j, seen = 1, set()
    for _ in range(n):
        if j in seen:
            return False
        seen.add(j)
        j = tau[j - 1]
    return len(seen) == n and j == 1


def _order(tau: tuple[int, ...]) -> int:
    n = len(tau)
    return n  # an n-cycle has order n


def _invert_perm(tau: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(tau)
    for i, j in enumerate(tau, start=1):
        inv[j - 1] = i
    return tuple(inv)


def artin_action(beta: BraidWord) -> BraidSpaceGroup:
    return BraidSpaceGroup.from_braid(beta)


# -- the meridional-subgroup verifier -----------------------------------------


@dataclass(frozen=True)
class C1Report:
    """Machine check of the meridional-subgroup dichotomy on one instance."""

    verdict: str  # "full_fiber" | "free_basis"
    n: int
    k: int
    rank: int
    basis: tuple[tuple[Word, int], ...]  # (fiber conjugator u, generator index j)
    basis_elements: tuple[Word, ...]
    peripheral: tuple[dict, ...] = field(compare=False, default=())

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "n": self.n,
            "conjugators": self.k,
            "rank": self.rank,
            "basis": [
                {"conjugator": str(u), "generator": f"x{j}", "element": str(e)}
                for (u, j), e in zip(self.basis, self.basis_elements)
            ],
            "peripheral": list(self.peripheral),
        }


def _loop_candidates(U: SubgroupGraph) -> list[tuple[Word, int]]:
    """All (path-to-vertex, generator) pairs with a generator loop there."""
    paths = U.path_words()
    out = []
    for v in range(U.n_vertices()):
        for j in range(1, U.rank + 1):
            if U.succ[v].get(j) == v:
                out.append((paths[v], j))
    return out


def verify_C1(conjugators: Sequence[SemidirectElement], G: BraidSpaceGroup) -> C1Report:
    """Verify the meridional dichotomy for U = <g x1 g^-1 : g in conjugators>.

    Either certifies U equals the whole fiber (then k >= n is asserted), or
    produces a free basis of conjugates of fiber generators plus the full
    peripheral classification: every conjugate of P_V meets U trivially or
    in a single meridian conjugate that is U-conjugate to a basis element,
    and no conjugate of a power of m_V lies in U.  Any failed check raises
    FalsifiedAxiom: it would refute the cited statement on this instance.
    """
    n = G.n
    k = len(conjugators)
    fiber_conjugates = [G.push_into_fiber(g, 1) for g in conjugators]
    U = SubgroupGraph.from_generators(fiber_conjugates, rank=n)
    if U.is_full_free_group():
        if k < n:
            raise FalsifiedAxiom(f"full fiber generated by {k} < n = {n} conjugates")
        return C1Report("full_fiber", n, k, n, (), ())

    r = U.subgroup_rank()
    basis = _extract_conjugate_basis(U, fiber_conjugates)
    if basis is None:
        raise FalsifiedAxiom("no free basis of generator conjugates found")
    basis_elements = tuple(u * Word.gen(j, n) * ~u for u, j in basis)
    basis_coords = [U.express_in_basis(e) for e in basis_elements]
    assert all(c is not None for c in basis_coords)
    # a free basis: pairwise nonconjugate in U (cyclic words in coordinates)
    classes = [CyclicWord(c) for c in basis_coords]
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            if classes[i] == classes[j]:
                raise FalsifiedAxiom("basis elements conjugate in U")

    peripheral = []
    paths = U.path_words()
    for j in range(1, n + 1):
        profile = U.closed_lift_profile(Word.gen(j, n))
        for v in range(U.n_vertices()):
            p = profile.at(v)
            if p is None:
                peripheral.append({"generator": f"x{j}", "vertex": v, "intersection": "trivial"})
                continue
            if p != 1:
                raise FalsifiedAxiom(
                    f"peripheral intersection at x{j}, vertex {v} is a proper power (p={p})"
                )
            elt = paths[v] * Word.gen(j, n) * ~paths[v]
            coords = U.express_in_basis(elt)
            assert coords is not None
            cls = CyclicWord(coords)
            match = next((l for l, c in enumerate(classes) if c == cls), None)
            if match is None:
                raise FalsifiedAxiom(
                    f"meridian conjugate at x{j}, vertex {v} is not U-conjugate to a basis element"
                )
            peripheral.append(
                {"generator": f"x{j}", "vertex": v, "intersection": "meridian", "basis": match}
            )
    m_V = G.m_V()
    if not U.closed_lift_profile(m_V).nowhere_closed():
        raise FalsifiedAxiom("a conjugate of a power of m_V lies in U")

    return C1Report("free_basis", n, k, r, tuple(basis), basis_elements, tuple(peripheral))


def _extract_conjugate_basis(
    U: SubgroupGraph, inputs: Sequence[Word]
) -> Optional[tuple[tuple[Word, int], ...]]:
    r = U.subgroup_rank()
    if r == 0:
        return ()
    seen: dict[tuple, tuple[Word, int]] = {}
    for u, j in _loop_candidates(U):
        seen[(u.letters, j)] = (u, j)
    for w in inputs:
        if not w:
            continue
        u, j = _strict_conjugate_form(_strict_reduce_conjugate(w))
        seen[(u.letters, j)] = (u, j)
    candidates = sorted(seen.values(), key=lambda t: (len(t[0]), t[0].letters, t[1]))
    for subset in itertools.combinations(candidates, r):
        gens = [u * Word.gen(j, U.rank) * ~u for u, j in subset]
        if SubgroupGraph.from_generators(gens, U.rank).same_subgroup(U):
            return subset
    return None


def _strict_reduce_conjugate(w: Word) -> Word:
    """Normalize u x_j^e u^-1 so the conjugator does not end in x_j^{+-1}."""
    a, core = w.cyclic_decompose()
    if len(core) != 1 or core.letters[0] < 0:
        raise EngineError(f"{w} is not a conjugate of a positive generator")
    return a * core * ~a
