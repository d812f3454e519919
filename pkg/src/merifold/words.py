"""Exact arithmetic in finitely generated free groups.

A letter is a nonzero integer: ``i`` is the i-th generator, ``-i`` its
inverse.  A :class:`Word` is an immutable, freely reduced letter sequence
that remembers the rank of its alphabet.  Words of different ranks never
mix: the rank is a type tag, not a hint, and mismatches raise immediately.

Text form uses case for inversion: ``x1`` is generator 1, ``X1`` its
inverse.  For ranks up to 26 plain letters are also accepted (``a`` = 1,
``A`` = -1).  Tokens may be juxtaposed or whitespace separated.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence


class RankMismatch(ValueError):
    """Raised when words over different alphabets are combined."""


class ParseError(ValueError):
    """Raised on malformed word text; carries the offending position."""

    def __init__(self, text: str, pos: int, message: str):
        super().__init__(f"at position {pos}: {message} (in {text!r})")
        self.pos = pos


def free_reduce(letters: Iterable[int]) -> tuple[int, ...]:
    """Freely reduce a raw letter sequence (stack cancellation)."""
    out: list[int] = []
    for a in letters:
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


class Word:
    """A freely reduced word over a ranked free alphabet."""

    __slots__ = ("letters", "rank", "_hash")

    def __init__(self, letters: Iterable[int], rank: int, _reduced: bool = False):
        if rank < 0:
            raise ValueError("rank must be nonnegative")
        raw = tuple(letters)
        for a in raw:
            if a == 0 or abs(a) > rank:
                raise ValueError(f"letter {a} out of range for rank {rank}")
        self.letters = raw if _reduced else free_reduce(raw)
        self.rank = rank
        self._hash = hash((self.letters, rank))

    # -- constructors ----------------------------------------------------

    @staticmethod
    def identity(rank: int) -> "Word":
        return Word((), rank, _reduced=True)

    @staticmethod
    def gen(i: int, rank: int) -> "Word":
        return Word((i,), rank, _reduced=True)

    @staticmethod
    def parse(text: str, rank: int) -> "Word":
        return Word(parse_letters(text), rank)

    # -- group operations ------------------------------------------------

    def __mul__(self, other: "Word") -> "Word":
        if self.rank != other.rank:
            raise RankMismatch(f"rank {self.rank} vs {other.rank}")
        return Word(self.letters + other.letters, self.rank)

    def __invert__(self) -> "Word":
        return Word(tuple(-a for a in reversed(self.letters)), self.rank, _reduced=True)

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return (~self) ** (-n)
        out = Word.identity(self.rank)
        for _ in range(n):
            out = out * self
        return out

    def conjugate(self, by: "Word") -> "Word":
        """Return ``by * self * by**-1``."""
        return by * self * ~by

    # -- structure -------------------------------------------------------

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Word)
            and self.rank == other.rank
            and self.letters == other.letters
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Word({self!s}, rank={self.rank})"

    def __str__(self) -> str:
        return print_letters(self.letters)

    def syllables(self) -> list[tuple[int, int]]:
        """Runs of a single generator, as (generator, signed exponent)."""
        out: list[tuple[int, int]] = []
        for a in self.letters:
            g, e = abs(a), (1 if a > 0 else -1)
            if out and out[-1][0] == g:
                out[-1] = (g, out[-1][1] + e)
            else:
                out.append((g, e))
        return out

    def cyclic_decompose(self) -> tuple["Word", "Word"]:
        """Write self = a * c * a**-1 with c cyclically reduced; returns (a, c)."""
        letters = list(self.letters)
        i, j = 0, len(letters)
        while j - i >= 2 and letters[i] == -letters[j - 1]:
            i += 1
            j -= 1
        return (
            Word(tuple(letters[:i]), self.rank, _reduced=True),
            Word(tuple(letters[i:j]), self.rank, _reduced=True),
        )


class CyclicWord:
    """A cyclically reduced word up to rotation (a free conjugacy class)."""

    __slots__ = ("letters", "rank")

    def __init__(self, word: Word):
        _, core = word.cyclic_decompose()
        self.rank = word.rank
        self.letters = _min_rotation(core.letters)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CyclicWord)
            and self.rank == other.rank
            and self.letters == other.letters
        )

    def __hash__(self) -> int:
        return hash((self.letters, self.rank, "cyc"))

    def __repr__(self) -> str:
        return f"CyclicWord({print_letters(self.letters)}, rank={self.rank})"


def _min_rotation(letters: tuple[int, ...]) -> tuple[int, ...]:
    if not letters:
        return letters
    n = len(letters)
    key = lambda t: [2 * a if a > 0 else -2 * a + 1 for a in t]
    return min((letters[r:] + letters[:r] for r in range(n)), key=key)


def reduce_word(raw: Sequence[int], rank: int) -> Word:
    """Freely reduce a raw letter sequence into a :class:`Word`."""
    return Word(raw, rank)


def is_conjugate(u: Word, v: Word) -> Optional[Word]:
    """Return c with c*v*c**-1 == u if u ~ v, else None.

    Decided by cyclic reduction and rotation matching; the witness is
    assembled from the two conjugating prefixes and the rotation offset.
    """
    if u.rank != v.rank:
        raise RankMismatch(f"rank {u.rank} vs {v.rank}")
    a, uc = u.cyclic_decompose()
    b, vc = v.cyclic_decompose()
    if len(uc) != len(vc):
        return None
    if not uc:
        return Word.identity(u.rank)
    n = len(vc.letters)
    for k in range(n):
        if vc.letters[k:] + vc.letters[:k] == uc.letters:
            # uc = c0**-1 * vc * c0 for c0 = prefix of vc of length k
            c0 = Word(vc.letters[:k], v.rank, _reduced=True)
            c = a * ~c0 * ~b
            assert c * v * ~c == u
            return c
    return None


def exponent_sums(w: Word) -> tuple[int, ...]:
    """Abelianized image: signed letter count per generator (conjugation invariant)."""
    sums = [0] * w.rank
    for a in w.letters:
        sums[abs(a) - 1] += 1 if a > 0 else -1
    return tuple(sums)


# -- text form -----------------------------------------------------------


def parse_letters(text: str) -> list[int]:
    """Tokenize word text into letters.

    ``x<i>``/``X<i>`` tokens take priority; any other single ascii letter is
    positional (``a``/``A`` = +1/-1).  Whitespace separates or is absent.
    """
    out: list[int] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in ("x", "X") and i + 1 < n and text[i + 1].isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            idx = int(text[i + 1 : j])
            if idx == 0:
                raise ParseError(text, i, "generator index 0")
            out.append(idx if ch == "x" else -idx)
            i = j
        elif ch.isalpha() and ch.isascii():
            idx = ord(ch.lower()) - ord("a") + 1
            out.append(idx if ch.islower() else -idx)
            i += 1
        elif ch == "1" and (i + 1 == n or not text[i + 1].isdigit()):
            # lone "1" denotes the identity word; emits nothing
            i += 1
        else:
            raise ParseError(text, i, f"unexpected character {ch!r}")
    return out


def print_letters(letters: Sequence[int]) -> str:
    if not letters:
        return "1"
    return " ".join(f"x{a}" if a > 0 else f"X{-a}" for a in letters)
