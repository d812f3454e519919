"""A-graphs over the pattern-group HNN splitting, folds, and goodification.

An A-graph is a finite tree mapped to the one-vertex, one-edge-pair graph
of groups of the pattern splitting: every vertex carries a subgroup of
A_v = F(x1, x2), every edge pair a subgroup of A_e = F(y1, y2), and every
directed edge a label (o_f, [f], t_f) with [f] the edge type (+1 for the
stable direction, -1 for its inverse).  The represented subgroup of the
fundamental group is generated by the tree-path conjugates of the vertex
groups.

Vertex groups in the descent stay in five shapes: trivial, cyclic on a
conjugate of a fiber generator, peripheral-cyclic on a conjugate of m_V,
a conjugate of a boundary image (almost full), or all of A_v.  Edge groups
mirror them.  The peripheral shapes are forced by the geometry: m_V lies
in both boundary images, so a boundary-image conjugate can meet the image
on the *other* side of the splitting in a conjugate of <m_V>; the descent
folds those sites into collapsible peripheral arms, which contribute
nothing to rank and keep every certificate of the output intact.

The goodify loop applies auxiliary moves, IA folds, and IIA folds exactly
in the shapes of the source analysis, always as composites that strictly
decrease the four-part complexity (rank, |EB|, |EB|-e_full, |EB|-|E_B|)
in lexicographic order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .words import Word, CyclicWord
from .stallings import (
    EngineError,
    SubgroupGraph,
    double_coset_witness,
    intersection_with_conjugate,
)
from . import patternspace as ps
from .patternspace import PatternElement, M_V, boundary_map, preimage

RANK = 2


class GoodnessViolation(RuntimeError):
    """The descent produced a graph outside the good vocabulary."""


class DescentStall(RuntimeError):
    """No applicable move on an unfolded graph; an engine bug by contract."""


# -- the graph-of-groups descriptions -------------------------------------------


@dataclass(frozen=True)
class GraphOfGroupsDesc:
    """Shape record for the two graphs of groups the engine serves."""

    name: str
    vertices: tuple[tuple[str, str], ...]  # (vertex name, group descriptor)
    edges: tuple[tuple[str, str, str, str], ...]  # (edge, alpha vertex, omega vertex, group)


PATTERN_GOG = GraphOfGroupsDesc(
    "pattern-hnn",
    (("v", "free<x1,x2>"),),
    (("e", "v", "v", "free<y1,y2>"),),
)


def image_graph(typ: int, side: str = "alpha") -> SubgroupGraph:
    """Boundary image subgroup for a directed edge type.

    alpha_{+1} embeds through the alpha map, alpha_{-1} through omega;
    the omega side of a directed edge is the alpha side of its inverse.
    """
    if side == "alpha":
        return ps.U_ALPHA if typ == 1 else ps.U_OMEGA
    return ps.U_OMEGA if typ == 1 else ps.U_ALPHA


def side_name(typ: int, side: str = "alpha") -> str:
    if side == "alpha":
        return "alpha" if typ == 1 else "omega"
    return "omega" if typ == 1 else "alpha"


def apply_boundary(typ: int, side: str, y_word: Word) -> Word:
    return boundary_map(side_name(typ, side), y_word)


# -- vertex and edge groups -------------------------------------------------------


def _strict(word: Word) -> Word:
    """Normalize a conjugate c*core*c^-1 so the conjugator is minimal."""
    a, core = word.cyclic_decompose()
    if core.letters and core.letters[0] < 0:
        core = ~core
    return a * core * ~a


def _conj_parts(word: Word) -> tuple[Word, Word]:
    a, core = word.cyclic_decompose()
    if core.letters and core.letters[0] < 0:
        core = ~core
    return a, core


@dataclass(frozen=True)
class VGroup:
    kind: str  # trivial | cyclic | peripheral | charged | almostfull | full
    gen: Optional[Word] = None  # cyclic/charged: conj of x_i; peripheral: conj of m_V
    conj: Optional[Word] = None  # almostfull: h with B = h U_side h^-1
    side: Optional[str] = None  # almostfull: alpha | omega
    peri: Optional[Word] = None  # charged: the transported m_V conjugate

    @staticmethod
    def trivial() -> "VGroup":
        return VGroup("trivial")

    @staticmethod
    def cyclic(gen: Word) -> "VGroup":
        g = _strict(gen)
        _, core = g.cyclic_decompose()
        if len(core) != 1:
            raise GoodnessViolation(f"cyclic vertex generator {gen} is not a letter conjugate")
        return VGroup("cyclic", gen=g)

    @staticmethod
    def peripheral(gen: Word) -> "VGroup":
        g = _strict(gen)
        _, core = g.cyclic_decompose()
        if CyclicWord(core) != CyclicWord(M_V) and CyclicWord(~core) != CyclicWord(M_V):
            raise GoodnessViolation(f"peripheral generator {gen} is not an m_V conjugate")
        return VGroup("peripheral", gen=g)

    @staticmethod
    def almostfull(conj: Word, side: str) -> "VGroup":
        return VGroup("almostfull", conj=conj, side=side)

    @staticmethod
    def charged(gen: Word, peri: Word) -> "VGroup":
        base = VGroup.cyclic(gen)
        extra = VGroup.peripheral(peri)
        return VGroup("charged", gen=base.gen, peri=extra.gen)

    @staticmethod
    def full() -> "VGroup":
        return VGroup("full")

    def graph(self) -> SubgroupGraph:
        return _vgroup_graph(self)

    def is_trivial(self) -> bool:
        return self.kind == "trivial"

    def generators(self) -> tuple[Word, ...]:
        if self.kind == "trivial":
            return ()
        if self.kind in ("cyclic", "peripheral"):
            return (self.gen,)
        if self.kind == "charged":
            return (self.gen, self.peri)
        if self.kind == "almostfull":
            imgs = ps.ALPHA_IMAGES if self.side == "alpha" else ps.OMEGA_IMAGES
            return tuple(self.conj * im * ~self.conj for im in imgs)
        return (Word.gen(1, RANK), Word.gen(2, RANK))

    def meridional_weight(self) -> int:
        """Minimal conjugates-of-generators count: the rank of the group."""
        return {
            "trivial": 0,
            "cyclic": 1,
            "peripheral": 1,
            "charged": 2,
            "almostfull": 2,
            "full": 2,
        }[self.kind]


_VGROUP_CACHE: dict[tuple, SubgroupGraph] = {}


def _vgroup_graph(g: VGroup) -> SubgroupGraph:
    key = (
        g.kind,
        g.gen.letters if g.gen else None,
        g.conj.letters if g.conj else None,
        g.side,
        g.peri.letters if g.peri else None,
    )
    got = _VGROUP_CACHE.get(key)
    if got is None:
        gens = list(g.generators())
        got = SubgroupGraph.from_generators(gens, RANK)
        _VGROUP_CACHE[key] = got
    return got


@dataclass(frozen=True)
class EGroup:
    kind: str  # trivial | cyclic | peripheral | full
    gen: Optional[Word] = None  # y-word: conj of y_i, or conj of y1 y2

    @staticmethod
    def trivial() -> "EGroup":
        return EGroup("trivial")

    @staticmethod
    def from_generator(gen: Word) -> "EGroup":
        g = _strict(gen)
        _, core = g.cyclic_decompose()
        if len(core) == 1:
            return EGroup("cyclic", gen=g)
        y1y2 = Word.parse("x1 x2", RANK)
        if CyclicWord(core) == CyclicWord(y1y2) or CyclicWord(~core) == CyclicWord(y1y2):
            return EGroup("peripheral", gen=g)
        raise GoodnessViolation(f"edge generator {gen} is neither y_i nor y1y2 conjugate")

    @staticmethod
    def full() -> "EGroup":
        return EGroup("full")

    def is_trivial(self) -> bool:
        return self.kind == "trivial"

    def generators(self) -> tuple[Word, ...]:
        if self.kind == "trivial":
            return ()
        if self.kind == "full":
            return (Word.gen(1, RANK), Word.gen(2, RANK))
        return (self.gen,)


# -- the A-graph -------------------------------------------------------------------


@dataclass
class Edge:
    src: int
    dst: int
    typ: int  # +1: stable direction e; -1: its inverse
    o: Word
    t: Word
    group: EGroup


class AGraph:
    """A labeled tree over the pattern HNN graph of groups."""

    def __init__(self):
        self.vgroups: dict[int, VGroup] = {0: VGroup.trivial()}
        self.edges: dict[int, Edge] = {}
        self.base = 0
        self._next_v = 1
        self._next_e = 1
        self.trace: list[dict] = []

    # -- structure ---------------------------------------------------------------

    def new_vertex(self, group: Optional[VGroup] = None) -> int:
        v = self._next_v
        self._next_v += 1
        self.vgroups[v] = group or VGroup.trivial()
        return v

    def add_edge(self, src: int, dst: int, typ: int, o: Word, t: Word, group: Optional[EGroup] = None) -> int:
        e = self._next_e
        self._next_e += 1
        self.edges[e] = Edge(src, dst, typ, o, t, group or EGroup.trivial())
        return e

    def directed(self) -> list[int]:
        out = []
        for e in self.edges:
            out.extend((e, -e))
        return out

    def src(self, f: int) -> int:
        e = self.edges[abs(f)]
        return e.src if f > 0 else e.dst

    def dst(self, f: int) -> int:
        e = self.edges[abs(f)]
        return e.dst if f > 0 else e.src

    def typ(self, f: int) -> int:
        e = self.edges[abs(f)]
        return e.typ if f > 0 else -e.typ

    def o(self, f: int) -> Word:
        e = self.edges[abs(f)]
        return e.o if f > 0 else ~e.t

    def t(self, f: int) -> Word:
        e = self.edges[abs(f)]
        return e.t if f > 0 else ~e.o

    def egroup(self, f: int) -> EGroup:
        return self.edges[abs(f)].group

    def star(self, u: int) -> list[int]:
        return sorted(f for f in self.directed() if self.src(f) == u)

    def n_vertices(self) -> int:
        return len(self.vgroups)

    def n_edges_geometric(self) -> int:
        return len(self.edges)

    def is_tree(self) -> bool:
        seen = {self.base}
        work = [self.base]
        used = 0
        while work:
            u = work.pop()
            for f in self.star(u):
                v = self.dst(f)
                if v not in seen:
                    seen.add(v)
                    used += 1
                    work.append(v)
        return len(seen) == self.n_vertices() and used == self.n_edges_geometric()

    def copy(self) -> "AGraph":
        out = AGraph()
        out.vgroups = dict(self.vgroups)
        out.edges = {e: Edge(d.src, d.dst, d.typ, d.o, d.t, d.group) for e, d in self.edges.items()}
        out.base = self.base
        out._next_v = self._next_v
        out._next_e = self._next_e
        out.trace = list(self.trace)
        return out

    # -- label/path bookkeeping ----------------------------------------------------

    def tree_path(self, u: int) -> list[int]:
        """Directed edges from base to u."""
        parent: dict[int, int] = {}
        seen = {self.base}
        work = [self.base]
        while work:
            x = work.pop(0)
            if x == u:
                break
            for f in self.star(x):
                v = self.dst(f)
                if v not in seen:
                    seen.add(v)
                    parent[v] = f
                    work.append(v)
        path: list[int] = []
        cur = u
        while cur != self.base:
            f = parent[cur]
            path.append(f)
            cur = self.src(f)
        return list(reversed(path))

    def mu(self, path: Iterable[int]) -> PatternElement:
        """The fundamental-group element read along a directed edge path."""
        out = PatternElement.identity()
        for f in path:
            piece = PatternElement.from_pieces([self.o(f), self.typ(f), self.t(f)])
            out = out * piece
        return out

    def mu_to(self, u: int) -> PatternElement:
        return self.mu(self.tree_path(u))

    def represented_generators(self) -> list[PatternElement]:
        out = []
        for u in sorted(self.vgroups):
            p = self.mu_to(u)
            for g in self.vgroups[u].generators():
                out.append(p * PatternElement.fiber(g) * ~p)
        return out

    # -- validity -------------------------------------------------------------------

    def validate(self):
        if not self.is_tree():
            raise GoodnessViolation("underlying graph is not a tree")
        for f in self.directed():
            bu = self.vgroups[self.src(f)].graph()
            for c in self.egroup(f).generators():
                img = self.o(f) * apply_boundary(self.typ(f), "alpha", c) * ~self.o(f)
                if not bu.contains(img):
                    raise GoodnessViolation(f"edge group not carried into vertex group at edge {f}")

    # -- complexity -------------------------------------------------------------------

    def e_full(self) -> int:
        return 2 * sum(1 for e in self.edges.values() if e.group.kind == "full")

    def e_nontrivial(self) -> int:
        return 2 * sum(1 for e in self.edges.values() if not e.group.is_trivial())

    def complexity(self) -> tuple[int, int, int, int]:
        EB = 2 * self.n_edges_geometric()
        return (rank_good(self), EB, EB - self.e_full(), EB - self.e_nontrivial())

    # -- exports ------------------------------------------------------------------------

    def to_dot(self, name: str = "agraph") -> str:
        color = {
            "trivial": "white",
            "cyclic": "lightblue",
            "peripheral": "orange",
            "almostfull": "palegreen",
            "full": "gold",
        }
        lines = [f"digraph {name} {{"]
        for v in sorted(self.vgroups):
            shape = "doublecircle" if v == self.base else "circle"
            g = self.vgroups[v]
            label = g.kind if g.kind != "trivial" else str(v)
            lines.append(
                f'  v{v} [shape={shape}, style=filled, fillcolor={color[g.kind]}, label="{label}"];'
            )
        for e in sorted(self.edges):
            d = self.edges[e]
            typ = "e" if d.typ == 1 else "E"
            lines.append(
                f'  v{d.src} -> v{d.dst} [label="{typ}|{d.group.kind}|o={d.o}|t={d.t}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"

    def log(self, move: str, site, before, after):
        self.trace.append(
            {
                "move": move,
                "site": site,
                "complexityBefore": list(before),
                "complexityAfter": list(after),
            }
        )


# -- auxiliary moves ------------------------------------------------------------------


def aux_A0(B: AGraph, u: int, a: Word):
    """Conjugate a vertex group, compensating the incident edge labels."""
    if u == B.base and B.vgroups[u].kind != "trivial":
        bg = B.vgroups[u].graph()
        if not bg.contains(a):
            raise ValueError("A0 at the base must conjugate by a member")
    g = B.vgroups[u]
    if g.kind in ("cyclic", "peripheral"):
        newg = VGroup(g.kind, gen=_strict(a * g.gen * ~a))
    elif g.kind == "charged":
        newg = VGroup.charged(a * g.gen * ~a, a * g.peri * ~a)
    elif g.kind == "almostfull":
        newg = VGroup.almostfull(a * g.conj, g.side)
    else:
        newg = g
    B.vgroups[u] = newg
    for e, d in B.edges.items():
        if d.src == u:
            d.o = a * d.o
        if d.dst == u:
            d.t = d.t * ~a


def aux_A1(B: AGraph, f: int, b: Word):
    """Left-multiply an o-label by a member of the source vertex group."""
    if not B.vgroups[B.src(f)].graph().contains(b):
        raise ValueError("A1 requires a vertex-group element")
    d = B.edges[abs(f)]
    if f > 0:
        d.o = b * d.o
    else:
        d.t = d.t * ~b


def aux_A2(B: AGraph, f: int, c: Word):
    """Slide an edge-group-side element through an edge."""
    d = B.edges[abs(f)]
    typ = B.typ(f)
    alpha_c = apply_boundary(typ, "alpha", c)
    omega_c = apply_boundary(typ, "omega", c)
    if f > 0:
        d.o = d.o * alpha_c
        d.t = ~omega_c * d.t
    else:
        d.t = ~alpha_c * d.t
        d.o = d.o * omega_c
    if not d.group.is_trivial() and d.group.kind != "full":
        d.group = EGroup.from_generator(~c * d.group.gen * c)


def auxiliary_move(B: AGraph, kind: str, site, data) -> AGraph:
    """Apply an auxiliary move to a copy; represented subgroup unchanged."""
    out = B.copy()
    before = out.complexity()
    if kind == "A0":
        aux_A0(out, site, data)
    elif kind == "A1":
        aux_A1(out, site, data)
    elif kind == "A2":
        aux_A2(out, site, data)
    else:
        raise ValueError(f"unknown auxiliary move {kind}")
    after = out.complexity()
    if before != after:
        raise EngineError("auxiliary move changed the complexity")
    out.log(kind, site, before, after)
    return out


# -- essential pieces and classification ------------------------------------------------


@dataclass
class Piece:
    vertices: list[int]
    edges: list[int]  # geometric ids
    kind: str  # "cyclic" | "noncyclic"
    v_full: int
    spine: list[int] = field(default_factory=list)  # full-edge path, geometric ids
    charged: list[int] = field(default_factory=list)  # their letter classes split off

    def rank(self) -> int:
        base = 1 if self.kind == "cyclic" else self.v_full + 1
        return base + len(self.charged)


def essential_pieces(B: AGraph) -> list[Piece]:
    """Components of the nontrivial-group subgraph; no shape validation."""
    verts = {u for u, g in B.vgroups.items() if not g.is_trivial()}
    nontrivial_edges = {e for e, d in B.edges.items() if not d.group.is_trivial()}
    parent = {u: u for u in verts}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in nontrivial_edges:
        d = B.edges[e]
        a, b = find(d.src), find(d.dst)
        if a != b:
            parent[a] = b
    groups: dict[int, Piece] = {}
    for u in verts:
        groups.setdefault(find(u), Piece([], [], "", 0)).vertices.append(u)
    for e in nontrivial_edges:
        groups[find(B.edges[e].src)].edges.append(e)
    pieces = []
    for p in groups.values():
        p.vertices.sort()
        p.edges.sort()
        p.v_full = sum(1 for u in p.vertices if B.vgroups[u].kind == "full")
        p.kind = "cyclic" if p.v_full == 0 else "noncyclic"
        p.spine = sorted(e for e in p.edges if B.edges[e].group.kind == "full")
        p.charged = [u for u in p.vertices if B.vgroups[u].kind == "charged"]
        pieces.append(p)
    pieces.sort(key=lambda p: p.vertices[0])
    return pieces


def _validate_piece(B: AGraph, p: Piece):
    kinds = {u: B.vgroups[u].kind for u in p.vertices}
    ekinds = {e: B.edges[e].group.kind for e in p.edges}
    deg: dict[int, int] = {u: 0 for u in p.vertices}
    for e in p.edges:
        deg[B.edges[e].src] += 1
        deg[B.edges[e].dst] += 1

    if p.kind == "cyclic":
        if p.spine:
            raise GoodnessViolation("full edge in a piece without full vertices")
        if p.charged:
            raise GoodnessViolation("charged vertex in a piece without full vertices")
        if not all(k == "cyclic" for k in kinds.values()):
            raise GoodnessViolation(f"no-full piece carries vertices {sorted(set(kinds.values()))}")
        if not all(k == "cyclic" for k in ekinds.values()):
            raise GoodnessViolation(f"no-full piece carries edges {sorted(set(ekinds.values()))}")
        if any(d > 2 for d in deg.values()):
            raise GoodnessViolation("cyclic-type piece is not an interval")
        _check_transport_exact(B, p)
        return

    full_edges = p.spine
    spine_vertices = {u for u, k in kinds.items() if k == "full"}
    for e in full_edges:
        spine_vertices.add(B.edges[e].src)
        spine_vertices.add(B.edges[e].dst)
    # the full edges must span a path whose interior vertices are full and
    # whose ends are full or almost full with the exact boundary shape
    sdeg = {u: 0 for u in spine_vertices}
    for e in full_edges:
        sdeg[B.edges[e].src] += 1
        sdeg[B.edges[e].dst] += 1
    if any(d > 2 for d in sdeg.values()):
        raise GoodnessViolation("full edges branch; not a non-cyclic template")
    if full_edges and sum(1 for d in sdeg.values() if d == 1) != 2:
        raise GoodnessViolation("full edges do not form a single interval")
    for u in spine_vertices:
        k = kinds[u]
        if k == "full":
            continue
        if k != "almostfull":
            raise GoodnessViolation(f"spine vertex {u} is neither full nor almost full")
        if sdeg.get(u, 0) > 1:
            raise GoodnessViolation("almost full vertex interior to the spine")
        _check_almostfull_shape(B, u)
    for e in p.edges:
        if ekinds[e] not in ("full", "cyclic", "peripheral"):
            raise GoodnessViolation(f"edge {e} group kind {ekinds[e]} invalid inside a piece")
    # every remaining piece vertex lies on a collapsible arm off the spine
    _check_transport_exact(B, p, skip_full=True)
    for u in p.vertices:
        if u in spine_vertices:
            continue
        if kinds[u] not in ("cyclic", "peripheral", "charged"):
            raise GoodnessViolation(f"arm vertex {u} has kind {kinds[u]}")
        if deg[u] > 2:
            raise GoodnessViolation("arm branches")


def _check_almostfull_shape(B: AGraph, u: int):
    g = B.vgroups[u]
    for f in B.star(u):
        if B.egroup(f).kind == "full":
            target = SubgroupGraph.from_generators(
                [B.o(f) * apply_boundary(B.typ(f), "alpha", y) * ~B.o(f) for y in (Word.gen(1, RANK), Word.gen(2, RANK))],
                RANK,
            )
            if g.graph().same_subgroup(target):
                return
    raise GoodnessViolation(f"almost full vertex {u} has no defining full edge")


def _check_transport_exact(B: AGraph, p: Piece, skip_full: bool = False):
    """Non-full piece edges must transport their endpoint groups exactly."""
    for e in p.edges:
        d = B.edges[e]
        if d.group.kind == "full":
            if skip_full:
                continue
            raise GoodnessViolation("full edge inside a cyclic-type piece")
        for f in (e, -e):
            u = B.src(f)
            if B.vgroups[u].kind in ("full", "almostfull"):
                continue
            gen = d.group.gen
            img = _strict(B.o(f) * apply_boundary(B.typ(f), "alpha", gen) * ~B.o(f))
            if B.vgroups[u].kind == "charged":
                part = B.vgroups[u].peri if d.group.kind == "peripheral" else B.vgroups[u].gen
                if not SubgroupGraph.from_generators([part], RANK).same_subgroup(
                    SubgroupGraph.from_generators([img], RANK)
                ):
                    raise GoodnessViolation(f"edge {e} does not match the charge at {u}")
                continue
            if not B.vgroups[u].graph().same_subgroup(
                SubgroupGraph.from_generators([img], RANK)
            ):
                raise GoodnessViolation(f"edge {e} does not transport exactly at {u}")


def classify(B: AGraph) -> list[Piece]:
    """Essential pieces with validated types; raises on a non-good shape."""
    B.validate()
    pieces = essential_pieces(B)
    for p in pieces:
        _validate_piece(B, p)
    return pieces


def is_good(B: AGraph) -> bool:
    try:
        classify(B)
        return True
    except GoodnessViolation:
        return False


def rank_good(B: AGraph) -> int:
    """r + sum over non-cyclic pieces of (v_full + 1), charged classes extra."""
    return sum(p.rank() for p in essential_pieces(B))


def grushko_sum(B: AGraph) -> int:
    return sum(p.rank() for p in essential_pieces(B))


# -- initial graphs -----------------------------------------------------------------


@dataclass(frozen=True)
class MeridianSpec:
    """A meridional generator: conjugator A-path plus a fiber letter index."""

    words: tuple[Word, ...]
    exps: tuple[int, ...]
    letter: int

    def __post_init__(self):
        if self.letter not in (1, 2):
            raise ValueError("meridian letter must be 1 or 2")
        if len(self.words) != len(self.exps) + 1:
            raise ValueError("path must alternate words and stable exponents")
        if not self.exps:
            raise ValueError("conjugator paths have positive length")

    @staticmethod
    def plain(letter: int, fiber_conjugator: Optional[Word] = None) -> "MeridianSpec":
        w = fiber_conjugator or Word.identity(RANK)
        # a fiber conjugator rides a pinching path of length two
        return MeridianSpec((w, Word.identity(RANK), Word.identity(RANK)), (1, -1), letter)

    @staticmethod
    def from_element(g: PatternElement, letter: int) -> "MeridianSpec":
        if g.is_fiber():
            return MeridianSpec.plain(letter, g.fiber_word())
        return MeridianSpec(g.words, g.exps, letter)

    def conjugator(self) -> PatternElement:
        pieces: list = [self.words[0]]
        for e, w in zip(self.exps, self.words[1:]):
            pieces.extend((e, w))
        return PatternElement.from_pieces(pieces)

    def generator(self) -> PatternElement:
        g = self.conjugator()
        return g * PatternElement.fiber(Word.gen(self.letter, RANK)) * ~g

    def __str__(self) -> str:
        parts = [str(self.words[0])]
        for e, w in zip(self.exps, self.words[1:]):
            parts.append("e" if e > 0 else "E")
            parts.append(str(w))
        return f"<{' | '.join(parts)} : x{self.letter}>"


def build_initial(specs: Sequence[MeridianSpec]) -> AGraph:
    """Wedge of subdivided intervals; terminal groups are the meridians."""
    B = AGraph()
    for spec in specs:
        prev = B.base
        k = len(spec.exps)
        for i, e in enumerate(spec.exps):
            last = i == k - 1
            nxt = B.new_vertex()
            B.add_edge(prev, nxt, e, spec.words[i], spec.words[k] if last else Word.identity(RANK))
            prev = nxt
        B.vgroups[prev] = VGroup.cyclic(Word.gen(spec.letter, RANK))
    return B


# -- foldedness ------------------------------------------------------------------------


def _image_of_edge_group(B: AGraph, f: int) -> SubgroupGraph:
    gens = [apply_boundary(B.typ(f), "alpha", g) for g in B.egroup(f).generators()]
    return SubgroupGraph.from_generators(gens, RANK)


def edge_group_target(B: AGraph, f: int) -> SubgroupGraph:
    """alpha_[f]-image of the maximal edge group at f: U_side n o^-1 B_u o."""
    Bu = B.vgroups[B.src(f)].graph()
    return intersection_with_conjugate(image_graph(B.typ(f)), Bu, ~B.o(f))


def find_IA_pair(B: AGraph) -> Optional[tuple[int, int, int, Word, Word]]:
    """(u, f1, f2, b, w) with o(f2) = b * o(f1) * w, w in the boundary image."""
    for u in sorted(B.vgroups):
        star = sorted(B.star(u), key=lambda f: (abs(f), -f))
        bu = B.vgroups[u].graph()
        for i in range(len(star)):
            for j in range(len(star)):
                if i == j:
                    continue
                f1, f2 = star[i], star[j]
                if B.typ(f1) != B.typ(f2):
                    continue
                wit = double_coset_witness(bu, B.o(f1), image_graph(B.typ(f1)), B.o(f2))
                if wit is not None:
                    return (u, f1, f2, wit[0], wit[1])
    return None


_CLASS_PRIORITY = {"full": 0, "almostfull": 1, "peripheral": 2, "charged": 2, "cyclic": 3, "trivial": 4}


def find_IIA_site(B: AGraph) -> Optional[tuple[int, SubgroupGraph]]:
    """A directed edge whose group is smaller than the pulled-back target."""
    sites = []
    for f in B.directed():
        u = B.src(f)
        if B.vgroups[u].is_trivial():
            continue
        target = edge_group_target(B, f)
        if target.subgroup_rank() == 0 and B.egroup(f).is_trivial():
            continue
        current = _image_of_edge_group(B, f)
        if current.same_subgroup(target):
            continue
        sites.append((_CLASS_PRIORITY[B.vgroups[u].kind], B.src(f), abs(f), -f, f, target))
    if not sites:
        return None
    sites.sort(key=lambda s: s[:4])
    return sites[0][4], sites[0][5]


def is_folded(B: AGraph) -> tuple[bool, list]:
    violations = []
    ia = find_IA_pair(B)
    if ia is not None:
        violations.append(("IA", ia[0], abs(ia[1]), abs(ia[2])))
    site = find_IIA_site(B)
    if site is not None:
        violations.append(("IIA", site[0]))
    return (not violations, violations)


# -- classification of intersections -----------------------------------------------------


def _classify_J(B: AGraph, f: int, J: SubgroupGraph) -> tuple[str, Optional[Word]]:
    """(kind, y-preimage generator) of the target edge group."""
    r = J.subgroup_rank()
    if r == 0:
        return "trivial", None
    if J.same_subgroup(image_graph(B.typ(f))):
        return "full", None
    if r == 1:
        b = J.basis_words()[0]
        pre = preimage(side_name(B.typ(f)), b)
        if pre is None:
            raise EngineError("intersection basis escaped the boundary image")
        e = EGroup.from_generator(pre)
        return e.kind, e.gen
    return "mixed", None


def _transport(B: AGraph, f: int, y_word: Word) -> Word:
    """Carry an edge-group element to the far vertex frame: t^-1 omega(c) t."""
    return _strict(~B.t(f) * apply_boundary(B.typ(f), "omega", y_word) * B.t(f))


# -- collapsing and unfolding --------------------------------------------------------------


def _piece_of(pieces: list[Piece], u: int) -> Optional[Piece]:
    for p in pieces:
        if u in p.vertices:
            return p
    return None


def unfold_edge(B: AGraph, f: int, into_u: int):
    """Trivialize the piece edge at the leaf src(f), per the three shapes."""
    u1 = B.src(f)
    u2 = B.dst(f)
    g1 = B.vgroups[u1]
    if g1.kind == "charged":
        # strip whichever part came through the edge, keep the other
        img = SubgroupGraph.from_generators(
            [B.o(f) * apply_boundary(B.typ(f), "alpha", c) * ~B.o(f) for c in B.egroup(f).generators()],
            RANK,
        )
        if SubgroupGraph.from_generators([g1.peri], RANK).same_subgroup(img):
            B.vgroups[u1] = VGroup.cyclic(g1.gen)
        elif SubgroupGraph.from_generators([g1.gen], RANK).same_subgroup(img):
            B.vgroups[u1] = VGroup.peripheral(g1.peri)
        else:
            raise EngineError(f"unfold at charged vertex {u1} with a foreign edge")
        B.edges[abs(f)].group = EGroup.trivial()
        return
    if g1.kind != "full":
        # case 1: the leaf group equals the carried edge group
        img = SubgroupGraph.from_generators(
            [B.o(f) * apply_boundary(B.typ(f), "alpha", c) * ~B.o(f) for c in B.egroup(f).generators()],
            RANK,
        )
        if not g1.graph().same_subgroup(img):
            raise EngineError(f"unfold case 1 shape mismatch at vertex {u1}")
        B.vgroups[u1] = VGroup.trivial()
        B.edges[abs(f)].group = EGroup.trivial()
        return
    g2 = B.vgroups[u2]
    if g2.kind == "full" or u2 == into_u:
        # case 2a
        i = 2 if B.typ(f) == 1 else 1
        defining = (
            g2.kind == "almostfull"
            and g2.graph().same_subgroup(
                SubgroupGraph.from_generators(
                    [_transport(B, f, Word.gen(j, RANK)) for j in (1, 2)], RANK
                )
            )
        )
        B.edges[abs(f)].group = EGroup.trivial()
        B.vgroups[u1] = VGroup.cyclic(B.o(f) * Word.gen(i, RANK) * ~B.o(f))
        if defining:
            # the far vertex loses its defining edge and keeps one class
            B.vgroups[u2] = VGroup.cyclic(_transport(B, f, Word.gen(2, RANK)))
        elif g2.kind not in ("full", "cyclic", "peripheral", "charged", "almostfull"):
            raise EngineError(f"unfold case 2a far group {g2.kind}")
        return
    # case 2b: far vertex not full, not the kept vertex; find the continuation
    piece_edges = [
        h for h in B.star(u2) if not B.egroup(h).is_trivial() and abs(h) != abs(f)
    ]
    if len(piece_edges) != 1:
        raise EngineError("unfold case 2b expects exactly one continuation edge")
    h = piece_edges[0]
    cont = SubgroupGraph.from_generators(
        [B.o(h) * apply_boundary(B.typ(h), "alpha", c) * ~B.o(h) for c in B.egroup(h).generators()],
        RANK,
    )
    found = None
    for j in (1, 2):
        tr = _transport(B, f, Word.gen(j, RANK))
        if cont.same_subgroup(SubgroupGraph.from_generators([tr], RANK)):
            found = j
            break
    if found is None:
        # peripheral continuation: keep the m_V transport on the far side
        tr = _transport(B, f, Word.parse("x1 x2", RANK))
        if cont.same_subgroup(SubgroupGraph.from_generators([tr], RANK)):
            B.edges[abs(f)].group = EGroup.trivial()
            B.vgroups[u1] = VGroup.cyclic(B.o(f) * Word.gen(2 if B.typ(f) == 1 else 1, RANK) * ~B.o(f))
            return
        raise EngineError("unfold case 2b continuation matches no boundary generator")
    W = _strict(B.o(f) * apply_boundary(B.typ(f), "alpha", Word.gen(found, RANK)) * ~B.o(f))
    w_conj, core = _conj_parts(W)
    other = 2 if abs(core.letters[0]) == 1 else 1
    hx = w_conj * Word.gen(other, RANK) * ~w_conj
    full_check = SubgroupGraph.from_generators([W, hx], RANK)
    if not full_check.is_full_free_group():
        raise EngineError("unfold case 2b complement is not the full fiber")
    B.edges[abs(f)].group = EGroup.trivial()
    B.vgroups[u1] = VGroup.cyclic(hx)
    if B.vgroups[u2].kind == "almostfull":
        # the far end loses its defining edge; it keeps the class carried on
        B.vgroups[u2] = VGroup.cyclic(_transport(B, f, Word.gen(found, RANK)))


def collapse_piece(B: AGraph, into_u: int, max_steps: int = 1000):
    """Unfold until the piece containing into_u has no nontrivial edges."""
    for _ in range(max_steps):
        pieces = essential_pieces(B)
        p = _piece_of(pieces, into_u)
        if p is None or not p.edges:
            return
        deg: dict[int, int] = {}
        for e in p.edges:
            deg[B.edges[e].src] = deg.get(B.edges[e].src, 0) + 1
            deg[B.edges[e].dst] = deg.get(B.edges[e].dst, 0) + 1
        leaves = [
            v for v in p.vertices if v != into_u and deg.get(v, 0) == 1
        ]
        if not leaves:
            raise EngineError("piece without a collapsible leaf")
        # smallest group first: cyclic/peripheral leaves before almost full, full last
        leaf = min(leaves, key=lambda v: (-_CLASS_PRIORITY.get(B.vgroups[v].kind, 9), v))
        edge = next(h for h in B.star(leaf) if not B.egroup(h).is_trivial())
        unfold_edge(B, edge, into_u)
    raise EngineError("collapse did not terminate")


def collapse_arms(B: AGraph, u: int, keep_geometric: int, max_steps: int = 1000):
    """Collapse every nontrivial branch at u except the kept edge."""
    for _ in range(max_steps):
        extra = [
            f for f in B.star(u) if not B.egroup(f).is_trivial() and abs(f) != keep_geometric
        ]
        if not extra:
            return
        f = extra[0]
        pieces = essential_pieces(B)
        p = _piece_of(pieces, u)
        assert p is not None
        branch = _branch_vertices(B, u, f, p)
        deg = {v: 0 for v in branch}
        for e in p.edges:
            if B.edges[e].src in deg:
                deg[B.edges[e].src] += 1
            if B.edges[e].dst in deg:
                deg[B.edges[e].dst] += 1
        leaves = [v for v in branch if deg[v] == 1]
        if not leaves:
            raise EngineError("arm branch without a leaf")
        leaf = min(leaves, key=lambda v: (-_CLASS_PRIORITY.get(B.vgroups[v].kind, 9), v))
        edge = next(h for h in B.star(leaf) if not B.egroup(h).is_trivial())
        unfold_edge(B, edge, u)
    raise EngineError("arm collapse did not terminate")


def _branch_vertices(B: AGraph, u: int, f: int, p: Piece) -> set[int]:
    """Piece vertices reachable from dst(f) without crossing u."""
    nontrivial = {e for e in p.edges}
    out = set()
    work = [B.dst(f)]
    while work:
        v = work.pop()
        if v == u or v in out:
            continue
        out.add(v)
        for h in B.star(v):
            if abs(h) in nontrivial:
                w = B.dst(h)
                if w != u and w not in out:
                    work.append(w)
    return out

# -- fold surgeries -----------------------------------------------------------------------


def _join_cyclics(B: AGraph, g1: VGroup, g2: VGroup) -> VGroup:
    """Join of two collapsed vertex groups; non-cyclic joins become full."""
    if g1.is_trivial():
        return g2
    if g2.is_trivial():
        return g1
    if "full" in (g1.kind, g2.kind):
        return VGroup.full()
    if g1.kind == g2.kind and g1.kind != "charged" and g1.graph().same_subgroup(g2.graph()):
        return g1
    if "charged" in (g1.kind, g2.kind):
        c, other = (g1, g2) if g1.kind == "charged" else (g2, g1)
        if other.kind == "cyclic" and SubgroupGraph.from_generators([c.gen], RANK).same_subgroup(other.graph()):
            return c
        if other.kind == "peripheral" and SubgroupGraph.from_generators([c.peri], RANK).same_subgroup(other.graph()):
            return c
    return VGroup.full()


def _do_IA(B: AGraph, u: int, f1: int, f2: int, b: Word, w_img: Word):
    """Elementarize the pair by auxiliary moves, collapse far pieces, fold."""
    c = preimage(side_name(B.typ(f1)), w_img)
    assert c is not None
    aux_A1(B, f2, ~b)
    aux_A2(B, f2, ~c)
    assert B.o(f1) == B.o(f2)
    y1, y2 = B.dst(f1), B.dst(f2)
    if B.t(f1) != B.t(f2):
        if y2 != B.base:
            aux_A0(B, y2, ~B.t(f1) * B.t(f2))
        else:
            aux_A0(B, y1, ~B.t(f2) * B.t(f1))
    assert B.t(f1) == B.t(f2)
    collapse_piece(B, y1)
    collapse_piece(B, y2)
    if not B.egroup(f1).is_trivial() or not B.egroup(f2).is_trivial():
        raise EngineError("folding edges kept nontrivial groups after collapse")
    keep, gone = y1, y2
    kf, gf = f1, f2
    if gone == B.base:
        keep, gone = gone, keep
        kf, gf = f2, f1
    B.vgroups[keep] = _join_cyclics(B, B.vgroups[keep], B.vgroups[gone])
    for e, d in B.edges.items():
        if e == abs(gf):
            continue
        if d.src == gone:
            d.src = keep
        if d.dst == gone:
            d.dst = keep
    del B.edges[abs(gf)]
    del B.vgroups[gone]


def _do_IIA(B: AGraph, f: int, J: SubgroupGraph):
    u, u2 = B.src(f), B.dst(f)
    jkind, jgen = _classify_J(B, f, J)
    src_kind = B.vgroups[u].kind

    if src_kind == "full":
        _iia_full_source(B, f, jkind)
        return
    if src_kind == "charged" and jkind == "full":
        _relabel_charged_to_almostfull(B, f)
        return
    if not B.egroup(f).is_trivial():
        raise EngineError("IIA site with a nontrivial edge group")
    if jkind == "full":
        raise EngineError("full edge target at a non-full vertex escaped IA scan")
    if jkind == "mixed" and src_kind != "charged":
        raise GoodnessViolation(f"mixed edge target at a {src_kind} vertex")
    if src_kind == "almostfull":
        if jkind == "cyclic":
            _iia_cyclic_target(B, f, jgen, almostfull_source=True)
        else:
            _iia_peripheral_target(B, f, jgen)
        return
    if src_kind == "cyclic":
        if jkind != "cyclic":
            raise GoodnessViolation(f"cyclic vertex with {jkind} edge target")
        _iia_cyclic_target(B, f, jgen, almostfull_source=False)
        return
    if src_kind == "peripheral":
        if jkind != "peripheral":
            raise GoodnessViolation(f"peripheral vertex with {jkind} edge target")
        _iia_peripheral_target(B, f, jgen)
        return
    if src_kind == "charged":
        if jkind == "peripheral":
            _iia_peripheral_target(B, f, jgen)
            return
        if jkind == "cyclic":
            far = B.vgroups[u2]
            transported = _transport(B, f, jgen)
            if far.is_trivial():
                B.edges[abs(f)].group = EGroup.from_generator(jgen)
                B.vgroups[u2] = VGroup.cyclic(transported)
                return
            if far.kind == "cyclic" and far.graph().same_subgroup(
                SubgroupGraph.from_generators([transported], RANK)
            ):
                B.edges[abs(f)].group = EGroup.from_generator(jgen)
                return
        # mixed targets or unmatched far classes: grow the source instead;
        # inside its anchored piece this trades the charge for a full vertex
        B.vgroups[u] = VGroup.full()
        return
    raise EngineError(f"IIA at a {src_kind} vertex")


def _iia_full_source(B: AGraph, f: int, jkind: str):
    """Case 1: the source is full, the edge group grows to all of A_e."""
    assert jkind == "full"
    u, u2 = B.src(f), B.dst(f)
    far = B.vgroups[u2]
    if far.kind == "full":
        B.edges[abs(f)].group = EGroup.full()
        return
    if far.is_trivial():
        B.edges[abs(f)].group = EGroup.full()
        B.vgroups[u2] = VGroup.almostfull(~B.t(f), side_name(B.typ(f), "omega"))
        return
    if far.kind in ("cyclic", "peripheral", "charged"):
        attached = [h for h in B.star(u2) if not B.egroup(h).is_trivial() and abs(h) != abs(f)]
        if not attached:
            B.edges[abs(f)].group = EGroup.full()
            B.vgroups[u2] = VGroup.full()
            return
        if len(attached) != 1:
            raise GoodnessViolation("cyclic vertex with several nontrivial edges")
        B.edges[abs(attached[0])].group = EGroup.trivial()
        B.edges[abs(f)].group = EGroup.full()
        B.vgroups[u2] = VGroup.almostfull(~B.t(f), side_name(B.typ(f), "omega"))
        return
    # far vertex almost full
    h = _defining_edge(B, u2)
    collapse_arms(B, u2, abs(h))
    h = _defining_edge(B, u2)
    if B.typ(h) == B.typ(f):
        B.edges[abs(f)].group = EGroup.full()
        B.vgroups[u2] = VGroup.full()
        return
    # opposite types: collapse the source piece, zero the label, push a
    # generator through, and leave an IA pair for the next iterations
    collapse_piece(B, u)
    aux_A1(B, f, ~B.o(f))
    keep = 2 if B.typ(f) == 1 else 1
    B.vgroups[u] = VGroup.cyclic(Word.gen(keep, RANK))
    B.vgroups[u2] = VGroup.full()


def _defining_edge(B: AGraph, u: int) -> int:
    g = B.vgroups[u]
    for h in B.star(u):
        if B.egroup(h).kind == "full":
            target = SubgroupGraph.from_generators(
                [B.o(h) * apply_boundary(B.typ(h), "alpha", y) * ~B.o(h) for y in (Word.gen(1, RANK), Word.gen(2, RANK))],
                RANK,
            )
            if g.graph().same_subgroup(target):
                return h
    raise EngineError(f"almost full vertex {u} has no defining edge")


def _iia_cyclic_target(B: AGraph, f: int, jgen: Word, almostfull_source: bool):
    """Cases 2 and 3: the edge group grows to a single y-conjugate."""
    u, u2 = B.src(f), B.dst(f)
    far = B.vgroups[u2]
    if far.kind == "full":
        raise EngineError("cyclic-target site with a full far end escaped the scan")
    if far.is_trivial():
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        B.vgroups[u2] = VGroup.cyclic(_transport(B, f, jgen))
        return
    # absorption: when the far vertex already carries the transported class
    # the fold just records the edge group, merging pieces (rank can drop;
    # this is how redundant meridional generators are discovered)
    transported = _transport(B, f, jgen)
    if far.kind == "cyclic" and far.graph().same_subgroup(
        SubgroupGraph.from_generators([transported], RANK)
    ):
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        return
    if far.kind == "almostfull" and far.graph().contains(transported):
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        return
    pieces = essential_pieces(B)
    p_u = _piece_of(pieces, u)
    p_u2 = _piece_of(pieces, u2)
    assert p_u is not None and p_u2 is not None
    if almostfull_source:
        # case 2b: collapse the far piece, detach arms, grow the source full
        collapse_piece(B, u2)
        h = _defining_edge(B, u)
        collapse_arms(B, u, abs(h))
        B.vgroups[u] = VGroup.full()
        return
    if p_u.kind == "cyclic" and p_u2.kind == "cyclic":
        collapse_piece(B, u)
        collapse_piece(B, u2)
        B.vgroups[u2] = VGroup.full()
        B.vgroups[u] = VGroup.almostfull(B.o(f), side_name(B.typ(f)))
        B.edges[abs(f)].group = EGroup.full()
        return
    if p_u.kind == "noncyclic":
        collapse_piece(B, u2)
        collapse_piece(B, u)
        B.vgroups[u] = VGroup.full()
        B.vgroups[u2] = VGroup.full()
        B.edges[abs(f)].group = EGroup.full()
        return
    # source piece cyclic, far piece non-cyclic: relocate the cyclic class
    # through the edge, detach the far vertex, and let later folds finish
    _restrict_to_single_piece_edge(B, u2)
    hprime = next(h for h in B.star(u2) if not B.egroup(h).is_trivial())
    for v in list(p_u.vertices):
        B.vgroups[v] = VGroup.trivial()
    for e in list(p_u.edges):
        B.edges[e].group = EGroup.trivial()
    B.vgroups[u2] = VGroup.cyclic(_transport(B, f, jgen))
    B.edges[abs(hprime)].group = EGroup.trivial()


def _restrict_to_single_piece_edge(B: AGraph, u2: int, max_steps: int = 1000):
    """Collapse piece branches at u2 until one nontrivial edge remains."""
    for _ in range(max_steps):
        attached = [h for h in B.star(u2) if not B.egroup(h).is_trivial()]
        if len(attached) <= 1:
            return
        pieces = essential_pieces(B)
        p = _piece_of(pieces, u2)
        assert p is not None
        # collapse a branch that contains no full vertex (an outward arm)
        for h in attached:
            branch = _branch_vertices(B, u2, h, p)
            if not any(B.vgroups[v].kind == "full" for v in branch):
                collapse_arms_branch(B, u2, h)
                break
        else:
            raise EngineError("every branch at the vertex carries a full vertex")
    raise EngineError("piece-edge restriction did not terminate")


def collapse_arms_branch(B: AGraph, u: int, f: int, max_steps: int = 1000):
    """Collapse the single branch beyond f toward u."""
    for _ in range(max_steps):
        if B.egroup(f).is_trivial():
            return
        pieces = essential_pieces(B)
        p = _piece_of(pieces, u)
        if p is None:
            return
        branch = _branch_vertices(B, u, f, p)
        if not branch:
            return
        deg = {v: 0 for v in branch}
        for e in p.edges:
            if B.edges[e].src in deg:
                deg[B.edges[e].src] += 1
            if B.edges[e].dst in deg:
                deg[B.edges[e].dst] += 1
        leaves = [v for v in branch if deg[v] == 1]
        if not leaves:
            return
        leaf = min(leaves, key=lambda v: (-_CLASS_PRIORITY.get(B.vgroups[v].kind, 9), v))
        edge = next(h for h in B.star(leaf) if not B.egroup(h).is_trivial())
        unfold_edge(B, edge, u)
    raise EngineError("branch collapse did not terminate")


def _relabel_charged_to_almostfull(B: AGraph, f: int):
    """A charged group that equals a boundary image conjugate is almost full.

    The site target being the whole image certifies the equality candidate;
    the edge becomes full and the far end grows to the full fiber group so
    the piece matches the non-cyclic template (rank is preserved: the two
    charged classes become the v_full + 1 count of the merged piece).
    """
    u, u2 = B.src(f), B.dst(f)
    side = side_name(B.typ(f))
    images = ps.ALPHA_IMAGES if side == "alpha" else ps.OMEGA_IMAGES
    conj_image = SubgroupGraph.from_generators(
        [B.o(f) * im * ~B.o(f) for im in images], RANK
    )
    if not B.vgroups[u].graph().same_subgroup(conj_image):
        raise GoodnessViolation("charged group properly contains a boundary image conjugate")
    B.vgroups[u] = VGroup.almostfull(B.o(f), side)
    B.edges[abs(f)].group = EGroup.full()
    if B.vgroups[u2].kind == "almostfull":
        collapse_arms(B, u2, abs(_defining_edge(B, u2)))
    B.vgroups[u2] = VGroup.full()


def _iia_peripheral_target(B: AGraph, f: int, jgen: Word):
    """Wrong-side meridian alignment: grow a collapsible peripheral arm.

    The boundary images share the conjugacy class of m_V, so a boundary
    conjugate can meet the opposite image in a conjugate of <m_V>.  The
    descent absorbs the site: a trivial far end becomes a peripheral arm,
    a far end already carrying the transported class absorbs it, and
    anything else escalates both ends to full vertices, which merges the
    pieces and drops the complexity on the full-edge count.
    """
    u, u2 = B.src(f), B.dst(f)
    far = B.vgroups[u2]
    transported = _transport(B, f, jgen)
    if far.is_trivial():
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        B.vgroups[u2] = VGroup.peripheral(transported)
        return
    if far.kind == "peripheral" and far.graph().same_subgroup(
        SubgroupGraph.from_generators([transported], RANK)
    ):
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        return
    if far.kind == "almostfull" and far.graph().contains(transported):
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        return
    if far.kind == "charged" and SubgroupGraph.from_generators([far.peri], RANK).same_subgroup(
        SubgroupGraph.from_generators([transported], RANK)
    ):
        B.edges[abs(f)].group = EGroup.from_generator(jgen)
        return
    if far.kind != "full":
        collapse_piece(B, u2)
        far = B.vgroups[u2]
        if far.kind == "peripheral" and far.graph().same_subgroup(
            SubgroupGraph.from_generators([transported], RANK)
        ):
            B.edges[abs(f)].group = EGroup.from_generator(jgen)
            return
        if far.kind == "cyclic":
            # the far class is unrelated: it keeps its own free factor and
            # additionally anchors the transported peripheral class
            B.vgroups[u2] = VGroup.charged(far.gen, transported)
            B.edges[abs(f)].group = EGroup.from_generator(jgen)
            return
        if far.kind == "charged":
            raise GoodnessViolation("charged vertex met a second unrelated charge")
    if B.vgroups[u].kind == "almostfull":
        collapse_arms(B, u, abs(_defining_edge(B, u)))
    if B.vgroups[u].kind != "full":
        B.vgroups[u] = VGroup.full()
    B.vgroups[u2] = VGroup.full()
    B.edges[abs(f)].group = EGroup.full()


# -- the descent ---------------------------------------------------------------------------


def fold_step(B: AGraph, max_inner: int = 200) -> tuple[str, AGraph]:
    """One complexity-decreasing composite move on a copy of B."""
    out = B.copy()
    before = out.complexity()
    desc = []
    for _ in range(max_inner):
        ia = find_IA_pair(out)
        if ia is not None:
            u, f1, f2, b, w = ia
            _do_IA(out, u, f1, f2, b, w)
            desc.append(f"IA@{u}")
        else:
            site = find_IIA_site(out)
            if site is None:
                if out.complexity() < before:
                    break
                raise DescentStall("graph is folded but the complexity did not drop")
            f, J = site
            _do_IIA(out, f, J)
            desc.append(f"IIA@{f}")
        if out.complexity() < before:
            break
    after = out.complexity()
    if not after < before:
        raise DescentStall(f"no complexity decrease: {before} -> {after}")
    out.log("+".join(desc), None, before, after)
    return "+".join(desc), out


@dataclass(frozen=True)
class GoodCertificate:
    """Machine-checkable record that the output subgroup is good."""

    rank: int
    factors: tuple[dict, ...]  # per piece: kind, size, generator strings
    assignments: tuple[int, ...]  # input generator index -> factor index
    peripheral_ok: bool

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "factors": list(self.factors),
            "assignments": list(self.assignments),
            "peripheralOk": self.peripheral_ok,
        }


def goodify(
    specs: Sequence[MeridianSpec], max_steps: int = 10_000
) -> tuple[AGraph, GoodCertificate]:
    """Fold the initial wedge into a folded good A-graph containing the input."""
    B = build_initial(specs)
    classify(B)
    for _ in range(max_steps):
        folded, _violations = is_folded(B)
        if folded:
            break
        _move, B = fold_step(B)
    else:
        raise DescentStall("goodify exceeded the step budget")
    classify(B)
    cert = build_certificate(B, specs)
    return B, cert


def build_certificate(B: AGraph, specs: Sequence[MeridianSpec]) -> GoodCertificate:
    pieces = classify(B)
    factors = []
    extracted = extract_generators(B)
    for idx, p in enumerate(pieces):
        gens = [str(g) for (pi, g) in extracted if pi == idx]
        size = 1 if p.kind == "cyclic" else p.v_full + 1
        factors.append(
            {
                "kind": p.kind,
                "size": size,
                "vertices": p.vertices,
                "generators": gens,
                "meridianCapable": p.kind == "noncyclic",
            }
        )
        for cv in p.charged:
            factors.append(
                {
                    "kind": "cyclic",
                    "size": 1,
                    "vertices": [cv],
                    "generators": [str(g) for (pi, g) in extracted if pi == ("charged", cv)],
                    "meridianCapable": False,
                }
            )
    assignments = []
    for spec in specs:
        assignments.append(_factor_of(B, pieces, spec))
    peripheral_ok = all(
        f["size"] >= 2 for f in factors if f["meridianCapable"]
    )
    return GoodCertificate(rank_good(B), tuple(factors), tuple(assignments), peripheral_ok)


def _factor_of(B: AGraph, pieces: list[Piece], spec: MeridianSpec) -> int:
    state = lift(B, spec.conjugator())
    if state is None:
        raise EngineError("input conjugator does not lift into the folded graph")
    u, pending = state
    core = pending * Word.gen(spec.letter, RANK) * ~pending
    if not B.vgroups[u].graph().contains(core):
        raise EngineError("input meridian escaped its vertex group after lifting")
    for idx, p in enumerate(pieces):
        if u in p.vertices:
            return idx
    raise EngineError("lift terminated at a trivial vertex")


# -- membership ----------------------------------------------------------------------------


def lift(B: AGraph, elt: PatternElement) -> Optional[tuple[int, Word]]:
    """Lift a group element through a folded A-graph from the base.

    Returns the terminal (vertex, pending fiber word) or None when the lift
    sticks, which certifies non-membership of any extension through that
    prefix.  Foldedness makes the lift deterministic on vertex-group cosets.
    """
    u = B.base
    pending = elt.words[0]
    for eps, word in zip(elt.exps, elt.words[1:]):
        moved = False
        for f in sorted(B.star(u), key=lambda f: (abs(f), -f)):
            if B.typ(f) != eps:
                continue
            wit = double_coset_witness(
                B.vgroups[u].graph(), B.o(f), image_graph(eps), pending
            )
            if wit is None:
                continue
            _b, w_img = wit
            c = preimage(side_name(eps), w_img)
            assert c is not None
            pending = ~B.t(f) * apply_boundary(eps, "omega", c) * word
            u = B.dst(f)
            moved = True
            break
        if not moved:
            return None
    return u, pending


def member(B: AGraph, elt: PatternElement) -> bool:
    state = lift(B, elt)
    if state is None:
        return False
    u, pending = state
    return u == B.base and B.vgroups[u].graph().contains(pending)


# -- generator extraction (the rank formula, constructively) --------------------------------


def extract_generators(B: AGraph) -> list[tuple[int, PatternElement]]:
    """A minimal meridional generating set, one batch per essential piece.

    Cyclic pieces contribute their transported generator; a non-cyclic
    piece contributes two conjugates at its first full vertex and one more
    per further full vertex along the spine, using that the opposite
    boundary image together with one extra fiber generator spans A_v.
    """
    out: list[tuple, ...] = []
    pieces = essential_pieces(B)
    for idx, p in enumerate(pieces):
        for cv in p.charged:
            mu = B.mu_to(cv)
            out.append((("charged", cv), mu * PatternElement.fiber(B.vgroups[cv].gen) * ~mu))
        if p.kind == "cyclic":
            u = p.vertices[0]
            mu = B.mu_to(u)
            out.append((idx, mu * PatternElement.fiber(B.vgroups[u].gen) * ~mu))
            continue
        fulls = _spine_full_order(B, p)
        first = fulls[0]
        mu = B.mu_to(first)
        for letter in (1, 2):
            out.append((idx, mu * PatternElement.fiber(Word.gen(letter, RANK)) * ~mu))
        for prev, (w, via) in zip(fulls, [(v, e) for v, e in _spine_steps(B, p, fulls)]):
            muw = B.mu_to(w)
            extra_letter = 1 if side_name(B.typ(via), "omega") == "omega" else 2
            extra = _strict(~B.t(via) * Word.gen(extra_letter, RANK) * B.t(via))
            span = [
                _transport(B, via, Word.gen(1, RANK)),
                _transport(B, via, Word.gen(2, RANK)),
                extra,
            ]
            check = SubgroupGraph.from_generators(
                [
                    ~B.t(via) * apply_boundary(B.typ(via), "omega", Word.gen(1, RANK)) * B.t(via),
                    ~B.t(via) * apply_boundary(B.typ(via), "omega", Word.gen(2, RANK)) * B.t(via),
                    extra,
                ],
                RANK,
            )
            if not check.is_full_free_group():
                raise EngineError("spine extension does not span the fiber")
            out.append((idx, muw * PatternElement.fiber(extra) * ~muw))
    return out


def _spine_full_order(B: AGraph, p: Piece) -> list[int]:
    fulls = [u for u in p.vertices if B.vgroups[u].kind == "full"]
    if len(fulls) <= 1:
        return fulls
    # order along the spine path
    adj: dict[int, list[int]] = {}
    for e in p.spine:
        d = B.edges[e]
        adj.setdefault(d.src, []).append(d.dst)
        adj.setdefault(d.dst, []).append(d.src)
    ends = [v for v, ns in adj.items() if len(ns) == 1]
    start = min(v for v in ends)
    order = [start]
    prev = None
    cur = start
    while True:
        nxts = [x for x in adj[cur] if x != prev]
        if not nxts:
            break
        prev, cur = cur, nxts[0]
        order.append(cur)
    return [v for v in order if B.vgroups[v].kind == "full"]


def _spine_steps(B: AGraph, p: Piece, fulls: list[int]) -> list[tuple[int, int]]:
    """(full vertex, incoming spine edge) pairs for fulls after the first."""
    out = []
    for prev, w in zip(fulls, fulls[1:]):
        via = None
        for e in p.spine:
            d = B.edges[e]
            if {d.src, d.dst} == {prev, w}:
                via = e if d.dst == w else -e
                break
        if via is None:
            raise EngineError("consecutive full vertices not joined by a spine edge")
        out.append((w, via))
    return out
