"""Quotient graphs of groups, self maps, and train track verification.

A tree of the relative outer space is represented only by its quotient: a
finite connected metric graph whose vertices are free or labeled by one
factor each (exactly one vertex per factor), with trivial edge groups, a
spanning tree, and marking words on the non-tree edges identifying the
fundamental group with G.  Paths carry optional factor-element turn data at
non-free vertices; two paths are *equivalent* when they project to the same
edge sequence once turn data is forgotten.

The self maps send edges to edge paths and move each factor vertex by a
(target, closed conjugating path, factor twist) triple.  On top of that sit
tightening, the bounded cancellation bound Lip * qvol, gate computation and
train track verification, transition spectra with their growth rate,
invariant-subgraph irreducibility, N-paths, and splitting checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParseError, PreconditionError, ValidationError
from .factors import FactorElement
from .words import EMPTY_WORD, FreeLetter, FreeProduct, Word


@dataclass(frozen=True)
class OE:
    """An oriented edge: the named edge traversed forward or backward."""

    edge: str
    fwd: bool = True

    def reverse(self) -> "OE":
        return OE(self.edge, not self.fwd)

    def token(self) -> str:
        return self.edge if self.fwd else self.edge[0].upper() + self.edge[1:]


@dataclass(frozen=True)
class Turn:
    """Non-trivial vertex-group element crossed at a non-free vertex."""

    element: FactorElement


class EdgePath:
    """An alternating sequence of oriented edges and interior turns."""

    __slots__ = ("items",)

    def __init__(self, items=()):
        self.items = tuple(items)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __eq__(self, other):
        return isinstance(other, EdgePath) and self.items == other.items

    def __hash__(self):
        return hash(self.items)

    def __bool__(self):
        return bool(self.items)

    def __repr__(self):
        return f"EdgePath<{len(self.items)} items>"

    def edges(self):
        return [it for it in self.items if isinstance(it, OE)]

    def edge_count(self) -> int:
        return sum(1 for it in self.items if isinstance(it, OE))

    def projection(self):
        """The quotient projection: orientation-preserving edge sequence
        with turn data forgotten."""
        return tuple((it.edge, it.fwd) for it in self.items if isinstance(it, OE))


EMPTY_PATH = EdgePath(())


@dataclass(frozen=True)
class EdgeDef:
    src: str
    dst: str
    length: float


class MarkedGraph:
    """Finite metric graph of groups with trivial edge groups.

    ``vertices`` maps name -> factor id or None (free vertex); each factor
    labels exactly one vertex.  ``edges`` maps name -> EdgeDef, ``tree`` is
    the spanning tree edge set, ``marking`` assigns a closed-loop word to
    every non-tree edge, and ``basepoint`` names a vertex used to read words
    off paths.
    """

    def __init__(self, group: FreeProduct, vertices, edges, tree, marking,
                 basepoint, name="graph"):
        self.G = group
        self.vertices = dict(vertices)
        self.edges = {n: EdgeDef(*spec) if not isinstance(spec, EdgeDef) else spec
                      for n, spec in edges.items()}
        self.tree = frozenset(tree)
        self.marking = dict(marking)
        self.basepoint = basepoint
        self.name = name
        self._validate()
        self._rose = self._rose_tables()

    # -- validation --------------------------------------------------------

    def _validate(self):
        if self.basepoint not in self.vertices:
            raise ValidationError(f"{self.name}: unknown basepoint {self.basepoint}")
        seen = {}
        for v, fid in self.vertices.items():
            if fid is not None:
                self.G.factor(fid)
                if fid in seen:
                    raise ValidationError(
                        f"{self.name}: factor {fid} labels both {seen[fid]} and {v}")
                seen[fid] = v
        missing = {f.id for f in self.G.factors} - set(seen)
        if missing:
            raise ValidationError(f"{self.name}: factors {sorted(missing)} have no vertex")
        for n, e in self.edges.items():
            if not n or not n[0].islower():
                raise ValidationError(f"{self.name}: edge name {n!r} must start lowercase")
            if e.src not in self.vertices or e.dst not in self.vertices:
                raise ValidationError(f"{self.name}: edge {n} has unknown endpoint")
            if e.length <= 0:
                raise ValidationError(f"{self.name}: edge {n} must have positive length")
        if not self.tree <= set(self.edges):
            raise ValidationError(f"{self.name}: tree contains unknown edges")
        if len(self.tree) != len(self.vertices) - 1:
            raise ValidationError(f"{self.name}: spanning tree has wrong size")
        reach = {self.basepoint}
        frontier = [self.basepoint]
        while frontier:
            v = frontier.pop()
            for n in self.tree:
                e = self.edges[n]
                for a, b in ((e.src, e.dst), (e.dst, e.src)):
                    if a == v and b not in reach:
                        reach.add(b)
                        frontier.append(b)
        if reach != set(self.vertices):
            raise ValidationError(f"{self.name}: spanning tree does not span")
        nontree = set(self.edges) - self.tree
        if set(self.marking) != nontree:
            raise ValidationError(
                f"{self.name}: marking must cover exactly the non-tree edges")

    def factor_vertex(self, fid: int) -> str:
        for v, f in self.vertices.items():
            if f == fid:
                return v
        raise ValidationError(f"{self.name}: no vertex for factor {fid}")

    # -- oriented incidence --------------------------------------------------

    def source(self, oe: OE) -> str:
        e = self.edges[oe.edge]
        return e.src if oe.fwd else e.dst

    def target(self, oe: OE) -> str:
        e = self.edges[oe.edge]
        return e.dst if oe.fwd else e.src

    def germs_at(self, v: str):
        out = []
        for n in sorted(self.edges):
            e = self.edges[n]
            if e.src == v:
                out.append(OE(n, True))
            if e.dst == v:
                out.append(OE(n, False))
        return out

    # -- path structure ---------------------------------------------------------

    def path_valid(self, p: EdgePath, reduced=True) -> bool:
        try:
            self.check_path(p, reduced=reduced)
            return True
        except ValidationError:
            return False

    def check_path(self, p: EdgePath, reduced=True):
        prev_edge: Optional[OE] = None
        pending_turn: Optional[Turn] = None
        for it in p.items:
            if isinstance(it, Turn):
                if prev_edge is None or pending_turn is not None:
                    raise ValidationError("turn data must sit strictly between edges")
                v = self.target(prev_edge)
                fid = self.vertices[v]
                if fid is None or it.element.factor_id != fid:
                    raise ValidationError(f"turn at {v} has wrong factor")
                self.G.factor(fid).validate_payload(it.element.payload)
                pending_turn = it
                continue
            if prev_edge is not None:
                here = self.target(prev_edge)
                if self.source(it) != here:
                    raise ValidationError("consecutive edges do not share a vertex")
                if reduced and pending_turn is None and it == prev_edge.reverse():
                    raise ValidationError("backtracking over a trivial turn")
            elif pending_turn is not None:
                raise ValidationError("path cannot start with a turn")
            prev_edge = it
            pending_turn = None
        if pending_turn is not None:
            raise ValidationError("path cannot end with a turn")

    def path_start(self, p: EdgePath) -> Optional[str]:
        for it in p.items:
            if isinstance(it, OE):
                return self.source(it)
        return None

    def path_end(self, p: EdgePath) -> Optional[str]:
        for it in reversed(p.items):
            if isinstance(it, OE):
                return self.target(it)
        return None

    def path_length(self, p: EdgePath) -> float:
        return sum(self.edges[it.edge].length for it in p.items if isinstance(it, OE))

    def reverse_path(self, p: EdgePath) -> EdgePath:
        out = []
        for it in reversed(p.items):
            if isinstance(it, OE):
                out.append(it.reverse())
            else:
                fid = it.element.factor_id
                inv = self.G.factor(fid).inv(it.element.payload)
                out.append(Turn(FactorElement(fid, inv)))
        return EdgePath(out)

    def tighten(self, p: EdgePath) -> EdgePath:
        """The unique reduced path homotopic rel endpoints; idempotent.

        Backtracks e . (trivial) . ebar collapse; adjacent turns merge in the
        vertex group and vanish when the product is the identity.
        """
        stack = []
        for it in p.items:
            if isinstance(it, Turn):
                if stack and isinstance(stack[-1], Turn):
                    top = stack.pop()
                    fid = it.element.factor_id
                    merged = self.G.factor(fid).mul(top.element.payload,
                                                    it.element.payload)
                    if merged is not None:
                        stack.append(Turn(FactorElement(fid, merged)))
                else:
                    stack.append(it)
                continue
            if stack and isinstance(stack[-1], OE) and stack[-1] == it.reverse():
                stack.pop()
            else:
                stack.append(it)
        while stack and isinstance(stack[-1], Turn):
            stack.pop()
        # a leading turn can surface when the input had boundary turns
        while stack and isinstance(stack[0], Turn):
            stack.pop(0)
        return EdgePath(stack)

    def subpaths(self, p: EdgePath, max_edges: int):
        """All contiguous subpaths with 1..max_edges edges (turns interior)."""
        idx = [i for i, it in enumerate(p.items) if isinstance(it, OE)]
        out = []
        for a in range(len(idx)):
            for b in range(a, min(a + max_edges, len(idx))):
                out.append(EdgePath(p.items[idx[a]:idx[b] + 1]))
        return out

    # -- projections as strings (fast containment scans) -------------------------

    @staticmethod
    def projection_tokens(p: EdgePath):
        return tuple(it.token() for it in p.items if isinstance(it, OE))

    @staticmethod
    def projection_str(p: EdgePath) -> str:
        return " ".join(MarkedGraph.projection_tokens(p))

    @staticmethod
    def contains_projection(haystack: EdgePath, needle: EdgePath) -> bool:
        h = " %s " % MarkedGraph.projection_str(haystack)
        n = " %s " % MarkedGraph.projection_str(needle)
        return n in h

    # -- words <-> paths -----------------------------------------------------------

    def _rose_tables(self):
        """Tables for the normalized layout: every free generator is the
        marking of exactly one non-tree loop at the basepoint, and every
        factor vertex hangs on a tree edge from the basepoint.  Graphs that
        are not of this shape still support everything except word->path."""
        loops = {}
        for n in sorted(set(self.edges) - self.tree):
            w = self.marking[n]
            if len(w) == 1 and isinstance(w.syllables[0], FreeLetter):
                syl = w.syllables[0]
                if syl.sign == 1 and syl.gen not in loops:
                    e = self.edges[n]
                    if e.src == self.basepoint and e.dst == self.basepoint:
                        loops[syl.gen] = n
        spokes = {}
        for fid in (f.id for f in self.G.factors):
            v = self.factor_vertex(fid)
            for n in sorted(self.tree):
                e = self.edges[n]
                if e.src == self.basepoint and e.dst == v:
                    spokes[fid] = OE(n, True)
                    break
                if e.dst == self.basepoint and e.src == v:
                    spokes[fid] = OE(n, False)
                    break
        ok = (len(loops) == self.G.free_rank
              and len(spokes) == len(self.G.factors))
        return {"ok": ok, "loops": loops, "spokes": spokes}

    def word_to_path(self, w: Word) -> EdgePath:
        """Edge path based at the basepoint reading the word, for normalized
        rose-shaped graphs: free letters traverse their loops, factor
        elements become spoke . (element) . spoke-reversed excursions."""
        if not self._rose["ok"]:
            raise PreconditionError(
                f"{self.name}: word->path needs the normalized rose layout")
        items = []
        for syl in w.syllables:
            if isinstance(syl, FreeLetter):
                items.append(OE(self._rose["loops"][syl.gen], syl.sign == 1))
            else:
                spoke = self._rose["spokes"][syl.factor_id]
                items.extend([spoke, Turn(syl), spoke.reverse()])
        path = self.tighten(EdgePath(items))
        return path

    def read_word(self, p: EdgePath) -> Word:
        """The group element read along a path: non-tree edges contribute
        their marking words, tree edges nothing, turns their elements."""
        raw = []
        for it in p.items:
            if isinstance(it, Turn):
                raw.append(it.element)
            elif it.edge not in self.tree:
                w = self.marking[it.edge]
                raw.extend(w.syllables if it.fwd else self.G.inverse(w).syllables)
        return self.G.reduce(raw)

    # -- textual path syntax ----------------------------------------------------

    def parse_path(self, text: str) -> EdgePath:
        """Tokens are edge names (capitalized first letter = reversed) and
        parenthesized factor elements: ``e2 h (a@1) H``."""
        text = text.strip()
        if text in ("", "()"):
            return EMPTY_PATH
        items = []
        for tok in text.split():
            if tok.startswith("(") and tok.endswith(")"):
                syl = self.G.parse_syllable(tok[1:-1])
                if not isinstance(syl, FactorElement):
                    raise ParseError(f"turn token {tok!r} is not a factor element")
                items.append(Turn(syl))
                continue
            name = tok[0].lower() + tok[1:]
            if name not in self.edges:
                raise ParseError(f"unknown edge {tok!r} in {self.name}")
            items.append(OE(name, not tok[0].isupper()))
        path = EdgePath(items)
        self.check_path(path, reduced=False)
        return path

    def format_path(self, p: EdgePath) -> str:
        if not p:
            return "()"
        toks = []
        for it in p.items:
            if isinstance(it, OE):
                toks.append(it.token())
            else:
                toks.append(f"({self.G.format_syllable(it.element)})")
        return " ".join(toks)


@dataclass
class TrainTrackStructure:
    """Per-vertex partition of the outgoing germs into gates.

    At non-free vertices the finite partition refines symbolically: the full
    germ set is (vertex group) x (edge germs) and two symbolic germs (g, d),
    (g', d') share a gate iff g == g' and d, d' share an edge gate.  This is
    exact when the factor conjugators of the generating map are trivial,
    because then twist iteration never identifies distinct cosets.
    """

    gates: dict  # vertex -> tuple of frozensets of OE

    def gate_of(self, v: str, germ: OE):
        for gate in self.gates[v]:
            if germ in gate:
                return gate
        raise ValidationError(f"germ {germ} missing from gates at {v}")

    def gate_count(self, v: str, factor_size=None) -> int:
        base = len(self.gates[v])
        if factor_size is None:
            return base
        return base * factor_size

    def is_legal_turn(self, graph: MarkedGraph, v: str, d1: OE, element, d2: OE) -> bool:
        """Turn (d1, g, d2) at v: legal iff the germs lie in distinct gates.
        At a non-free vertex a non-trivial g separates cosets, so the turn
        is legal whenever g is present even if d1, d2 share an edge gate."""
        if element is not None:
            return True
        return self.gate_of(v, d1) is not self.gate_of(v, d2)


@dataclass(frozen=True)
class FactorMapAction:
    """How the map moves one factor vertex: target factor, a closed
    conjugating path based at the target vertex, and the factor twist."""

    target: int
    conj_path: EdgePath
    twist: object  # FactorAutomorphism


@dataclass
class TrainTrackReport:
    is_train_track: bool
    witness: Optional[str]
    certificate: list  # (edge, description, legal) per crossed turn


@dataclass
class SplitReport:
    ok: bool
    failed_k: Optional[int] = None
    failed_junction: Optional[int] = None
    detail: str = ""


@dataclass
class NPathInventory:
    """Representatives of N-path classes found by exhaustion at a scale.

    ``stable_at_scale`` is evidence, not certification: the search is
    exhaustive only up to the edge bound it was run with.
    """

    scale: int
    classes: list  # (canonical projection key, witness EdgePath)
    stable_at_scale: bool

    def max_class_edges(self) -> int:
        return max((w.edge_count() for _, w in self.classes), default=0)


class GraphMap:
    """An edge-path valued self map of a marked graph.

    ``edge_images`` gives the image path of each edge in its forward
    orientation; reversed edges map to reversed paths.  ``factor_actions``
    moves each factor vertex.  The map is immutable; iterated reduced images
    are memoized internally.
    """

    def __init__(self, graph: MarkedGraph, edge_images, vertex_images=None,
                 factor_actions=None, name="f"):
        self.graph = graph
        self.name = name
        self.edge_images = {n: p for n, p in edge_images.items()}
        if set(self.edge_images) != set(graph.edges):
            raise ValidationError(f"{name}: need one image per edge")
        from .factors import FactorAutomorphism
        if factor_actions is None:
            factor_actions = {f.id: FactorMapAction(
                f.id, EMPTY_PATH, FactorAutomorphism.identity(f))
                for f in graph.G.factors}
        self.factor_actions = {
            fid: act if act.twist is not None else FactorMapAction(
                act.target, act.conj_path,
                FactorAutomorphism.identity(graph.G.factor(fid)))
            for fid, act in factor_actions.items()}
        if vertex_images is None:
            vertex_images = self._derive_vertex_images()
        self.vertex_images = dict(vertex_images)
        self._iter_cache = {}
        self._validate()

    def _derive_vertex_images(self):
        imgs = {}
        for fid, act in self.factor_actions.items():
            imgs[self.graph.factor_vertex(fid)] = self.graph.factor_vertex(act.target)
        for n in sorted(self.graph.edges):
            p = self.edge_images[n]
            e = self.graph.edges[n]
            if p:
                imgs.setdefault(e.src, self.graph.path_start(p))
                imgs.setdefault(e.dst, self.graph.path_end(p))
        for v in self.graph.vertices:
            imgs.setdefault(v, v)
        return imgs

    def _validate(self):
        g = self.graph
        for n in sorted(g.edges):
            p = self.edge_images[n]
            g.check_path(p, reduced=False)
            e = g.edges[n]
            if p:
                if g.path_start(p) != self.vertex_images[e.src] or \
                        g.path_end(p) != self.vertex_images[e.dst]:
                    raise ValidationError(
                        f"{self.name}: image of {n} does not match vertex images")
        for fid, act in self.factor_actions.items():
            tv = g.factor_vertex(act.target)
            if self.vertex_images[g.factor_vertex(fid)] != tv:
                raise ValidationError(
                    f"{self.name}: factor {fid} vertex image inconsistent")
            if act.conj_path:
                g.check_path(act.conj_path, reduced=False)
                if g.path_start(act.conj_path) != tv or g.path_end(act.conj_path) != tv:
                    raise ValidationError(
                        f"{self.name}: conjugating path of factor {fid} "
                        f"is not closed at {tv}")
            tw = act.twist
            if tw.source.id != fid or tw.target.id != act.target:
                raise ValidationError(f"{self.name}: twist of factor {fid} mismatched")

    def has_trivial_conjugators(self) -> bool:
        return all(not act.conj_path for act in self.factor_actions.values())

    # -- applying the map ---------------------------------------------------------

    def image_of_edge(self, oe: OE) -> EdgePath:
        p = self.edge_images[oe.edge]
        return p if oe.fwd else self.graph.reverse_path(p)

    def map_path(self, p: EdgePath) -> EdgePath:
        """Raw (untightened) image of a path."""
        items = []
        for it in p.items:
            if isinstance(it, OE):
                items.extend(self.image_of_edge(it).items)
            else:
                fid = it.element.factor_id
                act = self.factor_actions[fid]
                image = act.twist.apply(it.element)
                mid = [] if image is None else [Turn(image)]
                if act.conj_path:
                    items.extend(act.conj_path.items)
                    items.extend(mid)
                    items.extend(self.graph.reverse_path(act.conj_path).items)
                else:
                    items.extend(mid)
        return EdgePath(items)

    def f_sharp(self, p: EdgePath) -> EdgePath:
        return self.graph.tighten(self.map_path(p))

    def iterated_sharp(self, oe: OE, k: int) -> EdgePath:
        """Memoized f^k_# of a single oriented edge."""
        if k == 0:
            return EdgePath((oe,))
        key = (oe.edge, k)
        cached = self._iter_cache.get(key)
        if cached is None:
            prev = self.iterated_sharp(OE(oe.edge, True), k - 1)
            cached = self.f_sharp(prev)
            self._iter_cache[key] = cached
        return cached if oe.fwd else self.graph.reverse_path(cached)

    def iterate_sharp_path(self, p: EdgePath, k: int) -> EdgePath:
        for _ in range(k):
            p = self.f_sharp(p)
        return p

    def f_sharp_c(self, p: EdgePath, c: float) -> EdgePath:
        """Reduced image with both extremities of metric length c removed,
        snapping outward to edge boundaries; empty once 2c reaches the
        image length."""
        if c < 0:
            raise PreconditionError("trim length must be non-negative")
        q = self.f_sharp(p)
        total = self.graph.path_length(q)
        if 2 * c >= total and total > 0:
            return EMPTY_PATH
        if not q:
            return q
        items = list(q.items)
        eps = 1e-9
        cum = 0.0
        while items:
            it = items[0]
            if isinstance(it, Turn):
                items.pop(0)
                continue
            ln = self.graph.edges[it.edge].length
            if cum + ln <= c + eps:
                cum += ln
                items.pop(0)
            else:
                break
        cum = 0.0
        while items:
            it = items[-1]
            if isinstance(it, Turn):
                items.pop()
                continue
            ln = self.graph.edges[it.edge].length
            if cum + ln <= c + eps:
                cum += ln
                items.pop()
            else:
                break
        while items and isinstance(items[0], Turn):
            items.pop(0)
        while items and isinstance(items[-1], Turn):
            items.pop()
        return EdgePath(items)

    # -- induced automorphism ----------------------------------------------------

    def induced_automorphism(self, inverse_of=None, name=None):
        """Read the outer automorphism off the marking.

        Requires the normalized marking (each non-tree edge marked by a
        single distinct free letter) so that generator loops can be located;
        otherwise the offending edge is reported.  The result has no
        declared inverse unless ``inverse_of`` (an FpAutomorphism whose map
        this is) supplies one.
        """
        from .autos import FactorAction, FpAutomorphism
        g = self.graph
        loop_of = {}
        for n in sorted(set(g.edges) - g.tree):
            w = g.marking[n]
            if len(w) != 1 or not isinstance(w.syllables[0], FreeLetter) \
                    or w.syllables[0].sign != 1:
                raise ValidationError(
                    f"{self.name}: marking inconsistency at edge {n}: "
                    f"cannot express generators through marking {g.G.format_word(w)}")
            gen = w.syllables[0].gen
            if gen in loop_of:
                raise ValidationError(
                    f"{self.name}: marking inconsistency at edge {n}: "
                    f"free generator marked twice")
            loop_of[gen] = n
        if set(loop_of) != set(range(1, g.G.free_rank + 1)):
            raise ValidationError(
                f"{self.name}: marking inconsistency: not all free generators marked")
        free_images = []
        for gen in range(1, g.G.free_rank + 1):
            image = self.f_sharp(EdgePath((OE(loop_of[gen], True),)))
            free_images.append(g.read_word(image))
        actions = {}
        for fid, act in self.factor_actions.items():
            conj = g.read_word(act.conj_path) if act.conj_path else EMPTY_WORD
            actions[fid] = FactorAction(act.target, conj, act.twist)
        inverse_data = None
        if inverse_of is not None:
            inverse_data = (inverse_of.free_images, inverse_of.factor_actions)
        return FpAutomorphism(g.G, tuple(free_images), actions,
                              inverse_data=inverse_data,
                              name=name or f"[{self.name}]")

    def mated_check(self, phi) -> bool:
        """Whether this map represents phi: the automorphism read off the
        marking agrees with phi on every generator."""
        induced = self.induced_automorphism()
        for w in self.graph.G.generator_words():
            if induced.apply(w) != phi.apply(w):
                return False
        return True

    # -- metric bounds -------------------------------------------------------------

    def lip_qvol_bcc(self):
        """(Lipschitz bound, quotient volume, cancellation bound Lip*qvol)."""
        g = self.graph
        lip = 0.0
        for n in sorted(g.edges):
            ln = g.edges[n].length
            if ln == 0:
                raise ValidationError(f"{self.name}: zero-length edge {n}")
            lip = max(lip, g.path_length(self.edge_images[n]) / ln)
        qvol = sum(e.length for e in g.edges.values())
        return lip, qvol, lip * qvol

    def bcc_bound(self) -> float:
        return self.lip_qvol_bcc()[2]

    # -- gates and train tracks -------------------------------------------------

    def _require_trivial_conjugators(self, what: str):
        if not self.has_trivial_conjugators():
            raise PreconditionError(
                f"{self.name}: {what} requires trivial factor conjugating paths")

    def derivative(self, germ: OE) -> OE:
        """First oriented edge of the image path of a germ."""
        image = self.image_of_edge(germ)
        for it in image.items:
            if isinstance(it, OE):
                return it
        raise ValidationError(f"{self.name}: map collapses edge {germ.edge}")

    def gates_from_map(self, k_bound: int = 12) -> TrainTrackStructure:
        """Smallest equivalence on germs closed under identification by some
        iterate of the derivative map (up to the bound).  Non-free vertices
        refine symbolically by vertex-group cosets; with trivial conjugators
        twist iteration never merges distinct cosets, so the edge-germ
        partition is the whole computation.
        """
        self._require_trivial_conjugators("gate computation")
        g = self.graph
        germs = []
        for v in sorted(g.vertices):
            germs.extend(g.germs_at(v))
        parent = {d: d for d in germs}

        def find(d):
            while parent[d] != d:
                parent[d] = parent[parent[d]]
                d = parent[d]
            return d

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

        iterates = {d: d for d in germs}
        for _ in range(k_bound):
            iterates = {d: self.derivative(iterates[d]) for d in germs}
            by_vertex = {}
            for d in germs:
                by_vertex.setdefault(g.source(d), []).append(d)
            for same in by_vertex.values():
                seen = {}
                for d in same:
                    img = iterates[d]
                    if img in seen:
                        union(seen[img], d)
                    else:
                        seen[img] = d
        gates = {}
        for v in sorted(g.vertices):
            buckets = {}
            for d in g.germs_at(v):
                buckets.setdefault(find(d), []).append(d)
            gates[v] = tuple(frozenset(b) for _, b in
                             sorted(buckets.items(), key=lambda kv: min(
                                 (d.edge, not d.fwd) for d in kv[1])))
        return TrainTrackStructure(gates)

    def _crossed_turns(self, p: EdgePath):
        """(vertex, incoming-reversed germ, element-or-None, outgoing germ)
        for every interior vertex crossing of the path."""
        out = []
        prev: Optional[OE] = None
        element = None
        for it in p.items:
            if isinstance(it, Turn):
                element = it.element
                continue
            if prev is not None:
                v = self.graph.target(prev)
                out.append((v, prev.reverse(), element, it))
            prev = it
            element = None
        return out

    def is_train_track(self, k_bound: int = 12) -> TrainTrackReport:
        """Bounded train track verification.

        Checks that every edge image is reduced and crosses only legal
        turns, that inequivalent germs map to inequivalent germs, and that
        iterating edges up to the bound never creates backtracking.  A
        failure is a certificate; a pass is evidence at this bound.
        """
        g = self.graph
        self._require_trivial_conjugators("train track verification")
        tt = self.gates_from_map(k_bound)
        certificate = []
        for v in sorted(g.vertices):
            fid = g.vertices[v]
            if fid is None and len(tt.gates[v]) < 2:
                return TrainTrackReport(
                    False, f"vertex {v} has fewer than two gates", certificate)
        for n in sorted(g.edges):
            p = self.edge_images[n]
            if g.tighten(p) != p:
                return TrainTrackReport(
                    False, f"image of {n} is not reduced", certificate)
            for v, d1, element, d2 in self._crossed_turns(p):
                legal = tt.is_legal_turn(g, v, d1, element, d2)
                desc = (f"edge {n} crosses ({d1.token()}, "
                        f"{'-' if element is None else g.G.format_syllable(element)}, "
                        f"{d2.token()}) at {v}")
                certificate.append((n, desc, legal))
                if not legal:
                    return TrainTrackReport(False, f"illegal turn: {desc}", certificate)
        for v in sorted(g.vertices):
            gate_images = {}
            for gate in tt.gates[v]:
                rep = sorted(gate, key=lambda d: (d.edge, not d.fwd))[0]
                img_germ = self.derivative(rep)
                img_gate = tt.gate_of(g.source(img_germ), img_germ)
                key = (g.source(img_germ), img_gate)
                if key in gate_images and gate_images[key] is not gate:
                    return TrainTrackReport(
                        False,
                        f"germ condition fails at {v}: two gates collapse",
                        certificate)
                gate_images[key] = gate
        for n in sorted(g.edges):
            p = EdgePath((OE(n, True),))
            raw = p
            for k in range(1, k_bound + 1):
                raw = self.map_path(raw)
                tight = g.tighten(raw)
                if raw != tight:
                    return TrainTrackReport(
                        False,
                        f"f^{k} of edge {n} is not reduced without tightening",
                        certificate)
                raw = tight
        return TrainTrackReport(True, None, certificate)

    # -- transition spectrum ---------------------------------------------------------

    def transition_matrix(self):
        """Labels (sorted edge names) and the matrix M[e'][e] counting
        unoriented occurrences of e' in the image of e."""
        labels = sorted(self.graph.edges)
        index = {n: i for i, n in enumerate(labels)}
        m = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for n in labels:
            for it in self.edge_images[n].items:
                if isinstance(it, OE):
                    m[index[it.edge], index[n]] += 1
        return labels, m

    def transition_spectrum(self, rel_tol: float = 1e-12):
        """(labels, matrix, growth rate): the growth rate is the dominant
        irreducible diagonal block's Perron--Frobenius value, computed by
        shifted power iteration to the requested relative tolerance."""
        labels, m = self.transition_matrix()
        best = 0.0
        for block in _sccs(m):
            sub = m[np.ix_(block, block)]
            if len(block) == 1 and sub[0, 0] == 0:
                continue
            best = max(best, _pf_power_iteration(sub, rel_tol))
        return labels, m, best

    # -- invariant subgraphs ----------------------------------------------------------

    def o_irreducibility_check(self, max_edges_for_exhaustion: int = 16):
        """Enumerate map-invariant edge subsets; the map is irreducible
        relative to the decomposition iff no proper non-empty invariant
        subgraph supports a hyperbolic element (a circuit, or an embedded
        path joining two distinct non-free vertices).

        Returns (irreducible, witness_subgraph, witness_circuit).
        """
        g = self.graph
        names = sorted(g.edges)
        if len(names) > max_edges_for_exhaustion:
            raise PreconditionError(
                f"{self.name}: subgraph exhaustion capped at "
                f"{max_edges_for_exhaustion} edges")
        uses = {n: {it.edge for it in self.edge_images[n].items
                    if isinstance(it, OE)}
                for n in names}
        for r in range(1, len(names)):
            for combo in itertools.combinations(names, r):
                sub = set(combo)
                if any(not uses[n] <= sub for n in sub):
                    continue
                circuit = _find_circuit(g, sub)
                if circuit is not None:
                    return False, sorted(sub), circuit
                if _joins_two_nonfree(g, sub):
                    return False, sorted(sub), None
        return True, None, None

    # -- N-paths ------------------------------------------------------------------------

    def is_n_path(self, p: EdgePath) -> bool:
        """A path whose tightened image projects to the same quotient path.

        Endpoint orbits are checked first (quotient vertices must be kept);
        equality is projection equality, turn data forgotten.
        """
        if not p:
            return True
        g = self.graph
        if self.vertex_images[g.path_start(p)] != g.path_start(p):
            return False
        if self.vertex_images[g.path_end(p)] != g.path_end(p):
            return False
        return self.f_sharp(p).projection() == p.projection()

    def find_n_paths(self, max_edges: int = 6) -> NPathInventory:
        """Exhaust reduced quotient paths with up to ``max_edges`` edges,
        group N-paths by projection (normalized under reversal), and report
        representatives.  Where reducedness forces a turn at a non-free
        vertex a canonical non-trivial witness element is inserted; this is
        exact when the twist cannot map that witness onto the inverse of an
        adjacent image element, which holds for trivial conjugators.
        """
        g = self.graph
        classes = {}

        def witness_turn(v):
            fid = g.vertices[v]
            group = g.G.factor(fid)
            return Turn(FactorElement(fid, group.sample_nontrivial()))

        def grow(items, edges_used):
            if items:
                path = EdgePath(items)
                if self.is_n_path(path):
                    key = min(path.projection(),
                              g.reverse_path(path).projection())
                    classes.setdefault(key, path)
            if edges_used == max_edges:
                return
            last = None
            for it in reversed(items):
                if isinstance(it, OE):
                    last = it
                    break
            if last is None:
                starts = []
                for v in sorted(g.vertices):
                    starts.extend(g.germs_at(v))
                for d in starts:
                    grow([d], 1)
                return
            v = g.target(last)
            fid = g.vertices[v]
            for d in g.germs_at(v):
                if d == last.reverse():
                    if fid is None:
                        continue
                    grow(items + [witness_turn(v), d], edges_used + 1)
                else:
                    grow(items + [d], edges_used + 1)

        grow([], 0)
        ordered = sorted(classes.items())
        return NPathInventory(max_edges, ordered, len(ordered) <= 1)

    # -- splittings -----------------------------------------------------------------------

    def split_check(self, w: EdgePath, bricks, k_bound: int = 4) -> SplitReport:
        """A decomposition is a splitting when iterating the map keeps the
        brick images junction-cancellation-free at every power up to the
        bound; the first failing power and junction are reported."""
        joined = EdgePath(tuple(itertools.chain.from_iterable(
            b.items for b in bricks)))
        if joined != w:
            return SplitReport(False, detail="bricks do not concatenate to the path")
        g = self.graph
        images = list(bricks)
        whole = w
        for k in range(1, k_bound + 1):
            images = [self.f_sharp(b) for b in images]
            whole = self.f_sharp(whole)
            for j in range(len(images) - 1):
                left, right = images[j], images[j + 1]
                pair = EdgePath(left.items + right.items)
                if g.tighten(pair) != pair:
                    return SplitReport(False, failed_k=k, failed_junction=j,
                                       detail=f"cancellation at junction {j} "
                                              f"under power {k}")
            glued = EdgePath(tuple(itertools.chain.from_iterable(
                b.items for b in images)))
            if g.tighten(glued) != glued or glued != whole:
                return SplitReport(False, failed_k=k,
                                   detail="concatenated images differ from the "
                                          "image of the whole path")
        return SplitReport(True)

    # -- composition -----------------------------------------------------------------------

    def compose(self, other: "GraphMap") -> "GraphMap":
        """self after other, on the same graph."""
        if other.graph is not self.graph:
            raise ValidationError("graph map composition needs a shared graph")
        edge_images = {n: self.f_sharp(other.edge_images[n])
                       for n in self.graph.edges}
        actions = {}
        for fid, act_o in other.factor_actions.items():
            act_s = self.factor_actions[act_o.target]
            conj = self.graph.tighten(EdgePath(
                self.f_sharp(act_o.conj_path).items + act_s.conj_path.items))
            actions[fid] = FactorMapAction(act_s.target, conj,
                                           act_s.twist.compose(act_o.twist))
        vertex_images = {v: self.vertex_images[other.vertex_images[v]]
                         for v in self.graph.vertices}
        return GraphMap(self.graph, edge_images, vertex_images, actions,
                        name=f"{self.name}*{other.name}")


def identity_graph_map(graph: MarkedGraph, name="id") -> GraphMap:
    from .factors import FactorAutomorphism
    images = {n: EdgePath((OE(n, True),)) for n in graph.edges}
    actions = {f.id: FactorMapAction(
        f.id, EMPTY_PATH, FactorAutomorphism.identity(f)) for f in graph.G.factors}
    return GraphMap(graph, images, None, actions, name=name)


# -- helpers -------------------------------------------------------------------

def _sccs(m: np.ndarray):
    """Strongly connected components of the digraph e -> e' when e' occurs
    in the image of e; deterministic order (iterative Tarjan)."""
    n = m.shape[0]
    adj = [[i for i in range(n) if m[i, j] > 0] for j in range(n)]
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    out = []
    counter = [0]

    for root in range(n):
        if index[root] is not None:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter[0]
                counter[0] += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for i in range(pi, len(adj[v])):
                u = adj[v][i]
                if index[u] is None:
                    work[-1] = (v, i + 1)
                    work.append((u, 0))
                    advanced = True
                    break
                if on_stack[u]:
                    low[v] = min(low[v], index[u])
            if advanced:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp.append(u)
                    if u == v:
                        break
                out.append(sorted(comp))
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return out


def _pf_power_iteration(block: np.ndarray, rel_tol: float) -> float:
    """Perron--Frobenius value of a non-negative irreducible block.

    The identity shift makes the iteration matrix primitive, so the plain
    power method converges for periodic blocks too.
    """
    n = block.shape[0]
    shifted = block.astype(float) + np.eye(n)
    v = np.ones(n)
    prev = 0.0
    for _ in range(100000):
        w = shifted @ v
        lam = float(np.max(w))
        v = w / lam
        if abs(lam - prev) <= rel_tol * max(1.0, abs(lam)):
            # two consecutive Rayleigh quotients settle the estimate
            quotient = float((v @ (shifted @ v)) / (v @ v))
            return quotient - 1.0
        prev = lam
    raise ValidationError("power iteration failed to converge")


def _find_circuit(graph: MarkedGraph, edge_subset):
    """An edge cycle inside the subgraph, or None.  Loops count."""
    for n in sorted(edge_subset):
        e = graph.edges[n]
        if e.src == e.dst:
            return [n]
    parent = {}

    def find(v):
        parent.setdefault(v, v)
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for n in sorted(edge_subset):
        e = graph.edges[n]
        ra, rb = find(e.src), find(e.dst)
        if ra == rb:
            return _trace_cycle(graph, edge_subset, n)
        parent[rb] = ra
    return None


def _trace_cycle(graph: MarkedGraph, edge_subset, closing_edge):
    e = graph.edges[closing_edge]
    start, goal = e.src, e.dst
    prev = {start: None}
    frontier = [start]
    while frontier:
        v = frontier.pop(0)
        for n in sorted(edge_subset):
            if n == closing_edge:
                continue
            d = graph.edges[n]
            for a, b in ((d.src, d.dst), (d.dst, d.src)):
                if a == v and b not in prev:
                    prev[b] = (n, v)
                    frontier.append(b)
    path = [closing_edge]
    v = goal
    while v != start and v in prev and prev[v] is not None:
        n, u = prev[v]
        path.append(n)
        v = u
    return path


def _joins_two_nonfree(graph: MarkedGraph, edge_subset) -> bool:
    comp = {}

    def find(v):
        comp.setdefault(v, v)
        while comp[v] != v:
            comp[v] = comp[comp[v]]
            v = comp[v]
        return v

    for n in edge_subset:
        e = graph.edges[n]
        ra, rb = find(e.src), find(e.dst)
        if ra != rb:
            comp[rb] = ra
    nonfree = [v for v in comp if graph.vertices.get(v) is not None]
    roots = {}
    for v in nonfree:
        r = find(v)
        if r in roots:
            return True
        roots[r] = v
    return False
