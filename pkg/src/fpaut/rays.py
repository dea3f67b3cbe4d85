"""Attractive fixed rays of expanding maps and their brick splittings.

Given an expanding self map f of a marked rose-shaped graph, a base vertex
v in the basepoint orbit and a power m are searched such that, writing g
for the induced automorphism raised to m, the segments [g^k(v), g^(k+1)(v)]
attach with zero junction cancellation and the first segment splits with a
leading edge brick.  The nested segment words then spell an infinite
reduced word: an attractive fixed ray of the boundary action.

Segments split into bricks: regular bricks are single edges at the base
level (growing without bound under iteration), singular bricks are maximal
runs equivalent to the exceptional path class whose iterates keep their
length.  The occurrence scan looks for a trimmed image of a language word
inside one regular brick, and stabilizer reports combine the boundary
verdict with order and factor-direction data.

All "fixed" verdicts at finite depth are evidence; all "diverges" verdicts
are proofs.  Every report states this asymmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .autos import FpAutomorphism, fixes_boundary_point
from .errors import (JunctionCancellationError, PreconditionError,
                     SearchExhausted, ValidationError)
from .factors import FactorElement
from .graphs import EdgePath, GraphMap, MarkedGraph, OE
from .lamination import LaminaryLanguage, generate_language
from .words import EMPTY_WORD, FreeLetter, Ray, Word, syllable_key

TORSION_FLAG = "CONTRADICTS-TORSION-FREE-STABILIZER"


# -- base vertex search -----------------------------------------------------

@dataclass(frozen=True)
class BaseVertex:
    offset: Word       # group element u: the vertex is u . basepoint
    power: int         # m, with g = (induced automorphism)^m

    def describe(self, G) -> str:
        return f"v = {G.format_word(self.offset)} . basepoint, m = {self.power}"


def _offset_alphabet(G):
    """Deterministic syllable alphabet for offset enumeration: free letters,
    then factor elements (full enumeration for finite kinds, single
    generator letters for free kinds)."""
    out = []
    for j in range(1, G.free_rank + 1):
        out.append(FreeLetter(j, 1))
        out.append(FreeLetter(j, -1))
    for f in G.factors:
        if f.is_finite:
            payloads = f.elements()
        else:
            payloads = [((i, 1),) for i in range(1, f.rank + 1)]
            payloads += [((i, -1),) for i in range(1, f.rank + 1)]
        for p in sorted(payloads, key=lambda p: p if isinstance(p, tuple) else (p,)):
            out.append(FactorElement(f.id, p))
    return out


def _enumerate_offsets(graph: MarkedGraph, radius: float):
    """Reduced offset words u with path metric <= radius, ordered by
    syllable count then syllable keys (the search tie-break)."""
    G = graph.G
    alphabet = _offset_alphabet(G)
    found = [EMPTY_WORD]
    frontier = [EMPTY_WORD]
    while frontier:
        nxt = []
        for w in frontier:
            for syl in alphabet:
                cand = G.reduce(w.syllables + (syl,))
                if len(cand) != len(w) + 1:
                    continue
                if graph.path_length(graph.word_to_path(cand)) > radius + 1e-9:
                    continue
                nxt.append(cand)
        seen = set()
        ordered = []
        for w in sorted(nxt, key=lambda w: w.sort_key()):
            if w.syllables not in seen:
                seen.add(w.syllables)
                ordered.append(w)
        found.extend(ordered)
        frontier = ordered
    return found


def find_base_vertex(f: GraphMap, radius: float = 2.0, power_cap: int = 4,
                     probe_iterations: int = 3) -> BaseVertex:
    """Search the basepoint orbit for a ray base.

    Candidates are enumerated vertex-major (offsets by length, then
    lexicographically by syllable keys) and for each vertex the least power
    m <= power_cap is taken.  A candidate passes when g = phi^m moves it,
    the first two segments join without cancellation (as does the path from
    the basepoint into the first segment, so the ray word reads literally),
    the first brick of the adapted splitting is an edge, and segment
    lengths grow for the probe iterations.
    """
    graph = f.graph
    G = graph.G
    phi = f.induced_automorphism()
    powers = {}
    maps = {}

    def phi_m(m):
        if m not in powers:
            acc = phi
            for _ in range(m - 1):
                acc = phi.compose(acc)
            powers[m] = acc
        return powers[m]

    def map_m(m):
        if m not in maps:
            acc = f
            for _ in range(m - 1):
                acc = f.compose(acc)
            maps[m] = acc
        return maps[m]

    for offset in _enumerate_offsets(graph, radius):
        for m in range(1, power_cap + 1):
            g = phi_m(m)
            w1 = g.apply(offset)
            w1, _ = G.concat(G.inverse(offset), w1)
            if not w1:
                continue
            _, base_cancel = G.concat(offset, w1)
            if base_cancel:
                continue
            w_prev = w1
            lengths = [graph.path_length(graph.word_to_path(w1))]
            ok = True
            for _ in range(probe_iterations):
                w_next = g.apply(w_prev)
                _, cancel = G.concat(w_prev, w_next)
                if cancel:
                    ok = False
                    break
                lengths.append(graph.path_length(graph.word_to_path(w_next)))
                w_prev = w_next
            if not ok or any(b <= a for a, b in zip(lengths, lengths[1:])):
                continue
            try:
                splitting = adapted_splitting(map_m(m), graph.word_to_path(w1))
            except ValidationError:
                continue
            first_path, first_tag = splitting.bricks[0]
            if first_tag != "regular" or first_path.edge_count() != 1:
                continue
            return BaseVertex(offset, m)
    raise SearchExhausted(
        f"no base vertex within radius {radius} and power cap {power_cap}",
        radius=radius, power_cap=power_cap)


# -- brick splittings ----------------------------------------------------------

@dataclass
class BrickSplitting:
    """Decomposition of a segment into tagged bricks.

    ``level`` 0 is the fresh splitting (regular bricks are single edges);
    iterating maps each brick through the working map and inherits tags, so
    higher levels have long regular bricks and length-stable singular ones.
    """

    segment: EdgePath
    bricks: list  # (EdgePath, "regular" | "singular")
    level: int = 0

    def tags(self):
        return [t for _, t in self.bricks]

    def singular_lengths(self, graph: MarkedGraph):
        return [graph.path_length(b) for b, t in self.bricks if t == "singular"]

    def max_singular_length(self, graph: MarkedGraph) -> float:
        return max(self.singular_lengths(graph), default=0.0)

    def validate(self, graph: MarkedGraph):
        if not self.bricks:
            raise ValidationError("empty splitting")
        first_path, first_tag = self.bricks[0]
        if first_tag != "regular":
            raise ValidationError("first brick must be regular")
        if self.level == 0 and first_path.edge_count() != 1:
            raise ValidationError("first brick must be a single edge")
        for (_, t1), (_, t2) in zip(self.bricks, self.bricks[1:]):
            if t1 == t2 == "singular":
                raise ValidationError("two adjacent singular bricks")

    def iterate(self, working_map: GraphMap) -> "BrickSplitting":
        bricks = [(working_map.f_sharp(b), t) for b, t in self.bricks]
        return BrickSplitting(working_map.f_sharp(self.segment), bricks,
                              self.level + 1)


def adapted_splitting(working_map: GraphMap, segment: EdgePath,
                      inventory=None, validate_power: int = 4) -> BrickSplitting:
    """Greedy maximal decomposition of a segment into edge bricks and
    exceptional-path bricks.

    At each position the longest subpath (up to the inventory scale) that
    the map keeps equivalent to itself becomes a singular brick; matched
    runs that are a bare single edge stay regular, so fixed edges do not
    force singular tags.  The result must start with a regular edge and is
    validated as a genuine splitting up to ``validate_power``.
    """
    graph = working_map.graph
    if inventory is None:
        inventory = working_map.find_n_paths(6)
    cap = max(inventory.max_class_edges(), 2)
    idx = [i for i, it in enumerate(segment.items) if isinstance(it, OE)]
    n = len(idx)
    if n == 0:
        raise ValidationError("cannot split an empty segment")
    bricks = []
    pos = 0
    while pos < n:
        matched = None
        for span in range(min(cap, n - pos), 1, -1):
            sub = EdgePath(segment.items[idx[pos]:idx[pos + span - 1] + 1])
            if working_map.is_n_path(sub):
                matched = (sub, span)
                break
        if matched is not None:
            bricks.append((matched[0], "singular"))
            pos += matched[1]
        else:
            sub = EdgePath(segment.items[idx[pos]:idx[pos] + 1])
            bricks.append((sub, "regular"))
            pos += 1
    merged = []
    for brick in bricks:
        if merged and merged[-1][1] == "singular" and brick[1] == "singular":
            prev = merged.pop()
            joined = EdgePath(prev[0].items + brick[0].items)
            if not working_map.is_n_path(joined):
                raise ValidationError(
                    "adjacent exceptional bricks do not merge to an "
                    "exceptional path (map not appropriate at this scale)")
            merged.append((joined, "singular"))
        else:
            merged.append(brick)
    splitting = BrickSplitting(segment, merged, 0)
    splitting.validate(graph)
    report = working_map.split_check(segment, [b for b, _ in merged],
                                     validate_power)
    if not report.ok:
        raise ValidationError(
            f"greedy decomposition is not a splitting: {report.detail}")
    return splitting


# -- the attractive ray -----------------------------------------------------------

class AttractiveRay:
    """The nested-segment ray based at offset . basepoint.

    ``segments[j]`` is the word of [g^j(v), g^(j+1)(v)]; junction-free
    concatenation is verified whenever a segment is added, so the word form
    read from the basepoint is a literal concatenation and its prefixes are
    nested by construction.
    """

    def __init__(self, f: GraphMap, base: BaseVertex):
        self.f = f
        self.base = base
        self.graph = f.graph
        self.G = f.graph.G
        self.phi = f.induced_automorphism()
        self.g = self.phi.power(base.power) if base.power > 1 else self.phi
        working = f
        for _ in range(base.power - 1):
            working = f.compose(working)
        self.working_map = working
        self.segments: list[Word] = []
        self._word_syllables = list(base.offset.syllables)
        self._inventory = working.find_n_paths(6)
        self._splittings: dict[int, BrickSplitting] = {}
        self._iterated_bricks: dict[int, list] = {}
        w1 = self.g.apply(base.offset)
        w1, _ = self.G.concat(self.G.inverse(base.offset), w1)
        if not w1:
            raise PreconditionError("base vertex is fixed; no ray grows from it")
        _, cancel = self.G.concat(base.offset, w1)
        if cancel:
            raise JunctionCancellationError(0, cancel)
        self._append_segment(w1)
        self.ray = Ray(self.G, self._extend, label="attractive-ray")

    def _append_segment(self, w: Word):
        if self.segments:
            _, cancel = self.G.concat(self.segments[-1], w)
            if cancel:
                raise JunctionCancellationError(len(self.segments), cancel)
        self.segments.append(w)
        self._word_syllables.extend(w.syllables)

    def extend_to_level(self, k: int):
        while len(self.segments) < k:
            self._append_segment(self.g.apply(self.segments[-1]))

    def _extend(self, current: Word, target: int) -> Word:
        while len(self._word_syllables) < target:
            self.extend_to_level(len(self.segments) + 1)
        return Word(tuple(self._word_syllables))

    def word_prefix(self, n: int) -> Word:
        return self.ray.prefix(n)

    def segment_path(self, level: int) -> EdgePath:
        """1-based level: the quotient path of segment [g^(k-1) v, g^k v]."""
        self.extend_to_level(level)
        return self.graph.word_to_path(self.segments[level - 1])

    def splitting(self, level: int) -> BrickSplitting:
        """Fresh (level-0) adapted splitting of the given segment."""
        if level not in self._splittings:
            self._splittings[level] = adapted_splitting(
                self.working_map, self.segment_path(level), self._inventory)
        return self._splittings[level]

    def iterated_bricks(self, level: int):
        """Bricks of segment ``level`` as iterates of the first segment's
        splitting: level k carries the images of the base bricks with their
        tags, the growth-carrying view of the ray.  Memoized level by level."""
        cached = self._iterated_bricks.get(level)
        if cached is not None:
            return cached
        if level == 1:
            bricks = list(self.splitting(1).bricks)
        else:
            prev = self.iterated_bricks(level - 1)
            bricks = [(self.working_map.f_sharp(b), t) for b, t in prev]
        self._iterated_bricks[level] = bricks
        return bricks

    def path_with_bricks(self, levels: int):
        """Concatenated quotient path of the first ``levels`` segments plus
        (start, end, tag) edge-index spans of their iterated bricks."""
        items = []
        spans = []
        edge_pos = 0
        for level in range(1, levels + 1):
            for brick, tag in self.iterated_bricks(level):
                count = brick.edge_count()
                spans.append((edge_pos, edge_pos + count, tag))
                edge_pos += count
                items.extend(brick.items)
        return EdgePath(items), spans


def build_ray(f: GraphMap, base: BaseVertex, levels: int,
              validate_splittings_to: int = 0) -> AttractiveRay:
    """Materialize the ray through g^levels; every junction is verified as
    segments attach.  Fresh splittings are computed lazily; pass
    ``validate_splittings_to`` to validate brick invariants eagerly up to
    that level (splitting a level costs iterated images of the whole
    segment, which grows geometrically)."""
    ray = AttractiveRay(f, base)
    ray.extend_to_level(max(levels, 1))
    for level in range(1, validate_splittings_to + 1):
        ray.splitting(level).validate(ray.graph)
    return ray


def max_singular_length(ray: AttractiveRay, through_level: int):
    """Largest singular brick seen up to the level, plus boundedness
    evidence: iterated singular bricks must keep the base-level maximum."""
    l0 = 0.0
    for level in range(1, through_level + 1):
        l0 = max(l0, ray.splitting(level).max_singular_length(ray.graph))
    bounded = True
    for level in range(1, through_level + 1):
        for brick, tag in ray.iterated_bricks(level):
            if tag == "singular" and ray.graph.path_length(brick) > l0 + 1e-9:
                bounded = False
    return l0, bounded


# -- occurrence scan --------------------------------------------------------------

@dataclass
class OccurrenceReport:
    found: bool
    position: Optional[int] = None      # edge index into the scanned ray path
    pumped_word: Optional[EdgePath] = None
    detail: str = ""


def _find_occurrences(hay_tokens, needle_tokens):
    if not needle_tokens:
        return []
    out = []
    n = len(needle_tokens)
    for i in range(len(hay_tokens) - n + 1):
        if hay_tokens[i:i + n] == needle_tokens:
            out.append(i)
    return out


def occurrence_in_regular_brick(ray: AttractiveRay, u: EdgePath, h: GraphMap,
                                trim: float, budget: int = 10000) -> OccurrenceReport:
    """Pump u to U = u u0 u with a long middle and scan the ray for the
    trimmed image of u landing wholly inside one regular brick.

    u must belong to the laminary language of the ray's map; u0 is cut from
    the ray between two occurrences of u, far enough apart that the image
    of the middle outweighs the largest singular brick plus both trims.
    'not found' within the budget is inconclusive evidence, never a proof.
    """
    graph = ray.graph
    lang = generate_language(ray.working_map, max(u.edge_count(), 2), 20)
    if u not in lang:
        raise PreconditionError("u is not in the laminary language of the map")
    l0, _ = max_singular_length(ray, min(len(ray.segments), 4))

    levels = 1
    while True:
        path, spans = ray.path_with_bricks(levels)
        if path.edge_count() >= budget or levels >= 24:
            break
        levels += 1
    tokens = MarkedGraph.projection_tokens(path)
    u_tokens = MarkedGraph.projection_tokens(u)
    occs = _find_occurrences(tokens, u_tokens)
    if len(occs) < 2:
        raise PreconditionError(
            "language too shallow to supply a middle word: fewer than two "
            f"occurrences of u within budget {budget}")

    idx = [i for i, it in enumerate(path.items) if isinstance(it, OE)]

    def subpath_by_edges(a, b):
        # edges a..b-1 inclusive of interior turns
        return EdgePath(path.items[idx[a]:idx[b - 1] + 1])

    pumped = None
    threshold = l0 + 2 * trim
    for first in range(len(occs) - 1):
        for second in range(first + 1, len(occs)):
            mid_start = occs[first] + len(u_tokens)
            mid_end = occs[second]
            if mid_end <= mid_start:
                continue
            u0 = subpath_by_edges(mid_start, mid_end)
            if graph.path_length(h.f_sharp(u0)) > threshold:
                pumped = subpath_by_edges(occs[first], mid_end + len(u_tokens))
                break
        if pumped is not None:
            break
    if pumped is None:
        raise PreconditionError(
            "language too shallow to supply a middle word longer than "
            f"{threshold} after mapping")

    image_u = h.f_sharp_c(u, trim)
    if not image_u:
        big = h.f_sharp_c(pumped, trim)
        big_occs = _find_occurrences(tokens, MarkedGraph.projection_tokens(big))
        if big_occs:
            return OccurrenceReport(True, big_occs[0], pumped,
                                    detail="trimmed image of u is empty; "
                                           "the pumped image occurs")
        return OccurrenceReport(False, None, pumped,
                                detail="pumped image not found within budget")
    needle = MarkedGraph.projection_tokens(image_u)
    for pos in _find_occurrences(tokens, needle):
        for start, end, tag in spans:
            if tag == "regular" and start <= pos and pos + len(needle) <= end:
                return OccurrenceReport(True, pos, pumped,
                                        detail=f"inside regular brick "
                                               f"[{start}, {end})")
    return OccurrenceReport(False, None, pumped,
                            detail="no occurrence inside a regular brick "
                                   "within budget (inconclusive)")


# -- stabilizer reports --------------------------------------------------------------

@dataclass
class StabCheckReport:
    """Finite-depth stabilizer probe for one candidate automorphism.

    'fixed' verdicts are evidence at the stated depth; 'diverges' verdicts
    are proofs.  A finite-order non-identity candidate that preserves every
    factor and still reports fixed is flagged for escalation: the expected
    structure of the stabilizer leaves no room for torsion.
    """

    name: str
    fixed: bool
    depth: int
    diverges_at: Optional[int]
    order: Optional[int]
    order_cap: int
    factor_direction: bool
    preserves_each_factor: bool
    flags: list = field(default_factory=list)

    def verdict_line(self) -> str:
        if self.fixed:
            return f"fixed-to-depth {self.depth} (evidence, not proof)"
        return f"diverges-at {self.diverges_at} (proof)"

    def order_line(self) -> str:
        return str(self.order) if self.order is not None else f"> {self.order_cap}"


def stab_check(psi: FpAutomorphism, x: Ray, depth: int,
               order_cap: int = 12) -> StabCheckReport:
    ok, witness = psi.verify()
    if not ok:
        raise PreconditionError(f"candidate does not verify: {witness}")
    verdict = fixes_boundary_point(psi, x, depth)
    order = psi.order(order_cap)
    flags = []
    if verdict.fixed and order is not None and order > 1 \
            and psi.preserves_each_factor():
        flags.append(TORSION_FLAG)
    return StabCheckReport(
        name=psi.name,
        fixed=verdict.fixed,
        depth=depth,
        diverges_at=verdict.diverges_at,
        order=order,
        order_cap=order_cap,
        factor_direction=psi.is_factor_direction(),
        preserves_each_factor=psi.preserves_each_factor(),
        flags=flags,
    )
