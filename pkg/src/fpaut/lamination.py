"""Depth-bounded laminary language of an expanding graph map.

The attractive lamination of an expanding irreducible map is materialized
only through its laminary language: the set of (orbits of) finite edge
paths occurring in some iterated edge image.  At depth L this is the set of
subpaths with at most L edges of the reduced iterates, closed under
subpaths and reversal.  Membership is at the quotient-projection level
(turn data forgotten); one witness path with turn data is retained per
word.

On top of the language sit the generation property (every word occurs in
iterates of every expanding edge), the quasi-periodicity window of leaf
segments, and the stabilization test for candidate lamination-preserving
maps: trim the image by the cancellation bound and ask whether it stays in
the language.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import PreconditionError
from .graphs import EMPTY_PATH, EdgePath, GraphMap, MarkedGraph, OE

PROJ_SEP = " "


def _proj_str(p: EdgePath) -> str:
    return MarkedGraph.projection_str(p)


def expanding_edges(f: GraphMap):
    """Edges of the dominant irreducible diagonal block of the transition
    matrix: the stratum whose iterates generate the lamination."""
    import numpy as np
    from .graphs import _pf_power_iteration, _sccs

    labels, m = f.transition_matrix()
    best, best_block = 0.0, []
    for block in _sccs(m):
        sub = m[np.ix_(block, block)]
        if len(block) == 1 and sub[0, 0] == 0:
            continue
        pf = _pf_power_iteration(sub, 1e-12)
        if pf > best + 1e-12:
            best, best_block = pf, block
    return [labels[i] for i in best_block]


@dataclass
class LaminaryLanguage:
    """Word set of the lamination at a fixed depth.

    ``members`` maps each projection key (a token string) to one witness
    EdgePath carrying turn data; both orientations of every word are
    present (reversal closure).  ``origin`` records which iterate produced
    each word first.
    """

    source: GraphMap
    depth: int
    members: dict = field(default_factory=dict)
    origin: dict = field(default_factory=dict)
    saturated: bool = False
    saturation_k: Optional[int] = None
    kmax_used: int = 0
    train_track_warning: Optional[str] = None

    def __contains__(self, p: EdgePath) -> bool:
        return _proj_str(p) in self.members

    def __len__(self):
        return len(self.members)

    def words(self):
        return sorted(self.members)

    def witness(self, key: str) -> EdgePath:
        return self.members[key]

    def count_by_length(self):
        out = {}
        for key in self.members:
            n = len(key.split(PROJ_SEP)) if key else 0
            out[n] = out.get(n, 0) + 1
        return dict(sorted(out.items()))


def generate_language(f: GraphMap, depth: int, kmax: int = 20) -> LaminaryLanguage:
    """All subpaths with at most ``depth`` edges of the reduced iterates
    f^k(e), k <= kmax, over every edge, closed under reversal.

    The saturation flag is set at the first k whose subwords add nothing
    new, provided each edge's own iterate stream is provably settled: the
    image is literally fixed, or already contains every edge its iterates
    can ever use.  Iteration stops there.
    """
    g = f.graph
    report = None
    tt = f.is_train_track(min(kmax, 12)) if f.has_trivial_conjugators() else None
    if tt is None:
        report = "train track status unknown (non-trivial factor conjugators)"
    elif not tt.is_train_track:
        report = f"not verified as a train track: {tt.witness}"
    lang = LaminaryLanguage(f, depth, train_track_warning=report)
    if depth <= 0:
        lang.saturated = True
        lang.saturation_k = 0
        return lang

    closures = _edge_closures(f)
    current = {n: EdgePath((OE(n, True),)) for n in sorted(g.edges)}
    for k in range(1, kmax + 1):
        lang.kmax_used = k
        added = False
        for n in sorted(g.edges):
            current[n] = f.f_sharp(current[n])
            for sub in g.subpaths(current[n], depth):
                for variant in (sub, g.reverse_path(sub)):
                    key = _proj_str(variant)
                    if key not in lang.members:
                        lang.members[key] = variant
                        lang.origin[key] = (k, n)
                        added = True
        if not added and k >= 2:
            settled = True
            for n in sorted(g.edges):
                fixed = current[n].projection() == (EdgePath((OE(n, True),))).projection()
                edges_seen = {it.edge for it in current[n].items if isinstance(it, OE)}
                if not fixed and not closures[n] <= edges_seen:
                    settled = False
                    break
            if settled:
                lang.saturated = True
                lang.saturation_k = k
                break
    return lang


def _edge_closures(f: GraphMap):
    """Smallest image-closed edge set containing each edge."""
    uses = {n: {it.edge for it in f.edge_images[n].items if isinstance(it, OE)}
            for n in f.graph.edges}
    closures = {}
    for n in f.graph.edges:
        seen = {n}
        frontier = [n]
        while frontier:
            m = frontier.pop()
            for u in uses[m]:
                if u not in seen:
                    seen.add(u)
                    frontier.append(u)
        closures[n] = seen
    return closures


@dataclass
class GenerationReport:
    ok: bool
    max_k: int
    failing: Optional[tuple] = None  # (edge, word key)
    edges_checked: list = field(default_factory=list)


def check_generation_property(lang: LaminaryLanguage, f: GraphMap,
                              kcap: int = 15, edges: str = "expanding") -> GenerationReport:
    """For every generating edge and every language word, find an iterate of
    the edge containing the word; report the largest power needed or the
    first failure.

    ``edges="expanding"`` (default) quantifies over the dominant expanding
    stratum, which is the faithful finite surrogate when lower strata exist
    (an edge fixed by the map can never contain longer words);
    ``edges="all"`` keeps the literal universal check available.
    """
    g = f.graph
    if edges == "expanding":
        edge_names = expanding_edges(f)
    elif edges == "all":
        edge_names = sorted(g.edges)
    else:
        raise PreconditionError(f"unknown edge quantifier {edges!r}")
    max_k = 0
    iterates = {}
    for n in edge_names:
        path = EdgePath((OE(n, True),))
        haystacks = []
        for k in range(1, kcap + 1):
            path = f.f_sharp(path)
            haystacks.append(" %s " % _proj_str(path))
        iterates[n] = haystacks
    for key in sorted(lang.members):
        # an occurrence in a leaf may be read in either direction
        rev_key = _proj_str(g.reverse_path(lang.members[key]))
        needles = (" %s " % key, " %s " % rev_key)
        for n in edge_names:
            found = None
            for k, hay in enumerate(iterates[n], start=1):
                if needles[0] in hay or needles[1] in hay:
                    found = k
                    break
            if found is None:
                return GenerationReport(False, max_k, failing=(n, key),
                                        edges_checked=edge_names)
            max_k = max(max_k, found)
    return GenerationReport(True, max_k, edges_checked=edge_names)


def quasi_periodicity_constant(graph: MarkedGraph, segment: EdgePath,
                               length: int) -> Optional[int]:
    """The least window size W such that every subword with ``length`` edges
    starts within every stretch of W - length positions, so every window of
    W edges fully contains every such subword.

    Computed as length + g where g is the worst occurrence-start gap of any
    subword (including the offsets before the first and after the last
    occurrence).  None when the segment is shorter than ``length`` or no
    window of the segment's size suffices.
    """
    tokens = MarkedGraph.projection_tokens(segment)
    n = len(tokens)
    if length <= 0 or n < length:
        return None
    positions = {}
    for i in range(n - length + 1):
        key = PROJ_SEP.join(tokens[i:i + length])
        positions.setdefault(key, []).append(i)
    worst_gap = 0
    last_start = n - length
    for starts in positions.values():
        gap = starts[0]
        for a, b in zip(starts, starts[1:]):
            gap = max(gap, b - a)
        gap = max(gap, last_start - starts[-1])
        worst_gap = max(worst_gap, gap)
    window = length + worst_gap
    return window if window <= n else None


@dataclass
class StabilizationReport:
    stabilizes: bool
    checked: int
    skipped: int
    failed: int
    failures: list = field(default_factory=list)
    low_trim_flag: bool = False

    def describe(self) -> str:
        flag = " (trim below cancellation bound)" if self.low_trim_flag else ""
        return (f"checked {self.checked}, skipped {self.skipped}, "
                f"failed {self.failed}{flag}")


def stabilizes_language(h: GraphMap, lang: LaminaryLanguage,
                        trim: float) -> StabilizationReport:
    """Whether the candidate map sends the language into itself after both
    extremities of metric length ``trim`` are removed from each image.

    Words whose trimmed image is empty are skipped; trimmed images longer
    than the language depth are re-checked through their bounded subpaths.
    A trim below the map's cancellation bound is flagged, not rejected.
    """
    g = h.graph
    low_flag = trim < h.bcc_bound() - 1e-9
    checked = skipped = failed = 0
    failures = []
    for key in sorted(lang.members):
        witness = lang.members[key]
        image = h.f_sharp_c(witness, trim)
        if not image:
            skipped += 1
            continue
        checked += 1
        if image.edge_count() <= lang.depth:
            ok = image in lang
        else:
            ok = all(sub in lang for sub in g.subpaths(image, lang.depth)
                     if sub.edge_count() == lang.depth)
        if not ok:
            failed += 1
            if len(failures) < 16:
                failures.append(key)
    return StabilizationReport(failed == 0, checked, skipped, failed,
                               failures, low_flag)
