"""Marked graphs, graph maps, train tracks, spectra, N-paths, splittings."""

import math
import random

import pytest

from fpaut.errors import PreconditionError, ValidationError
from fpaut.factors import CyclicFactor, FactorAutomorphism
from fpaut.graphs import (EMPTY_PATH, EdgePath, FactorMapAction, GraphMap,
                          MarkedGraph, OE, Turn, identity_graph_map)
from fpaut.words import EMPTY_WORD, FreeProduct


def rose_graph(G, name="rose"):
    """One free vertex, a loop per free generator, one half-length spoke per
    factor vertex."""
    vertices = {"star": None}
    edges = {}
    tree = set()
    marking = {}
    for j, gen in enumerate(G.free_names, start=1):
        en = f"e{j}"
        edges[en] = ("star", "star", 1.0)
        marking[en] = G.parse_word(gen)
    spoke_names = ["h", "g", "k", "l"]
    for f in G.factors:
        vn = f"w{f.id}"
        vertices[vn] = f.id
        en = spoke_names[f.id - 1]
        edges[en] = ("star", vn, 0.5)
        tree.add(en)
    return MarkedGraph(G, vertices, edges, tree, marking, "star", name=name)


@pytest.fixture(scope="module")
def roseA(GA):
    return rose_graph(GA)


@pytest.fixture(scope="module")
def roseB(GB):
    return rose_graph(GB)


@pytest.fixture(scope="module")
def fA(roseA):
    ident = FactorAutomorphism.identity(roseA.G.factor(1))
    images = {
        "e1": roseA.parse_path("e2 h (a@1) H"),
        "e2": roseA.parse_path("e1 e2"),
        "h": roseA.parse_path("h"),
    }
    actions = {1: FactorMapAction(1, EMPTY_PATH, ident)}
    return GraphMap(roseA, images, None, actions, name="fA")


@pytest.fixture(scope="module")
def fB(roseB):
    ident = FactorAutomorphism.identity(roseB.G.factor(1))
    images = {
        "e1": roseB.parse_path("e2 h (a1@1) H"),
        "e2": roseB.parse_path("e1 e2"),
        "h": roseB.parse_path("h"),
    }
    actions = {1: FactorMapAction(1, EMPTY_PATH, ident)}
    return GraphMap(roseB, images, None, actions, name="fB")


@pytest.fixture(scope="module")
def fred(roseA):
    """Reducible counterexample: fixes the loop e1."""
    ident = FactorAutomorphism.identity(roseA.G.factor(1))
    images = {
        "e1": roseA.parse_path("e1"),
        "e2": roseA.parse_path("e2 e1"),
        "h": roseA.parse_path("h"),
    }
    return GraphMap(roseA, images, None,
                    {1: FactorMapAction(1, EMPTY_PATH, ident)}, name="fred")


def one_loop_rose():
    G = FreeProduct([], ["b1"])
    return MarkedGraph(G, {"star": None}, {"e1": ("star", "star", 1.0)},
                       set(), {"e1": G.parse_word("b1")}, "star", name="loop")


class TestTighten:
    def test_backtrack_collapses(self, roseA):
        p = roseA.parse_path("e1 E1")
        assert roseA.tighten(p) == EMPTY_PATH

    def test_nontrivial_turn_blocks(self, roseA):
        p = roseA.parse_path("h (a@1) H")
        assert roseA.tighten(p) == p

    def test_trivial_turn_backtracks(self, roseA):
        p = roseA.parse_path("h H")
        assert roseA.tighten(p) == EMPTY_PATH

    def test_idempotent_on_random_raw_paths(self, roseA):
        rng = random.Random(17)
        germs = {v: roseA.germs_at(v) for v in roseA.vertices}
        for _ in range(300):
            items = []
            v = "star"
            for _ in range(rng.randrange(0, 12)):
                d = rng.choice(germs[v])
                if items and isinstance(items[-1], OE) and roseA.vertices[v] is not None \
                        and rng.random() < 0.5:
                    grp = roseA.G.factor(roseA.vertices[v])
                    items.append(Turn(grp.element(rng.choice(grp.elements()))))
                items.append(d)
                v = roseA.target(d)
            p = EdgePath(items)
            t1 = roseA.tighten(p)
            assert roseA.tighten(t1) == t1

    def test_path_times_reverse_collapses(self, roseA):
        rng = random.Random(29)
        for _ in range(200):
            w = roseA.G.random_reduced_word(rng, rng.randrange(0, 8))
            p = roseA.word_to_path(w)
            back = EdgePath(p.items + roseA.reverse_path(p).items)
            assert roseA.tighten(back) == EMPTY_PATH


class TestWordPathBridge:
    def test_excursion_reads_back(self, roseA):
        p = roseA.parse_path("e2 h (a@1) H")
        assert roseA.read_word(p) == roseA.G.parse_word("b2 a@1")

    def test_roundtrip_random(self, roseA, roseB):
        rng = random.Random(41)
        for g in (roseA, roseB):
            for _ in range(200):
                w = g.G.random_reduced_word(rng, rng.randrange(0, 9))
                assert g.read_word(g.word_to_path(w)) == w

    def test_path_syntax_roundtrip(self, roseA):
        for text in ("e2 h (a@1) H", "e1 e2", "h", "()", "E2 e1"):
            p = roseA.parse_path(text)
            assert roseA.format_path(p) == text


class TestInducedAutomorphism:
    def test_fA_induces_phiA(self, fA, phiA):
        induced = fA.induced_automorphism()
        for w in fA.graph.G.generator_words():
            assert induced.apply(w) == phiA.apply(w)

    def test_identity_map_induces_identity(self, roseA):
        ident = identity_graph_map(roseA)
        assert ident.induced_automorphism().is_identity()

    def test_mated_check(self, fA, phiA, psi_sq):
        assert fA.mated_check(phiA)
        assert not fA.mated_check(psi_sq)

    def test_marking_inconsistency_reported(self, GA):
        vertices = {"star": None, "w1": 1}
        edges = {"e1": ("star", "star", 1.0), "e2": ("star", "star", 1.0),
                 "h": ("star", "w1", 0.5)}
        marking = {"e1": GA.parse_word("b1 b2"), "e2": GA.parse_word("b2")}
        g = MarkedGraph(GA, vertices, edges, {"h"}, marking, "star")
        gm = identity_graph_map(g)
        with pytest.raises(ValidationError, match="marking inconsistency.*e1"):
            gm.induced_automorphism()

    def test_composition_induces_composition(self, fA, phiA):
        sq = fA.compose(fA)
        induced = sq.induced_automorphism()
        phi2 = phiA.compose(phiA)
        for w in fA.graph.G.generator_words():
            assert induced.apply(w) == phi2.apply(w)


class TestLipQvolBcc:
    def test_instance_a_values(self, fA):
        lip, qvol, bcc = fA.lip_qvol_bcc()
        assert lip == pytest.approx(2.0)
        assert qvol == pytest.approx(2.5)
        assert bcc == pytest.approx(5.0)

    def test_identity_map(self, roseA):
        lip, qvol, bcc = identity_graph_map(roseA).lip_qvol_bcc()
        assert lip == pytest.approx(1.0)
        assert bcc == pytest.approx(qvol)

    def test_doubling_lengths_scales_qvol_not_lip(self, GA, fA):
        doubled = MarkedGraph(
            GA, dict(fA.graph.vertices),
            {n: (e.src, e.dst, 2 * e.length) for n, e in fA.graph.edges.items()},
            fA.graph.tree, fA.graph.marking, fA.graph.basepoint, name="rose2x")
        images = {n: fA.edge_images[n] for n in fA.edge_images}
        f2 = GraphMap(doubled, images, dict(fA.vertex_images),
                      dict(fA.factor_actions), name="fA2x")
        lip, qvol, _ = f2.lip_qvol_bcc()
        lip0, qvol0, _ = fA.lip_qvol_bcc()
        assert lip == pytest.approx(lip0)
        assert qvol == pytest.approx(2 * qvol0)


class TestFSharp:
    def test_trim_zero_is_f_sharp(self, fA, roseA):
        p = roseA.parse_path("e1 e2")
        assert fA.f_sharp_c(p, 0.0) == fA.f_sharp(p)

    def test_overtrim_gives_empty(self, fA, roseA):
        p = roseA.parse_path("e1 e2")
        assert fA.f_sharp_c(p, 5.0) == EMPTY_PATH

    def test_image_concatenation_without_cancellation(self, fA, roseA):
        p = roseA.parse_path("e1 e2")
        assert fA.f_sharp(p) == roseA.parse_path("e2 h (a@1) H e1 e2")

    def test_trim_snaps_outward(self, fA, roseA):
        p = roseA.parse_path("e2 e2 e2")
        image = fA.f_sharp(p)  # e1 e2 e1 e2 e1 e2, length 6
        trimmed = fA.f_sharp_c(p, 2.5)
        # 2.5 falls mid-edge; the cut edge is kept whole on each side
        assert roseA.path_length(trimmed) == pytest.approx(2.0)


class TestGates:
    def test_instance_a_partition(self, fA):
        tt = fA.gates_from_map(10)
        star = {frozenset(g) for g in tt.gates["star"]}
        assert star == {
            frozenset({OE("e1", True)}),
            frozenset({OE("e2", True)}),
            frozenset({OE("e1", False), OE("h", True)}),
            frozenset({OE("e2", False)}),
        }
        assert len(tt.gates["w1"]) == 1

    def test_identity_map_gives_singletons(self, roseA):
        tt = identity_graph_map(roseA).gates_from_map(6)
        assert all(len(g) == 1 for g in tt.gates["star"])

    def test_collapsing_map_rejected(self, roseA):
        ident = FactorAutomorphism.identity(roseA.G.factor(1))
        images = {"e1": EMPTY_PATH,
                  "e2": roseA.parse_path("e2"),
                  "h": roseA.parse_path("h")}
        vimgs = {"star": "star", "w1": "w1"}
        gm = GraphMap(roseA, images, vimgs,
                      {1: FactorMapAction(1, EMPTY_PATH, ident)}, name="collapse")
        with pytest.raises(ValidationError, match="collapses"):
            gm.gates_from_map(4)


class TestIsTrainTrack:
    def test_instance_a_is_train_track(self, fA):
        report = fA.is_train_track(8)
        assert report.is_train_track, report.witness
        turn_descs = [c[1] for c in report.certificate]
        assert any("(H, a@1, H)" in d for d in turn_descs)

    def test_backtracking_image_rejected_with_witness(self):
        g = one_loop_rose()
        gm = GraphMap(g, {"e1": g.parse_path("e1 E1 e1")}, {"star": "star"},
                      {}, name="bad")
        report = gm.is_train_track(4)
        assert not report.is_train_track
        assert "not reduced" in report.witness

    def test_identity_map_vacuously_legal(self, roseA):
        report = identity_graph_map(roseA).is_train_track(4)
        assert report.is_train_track

    def test_instance_b_is_train_track(self, fB):
        assert fB.is_train_track(8).is_train_track

    def test_iterates_track_transition_lengths(self, fA, roseA):
        # no cancellation in iterates means M^k bookkeeping is exact
        labels, m, _ = fA.transition_spectrum()
        import numpy as np
        lengths = np.array([roseA.edges[n].length for n in labels])
        for k in (1, 3, 5):
            mk = np.linalg.matrix_power(m, k)
            for j, n in enumerate(labels):
                path = fA.iterated_sharp(OE(n, True), k)
                predicted = float(lengths @ mk[:, j])
                assert roseA.path_length(path) == pytest.approx(predicted)


class TestTransitionSpectrum:
    def test_instance_a_block_and_growth(self, fA):
        labels, m, pf = fA.transition_spectrum()
        i1, i2 = labels.index("e1"), labels.index("e2")
        assert [[m[i1, i1], m[i1, i2]], [m[i2, i1], m[i2, i2]]] == [[0, 1], [1, 1]]
        assert pf == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-11)

    def test_identity_matrix(self, roseA):
        labels, m, pf = identity_graph_map(roseA).transition_spectrum()
        assert (m == __import__("numpy").eye(len(labels))).all()
        assert pf == pytest.approx(1.0)

    def test_doubling_loop(self):
        g = one_loop_rose()
        gm = GraphMap(g, {"e1": g.parse_path("e1 e1")}, {"star": "star"}, {},
                      name="double")
        _, m, pf = gm.transition_spectrum()
        assert m[0, 0] == 2 and pf == pytest.approx(2.0)

    def test_squared_map_squares_growth(self, fA):
        _, _, pf1 = fA.transition_spectrum()
        _, _, pf2 = fA.compose(fA).transition_spectrum()
        assert pf2 == pytest.approx(pf1 ** 2, abs=1e-9)


class TestOIrreducibility:
    def test_instance_a_irreducible(self, fA):
        irreducible, witness, circuit = fA.o_irreducibility_check()
        assert irreducible and witness is None

    def test_spoke_subgraph_is_invariant_but_harmless(self, fA):
        # {h} is invariant: no circuit, one non-free vertex
        uses = {it.edge for it in fA.edge_images["h"].items if isinstance(it, OE)}
        assert uses == {"h"}

    def test_fixed_loop_reducible_with_circuit_witness(self, fred):
        irreducible, witness, circuit = fred.o_irreducibility_check()
        assert not irreducible
        assert witness == ["e1"]
        assert circuit == ["e1"]

    def test_identity_reducible(self, roseA):
        irreducible, witness, _ = identity_graph_map(roseA).o_irreducibility_check()
        assert not irreducible


class TestNPaths:
    def test_fixed_spoke_is_n_path(self, fA, roseA):
        assert fA.is_n_path(roseA.parse_path("h"))

    def test_growing_edge_is_not(self, fA, roseA):
        assert not fA.is_n_path(roseA.parse_path("e1"))

    def test_excursion_is_n_path(self, fA, roseA):
        assert fA.is_n_path(roseA.parse_path("h (a@1) H"))

    def test_identity_map_everything_is_n_path(self, roseA):
        ident = identity_graph_map(roseA)
        for text in ("e1", "e1 e2", "h (a^2@1) H", "e2 h (a@1) H e1"):
            assert ident.is_n_path(roseA.parse_path(text))

    def test_inventory_instance_a(self, fA):
        inv = fA.find_n_paths(4)
        keys = [k for k, _ in inv.classes]
        assert (("h", False),) in keys
        assert (("h", True), ("h", False)) in keys
        assert len(keys) == 2
        assert not inv.stable_at_scale


class TestSplitCheck:
    def test_single_brick(self, fA, roseA):
        w = roseA.parse_path("e1 e2")
        assert fA.split_check(w, [w], 4).ok

    def test_instance_a_segment_splitting(self, fA, roseA):
        w = roseA.parse_path("e2 h (a@1) H")
        bricks = [roseA.parse_path("e2"), roseA.parse_path("h (a@1) H")]
        assert fA.split_check(w, bricks, 8).ok

    def test_cut_inside_cancelling_junction_detected(self, GA):
        G = FreeProduct([], ["b1", "b2"])
        g = MarkedGraph(G, {"star": None},
                        {"e1": ("star", "star", 1.0), "e2": ("star", "star", 1.0)},
                        set(), {"e1": G.parse_word("b1"), "e2": G.parse_word("b2")},
                        "star", name="two-loop")
        gm = GraphMap(g, {"e1": g.parse_path("e1 e2"), "e2": g.parse_path("E2 E1")},
                      {"star": "star"}, {}, name="cancelly")
        w = g.parse_path("e1 e2")
        report = gm.split_check(w, [g.parse_path("e1"), g.parse_path("e2")], 4)
        assert not report.ok and report.failed_k == 1

    def test_mismatched_bricks_rejected(self, fA, roseA):
        w = roseA.parse_path("e1 e2")
        report = fA.split_check(w, [roseA.parse_path("e1")], 4)
        assert not report.ok


class TestBoundedCancellation:
    def test_empirical_cancellation_below_bound(self, fA, roseA):
        rng = random.Random(53)
        _, _, bcc = fA.lip_qvol_bcc()
        for _ in range(300):
            a = roseA.word_to_path(roseA.G.random_reduced_word(rng, rng.randrange(1, 8)))
            b = roseA.word_to_path(roseA.G.random_reduced_word(rng, rng.randrange(1, 8)))
            ab = roseA.tighten(EdgePath(a.items + b.items))
            if ab.items != a.items + b.items:
                continue  # junction must be reduced for the bound to apply
            fa, fb, fab = fA.f_sharp(a), fA.f_sharp(b), fA.f_sharp(ab)
            cancelled = (roseA.path_length(fa) + roseA.path_length(fb)
                         - roseA.path_length(fab)) / 2
            assert cancelled <= bcc + 1e-9
