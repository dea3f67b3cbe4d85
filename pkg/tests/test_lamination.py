"""Laminary language generation, quasi-periodicity, stabilization."""

import pytest

from fpaut.factors import FactorAutomorphism
from fpaut.graphs import EdgePath, FactorMapAction, GraphMap, OE, identity_graph_map
from fpaut.lamination import (check_generation_property, expanding_edges,
                              generate_language, quasi_periodicity_constant,
                              stabilizes_language)
from fpaut.words import EMPTY_WORD

from tests.test_graphs import fA, fB, fred, roseA, roseB, rose_graph  # noqa: F401


@pytest.fixture(scope="module")
def hpsiB(roseB, psiB):
    """Twist-only representative of the shear automorphism on instance B."""
    images = {n: roseB.parse_path(n) for n in roseB.edges}
    actions = {1: FactorMapAction(1, EdgePath(()), psiB.factor_actions[1].twist)}
    return GraphMap(roseB, images, None, actions, name="hpsi")


class TestGenerateLanguage:
    def test_depth_one_is_edges_and_reversals(self, fA):
        lang = generate_language(fA, 1, 4)
        assert set(lang.words()) == {"e1", "E1", "e2", "E2", "h", "H"}

    def test_depth_zero_empty(self, fA):
        lang = generate_language(fA, 0, 4)
        assert len(lang) == 0 and lang.saturated

    def test_identity_map_single_edges_only(self, roseA):
        lang = generate_language(identity_graph_map(roseA), 3, 6)
        assert set(lang.words()) == {"e1", "E1", "e2", "E2", "h", "H"}

    def test_subpath_and_reversal_closure(self, fA, roseA):
        lang = generate_language(fA, 5, 14)
        for key in lang.words():
            witness = lang.witness(key)
            for sub in roseA.subpaths(witness, 5):
                assert sub in lang
            assert roseA.reverse_path(witness) in lang

    def test_every_member_occurs_in_recorded_iterate(self, fA, roseA):
        lang = generate_language(fA, 4, 12)
        from fpaut.graphs import MarkedGraph
        for key in lang.words():
            k, edge = lang.origin[key]
            hay = fA.iterated_sharp(OE(edge, True), k)
            found = MarkedGraph.contains_projection(hay, lang.witness(key)) or \
                MarkedGraph.contains_projection(hay,
                                                roseA.reverse_path(lang.witness(key)))
            assert found

    def test_saturates_on_instance_a(self, fA):
        lang = generate_language(fA, 6, 20)
        assert lang.saturated and lang.saturation_k <= 20

    def test_language_of_square_matches_at_saturation(self, fA):
        lang1 = generate_language(fA, 4, 16)
        lang2 = generate_language(fA.compose(fA), 4, 16)
        assert lang1.saturated and lang2.saturated
        assert set(lang1.words()) == set(lang2.words())


class TestExpandingStratum:
    def test_instance_a(self, fA):
        assert expanding_edges(fA) == ["e1", "e2"]

    def test_reducible_map(self, fred):
        # all blocks have growth 1; the first dominant block is picked
        assert expanding_edges(fred) == ["e1"]


class TestGenerationProperty:
    def test_instance_a_verified(self, fA):
        lang = generate_language(fA, 4, 12)
        report = check_generation_property(lang, fA, kcap=12)
        assert report.ok
        assert report.max_k <= 10
        assert report.edges_checked == ["e1", "e2"]

    def test_empty_language_vacuous(self, fA):
        lang = generate_language(fA, 0, 2)
        assert check_generation_property(lang, fA, kcap=2).ok

    def test_reducible_counterexample_fails(self, fred):
        lang = generate_language(fred, 2, 8)
        report = check_generation_property(lang, fred, kcap=8)
        assert not report.ok
        # a word outside the invariant circuit is never generated by it
        edge, key = report.failing
        assert edge == "e1"

    def test_literal_all_edges_mode_fails_on_fixed_spoke(self, fA):
        lang = generate_language(fA, 2, 10)
        report = check_generation_property(lang, fA, kcap=10, edges="all")
        assert not report.ok and report.failing[0] == "h"


class TestQuasiPeriodicity:
    def test_alternating_segment_window(self, roseA):
        seg = EdgePath(tuple(OE("e1" if i % 2 == 0 else "e2", True)
                             for i in range(40)))
        assert quasi_periodicity_constant(roseA, seg, 2) == 4

    def test_instance_a_leaf_segment(self, fA, roseA):
        seg = fA.iterated_sharp(OE("e1", True), 8)
        window = quasi_periodicity_constant(roseA, seg, 3)
        assert window is not None and window <= 60

    def test_short_segment_degenerate(self, roseA):
        seg = EdgePath((OE("e1", True),))
        assert quasi_periodicity_constant(roseA, seg, 3) is None

    def test_monotone_in_subword_length(self, fA, roseA):
        seg = fA.iterated_sharp(OE("e1", True), 9)
        values = [quasi_periodicity_constant(roseA, seg, L) for L in (1, 2, 3, 4)]
        assert all(v is not None for v in values)
        assert values == sorted(values)


class TestStabilizesLanguage:
    def test_map_stabilizes_its_own_language_at_acceptance_depth(self, fA):
        # at depth 6 every trimmed image is empty (the deepest word has
        # metric length 5, so images cap at 10 = 2 * bcc): zero failures,
        # everything skipped, and the report says so
        lang = generate_language(fA, 6, 20)
        report = stabilizes_language(fA, lang, fA.bcc_bound())
        assert report.stabilizes and report.failed == 0
        assert report.skipped == len(lang)

    def test_map_stabilizes_its_own_language_nonvacuously(self, fA):
        lang = generate_language(fA, 12, 24)
        report = stabilizes_language(fA, lang, fA.bcc_bound())
        assert report.stabilizes and report.failed == 0
        assert report.checked > 0

    def test_identity_with_zero_trim(self, fA):
        lang = generate_language(fA, 3, 10)
        from fpaut.graphs import identity_graph_map
        ident = identity_graph_map(fA.graph)
        report = stabilizes_language(ident, lang, 0.0)
        assert report.stabilizes and report.skipped == 0

    def test_twist_only_map_stabilizes_instance_b(self, fB, hpsiB):
        lang = generate_language(fB, 6, 20)
        report = stabilizes_language(hpsiB, lang, hpsiB.bcc_bound())
        assert report.stabilizes and report.failed == 0

    def test_low_trim_flagged(self, fA):
        lang = generate_language(fA, 4, 12)
        report = stabilizes_language(fA, lang, 1.0)
        assert report.low_trim_flag
