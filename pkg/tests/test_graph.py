import random

import pytest

from pattern_forge.geometry import Pattern, Translation, ZERO_SHIFT
from pattern_forge.graph import SimilarityGraph, assemble, dump_edges, evaluate_pair_relaxed
from pattern_forge.layout_io import ConstraintKind, LayoutDocument

from conftest import rect, staircase


def _doc(kind: ConstraintKind, threshold: float) -> LayoutDocument:
    return LayoutDocument(64, kind, threshold, (), (), (), ())


def _pat(*polys, radius=64) -> Pattern:
    return Pattern((0, 0), radius, tuple(polys))


class TestSimilarityGraph:
    def test_from_edges_basics(self):
        g = SimilarityGraph.from_edges(4, [(0, 1), (2, 1), (0, 3)])
        assert g.adjacency == ((1, 3), (0, 2), (1,), (0,))
        assert g.edge_count == 3
        assert g.degree(1) == 2 and g.degree(2) == 1
        assert list(g.edges()) == [(0, 1), (0, 3), (1, 2)]

    def test_shift_payload_orientation(self):
        t = Translation(5, -3)
        g = SimilarityGraph.from_edges(3, [(0, 1)], {(0, 1): t})
        assert g.shift(0, 1) == t
        assert g.shift(1, 0) == t.negated()
        # payload given against the flipped key is normalized on the way in
        h = SimilarityGraph.from_edges(3, [(0, 1)], {(1, 0): t})
        assert h.shift(1, 0) == t

    def test_missing_payload_defaults_to_zero(self):
        g = SimilarityGraph.from_edges(2, [(0, 1)])
        assert g.shift(0, 1) == ZERO_SHIFT

    def test_validation(self):
        with pytest.raises(ValueError, match="self-loop"):
            SimilarityGraph(2, ((0,), ()))
        with pytest.raises(ValueError, match="reverse"):
            SimilarityGraph(2, ((1,), ()))
        with pytest.raises(ValueError, match="size"):
            SimilarityGraph(3, ((), ()))
        with pytest.raises(ValueError, match="outside"):
            SimilarityGraph.from_edges(2, [(0, 5)])


class TestEvaluatePair:
    def test_cosine_accepts_identical(self):
        doc = _doc(ConstraintKind.COSINE, 0.9)
        p = _pat(rect(-10, -10, 10, 10))
        assert evaluate_pair_relaxed(p, p, doc) == ZERO_SHIFT

    def test_cosine_threshold_is_inclusive_and_slack_loosens(self):
        doc = _doc(ConstraintKind.COSINE, 1.0)
        a = _pat(rect(-20, -20, 20, 20))
        b = _pat(rect(-20, -20, 20, 24))
        # similar but not identical: fails at 1.0, passes with enough slack
        assert evaluate_pair_relaxed(a, b, doc) is None
        assert evaluate_pair_relaxed(a, b, doc, slack=0.2) == ZERO_SHIFT
        assert evaluate_pair_relaxed(a, a, doc) == ZERO_SHIFT

    def test_cosine_uses_precomputed_features(self):
        from pattern_forge.raster import pattern_features

        doc = _doc(ConstraintKind.COSINE, 0.9)
        a = _pat(rect(-10, -10, 10, 10))
        b = _pat(rect(-10, -10, 10, 12))
        fa = pattern_features(a, 64, 32)
        fb = pattern_features(b, 64, 32)
        assert evaluate_pair_relaxed(a, b, doc, fa=fa, fb=fb) == evaluate_pair_relaxed(a, b, doc)

    def test_edgemove_reports_minmax_shift(self):
        doc = _doc(ConstraintKind.EDGEMOVE, 10.0)
        a = _pat(staircase(2))
        b = _pat(staircase(2).translated(4, 2))
        assert evaluate_pair_relaxed(a, b, doc) == Translation(4, 2)

    def test_edgemove_threshold_and_slack(self):
        doc = _doc(ConstraintKind.EDGEMOVE, 2.0)
        a = _pat(rect(0, 0, 20, 20))
        b = _pat(rect(0, 0, 26, 20))   # best residual 3 > 2
        assert evaluate_pair_relaxed(a, b, doc) is None
        assert evaluate_pair_relaxed(a, b, doc, slack=1.0) == Translation(3, 0)

    def test_edgemove_no_correspondence_rejects(self):
        doc = _doc(ConstraintKind.EDGEMOVE, 100.0)
        a = _pat(rect(0, 0, 4, 4))
        b = _pat(rect(40, 40, 44, 44))
        assert evaluate_pair_relaxed(a, b, doc) is None

    def test_edgemove_subset_match_is_allowed_here(self):
        # count gating is the prescreener's job; the relaxed evaluator only
        # needs the smaller side to pair off cleanly
        doc = _doc(ConstraintKind.EDGEMOVE, 100.0)
        a = _pat(rect(0, 0, 4, 4))
        c = _pat(rect(0, 0, 4, 4), rect(40, 40, 44, 44))
        assert evaluate_pair_relaxed(a, c, doc) == ZERO_SHIFT

    def test_edgemove_topology_mismatch_rejects(self):
        # same counts, overlapping, but different vertex structure: the
        # constraint cannot hold for any shift, so the pair is rejected
        doc = _doc(ConstraintKind.EDGEMOVE, 100.0)
        a = _pat(rect(0, 0, 12, 12))
        b = _pat(staircase(2, run=4, rise=3))
        assert evaluate_pair_relaxed(a, b, doc) is None


class TestAssemble:
    def test_rejections_leave_no_edge(self):
        pairs = [(0, 1), (0, 2), (1, 2)]
        results = [Translation(1, 0), None, Translation(0, 2)]
        g = assemble(3, pairs, results)
        assert list(g.edges()) == [(0, 1), (1, 2)]
        assert g.shift(0, 1) == Translation(1, 0)
        assert g.shift(2, 1) == Translation(0, -2)

    def test_shuffled_input_same_graph(self, rng):
        pairs = [(i, j) for i in range(8) for j in range(i + 1, 8)]
        results = [
            Translation(i, j) if (i + j) % 3 else None for i, j in pairs
        ]
        base = assemble(8, pairs, results)
        for _ in range(5):
            order = list(range(len(pairs)))
            rng.shuffle(order)
            g = assemble(8, [pairs[k] for k in order], [results[k] for k in order])
            assert g.adjacency == base.adjacency
            assert g.shifts == base.shifts

    def test_flipped_pair_normalized(self):
        g = assemble(2, [(1, 0)], [Translation(4, 4)])
        assert g.shift(0, 1) == Translation(-4, -4)

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            assemble(2, [(0, 1), (1, 0)], [ZERO_SHIFT, ZERO_SHIFT])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="results"):
            assemble(2, [(0, 1)], [])

    def test_complete_graph(self):
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        g = assemble(4, pairs, [ZERO_SHIFT] * len(pairs))
        assert g.edge_count == 6
        assert all(g.degree(i) == 3 for i in range(4))


class TestDump:
    def test_format(self):
        g = assemble(3, [(0, 1), (1, 2)], [Translation(5, -3), ZERO_SHIFT])
        assert dump_edges(g) == "0 1 5 -3\n1 2 0 0\n"

    def test_empty(self):
        assert dump_edges(SimilarityGraph.from_edges(3, [])) == ""
