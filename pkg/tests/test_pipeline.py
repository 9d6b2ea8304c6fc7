import pytest

from pattern_forge.geometry import Marker, Pattern, Translation, extract_pattern
from pattern_forge.layout_io import (
    ClusterReport,
    ConstraintKind,
    LayoutDocument,
    generate_synthetic,
    read_report,
    write_report,
)
from pattern_forge.pipeline import (
    Cluster,
    ClusterSet,
    IterationConfig,
    _pmap,
    refine_cluster,
    run,
    run_full,
    run_with_stats,
    verify_clusterset,
)
from pattern_forge.raster import cosine_similarity, pattern_features

from conftest import rect

COS = ConstraintKind.COSINE
EDGE = ConstraintKind.EDGEMOVE


def _doc(polys, markers, kind, threshold, radius=64) -> LayoutDocument:
    return LayoutDocument(
        radius, kind, threshold,
        tuple(polys), tuple(range(len(polys))),
        tuple(markers), tuple(range(len(markers))),
    )


@pytest.fixture(scope="module")
def clean_docs():
    return {
        kind: generate_synthetic(4, 6, 0, seed=31, constraint=kind)
        for kind in (COS, EDGE)
    }


@pytest.fixture(scope="module")
def jittered_docs():
    return {
        kind: generate_synthetic(3, 5, 8, seed=32, constraint=kind)
        for kind in (COS, EDGE)
    }


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IterationConfig(max_iterations=0)
        with pytest.raises(ValueError):
            IterationConfig(aligner="best")
        with pytest.raises(ValueError):
            IterationConfig(solver="ilp")
        with pytest.raises(ValueError):
            IterationConfig(threads=0)

    def test_slack_schedule(self):
        cfg = IterationConfig(max_iterations=3)
        assert [cfg.slack_fraction(i) for i in range(3)] == [1.0, 0.5, 0.0]
        assert IterationConfig(max_iterations=1).slack_fraction(0) == 0.0

    def test_slack_for_by_constraint(self):
        cfg = IterationConfig(max_iterations=3, cosine_slack=0.05, edge_slack_frac=0.25)
        cos_doc = _doc([], [], COS, 0.9)
        edge_doc = _doc([], [], EDGE, 12.0)
        assert cfg.slack_for(cos_doc, 0) == 0.05
        assert cfg.slack_for(cos_doc, 1) == 0.025
        assert cfg.slack_for(cos_doc, 2) == 0.0
        assert cfg.slack_for(edge_doc, 0) == 3.0
        assert cfg.slack_for(edge_doc, 2) == 0.0


class TestPmap:
    def test_preserves_order(self):
        items = list(range(40))
        assert _pmap(lambda x: x * x, items, 1) == [x * x for x in items]
        assert _pmap(lambda x: x * x, items, 4) == [x * x for x in items]


class TestRefineCluster:
    def _edge_doc(self, marker: Marker, offset=(4, 6), threshold=10.0):
        # keep the inter-shape gap well above the offsets used below, so the
        # shifted copies still pair one-to-one with the template shapes
        template = [rect(-24, -24, 24, -8), rect(-16, 8, 16, 28)]
        polys = list(template)
        polys += [p.translated(300 + offset[0], offset[1]) for p in template]
        return _doc(polys, [Marker(0, 0, 0, 0), marker], EDGE, threshold)

    def test_identity_member(self):
        doc = self._edge_doc(Marker(292, -8, 308, 8), offset=(0, 0))
        rep = extract_pattern(doc, (0, 0))
        res = refine_cluster(rep, doc.markers[1], doc, IterationConfig())
        assert res is not None
        assert res.center == (300, 0)
        assert res.score == 0.0
        assert res.anchor_score == 0.0

    def test_recovers_offset_center(self):
        doc = self._edge_doc(Marker(292, -8, 308, 8))
        rep = extract_pattern(doc, (0, 0))
        res = refine_cluster(rep, doc.markers[1], doc, IterationConfig())
        assert res.center == (304, 6)
        assert res.score == 0.0
        assert res.anchor_score == -6.0
        assert res.score >= res.anchor_score

    def test_clamped_center_still_passes(self):
        # the ideal shift (4, 6) exceeds the marker, so the clamped (2, 2)
        # center must carry the residual and still beat the threshold
        doc = self._edge_doc(Marker(298, -2, 302, 2), threshold=5.0)
        rep = extract_pattern(doc, (0, 0))
        res = refine_cluster(rep, doc.markers[1], doc, IterationConfig())
        assert res is not None
        assert res.center == (302, 2)
        assert res.score == -4.0
        # the anchor is measurable (clean bijection) so its score is recorded,
        # but at offset 6 it fails the threshold and cannot be the best center
        assert res.anchor_score == -6.0

    def test_rejects_over_threshold(self):
        doc = self._edge_doc(Marker(300, 0, 300, 0), threshold=3.0)
        rep = extract_pattern(doc, (0, 0))
        assert refine_cluster(rep, doc.markers[1], doc, IterationConfig()) is None

    def test_coarse_candidate_considered(self):
        doc = self._edge_doc(Marker(292, -8, 308, 8))
        rep = extract_pattern(doc, (0, 0))
        res = refine_cluster(
            rep, doc.markers[1], doc, IterationConfig(), coarse=Translation(4, 6)
        )
        assert res.center == (304, 6)

    def test_cosine_identity_and_features_shortcut(self):
        polys = [rect(-24, -24, 24, 24), rect(276, -24, 324, 24)]
        doc = _doc(polys, [Marker(0, 0, 0, 0), Marker(300, 0, 300, 0)], COS, 0.9)
        cfg = IterationConfig()
        rep = extract_pattern(doc, (0, 0))
        res = refine_cluster(rep, doc.markers[1], doc, cfg)
        assert res.center == (300, 0)
        assert res.score == pytest.approx(1.0)
        pre = pattern_features(rep, cfg.grid, cfg.dct_k)
        res2 = refine_cluster(rep, doc.markers[1], doc, cfg, rep_features=pre)
        assert res2 == res

    def test_cosine_dissimilar_rejected(self):
        polys = [rect(-24, -24, 24, 24), rect(296, -4, 304, 4)]
        doc = _doc(polys, [Marker(0, 0, 0, 0), Marker(300, 0, 300, 0)], COS, 0.9)
        rep = extract_pattern(doc, (0, 0))
        assert refine_cluster(rep, doc.markers[1], doc, IterationConfig()) is None


class TestRunSmall:
    def test_single_marker_single_cluster_one_iteration(self):
        for kind, threshold in ((COS, 0.9), (EDGE, 10.0)):
            doc = _doc([rect(-10, -10, 10, 10)], [Marker(0, 0, 0, 0)], kind, threshold)
            cset, report, stats = run_full(doc)
            assert report.cluster_count == 1
            assert report.iterations_used == 1
            assert report.assignments == ((0, 0, 0, 0),)
            assert verify_clusterset(cset, doc)

    def test_empty_document(self):
        doc = _doc([], [], COS, 0.9)
        cset, report, stats = run_full(doc)
        assert report.cluster_count == 0
        assert report.assignments == ()
        assert verify_clusterset(cset, doc)
        assert stats.compression == 0.0

    def test_two_identical_markers_merge(self):
        polys = [rect(-10, -10, 10, 10), rect(290, -10, 310, 10)]
        doc = _doc(polys, [Marker(0, 0, 0, 0), Marker(300, 0, 300, 0)], COS, 0.9)
        cset, report, stats = run_full(doc)
        assert report.cluster_count == 1
        assert report.iterations_used == 1
        assert verify_clusterset(cset, doc)

    def test_defer_then_settle_as_singletons(self):
        # similarity lands between the relaxed and strict thresholds for two
        # rounds: the pair keeps its edge, refinement keeps failing, and the
        # lone representative defers until the final zero-slack round
        a = rect(-23, -20, 23, 20)
        b = rect(277, -22, 323, 22)
        doc = _doc([a, b], [Marker(0, 0, 0, 0), Marker(300, 0, 300, 0)], COS, 0.99)
        cfg = IterationConfig()
        pa = extract_pattern(doc, (0, 0))
        pb = extract_pattern(doc, (300, 0))
        sim = cosine_similarity(
            pattern_features(pa, cfg.grid, cfg.dct_k),
            pattern_features(pb, cfg.grid, cfg.dct_k),
        )
        assert 0.968 < sim < 0.987  # inside (T - 0.025, T), clear of both edges
        cset, report, stats = run_full(doc, cfg)
        assert report.cluster_count == 2
        assert report.iterations_used == 3
        it0 = stats.iterations[0]
        assert it0.edges == 1
        assert it0.deferred == 1
        assert it0.orphaned == 1
        assert verify_clusterset(cset, doc)


class TestRunGenerated:
    def test_exact_recovery_jitter_free(self, clean_docs):
        for kind, doc in clean_docs.items():
            cset, report, stats = run_full(doc)
            assert report.cluster_count == 4, kind
            assert verify_clusterset(cset, doc)
            assert report.iterations_used == 1
            # every marker of a template lands in one cluster
            groups = {}
            for mid, cid, _x, _y in report.assignments:
                groups.setdefault(cid, set()).add(mid // 6)
            assert all(len(v) == 1 for v in groups.values())

    def test_jittered_recovery_verified(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            cset, report, stats = run_full(doc)
            assert verify_clusterset(cset, doc), kind
            assert report.cluster_count <= 6
            assert stats.refine_violations == 0

    def test_thread_count_does_not_change_output(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            base = write_report(run(doc, IterationConfig(threads=1)))
            quad = write_report(run(doc, IterationConfig(threads=4)))
            assert base == quad, kind

    def test_solver_choice_agrees(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            lazy = write_report(run(doc, IterationConfig(solver="lazy")))
            eager = write_report(run(doc, IterationConfig(solver="eager")))
            assert lazy == eager, kind

    def test_prescreen_off_agrees(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            on = write_report(run(doc, IterationConfig(use_prescreen=True)))
            off = write_report(run(doc, IterationConfig(use_prescreen=False)))
            assert on == off, kind

    def test_fft_aligner_on_clean_cosine(self, clean_docs):
        doc = clean_docs[COS]
        cset, report, stats = run_full(doc, IterationConfig(aligner="fft"))
        assert report.cluster_count == 4
        assert verify_clusterset(cset, doc)

    def test_report_round_trip_validates(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            report = run(doc)
            data = write_report(report, doc=doc)
            back = read_report(data)
            assert back == report
            back.validate(doc)

    def test_run_wrappers_consistent(self, clean_docs):
        doc = clean_docs[EDGE]
        full = run_full(doc)
        report, stats = run_with_stats(doc)
        assert report == full[1]
        assert run(doc) == report

    def test_stats_shape(self, jittered_docs):
        doc = jittered_docs[COS]
        _cset, report, stats = run_full(doc)
        assert stats.marker_count == 15
        assert stats.cluster_count == report.cluster_count
        assert stats.iterations_used == report.iterations_used
        assert 0.0 <= stats.compression < 1.0
        assert stats.compression == pytest.approx(float(report.compression_ratio))
        js = stats.to_json()
        assert js["cluster_count"] == report.cluster_count
        assert js["compression"] == stats.compression
        assert len(js["iterations"]) == len(stats.iterations)
        for it in stats.iterations:
            assert set(it.timings_ms) >= {"extract", "prescreen", "graph", "solve", "refine"}


class TestVerify:
    def test_detects_orphans(self, clean_docs):
        doc = clean_docs[COS]
        cset, _report, _stats = run_full(doc)
        broken = ClusterSet(cset.clusters, [3])
        verdict = verify_clusterset(broken, doc)
        assert not verdict
        assert "unassigned" in verdict.message

    def test_detects_double_assignment(self, clean_docs):
        doc = clean_docs[COS]
        cset, _report, _stats = run_full(doc)
        clusters = [Cluster(c.rep_marker, c.rep_center, list(c.members)) for c in cset.clusters]
        clusters[0].members.append(clusters[1].members[0])
        verdict = verify_clusterset(clusters, doc)
        assert not verdict
        assert "twice" in verdict.message or "similarity" in verdict.message

    def test_detects_cross_template_member(self, clean_docs):
        for kind in (COS, EDGE):
            doc = clean_docs[kind]
            cset, _report, _stats = run_full(doc)
            clusters = [
                Cluster(c.rep_marker, c.rep_center, list(c.members)) for c in cset.clusters
            ]
            moved = clusters[1].members.pop(0)
            clusters[0].members.append(moved)
            verdict = verify_clusterset(clusters, doc)
            assert not verdict

    def test_detects_center_outside_marker(self, clean_docs):
        doc = clean_docs[EDGE]
        cset, _report, _stats = run_full(doc)
        clusters = [Cluster(c.rep_marker, c.rep_center, list(c.members)) for c in cset.clusters]
        m, (cx, cy) = clusters[0].members[0]
        clusters[0].members[0] = (m, (cx + 1, cy))
        verdict = verify_clusterset(clusters, doc)
        assert not verdict
        assert "outside" in verdict.message

    def test_report_form_verifies(self, jittered_docs):
        for kind, doc in jittered_docs.items():
            report = run(doc)
            assert verify_clusterset(report, doc), kind

    def test_detects_missing_marker(self, clean_docs):
        doc = clean_docs[COS]
        cset, _report, _stats = run_full(doc)
        clusters = [Cluster(c.rep_marker, c.rep_center, list(c.members)) for c in cset.clusters]
        clusters[0].members.pop()
        verdict = verify_clusterset(clusters, doc)
        assert not verdict
        assert "never assigned" in verdict.message
