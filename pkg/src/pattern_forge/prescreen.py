"""Multi-stage candidate filtering over the all-pairs pattern space.

Stage A buckets patterns by a cheap translation-invariant topological
signature; only intra-bucket pairs go on. Stage B rasterizes a tiny thumbnail
per pattern and drops pairs whose thumbnail cosine falls below a relaxed cut.
Both stages are necessary-condition filters for the data they are tuned for:
the signature is exact under the edge-movement constraint's one-to-one
topology requirement, and the thumbnail cut sits below the already-relaxed
graph threshold.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import Pattern
from .layout_io import ConstraintKind
from . import raster

HIST_BINS = 8  # vertex counts 4, 6, ..., 16, and 18+


@dataclass(frozen=True)
class TopoSignature:
    polygon_count: int
    vertex_histogram: tuple[int, ...]
    quantized_area: int
    quantized_bbox: tuple[int, int]


@dataclass(frozen=True)
class PrescreenParams:
    quantum: int = 8
    cosine_slack: float = 0.05
    area_band_frac: float = 0.10
    thumb_side: int = 8
    edge_thumb_threshold: float = 0.0  # 0 disables Stage B for EdgeMove


@dataclass(frozen=True)
class PrescreenStats:
    total_pairs: int
    after_topology: int
    after_thumbnail: int


@dataclass(frozen=True)
class CandidatePairSet:
    pairs: tuple[tuple[int, int], ...]
    stats: PrescreenStats


def signature(p: Pattern, quantum: int = 8) -> TopoSignature:
    """Translation-invariant bucket key: shape count, vertex-count histogram,
    and area/bbox floored to quanta."""
    if quantum <= 0:
        raise ValueError(f"quantum must be positive, got {quantum}")
    hist = [0] * HIST_BINS
    for shape in p.shapes:
        bin_ = min((len(shape.vertices) - 4) // 2, HIST_BINS - 1)
        hist[bin_] += 1
    b = p.bounds()
    if b is None:
        qbox = (0, 0)
    else:
        qbox = ((b[2] - b[0]) // quantum, (b[3] - b[1]) // quantum)
    return TopoSignature(len(p.shapes), tuple(hist), p.total_area() // quantum, qbox)


def compatible(a: Pattern, b: Pattern, kind: ConstraintKind, params: PrescreenParams = PrescreenParams()) -> bool:
    """Stage-A test for one pair."""
    if kind is ConstraintKind.EDGEMOVE:
        return signature(a, params.quantum) == signature(b, params.quantum)
    if len(a.shapes) != len(b.shapes):
        return False
    return _area_banded(a.total_area(), b.total_area(), params.area_band_frac)


def _area_banded(area_a: int, area_b: int, frac: float) -> bool:
    return abs(area_a - area_b) <= frac * max(area_a, area_b)


def _thumbnail_vectors(patterns, indices, side: int) -> np.ndarray:
    vecs = np.zeros((len(patterns), side * side))
    for i in indices:
        vecs[i] = raster.rasterize(patterns[i], side).pixels.ravel()
    return vecs


def _stage_a_edgemove(patterns, params) -> list[tuple[int, int]]:
    buckets: dict[TopoSignature, list[int]] = {}
    for i, p in enumerate(patterns):
        buckets.setdefault(signature(p, params.quantum), []).append(i)
    pairs = []
    for members in buckets.values():
        for k, i in enumerate(members):
            for j in members[k + 1:]:
                pairs.append((i, j))
    pairs.sort()
    return pairs


def _stage_a_cosine(patterns, params) -> list[tuple[int, int]]:
    by_count: dict[int, list[int]] = {}
    for i, p in enumerate(patterns):
        by_count.setdefault(len(p.shapes), []).append(i)
    pairs = []
    for members in by_count.values():
        order = sorted(members, key=lambda i: (patterns[i].total_area(), i))
        areas = [patterns[i].total_area() for i in order]
        lo = 0
        for j in range(1, len(order)):
            # areas ascending: the band |a_i - a_j| <= frac * a_j has a
            # monotone left boundary, so a single sweep suffices
            while lo < j and not _area_banded(areas[lo], areas[j], params.area_band_frac):
                lo += 1
            for k in range(lo, j):
                a, b = order[k], order[j]
                pairs.append((a, b) if a < b else (b, a))
    pairs.sort()
    return pairs


def build_candidates(patterns, kind: ConstraintKind, threshold: float, params: PrescreenParams = PrescreenParams()) -> CandidatePairSet:
    """Filter all pattern pairs down to plausible candidates.

    `threshold` is the (possibly already relaxed) constraint threshold the
    downstream graph stage will apply; the thumbnail cut is slackened further
    so this stage stays strictly looser.
    """
    n = len(patterns)
    total = n * (n - 1) // 2
    if kind is ConstraintKind.EDGEMOVE:
        pairs = _stage_a_edgemove(patterns, params)
        thumb_cut = params.edge_thumb_threshold
    else:
        pairs = _stage_a_cosine(patterns, params)
        thumb_cut = max(0.0, threshold - params.cosine_slack)
    after_a = len(pairs)
    if thumb_cut > 0.0 and pairs:
        touched = {i for ij in pairs for i in ij}
        vecs = _thumbnail_vectors(patterns, touched, params.thumb_side)
        pairs = [
            (i, j) for i, j in pairs
            if raster.cosine_similarity(vecs[i], vecs[j]) >= thumb_cut
        ]
    return CandidatePairSet(tuple(pairs), PrescreenStats(total, after_a, len(pairs)))
