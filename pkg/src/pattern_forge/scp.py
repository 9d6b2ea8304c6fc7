"""Surprisal-weighted greedy set cover over the similarity graph.

Each node carries surprisal S = 1/(1 + degree): rare patterns are worth more.
A selection covers the node and its uncovered neighbors, earning their summed
surprisal. The lazy solver keeps tentative scores in a max-priority queue and
recomputes only on staleness, which submodularity makes exact: a popped entry
whose fresh gain still beats the queue top is the true argmax.

`solve` and `eager_solve_oracle` share one gain routine, so their floating
point sums are bit-identical and the selection sequences must agree exactly.
"""

import heapq
from dataclasses import dataclass
from fractions import Fraction

from .graph import SimilarityGraph


@dataclass(frozen=True)
class SurprisalScore:
    node: int
    frequency: int
    surprisal: float
    tentative_score: float
    epoch: int


@dataclass(frozen=True)
class Selection:
    node: int
    covered: tuple[int, ...]  # newly covered, ascending; includes node unless already covered


@dataclass
class SolverStats:
    pops: int = 0
    recomputations: int = 0
    reinsertions: int = 0
    selections: int = 0
    monotonicity_violations: int = 0


@dataclass(frozen=True)
class SolveResult:
    selections: tuple[Selection, ...]
    stats: SolverStats

    def assignment(self) -> dict[int, int]:
        """node -> representative that covered it (earliest wins by construction)."""
        out = {}
        for sel in self.selections:
            for k in sel.covered:
                out[k] = sel.node
        return out


def _surprisals(g: SimilarityGraph, exact: bool = False):
    if exact:
        return [Fraction(1, 1 + g.degree(i)) for i in range(g.n)]
    return [1.0 / (1 + g.degree(i)) for i in range(g.n)]


def _gain(g: SimilarityGraph, s, covered, j: int):
    """Marginal gain of selecting j: surprisal mass of newly covered nodes.

    Summation order is fixed (self, then neighbors ascending) so every caller
    gets the identical float.
    """
    total = s[j] if not covered[j] else type(s[j])(0)
    for k in g.adjacency[j]:
        if not covered[k]:
            total += s[k]
    return total


def initial_scores(g: SimilarityGraph) -> list[SurprisalScore]:
    s = _surprisals(g)
    covered = [False] * g.n
    return [
        SurprisalScore(j, 1 + g.degree(j), s[j], _gain(g, s, covered, j), 0)
        for j in range(g.n)
    ]


def _cover(g: SimilarityGraph, covered, epoch, j: int) -> list[int]:
    """Mark j and its uncovered neighbors covered; bump epochs around them."""
    newly = [k for k in g.adjacency[j] if not covered[k]]
    if not covered[j]:
        newly.append(j)
    newly.sort()
    for k in newly:
        covered[k] = True
        epoch[k] += 1
        for m in g.adjacency[k]:
            epoch[m] += 1
    return newly


def solve(g: SimilarityGraph) -> SolveResult:
    """Lazy-greedy cover: pop, freshness-check, select or reinsert."""
    s = _surprisals(g)
    covered = [False] * g.n
    epoch = [0] * g.n
    stats = SolverStats()
    initial = initial_scores(g)
    heap = [(-sc.tentative_score, sc.node, sc.epoch) for sc in initial]
    heapq.heapify(heap)
    tentative = {sc.node: sc.tentative_score for sc in initial}
    selections = []
    remaining = g.n
    while remaining:
        neg, j, stamp = heapq.heappop(heap)
        stats.pops += 1
        if stamp == epoch[j]:
            gain = -neg
        else:
            gain = _gain(g, s, covered, j)
            stats.recomputations += 1
            if gain > tentative[j]:
                stats.monotonicity_violations += 1
            tentative[j] = gain
            if gain == 0:
                continue  # nothing left to earn here; drop the entry
            if heap and not ((-gain, j) <= heap[0][:2]):
                heapq.heappush(heap, (-gain, j, epoch[j]))
                stats.reinsertions += 1
                continue
        if gain == 0:
            continue
        newly = _cover(g, covered, epoch, j)
        selections.append(Selection(j, tuple(newly)))
        stats.selections += 1
        remaining -= len(newly)
    return SolveResult(tuple(selections), stats)


def eager_solve_oracle(g: SimilarityGraph, exact: bool = False) -> SolveResult:
    """Full-update greedy: rescore every node after each selection.

    Same selection contract and the same tie-break (higher gain, then smaller
    id) as solve. With exact=True all arithmetic is rational.
    """
    s = _surprisals(g, exact)
    covered = [False] * g.n
    epoch = [0] * g.n
    stats = SolverStats()
    selections = []
    remaining = g.n
    while remaining:
        best_j = -1
        best_gain = None
        for j in range(g.n):
            gain = _gain(g, s, covered, j)
            stats.recomputations += 1
            if gain > 0 and (best_gain is None or gain > best_gain):
                best_j, best_gain = j, gain
        newly = _cover(g, covered, epoch, best_j)
        selections.append(Selection(best_j, tuple(newly)))
        stats.selections += 1
        remaining -= len(newly)
    return SolveResult(tuple(selections), stats)
