"""Manhattan geometry: polygons, markers, window clipping, polygon pairing.

All coordinates are integer nanometers. Polygons are simple rectilinear
rings stored counter-clockwise, starting at the lexicographically smallest
vertex, without a repeated closing vertex.
"""

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import pairwise

import numpy as np

Vertex = tuple[int, int]
Rect = tuple[int, int, int, int]  # xlo, ylo, xhi, yhi


class GeometryError(ValueError):
    """Invalid rectilinear geometry."""


class Axis(enum.Enum):
    X = "x"
    Y = "y"


class SmallerSide(enum.Enum):
    """Which pattern of a matched pair had fewer polygons."""

    A = "a"
    B = "b"
    EQUAL = "equal"


class MatchError(Exception):
    """A polygon pairing between two patterns could not be established."""


class NoOverlapError(MatchError):
    def __init__(self, side: str, index: int):
        super().__init__(f"polygon {index} of pattern {side} overlaps no polygon of the other pattern")
        self.side = side
        self.index = index


class MultipleOverlapError(MatchError):
    def __init__(self, side: str, index: int, count: int):
        super().__init__(f"polygon {index} of pattern {side} overlaps {count} polygons of the other pattern")
        self.side = side
        self.index = index
        self.count = count


class TopologyMismatchError(MatchError):
    """Corresponding polygons disagree in vertex count or edge orientation order."""


@dataclass(frozen=True)
class Translation:
    """Rigid shift in nm. In alignment contexts this is the displacement of the
    moving pattern's content relative to the reference, which equals the center
    adjustment that re-centers the moving pattern."""

    dx: int
    dy: int

    def is_zero(self) -> bool:
        return self.dx == 0 and self.dy == 0

    def negated(self) -> "Translation":
        return Translation(-self.dx, -self.dy)


ZERO_SHIFT = Translation(0, 0)


def _signed_area2(verts) -> int:
    total = 0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Vertex, ...]
    bbox: Rect = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        object.__setattr__(self, "bbox", (min(xs), min(ys), max(xs), max(ys)))

    @staticmethod
    def from_vertices(points) -> "Polygon":
        """Validate and normalize a rectilinear ring.

        Accepts any vertex order; the stored ring is counter-clockwise and
        rotated to start at the lexicographically smallest vertex. Raises
        GeometryError naming the offending vertex for diagonal edges,
        zero-length edges, missing alternation, or repeated vertices.
        """
        pts = [(int(x), int(y)) for x, y in points]
        if len(pts) < 4:
            raise GeometryError(f"ring needs at least 4 vertices, got {len(pts)}")
        if len(set(pts)) != len(pts):
            dup = next(p for p in pts if pts.count(p) > 1)
            raise GeometryError(f"repeated vertex {dup}")
        n = len(pts)
        dirs = []
        for i in range(n):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % n]
            if x0 == x1 and y0 == y1:
                raise GeometryError(f"zero-length edge at vertex ({x0}, {y0})")
            if x0 != x1 and y0 != y1:
                raise GeometryError(f"diagonal edge at vertex ({x0}, {y0})")
            dirs.append("h" if y0 == y1 else "v")
        for i in range(n):
            if dirs[i] == dirs[(i + 1) % n]:
                x, y = pts[(i + 1) % n]
                raise GeometryError(f"consecutive parallel edges at vertex ({x}, {y})")
        if _signed_area2(pts) < 0:
            pts.reverse()
        k = min(range(n), key=lambda i: pts[i])
        return Polygon(tuple(pts[k:] + pts[:k]))

    def edges(self):
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def direction_sequence(self) -> str:
        """One letter per edge: E/W for horizontal, N/S for vertical."""
        out = []
        for (x0, y0), (x1, y1) in self.edges():
            if y0 == y1:
                out.append("E" if x1 > x0 else "W")
            else:
                out.append("N" if y1 > y0 else "S")
        return "".join(out)

    @property
    def area(self) -> int:
        return _signed_area2(self.vertices) // 2

    def translated(self, dx: int, dy: int) -> "Polygon":
        # translation preserves orientation and the lexicographic start
        return Polygon(tuple((x + dx, y + dy) for x, y in self.vertices))


@lru_cache(maxsize=None)
def rectangles(poly: Polygon) -> tuple[Rect, ...]:
    """Exact decomposition of a simple rectilinear ring into disjoint rectangles.

    Vertical slab sweep: within each slab between adjacent distinct x
    coordinates, the spanning horizontal edges sorted by y alternate
    enter/leave. Raises GeometryError when the ring is not simple.
    """
    verts = poly.vertices
    xs = sorted({x for x, _ in verts})
    hedges = []
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        if y0 == y1:
            hedges.append((min(x0, x1), max(x0, x1), y0))
    rects = []
    for xa, xb in pairwise(xs):
        span_ys = sorted(y for lo, hi, y in hedges if lo <= xa and xb <= hi)
        if len(span_ys) % 2:
            raise GeometryError("polygon is not simple (odd crossing parity)")
        for lo, hi in zip(span_ys[::2], span_ys[1::2]):
            if lo == hi:
                raise GeometryError("polygon is not simple (self-touching span)")
            rects.append((xa, lo, xb, hi))
    if 2 * sum((r[2] - r[0]) * (r[3] - r[1]) for r in rects) != _signed_area2(verts):
        raise GeometryError("polygon is not simple (area mismatch)")
    return tuple(rects)


@lru_cache(maxsize=None)
def _rect_array(poly: Polygon) -> np.ndarray:
    return np.asarray(rectangles(poly), dtype=np.int64)


def _trace_union(rects) -> list[tuple[Vertex, ...]]:
    """Boundary rings of a union of non-overlapping rectangles.

    Directed boundary edges keep the interior on the left, so outer rings
    come out counter-clockwise. The inputs here are clipped pieces of one
    simple polygon, which cannot touch corner-to-corner, so every boundary
    vertex has a unique successor.
    """
    xs = sorted({v for r in rects for v in (r[0], r[2])})
    ys = sorted({v for r in rects for v in (r[1], r[3])})
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    w, h = len(xs) - 1, len(ys) - 1
    cov = np.zeros((h, w), dtype=bool)
    for x0, y0, x1, y1 in rects:
        cov[yi[y0]:yi[y1], xi[x0]:xi[x1]] = True

    succ: dict[Vertex, Vertex] = {}

    def emit(a: Vertex, b: Vertex):
        if a in succ:
            raise GeometryError("ambiguous corner in union trace")
        succ[a] = b

    for i in range(w + 1):
        for j in range(h):
            left = cov[j, i - 1] if i > 0 else False
            right = cov[j, i] if i < w else False
            if left and not right:
                emit((xs[i], ys[j]), (xs[i], ys[j + 1]))  # north, interior west
            elif right and not left:
                emit((xs[i], ys[j + 1]), (xs[i], ys[j]))  # south, interior east
    for j in range(h + 1):
        for i in range(w):
            below = cov[j - 1, i] if j > 0 else False
            above = cov[j, i] if j < h else False
            if below and not above:
                emit((xs[i + 1], ys[j]), (xs[i], ys[j]))  # west, interior south
            elif above and not below:
                emit((xs[i], ys[j]), (xs[i + 1], ys[j]))  # east, interior north

    rings = []
    used: set[Vertex] = set()
    for start in sorted(succ):
        if start in used:
            continue
        ring = []
        cur = start
        while True:
            used.add(cur)
            nxt = succ[cur]
            ring.append((cur, nxt))
            cur = nxt
            if cur == start:
                break
        pts = []
        m = len(ring)
        for k in range(m):
            (a, b) = ring[k]
            (c, d) = ring[(k + 1) % m]
            # keep b only where the direction turns
            da = (b[0] - a[0] == 0)
            db = (d[0] - c[0] == 0)
            if da != db:
                pts.append(b)
        rings.append(tuple(pts))
    return rings


def clip_polygon(poly: Polygon, window: Rect) -> list[Polygon]:
    """Intersect a polygon with an axis-aligned window.

    Returns the positive-area pieces as independent polygons; a polygon
    entirely inside comes back unchanged, one entirely outside (or touching
    the window only along an edge) yields nothing.
    """
    wx0, wy0, wx1, wy1 = window
    bx0, by0, bx1, by1 = poly.bbox
    if bx0 >= wx0 and by0 >= wy0 and bx1 <= wx1 and by1 <= wy1:
        return [poly]
    if bx0 >= wx1 or bx1 <= wx0 or by0 >= wy1 or by1 <= wy0:
        return []
    clipped = []
    for x0, y0, x1, y1 in rectangles(poly):
        cx0, cy0 = max(x0, wx0), max(y0, wy0)
        cx1, cy1 = min(x1, wx1), min(y1, wy1)
        if cx0 < cx1 and cy0 < cy1:
            clipped.append((cx0, cy0, cx1, cy1))
    if not clipped:
        return []
    return [Polygon.from_vertices(ring) for ring in _trace_union(clipped)]


@dataclass(frozen=True)
class Marker:
    """Axis-aligned rectangle of legal pattern centers. May be a point."""

    xlo: int
    ylo: int
    xhi: int
    yhi: int

    def __post_init__(self):
        if self.xlo > self.xhi or self.ylo > self.yhi:
            raise GeometryError(f"inverted marker ({self.xlo},{self.ylo},{self.xhi},{self.yhi})")

    def center(self) -> Vertex:
        return ((self.xlo + self.xhi) // 2, (self.ylo + self.yhi) // 2)

    def contains(self, x: int, y: int) -> bool:
        return self.xlo <= x <= self.xhi and self.ylo <= y <= self.yhi

    @property
    def width(self) -> int:
        return self.xhi - self.xlo

    @property
    def height(self) -> int:
        return self.yhi - self.ylo


@dataclass
class Pattern:
    """Window content at a candidate center.

    Shapes are stored in window-local coordinates (center at the origin), so
    two patterns with identical content compare equal regardless of where
    their windows sit on the design. Every vertex lies in [-radius, radius]^2.
    """

    center: Vertex
    radius: int
    shapes: tuple[Polygon, ...]
    _bbox_arr: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def shape_bboxes(self) -> np.ndarray:
        if self._bbox_arr is None:
            if self.shapes:
                self._bbox_arr = np.asarray([p.bbox for p in self.shapes], dtype=np.int64)
            else:
                self._bbox_arr = np.zeros((0, 4), dtype=np.int64)
        return self._bbox_arr

    @property
    def is_empty(self) -> bool:
        return not self.shapes

    def total_area(self) -> int:
        return sum(p.area for p in self.shapes)

    def bounds(self) -> Rect | None:
        """Union bounding box of the shapes, or None for an empty pattern."""
        if not self.shapes:
            return None
        bb = self.shape_bboxes()
        return (int(bb[:, 0].min()), int(bb[:, 1].min()), int(bb[:, 2].max()), int(bb[:, 3].max()))


def extract_pattern(doc, center: Vertex, indices=None) -> Pattern:
    """Clip the document's design polygons to the square window at `center`.

    `doc` needs `design_polygons` and `pattern_radius`. Pieces of a split
    polygon become independent shapes. `indices` optionally restricts the
    scan to a precomputed candidate subset (callers with a bbox index).
    """
    cx, cy = center
    r = doc.pattern_radius
    window = (cx - r, cy - r, cx + r, cy + r)
    polys = doc.design_polygons
    scan = range(len(polys)) if indices is None else indices
    shapes = []
    for idx in scan:
        for piece in clip_polygon(polys[idx], window):
            shapes.append(piece.translated(-cx, -cy))
    return Pattern((cx, cy), r, tuple(shapes))


@dataclass(frozen=True)
class Correspondence:
    """Polygon index pairs (into pattern a, pattern b) plus which side was smaller."""

    pairs: tuple[tuple[int, int], ...]
    direction: SmallerSide


def _polys_overlap(pa: Polygon, pb: Polygon, sx: int, sy: int) -> bool:
    ra = _rect_array(pa)
    rb = _rect_array(pb) + np.asarray([sx, sy, sx, sy], dtype=np.int64)
    hit = (
        (ra[:, None, 0] < rb[None, :, 2])
        & (rb[None, :, 0] < ra[:, None, 2])
        & (ra[:, None, 1] < rb[None, :, 3])
        & (rb[None, :, 1] < ra[:, None, 3])
    )
    return bool(hit.any())


def _overlap_matrix(a: Pattern, b: Pattern, shift: Translation) -> np.ndarray:
    na, nb = len(a.shapes), len(b.shapes)
    out = np.zeros((na, nb), dtype=bool)
    if na == 0 or nb == 0:
        return out
    bba = a.shape_bboxes()
    bbb = b.shape_bboxes() + np.asarray([shift.dx, shift.dy, shift.dx, shift.dy], dtype=np.int64)
    cand = (
        (bba[:, None, 0] < bbb[None, :, 2])
        & (bbb[None, :, 0] < bba[:, None, 2])
        & (bba[:, None, 1] < bbb[None, :, 3])
        & (bbb[None, :, 1] < bba[:, None, 3])
    )
    for i, j in zip(*np.nonzero(cand)):
        out[i, j] = _polys_overlap(a.shapes[i], b.shapes[j], shift.dx, shift.dy)
    return out


def match_polygons(a: Pattern, b: Pattern, shift: Translation = ZERO_SHIFT) -> Correspondence:
    """Pair up polygons by positive-area overlap, testing b displaced by `shift`.

    Every polygon of the pattern with fewer polygons must overlap exactly one
    polygon of the other; with equal counts the rule is enforced from both
    sides, which makes the pairing a bijection. Raises NoOverlapError or
    MultipleOverlapError naming the first violating polygon.
    """
    na, nb = len(a.shapes), len(b.shapes)
    if na < nb:
        direction = SmallerSide.A
    elif nb < na:
        direction = SmallerSide.B
    else:
        direction = SmallerSide.EQUAL

    m = _overlap_matrix(a, b, shift)
    pairs: list[tuple[int, int]] = []
    if na <= nb:
        counts = m.sum(axis=1)
        for i in range(na):
            c = int(counts[i])
            if c == 0:
                raise NoOverlapError("a", i)
            if c > 1:
                raise MultipleOverlapError("a", i, c)
        if na == nb:
            ccounts = m.sum(axis=0)
            for j in range(nb):
                c = int(ccounts[j])
                if c == 0:
                    raise NoOverlapError("b", j)
                if c > 1:
                    raise MultipleOverlapError("b", j, c)
        for i in range(na):
            pairs.append((i, int(np.nonzero(m[i])[0][0])))
    else:
        counts = m.sum(axis=0)
        for j in range(nb):
            c = int(counts[j])
            if c == 0:
                raise NoOverlapError("b", j)
            if c > 1:
                raise MultipleOverlapError("b", j, c)
        for j in range(nb):
            pairs.append((int(np.nonzero(m[:, j])[0][0]), j))
    return Correspondence(tuple(pairs), direction)


def edge_displacements(a: Pattern, b: Pattern, corr: Correspondence) -> list[tuple[Axis, int]]:
    """Signed perpendicular offsets of corresponding edges, b relative to a.

    Rings are already normalized (counter-clockwise, lexicographically
    smallest vertex first), so edges correspond by position once the vertex
    counts and orientation sequences agree. Vertical edges contribute X
    offsets, horizontal edges Y offsets. Raises TopologyMismatchError when a
    pair cannot be compared edge-by-edge.
    """
    out: list[tuple[Axis, int]] = []
    for i, j in corr.pairs:
        pa, pb = a.shapes[i], b.shapes[j]
        if len(pa.vertices) != len(pb.vertices):
            raise TopologyMismatchError(
                f"pair ({i}, {j}): vertex counts {len(pa.vertices)} vs {len(pb.vertices)}"
            )
        if pa.direction_sequence() != pb.direction_sequence():
            raise TopologyMismatchError(f"pair ({i}, {j}): edge orientation sequences differ")
        for (a0, _a1), (b0, _b1) in zip(pa.edges(), pb.edges()):
            if a0[0] == _a1[0]:  # vertical edge
                out.append((Axis.X, b0[0] - a0[0]))
            else:
                out.append((Axis.Y, b0[1] - a0[1]))
    return out
