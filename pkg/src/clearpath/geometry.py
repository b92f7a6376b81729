"""Scenes, obstacle features, clearance queries and closed-form path costs.

The cost of a path is its arc length weighted by reciprocal clearance,
where the clearance of a point is its distance to the nearest obstacle
feature (polygon vertices, open polygon edges, bounding-box sides).
Points inside an obstacle or outside the bounding box have clearance 0.

All tolerances are relative to the scene scale (the larger bounding-box
dimension): geometric predicates use TAU_GEO * scale, path chaining uses
CHAIN_TOL * scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateInputError,
    InternalError,
    PreconditionError,
    QuadratureError,
    SceneValidationError,
)

Point = Tuple[float, float]

TAU_GEO = 1e-9        # geometric predicate tolerance, scaled by scene size
CHAIN_TOL = 1e-7      # endpoint chaining tolerance for paths, scaled
QUAD_REL_TOL = 1e-8   # default relative tolerance for numeric path costs
CLEARANCE_FLOOR = 1e-12  # quadrature aborts below this clearance (scaled)


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


# ---------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class Feature:
    """A single obstacle feature: a polygon vertex or an open polygon edge.

    owner is (polygon_index, local_index); the bounding box uses polygon
    index -1.  Edge features are oriented so the free side is to the right
    of the direction a -> b.
    """

    kind: str                 # "vertex" | "edge"
    a: Point
    b: Optional[Point] = None
    owner: Tuple[int, int] = (-1, 0)
    index: int = -1           # position in Scene.features

    @property
    def point(self) -> Point:
        if self.kind != "vertex":
            raise PreconditionError("feature is not a vertex")
        return self.a

    @property
    def direction(self) -> Point:
        dx, dy = self.b[0] - self.a[0], self.b[1] - self.a[1]
        n = math.hypot(dx, dy)
        return (dx / n, dy / n)

    @property
    def normal(self) -> Point:
        """Unit normal pointing into the free side (right of a -> b)."""
        dx, dy = self.direction
        return (dy, -dx)

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def distance(self, p: Point) -> float:
        return self.distance_batch(np.asarray([p], dtype=float))[0]

    def distance_batch(self, pts: np.ndarray) -> np.ndarray:
        """Distances from an (N, 2) array of points (closed edge segments)."""
        if self.kind == "vertex":
            return np.hypot(pts[:, 0] - self.a[0], pts[:, 1] - self.a[1])
        ax, ay = self.a
        dx, dy = self.b[0] - ax, self.b[1] - ay
        ln2 = dx * dx + dy * dy
        t = ((pts[:, 0] - ax) * dx + (pts[:, 1] - ay) * dy) / ln2
        t = np.clip(t, 0.0, 1.0)
        fx = ax + t * dx
        fy = ay + t * dy
        return np.hypot(pts[:, 0] - fx, pts[:, 1] - fy)

    def foot(self, p: Point) -> Point:
        """Closest point of the feature to p."""
        if self.kind == "vertex":
            return self.a
        ax, ay = self.a
        dx, dy = self.b[0] - ax, self.b[1] - ay
        ln2 = dx * dx + dy * dy
        t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / ln2
        t = min(max(t, 0.0), 1.0)
        return (ax + t * dx, ay + t * dy)

    def foot_param(self, p: Point) -> float:
        """Unclamped projection parameter of p along an edge, in length units."""
        ax, ay = self.a
        ex, ey = self.direction
        return (p[0] - ax) * ex + (p[1] - ay) * ey

    def line_frame(self, p: Point) -> Tuple[float, float]:
        """Coordinates of p in the supporting-line frame of an edge feature:
        x along the edge direction from a, y the (signed) free-side offset."""
        ax, ay = self.a
        ex, ey = self.direction
        nx, ny = ey, -ex
        vx, vy = p[0] - ax, p[1] - ay
        return (vx * ex + vy * ey, vx * nx + vy * ny)

    def from_line_frame(self, x: float, y: float) -> Point:
        ax, ay = self.a
        ex, ey = self.direction
        nx, ny = ey, -ex
        return (ax + x * ex + y * nx, ay + x * ey + y * ny)


def _ring_area(ring: Sequence[Point]) -> float:
    s = 0.0
    k = len(ring)
    for i in range(k):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % k]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def _merge_collinear(ring: List[Point], tol: float) -> List[Point]:
    """Drop duplicate and collinear-interior vertices."""
    out: List[Point] = []
    for p in ring:
        if out and math.hypot(p[0] - out[-1][0], p[1] - out[-1][1]) <= tol:
            continue
        out.append(p)
    while len(out) > 1 and math.hypot(out[0][0] - out[-1][0], out[0][1] - out[-1][1]) <= tol:
        out.pop()
    if len(out) < 3:
        return out
    changed = True
    while changed and len(out) > 2:
        changed = False
        for i in range(len(out)):
            p0 = out[i - 1]
            p1 = out[i]
            p2 = out[(i + 1) % len(out)]
            ux, uy = p1[0] - p0[0], p1[1] - p0[1]
            vx, vy = p2[0] - p1[0], p2[1] - p1[1]
            cross = ux * vy - uy * vx
            if abs(cross) <= tol * (math.hypot(ux, uy) + math.hypot(vx, vy)):
                out.pop(i)
                changed = True
                break
    return out


def _segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    """Proper or touching intersection of closed segments ab and cd."""
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    def on_seg(p, q, r):
        return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    for (p, q, r, o) in ((a, b, c, o1), (a, b, d, o2), (c, d, a, o3), (c, d, b, o4)):
        if o == 0 and on_seg(p, q, r):
            return True
    return False


def point_in_ring(ring: Sequence[Point], p: Point) -> bool:
    """Even-odd test; boundary points count as inside.  Rings of one or two
    vertices are points/segments with empty interior (boundary only)."""
    k = len(ring)
    if k == 1:
        return p == ring[0]
    if k == 2:
        a, b = ring
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cross != 0.0:
            return False
        t = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
        return 0.0 <= t <= (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    inside = False
    for i in range(k):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % k]
        if (y0 > p[1]) != (y1 > p[1]):
            xs = x0 + (p[1] - y0) / (y1 - y0) * (x1 - x0)
            if xs > p[0]:
                inside = not inside
            elif xs == p[0]:
                return True
    return inside


def _point_in_ring_batch(ring: Sequence[Point], pts: np.ndarray) -> np.ndarray:
    k = len(ring)
    if k < 3:
        return np.zeros(len(pts), dtype=bool)
    arr = np.asarray(ring, dtype=float)
    x0, y0 = arr[:, 0], arr[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    cond = (y0[None, :] > py) != (y1[None, :] > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x0[None, :] + (py - y0[None, :]) / (y1[None, :] - y0[None, :]) * (x1[None, :] - x0[None, :])
    hits = cond & (xs > px)
    return (hits.sum(axis=1) % 2) == 1


# ---------------------------------------------------------------------------
# scene


@dataclass(eq=False)
class Scene:
    """Validated planning scene.  Treat as immutable after construction.

    By convention clearance(source) <= clearance(target); make_scene swaps
    the endpoints when the input violates this and records `swapped` so the
    solver can reverse the output path.
    """

    obstacles: Tuple[Tuple[Point, ...], ...]
    bounding_box: Tuple[float, float, float, float]
    source: Point
    target: Point
    swapped: bool = False
    features: Tuple[Feature, ...] = field(default_factory=tuple, repr=False)
    _vert_pts: Optional[np.ndarray] = field(default=None, repr=False)
    _vert_idx: Optional[np.ndarray] = field(default=None, repr=False)
    _edge_a: Optional[np.ndarray] = field(default=None, repr=False)
    _edge_d: Optional[np.ndarray] = field(default=None, repr=False)
    _edge_len: Optional[np.ndarray] = field(default=None, repr=False)
    _edge_idx: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def scale(self) -> float:
        xmin, ymin, xmax, ymax = self.bounding_box
        return max(xmax - xmin, ymax - ymin)

    @property
    def n_vertices(self) -> int:
        """Total obstacle vertex count (bounding box excluded)."""
        return sum(len(r) for r in self.obstacles)

    @property
    def tau(self) -> float:
        return TAU_GEO * self.scale

    def _build_feature_arrays(self) -> None:
        verts, vidx, ea, ed, el, eidx = [], [], [], [], [], []
        for f in self.features:
            if f.kind == "vertex":
                verts.append(f.a)
                vidx.append(f.index)
            else:
                ea.append(f.a)
                dx, dy = f.b[0] - f.a[0], f.b[1] - f.a[1]
                ln = math.hypot(dx, dy)
                ed.append((dx / ln, dy / ln))
                el.append(ln)
                eidx.append(f.index)
        self._vert_pts = np.asarray(verts, dtype=float).reshape(-1, 2)
        self._vert_idx = np.asarray(vidx, dtype=int)
        self._edge_a = np.asarray(ea, dtype=float).reshape(-1, 2)
        self._edge_d = np.asarray(ed, dtype=float).reshape(-1, 2)
        self._edge_len = np.asarray(el, dtype=float)
        self._edge_idx = np.asarray(eidx, dtype=int)

    def feature_distances(self, pts: np.ndarray) -> np.ndarray:
        """(N, F) distances from points to every feature (closed edges)."""
        if self._vert_pts is None:
            self._build_feature_arrays()
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty((len(pts), len(self.features)), dtype=float)
        if len(self._vert_idx):
            d = np.hypot(pts[:, 0][:, None] - self._vert_pts[None, :, 0],
                         pts[:, 1][:, None] - self._vert_pts[None, :, 1])
            out[:, self._vert_idx] = d
        if len(self._edge_idx):
            vx = pts[:, 0][:, None] - self._edge_a[None, :, 0]
            vy = pts[:, 1][:, None] - self._edge_a[None, :, 1]
            t = vx * self._edge_d[None, :, 0] + vy * self._edge_d[None, :, 1]
            t = np.clip(t, 0.0, self._edge_len[None, :])
            fx = vx - t * self._edge_d[None, :, 0]
            fy = vy - t * self._edge_d[None, :, 1]
            out[:, self._edge_idx] = np.hypot(fx, fy)
        return out

    def clearance_values(self, pts: np.ndarray) -> np.ndarray:
        """Batch clearance; 0 inside obstacles or outside the bounding box."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        val = self.feature_distances(pts).min(axis=1)
        xmin, ymin, xmax, ymax = self.bounding_box
        outside = ((pts[:, 0] < xmin) | (pts[:, 0] > xmax)
                   | (pts[:, 1] < ymin) | (pts[:, 1] > ymax))
        val[outside] = 0.0
        for ring in self.obstacles:
            if len(ring) >= 3:
                val[_point_in_ring_batch(ring, pts)] = 0.0
        return val


@dataclass(frozen=True)
class ClearanceResult:
    value: float
    feature: Feature
    foot: Point
    inside: bool = False


def extract_features(obstacles: Sequence[Sequence[Point]],
                     bounding_box: Tuple[float, float, float, float]) -> Tuple[Feature, ...]:
    """Vertex and open-edge features for every ring, plus the four box sides.

    Obstacle rings are assumed CCW so the free side is to the right of each
    directed edge; the box ring is CW for the same reason (free side inside).
    """
    feats: List[Feature] = []

    def add(kind, a, b, owner):
        feats.append(Feature(kind, a, b, owner, index=len(feats)))

    for pi, ring in enumerate(obstacles):
        k = len(ring)
        for i, v in enumerate(ring):
            add("vertex", tuple(v), None, (pi, i))
        if k >= 2:
            for i in range(k):
                a, b = tuple(ring[i]), tuple(ring[(i + 1) % k])
                if k == 2 and i == 1:
                    a, b = tuple(ring[1]), tuple(ring[0])
                add("edge", a, b, (pi, i))
    xmin, ymin, xmax, ymax = bounding_box
    box_cw = [(xmin, ymin), (xmin, ymax), (xmax, ymax), (xmax, ymin)]
    for i in range(4):
        add("edge", box_cw[i], box_cw[(i + 1) % 4], (-1, i))
    return tuple(feats)


def make_scene(obstacles: Iterable[Sequence[Point]],
               bounding_box: Tuple[float, float, float, float],
               source: Point, target: Point) -> Scene:
    """Validate and normalize raw input into a Scene.

    Rings are normalized CCW with duplicate/collinear vertices merged;
    single-vertex rings are point obstacles.  Raises SceneValidationError
    with the offending ring/endpoint named.
    """
    xmin, ymin, xmax, ymax = map(float, bounding_box)
    if not (xmin < xmax and ymin < ymax):
        raise SceneValidationError("bounding box is empty or inverted")
    scale = max(xmax - xmin, ymax - ymin)
    tol = TAU_GEO * scale

    rings: List[Tuple[Point, ...]] = []
    for ri, raw in enumerate(obstacles):
        ring = [(float(x), float(y)) for x, y in raw]
        if len(ring) < 1:
            raise SceneValidationError(f"obstacle {ri}: ring has no vertices")
        merged = _merge_collinear(ring, tol) if len(ring) >= 3 else ring
        if len(merged) == 0:
            raise SceneValidationError(f"obstacle {ri}: ring degenerates to nothing")
        if len(ring) >= 3 and len(merged) < 3:
            raise SceneValidationError(f"obstacle {ri}: zero-area polygon")
        if len(merged) >= 3:
            area = _ring_area(merged)
            if abs(area) <= tol * scale:
                raise SceneValidationError(f"obstacle {ri}: zero-area polygon")
            if area < 0:
                merged = list(reversed(merged))
            k = len(merged)
            for i in range(k):
                for j in range(i + 1, k):
                    if j == i + 1 or (i == 0 and j == k - 1):
                        continue
                    if _segments_cross(merged[i], merged[(i + 1) % k],
                                       merged[j], merged[(j + 1) % k]):
                        raise SceneValidationError(f"obstacle {ri}: self-intersecting polygon")
        for x, y in merged:
            if not (xmin + tol < x < xmax - tol and ymin + tol < y < ymax - tol):
                raise SceneValidationError(f"obstacle {ri}: vertex ({x}, {y}) not strictly inside the bounding box")
        rings.append(tuple(merged))

    # pairwise disjointness: no edge crossings, no containment
    def ring_segs(r):
        k = len(r)
        if k == 1:
            return []
        if k == 2:
            return [(r[0], r[1])]
        return [(r[i], r[(i + 1) % k]) for i in range(k)]

    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            for a, b in ring_segs(rings[i]):
                for c, d in ring_segs(rings[j]):
                    if _segments_cross(a, b, c, d):
                        raise SceneValidationError(f"obstacles {i} and {j} intersect")
            if point_in_ring(rings[i], rings[j][0]) or point_in_ring(rings[j], rings[i][0]):
                raise SceneValidationError(f"obstacles {i} and {j} are nested")
            if rings[i][0] == rings[j][0]:
                raise SceneValidationError(f"obstacles {i} and {j} share a vertex")

    feats = extract_features(rings, (xmin, ymin, xmax, ymax))
    scene = Scene(tuple(rings), (xmin, ymin, xmax, ymax),
                  (float(source[0]), float(source[1])),
                  (float(target[0]), float(target[1])),
                  features=feats)

    for name, p in (("source", scene.source), ("target", scene.target)):
        if not (xmin < p[0] < xmax and ymin < p[1] < ymax):
            raise SceneValidationError(f"{name} lies outside the bounding box")
        for ri, ring in enumerate(rings):
            if point_in_ring(ring, p):
                raise SceneValidationError(f"{name} lies inside obstacle {ri}")
        if scene.clearance_values(np.asarray([p]))[0] <= tol:
            raise SceneValidationError(f"{name} has zero clearance")

    cs = scene.clearance_values(np.asarray([scene.source, scene.target]))
    if cs[0] > cs[1]:
        scene.source, scene.target = scene.target, scene.source
        scene.swapped = True
    return scene


def clearance(scene: Scene, p: Point) -> ClearanceResult:
    """Nearest-feature clearance of a single point.

    Returns value 0 (keeping the nearest feature of the violated boundary)
    for points inside an obstacle or outside the bounding box.
    """
    pt = np.asarray([p], dtype=float)
    dists = scene.feature_distances(pt)[0]
    order = int(np.argmin(dists))
    feat = scene.features[order]
    xmin, ymin, xmax, ymax = scene.bounding_box
    inside_box = xmin <= p[0] <= xmax and ymin <= p[1] <= ymax
    containing = None
    for ri, ring in enumerate(scene.obstacles):
        if len(ring) >= 3 and point_in_ring(ring, p):
            containing = ri
            break
    if not inside_box:
        side = min((f for f in scene.features if f.owner[0] == -1),
                   key=lambda f: f.distance(p))
        return ClearanceResult(0.0, side, side.foot(p), inside=True)
    if containing is not None:
        best = min((f for f in scene.features if f.owner[0] == containing),
                   key=lambda f: f.distance(p))
        return ClearanceResult(0.0, best, best.foot(p), inside=True)
    return ClearanceResult(float(dists[order]), feat, feat.foot(p))


# ---------------------------------------------------------------------------
# closed-form costs


def log_ratio_cost(c0: float, c1: float) -> float:
    """Cost of a straight radial move between clearances c0 and c1."""
    if c0 <= 0.0 or c1 <= 0.0:
        raise PreconditionError("clearances must be positive")
    return abs(math.log(c1 / c0))


def spiral_cost(o: Feature, p: Point, q: Point) -> float:
    """Minimal cost between p and q relative to a single vertex feature:
    the logarithmic spiral about o.  The angular difference is wrapped into
    [-pi, pi]; callers working inside wider cells unwrap angles themselves."""
    if o.kind != "vertex":
        raise PreconditionError("spiral cost needs a vertex feature")
    ox, oy = o.point
    rp = math.hypot(p[0] - ox, p[1] - oy)
    rq = math.hypot(q[0] - ox, q[1] - oy)
    if rp <= 0.0 or rq <= 0.0:
        raise PreconditionError("endpoint coincides with the vertex feature")
    dth = wrap_angle(math.atan2(q[1] - oy, q[0] - ox) - math.atan2(p[1] - oy, p[0] - ox))
    return math.hypot(dth, math.log(rq / rp))


def transformed_distance(dtheta: float, dlogr: float) -> float:
    """Euclidean length in the (angle, log-radius) plane; equals the cost of
    the corresponding spiral segment around a vertex feature."""
    return math.hypot(dtheta, dlogr)


def hyperbolic_cost(x0: float, y0: float, x1: float, y1: float) -> float:
    """Minimal cost between two points in supporting-line frame coordinates
    relative to the line alone (upper half-plane, clearance = y)."""
    if y0 <= 0.0 or y1 <= 0.0:
        raise PreconditionError("points must lie on the free side")
    d2 = (x1 - x0) ** 2 + (y1 - y0) ** 2
    return math.acosh(1.0 + d2 / (2.0 * y0 * y1))


def arc_cost(o: Feature, p: Point, q: Point) -> float:
    """Cost of the circular arc through p and q centered on the supporting
    line of edge feature o (the single-feature geodesic between them).

    With radii angles th_p, th_q about the common center, both in (0, pi),
    the cost is |ln tan(th_q/2) - ln tan(th_p/2)|.  Radially aligned points
    (equal frame abscissa) admit no such arc: that needs a radial segment,
    and the call errors unless the clearances also agree (zero-cost arc).
    """
    if o.kind != "edge":
        raise PreconditionError("arc cost needs an edge feature")
    xp, yp = o.line_frame(p)
    xq, yq = o.line_frame(q)
    if yp <= 0.0 or yq <= 0.0:
        raise PreconditionError("points must lie on the free side of the edge")
    span = max(abs(xp), abs(xq), yp, yq)
    if abs(xp - xq) <= 1e-12 * span:
        if abs(yp - yq) <= CHAIN_TOL * span:
            return 0.0
        raise PreconditionError("radially aligned points admit no centered arc")
    c = (xq * xq + yq * yq - xp * xp - yp * yp) / (2.0 * (xq - xp))
    thp = math.atan2(yp, xp - c)
    thq = math.atan2(yq, xq - c)
    return abs(math.log(math.tan(0.5 * thq)) - math.log(math.tan(0.5 * thp)))


def radial_cost(scene: Scene, p: Point, q: Point) -> float:
    """Cost |ln(clr(q)/clr(p))| of the straight segment between p and q,
    valid when the segment lies on the ray from the shared nearest feature
    through both points (checked within tolerance)."""
    cp = clearance(scene, p)
    cq = clearance(scene, q)
    if cp.value <= 0.0 or cq.value <= 0.0:
        raise PreconditionError("endpoints must have positive clearance")
    lo, hi = (p, q) if cp.value <= cq.value else (q, p)
    chi = clearance(scene, hi)
    fx, fy = chi.foot
    # lo must sit on the segment from hi's foot to hi
    ux, uy = hi[0] - fx, hi[1] - fy
    vx, vy = lo[0] - fx, lo[1] - fy
    ln = math.hypot(ux, uy)
    cross = abs(ux * vy - uy * vx) / max(ln, 1e-300)
    along = (ux * vx + uy * vy) / max(ln, 1e-300)
    if cross > 64.0 * scene.tau or along < -64.0 * scene.tau or along > ln + 64.0 * scene.tau:
        raise PreconditionError("points are not radially aligned on a shared feature")
    return log_ratio_cost(cp.value, cq.value)


# ---------------------------------------------------------------------------
# analytic path primitives


@dataclass(frozen=True)
class AnalyticPrimitive:
    """One exactly-parameterized piece of a path.

    kinds and params:
      log_spiral          (ox, oy, r0, th0, r1, th1)   angles unwrapped
      clearance_arc       (cx, cy, radius, a0, a1)     circle arc, angles unwrapped
      radial_segment      (clr0, clr1)                 straight, along a feature ray
      line_segment        (clr0, clr1)                 straight
      voronoi_edge_portion(t0, t1)                     via the attached curve object
    """

    kind: str
    start: Point
    end: Point
    cost: float
    feature: Optional[Feature] = None
    edge: Optional[object] = None
    params: Tuple[float, ...] = ()

    def trace(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == "log_spiral":
            ox, oy, r0, th0, r1, th1 = self.params
            r = r0 * np.exp(ts * math.log(r1 / r0)) if r0 != r1 else np.full_like(ts, r0)
            th = th0 + ts * (th1 - th0)
            return np.stack([ox + r * np.cos(th), oy + r * np.sin(th)], axis=1)
        if self.kind == "clearance_arc":
            cx, cy, rad, a0, a1 = self.params
            a = a0 + ts * (a1 - a0)
            return np.stack([cx + rad * np.cos(a), cy + rad * np.sin(a)], axis=1)
        if self.kind in ("radial_segment", "line_segment"):
            x = self.start[0] + ts * (self.end[0] - self.start[0])
            y = self.start[1] + ts * (self.end[1] - self.start[1])
            return np.stack([x, y], axis=1)
        if self.kind == "voronoi_edge_portion":
            t0, t1 = self.params
            return self.edge.point_batch(t0 + ts * (t1 - t0))
        raise InternalError(f"unknown primitive kind {self.kind!r}")

    def speed(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == "log_spiral":
            ox, oy, r0, th0, r1, th1 = self.params
            r = r0 * np.exp(ts * math.log(r1 / r0)) if r0 != r1 else np.full_like(ts, r0)
            return r * math.hypot(th1 - th0, math.log(r1 / r0))
        if self.kind == "clearance_arc":
            cx, cy, rad, a0, a1 = self.params
            return np.full_like(ts, rad * abs(a1 - a0))
        if self.kind in ("radial_segment", "line_segment"):
            return np.full_like(ts, math.hypot(self.end[0] - self.start[0],
                                               self.end[1] - self.start[1]))
        if self.kind == "voronoi_edge_portion":
            t0, t1 = self.params
            return self.edge.speed_batch(t0 + ts * (t1 - t0)) * abs(t1 - t0)
        raise InternalError(f"unknown primitive kind {self.kind!r}")


@dataclass(frozen=True)
class Path:
    """A chain of analytic primitives; empty means a zero-cost stay-put path."""

    primitives: Tuple[AnalyticPrimitive, ...]

    @property
    def cost(self) -> float:
        return float(sum(p.cost for p in self.primitives))

    @property
    def start(self) -> Optional[Point]:
        return self.primitives[0].start if self.primitives else None

    @property
    def end(self) -> Optional[Point]:
        return self.primitives[-1].end if self.primitives else None

    def reversed(self) -> "Path":
        prims = []
        for pr in reversed(self.primitives):
            params = pr.params
            if pr.kind == "log_spiral":
                ox, oy, r0, th0, r1, th1 = params
                params = (ox, oy, r1, th1, r0, th0)
            elif pr.kind == "clearance_arc":
                cx, cy, rad, a0, a1 = params
                params = (cx, cy, rad, a1, a0)
            elif pr.kind in ("radial_segment", "line_segment"):
                params = (params[1], params[0]) if len(params) == 2 else params
            elif pr.kind == "voronoi_edge_portion":
                params = (params[1], params[0])
            prims.append(AnalyticPrimitive(pr.kind, pr.end, pr.start, pr.cost,
                                           pr.feature, pr.edge, params))
        return Path(tuple(prims))


def make_path(primitives: Sequence[AnalyticPrimitive], chain_tol: float) -> Path:
    """Assemble a path, dropping zero-length pieces and checking chaining."""
    prims = [p for p in primitives
             if math.hypot(p.end[0] - p.start[0], p.end[1] - p.start[1]) > 0 or p.cost > 0]
    for a, b in zip(prims, prims[1:]):
        gap = math.hypot(b.start[0] - a.end[0], b.start[1] - a.end[1])
        if gap > chain_tol:
            raise InternalError(f"path primitives do not chain: gap {gap:.3e}")
    return Path(tuple(prims))


def single_feature_geodesic(o: Feature, p: Point, q: Point) -> Tuple[AnalyticPrimitive, ...]:
    """Minimal-cost path between p and q relative to feature o alone.

    Vertex feature: one logarithmic spiral.  Edge feature: the circular arc
    through p and q centered on the supporting line, or a radial segment
    when the points are radially aligned.
    """
    if o.kind == "vertex":
        ox, oy = o.point
        rp = math.hypot(p[0] - ox, p[1] - oy)
        rq = math.hypot(q[0] - ox, q[1] - oy)
        if rp <= 0.0 or rq <= 0.0:
            raise PreconditionError("endpoint coincides with the vertex feature")
        thp = math.atan2(p[1] - oy, p[0] - ox)
        thq = thp + wrap_angle(math.atan2(q[1] - oy, q[0] - ox) - thp)
        cost = math.hypot(thq - thp, math.log(rq / rp))
        return (AnalyticPrimitive("log_spiral", p, q, cost, feature=o,
                                  params=(ox, oy, rp, thp, rq, thq)),)
    xp, yp = o.line_frame(p)
    xq, yq = o.line_frame(q)
    if yp <= 0.0 or yq <= 0.0:
        raise PreconditionError("points must lie on the free side of the edge")
    span = max(abs(xp), abs(xq), yp, yq)
    if abs(xp - xq) <= 1e-12 * span:
        return (AnalyticPrimitive("radial_segment", p, q, log_ratio_cost(yp, yq),
                                  feature=o, params=(yp, yq)),)
    c = (xq * xq + yq * yq - xp * xp - yp * yp) / (2.0 * (xq - xp))
    center = o.from_line_frame(c, 0.0)
    rad = math.hypot(xp - c, yp)
    a0 = math.atan2(p[1] - center[1], p[0] - center[0])
    a1 = a0 + wrap_angle(math.atan2(q[1] - center[1], q[0] - center[0]) - a0)
    cost = arc_cost(o, p, q)
    return (AnalyticPrimitive("clearance_arc", p, q, cost, feature=o,
                              params=(center[0], center[1], rad, a0, a1)),)


# ---------------------------------------------------------------------------
# numeric path cost (independent quadrature)

_K15_NODES = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_K15_WEIGHTS = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
_G7_WEIGHTS = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469,
    0.381830050505119, 0.279705391489277, 0.129484966168870,
])
_G7_TAKE = np.arange(1, 15, 2)


def adaptive_quadrature(f, a: float, b: float, rel_tol: float = QUAD_REL_TOL,
                        max_depth: int = 40, max_intervals: int = 1 << 16) -> float:
    """Adaptive Gauss-Kronrod (G7/K15) with a vectorized integrand.

    f maps an ndarray of parameters to an ndarray of values and must be
    nonnegative; intervals are bisected until each meets the embedded-rule
    error estimate relative to its own value, which bounds the global
    relative error for nonnegative integrands.
    """
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    total = 0.0
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        ts = (mid[:, None] + half[:, None] * _K15_NODES[None, :]).ravel()
        vals = np.asarray(f(ts), dtype=float).reshape(len(lo), 15)
        k15 = (vals * _K15_WEIGHTS[None, :]).sum(axis=1) * half
        g7 = (vals[:, _G7_TAKE] * _G7_WEIGHTS[None, :]).sum(axis=1) * half
        err = np.abs(k15 - g7)
        ok = err <= rel_tol * np.abs(k15) + 1e-300
        total += k15[ok].sum()
        bad = ~ok
        if not bad.any():
            return float(total)
        if 2 * int(bad.sum()) > max_intervals:
            raise QuadratureError("quadrature failed to converge")
        mid2 = mid[bad]
        lo = np.concatenate([lo[bad], mid2])
        hi = np.concatenate([mid2, hi[bad]])
    raise QuadratureError("quadrature failed to converge")


def path_cost_numeric(scene: Scene, obj, rel_tol: float = QUAD_REL_TOL,
                      clearance_floor: Optional[float] = None) -> float:
    """Numeric reciprocal-clearance cost of a Path, a single primitive, or a
    polyline given as an (N, 2) array/sequence of points.

    Serves as the independent check of every closed-form cost: integrates
    |gamma'| / clearance with adaptive quadrature against the full scene.
    Raises QuadratureError if the path touches the clearance floor.
    """
    floor = clearance_floor if clearance_floor is not None else CLEARANCE_FLOOR * scene.scale

    if isinstance(obj, Path):
        prims = obj.primitives
    elif isinstance(obj, AnalyticPrimitive):
        prims = (obj,)
    else:
        pts = np.asarray(obj, dtype=float).reshape(-1, 2)
        prims = tuple(
            AnalyticPrimitive("line_segment", tuple(pts[i]), tuple(pts[i + 1]), float("nan"))
            for i in range(len(pts) - 1)
            if math.hypot(*(pts[i + 1] - pts[i])) > 0)

    total = 0.0
    for pr in prims:
        if math.hypot(pr.end[0] - pr.start[0], pr.end[1] - pr.start[1]) == 0 \
                and pr.kind in ("radial_segment", "line_segment"):
            continue

        def integrand(ts, _pr=pr):
            pts = _pr.trace(ts)
            clr = scene.clearance_values(pts)
            if np.any(clr <= floor):
                raise QuadratureError("path reaches the clearance floor")
            return _pr.speed(ts) / clr

        total += adaptive_quadrature(integrand, 0.0, 1.0, rel_tol)
    return total
