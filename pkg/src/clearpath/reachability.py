"""Local reachability inside one refined cell.

A path between two points of a cell is locally optimal when the geodesic
relative to the cell's own feature stays inside the cell.  For vertex
features the log-polar map (theta, ln r) turns geodesics into straight
segments and the outer boundary piece into a convex graph, so a segment
is blocked exactly when it rises above that graph.  For edge features
geodesics are circular arcs centered on the feature line and the same
convexity argument applies in the plain frame.  Both reduce reachability
to the sign of the maximum of a concave gap function, and reachable
boundary portions to tangency computations against the convex curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .cellpaths import cell_scale, cell_width, kappa_clearance_at_frame
from .diagram import RefinedCell
from .errors import DegenerateInputError, InternalError, PreconditionError
from .geometry import AnalyticPrimitive, Path

Point = Tuple[float, float]

GAP_TOL = 1e-9        # grazing allowance: log units (vertex), scaled (edge)
ANG_TOL = 1e-9        # frame angle comparisons, radians
ON_KAPPA_TOL = 1e-7   # relative clearance slack for "lies on the outer piece"
TERNARY_ITERS = 48
BISECT_ITERS = 80
DENSE_NODES = 256


@dataclass(frozen=True)
class TransformedPoint:
    """Log-polar image of a point in a vertex-feature cell frame."""

    theta: float
    log_r: float


@dataclass(frozen=True)
class TangentWitness:
    """Tangent of the pencil of feature-geodesics through p against the
    outer boundary piece.

    Vertex cells carry a line tangent in the transformed plane (slope and
    tangency angle); edge cells carry a tangent circle centered on the
    feature line (center abscissa, radius, tangency abscissa).  param is
    the tangency position in frame coordinates.
    """

    kind: str                 # "line_tangent" | "circle_tangent"
    exists: bool
    param: float = 0.0
    slope: float = 0.0        # line case: d(ln r)/d(theta) at the tangency
    center: float = 0.0       # circle case: center abscissa on the feature line
    radius: float = 0.0


@dataclass(frozen=True)
class EdgePortion:
    """Interval of one cell boundary side, in that side's parameter.

    alpha/beta portions run in clearance, open at the feature end: (0, hi].
    kappa portions run in the frame coordinate: [lo, hi].
    """

    side: str
    lo: float
    hi: float
    empty: bool = False

    def contains(self, value: float, slack: float = 0.0) -> bool:
        if self.empty:
            return False
        if self.side == "kappa":
            return self.lo - slack <= value <= self.hi + slack
        return 0.0 < value <= self.hi + slack


# ---------------------------------------------------------------------------
# transformed plane (vertex features)


def transform(cell: RefinedCell, p: Point) -> TransformedPoint:
    """Log-polar image (theta, ln r) of p in the cell frame."""
    if cell.kind != "vertex":
        raise PreconditionError("log-polar transform needs a vertex-feature cell")
    u, r = cell.frame_of_point(p)
    if r <= 0.0:
        raise DegenerateInputError("point coincides with the vertex feature")
    return TransformedPoint(u, math.log(r))


def inverse_transform(cell: RefinedCell, tp: TransformedPoint) -> Point:
    if cell.kind != "vertex":
        raise PreconditionError("log-polar transform needs a vertex-feature cell")
    return cell.point_of_frame(tp.theta, math.exp(tp.log_r))


# ---------------------------------------------------------------------------
# the outer boundary piece as a function of the frame coordinate


def _curve_value(cell: RefinedCell, u: float) -> float:
    """Height of the outer piece: ln(clearance) for vertex, clearance for edge."""
    c = kappa_clearance_at_frame(cell, u)
    return math.log(c) if cell.kind == "vertex" else c


def _curve_slope(cell: RefinedCell, u: float) -> float:
    """Derivative of _curve_value; closed form per piece shape."""
    if cell.kind == "vertex":
        d = u - cell.case_phi
        return math.tan(d) if cell.case == "line" else math.tan(0.5 * d)
    if cell.case == "line":
        return cell.line_slope
    return (u - cell.par_xf) / cell.par_h


def _point_height(cell: RefinedCell, p: Point) -> Tuple[float, float]:
    """Frame coordinate and gap-space height of p (ln r or clearance)."""
    u, c = cell.frame_of_point(p)
    if c <= 0.0:
        raise PreconditionError("point has non-positive clearance in the cell frame")
    return (u, math.log(c)) if cell.kind == "vertex" else (u, c)


def _on_outer_piece(cell: RefinedCell, u: float, h: float) -> bool:
    return h >= _curve_value(cell, u) - ON_KAPPA_TOL * (1.0 if cell.kind == "vertex"
                                                        else cell_scale(cell))


def _gap_tol(cell: RefinedCell) -> float:
    return GAP_TOL * (1.0 if cell.kind == "vertex" else cell_scale(cell))


def _len_tol(cell: RefinedCell) -> float:
    return ANG_TOL if cell.kind == "vertex" else ANG_TOL * cell_scale(cell)


def _ternary_max(f, a: float, b: float) -> float:
    """Maximum of a concave function on [a, b]."""
    lo, hi = a, b
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    mid = 0.5 * (lo + hi)
    return max(f(a), f(b), f(mid))


# ---------------------------------------------------------------------------
# reachability predicate


def _geodesic_height(cell: RefinedCell, p_uh: Tuple[float, float],
                     q_uh: Tuple[float, float]):
    """Height function u -> geodesic image height between the two frame points.

    Vertex cells: the chord in the transformed plane.  Edge cells: the
    upper circular arc centered on the feature line.  Returns None for
    radially aligned points (vertical geodesic, never blocked).
    """
    (up, hp), (uq, hq) = p_uh, q_uh
    if abs(uq - up) <= _len_tol(cell):
        return None
    if cell.kind == "vertex":
        s = (hq - hp) / (uq - up)
        return lambda u: hp + s * (u - up)
    t = (uq * uq + hq * hq - up * up - hp * hp) / (2.0 * (uq - up))
    # hp^2 + (up - u)(up + u - 2t) equals r^2 - (u - t)^2 without the
    # catastrophic cancellation of far centers on near-radial arcs.
    return lambda u: math.sqrt(max(hp * hp + (up - u) * (up + u - 2.0 * t), 0.0))


def _max_violation(cell: RefinedCell, p: Point, q: Point) -> float:
    p_uh = _point_height(cell, p)
    q_uh = _point_height(cell, q)
    ends = max(p_uh[1] - _curve_value(cell, p_uh[0]),
               q_uh[1] - _curve_value(cell, q_uh[0]))
    geo = _geodesic_height(cell, p_uh, q_uh)
    if geo is None:
        return ends
    a, b = min(p_uh[0], q_uh[0]), max(p_uh[0], q_uh[0])
    interior = _ternary_max(lambda u: geo(u) - _curve_value(cell, u), a, b)
    return max(ends, interior)


def locally_reachable(cell: RefinedCell, p: Point, q: Point) -> bool:
    """True when the single-feature geodesic p -> q stays in the closed cell."""
    return _max_violation(cell, p, q) <= _gap_tol(cell)


def locally_reachable_dense(cell: RefinedCell, p: Point, q: Point,
                            nodes: int = DENSE_NODES) -> bool:
    """Sampled crossing test guarding the concave-maximum shortcut."""
    p_uh = _point_height(cell, p)
    q_uh = _point_height(cell, q)
    geo = _geodesic_height(cell, p_uh, q_uh)
    tol = _gap_tol(cell)
    if geo is None:
        return (p_uh[1] - _curve_value(cell, p_uh[0]) <= tol
                and q_uh[1] - _curve_value(cell, q_uh[0]) <= tol)
    worst = -math.inf
    for i in range(nodes + 1):
        u = p_uh[0] + (q_uh[0] - p_uh[0]) * i / nodes
        worst = max(worst, geo(u) - _curve_value(cell, u))
    return worst <= tol


# ---------------------------------------------------------------------------
# tangent witnesses


def _vertex_witness(cell: RefinedCell, up: float, hp: float,
                    side: int) -> TangentWitness:
    bound = cell.theta_beta if side > 0 else 0.0
    if abs(bound - up) <= ANG_TOL:
        return TangentWitness("line_tangent", False)
    if _on_outer_piece(cell, up, hp):
        return TangentWitness("line_tangent", True, param=up,
                              slope=_curve_slope(cell, up))

    def g(uc: float) -> float:
        return (_curve_value(cell, uc)
                + _curve_slope(cell, uc) * (up - uc) - hp)

    if g(bound) >= 0.0:
        return TangentWitness("line_tangent", False)
    lo, hi = (up, bound) if side > 0 else (bound, up)
    # g is positive at up and monotone toward the bound on each side.
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if (g(mid) >= 0.0) == (side > 0):
            lo = mid
        else:
            hi = mid
    zeta = 0.5 * (lo + hi)
    return TangentWitness("line_tangent", True, param=zeta,
                          slope=_curve_slope(cell, zeta))


def _edge_arc_gap(cell: RefinedCell, px: float, py: float, t: float,
                  side: int) -> Tuple[float, float]:
    """Max of (arc height - outer piece) over the side range, and its argmax."""
    r2 = (t - px) ** 2 + py * py
    r = math.sqrt(r2)
    if side > 0:
        a, b = px, min(cell.x_beta, t + r)
    else:
        a, b = max(0.0, t - r), px
    if b - a <= 0.0:
        return (py - _curve_value(cell, px), px)

    def f(x: float) -> float:
        arc2 = py * py + (px - x) * (px + x - 2.0 * t)
        return math.sqrt(max(arc2, 0.0)) - _curve_value(cell, x)

    lo, hi = a, b
    for _ in range(TERNARY_ITERS):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    xm = 0.5 * (lo + hi)
    best = max((f(a), a), (f(b), b), (f(xm), xm))
    return best


def _edge_witness(cell: RefinedCell, px: float, py: float,
                  side: int) -> TangentWitness:
    bound = cell.x_beta if side > 0 else 0.0
    tol = _len_tol(cell)
    if abs(bound - px) <= tol:
        return TangentWitness("circle_tangent", False)
    if _on_outer_piece(cell, px, py):
        t0 = px + py * _curve_slope(cell, px)
        return TangentWitness("circle_tangent", True, param=px, center=t0,
                              radius=math.hypot(px - t0, py))

    def h(s: float) -> float:
        return _edge_arc_gap(cell, px, py, px + side * s, side)[0]

    # h is increasing in s; bracket the sign change by doubling outward.
    step = max(py, cell_width(cell), tol)
    s_neg, s_pos = 0.0, None
    if h(0.0) > 0.0:
        s_neg = -step
        for _ in range(200):
            if h(s_neg) <= 0.0:
                break
            s_neg *= 2.0
        else:
            raise InternalError("tangent circle bracket (low side) not found")
    s = step
    for _ in range(200):
        if h(s) > 0.0:
            s_pos = s
            break
        s_neg = s
        s *= 2.0
    if s_pos is None:
        raise InternalError("tangent circle bracket (high side) not found")
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (s_neg + s_pos)
        if h(mid) > 0.0:
            s_pos = mid
        else:
            s_neg = mid
    t0 = px + side * 0.5 * (s_neg + s_pos)
    xt = _edge_arc_gap(cell, px, py, t0, side)[1]
    return TangentWitness("circle_tangent", True, param=xt, center=t0,
                          radius=math.hypot(px - t0, py))


def tangent_witness(cell: RefinedCell, p: Point, side: int) -> TangentWitness:
    """Tangent of the geodesic pencil through p against the outer piece,
    looking toward increasing (side=+1) or decreasing (side=-1) frame
    coordinate.  exists=False means nothing blocks on that side."""
    u, h = _point_height(cell, p)
    if cell.kind == "vertex":
        return _vertex_witness(cell, u, h, side)
    return _edge_witness(cell, u, h, side)


# ---------------------------------------------------------------------------
# reachable boundary portions


def _whole(cell: RefinedCell, side: str) -> EdgePortion:
    if side == "kappa":
        return EdgePortion("kappa", 0.0, cell_width(cell))
    clr = cell.clr_alpha if side == "alpha" else cell.clr_beta
    return EdgePortion(side, 0.0, clr)


def reachable_portion(cell: RefinedCell, p: Point, side: str) -> EdgePortion:
    """Interval of one boundary side locally reachable from p.

    Vertical (radial) sides always keep their low-clearance end when
    nonempty; the outer piece keeps the end on p's side of the tangency.
    """
    if side not in ("alpha", "beta", "kappa"):
        raise PreconditionError(f"unknown cell side {side!r}")
    up, hp = _point_height(cell, p)
    width = cell_width(cell)
    if side == "kappa":
        if _on_outer_piece(cell, up, hp):
            return EdgePortion("kappa", 0.0, 0.0, empty=True)
        if up <= _len_tol(cell):
            lo = 0.0
        else:
            wit = tangent_witness(cell, p, -1)
            lo = wit.param if wit.exists else 0.0
        if width - up <= _len_tol(cell):
            hi = width
        else:
            wit = tangent_witness(cell, p, +1)
            hi = wit.param if wit.exists else width
        return EdgePortion("kappa", lo, hi)

    u_e = 0.0 if side == "alpha" else width
    clr_e = cell.clr_alpha if side == "alpha" else cell.clr_beta
    if abs(u_e - up) <= _len_tol(cell):
        return _whole(cell, side)
    wit = tangent_witness(cell, p, +1 if u_e > up else -1)
    if not wit.exists:
        return _whole(cell, side)
    if cell.kind == "vertex":
        y_star = (_curve_value(cell, wit.param)
                  + wit.slope * (u_e - wit.param))
        if not _on_outer_piece(cell, up, hp):
            # The tangent line passes through p's image as well.
            y_star = hp + wit.slope * (u_e - up)
        return EdgePortion(side, 0.0, min(math.exp(y_star), clr_e))
    d2 = wit.radius ** 2 - (u_e - wit.center) ** 2
    if d2 <= 0.0:
        return EdgePortion(side, 0.0, 0.0, empty=True)
    return EdgePortion(side, 0.0, min(math.sqrt(d2), clr_e))


# ---------------------------------------------------------------------------
# locally optimal paths


def local_cost(cell: RefinedCell, p: Point, q: Point) -> float:
    """Cost of the single-feature geodesic between p and q (no path object)."""
    up, cp = cell.frame_of_point(p)
    uq, cq = cell.frame_of_point(q)
    if cp <= 0.0 or cq <= 0.0:
        raise PreconditionError("geodesic endpoint has non-positive clearance")
    if cell.kind == "vertex":
        return math.hypot(uq - up, math.log(cq / cp))
    if abs(uq - up) <= _len_tol(cell):
        return abs(math.log(cq / cp))
    t = (uq * uq + cq * cq - up * up - cp * cp) / (2.0 * (uq - up))
    ap = math.atan2(cp, up - t)
    aq = math.atan2(cq, uq - t)
    return abs(math.log(math.tan(0.5 * aq) / math.tan(0.5 * ap)))


def local_optimal_path(cell: RefinedCell, p: Point, q: Point,
                       check: bool = True) -> Path:
    """Single-feature geodesic as a path; requires local reachability."""
    if check and not locally_reachable(cell, p, q):
        raise PreconditionError("points are not locally reachable in this cell")
    up, cp = cell.frame_of_point(p)
    uq, cq = cell.frame_of_point(q)
    if cp <= 0.0 or cq <= 0.0:
        raise PreconditionError("geodesic endpoint has non-positive clearance")
    tol = _len_tol(cell)
    if abs(uq - up) <= tol and abs(cq - cp) <= tol:
        return Path(())
    if cell.kind == "vertex":
        ox, oy = cell.origin
        a_p = cell.theta_alpha_world + cell.sweep_sign * up
        a_q = cell.theta_alpha_world + cell.sweep_sign * uq
        cost = math.hypot(uq - up, math.log(cq / cp))
        if abs(uq - up) <= tol:
            prim = AnalyticPrimitive("radial_segment", p, q, cost,
                                     params=(cp, cq))
        else:
            prim = AnalyticPrimitive("log_spiral", p, q, cost,
                                     params=(ox, oy, cp, a_p, cq, a_q))
        return Path((prim,))
    if abs(uq - up) <= tol:
        return Path((AnalyticPrimitive("radial_segment", p, q,
                                       abs(math.log(cq / cp)),
                                       params=(cp, cq)),))
    t = (uq * uq + cq * cq - up * up - cp * cp) / (2.0 * (uq - up))
    center = cell.point_of_frame(t, 0.0)
    rad = math.hypot(up - t, cp)
    fp = math.atan2(cp, up - t)
    fq = math.atan2(cq, uq - t)
    cross = cell.x_dir[0] * cell.normal[1] - cell.x_dir[1] * cell.normal[0]
    omega = 1.0 if cross >= 0.0 else -1.0
    a0 = math.atan2(p[1] - center[1], p[0] - center[0])
    a1 = a0 + omega * (fq - fp)
    cost = abs(math.log(math.tan(0.5 * fq) / math.tan(0.5 * fp)))
    return Path((AnalyticPrimitive("clearance_arc", p, q, cost,
                                   params=(center[0], center[1], rad, a0, a1)),))
