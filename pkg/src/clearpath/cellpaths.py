"""Minimal-cost routes inside one refined cell.

Every point of a cell sees the cell's feature directly, so exact path
primitives are available: radial moves cost the log of the clearance
ratio, a constant-clearance traverse costs its length divided by the
clearance, and the outer piece kappa is walked via its curve's closed
forms.  Between two points on the cell boundary, a near-optimal route
either walks the boundary away from the feature or, when it starts on the
high-clearance radial beta, first climbs to an anchor point on beta and
crosses the cell along the constant-clearance traverse at the anchor's
clearance.  The optimal anchor is the start point itself or one of two
cell-intrinsic candidates with closed-form first-order conditions,
clamped to the cell's clearance range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .diagram import RefinedCell
from .errors import InternalError, PreconditionError
from .geometry import AnalyticPrimitive, Path, Point, make_path

CLASSIFY_TOL = 1e-7   # boundary membership, scaled by cell size
RANGE_TOL = 1e-9      # clearance range slack, scaled
CUBIC_ITERS = 80      # bisection steps for the parabola anchor cubic
FLAT_SLOPE = 1e-12    # below this the outer line piece is clearance-flat

QUARTER_PI = 0.25 * math.pi
HALF_PI = 0.5 * math.pi


def cell_scale(cell: RefinedCell) -> float:
    if cell.kind == "vertex":
        return max(cell.clr_beta, 1e-300)
    return max(math.hypot(cell.x_beta, cell.clr_beta), 1e-300)


def cell_width(cell: RefinedCell) -> float:
    """Frame extent swept from alpha to beta: angle or abscissa."""
    return cell.theta_beta if cell.kind == "vertex" else cell.x_beta


def kappa_frame_at_clearance(cell: RefinedCell, c: float) -> float:
    """Frame angle/abscissa of the outer-piece point at clearance c."""
    if cell.kind == "vertex":
        if cell.case == "line":
            ratio = min(1.0, cell.case_h / c)
            u = cell.case_phi + math.acos(ratio)
        else:
            ratio = min(1.0, max(-1.0, cell.case_h / c - 1.0))
            u = cell.case_phi + math.acos(ratio)
        return min(max(u, 0.0), cell.theta_beta)
    if cell.case == "line":
        if abs(cell.line_slope) <= FLAT_SLOPE:
            return 0.0
        u = (c - cell.line_y0) / cell.line_slope
    else:
        u = cell.par_xf + math.sqrt(max(2.0 * cell.par_h * c - cell.par_h ** 2, 0.0))
    return min(max(u, 0.0), cell.x_beta)


def traverse_cost(cell: RefinedCell, c: float) -> float:
    """Cost of the maximal constant-clearance traverse at clearance c,
    from the beta radial to the alpha radial or the outer piece."""
    if c <= 0.0:
        raise PreconditionError("traverse requires positive clearance")
    tiny = RANGE_TOL * cell_scale(cell)
    if c <= cell.clr_alpha + tiny:
        u_bar = 0.0
    else:
        u_bar = kappa_frame_at_clearance(cell, c)
    if cell.kind == "vertex":
        return max(cell.theta_beta - u_bar, 0.0)
    return max(cell.x_beta - u_bar, 0.0) / c


@dataclass(frozen=True)
class ConstClearanceArc:
    """Maximal equal-clearance traverse starting on the beta radial."""

    cell: RefinedCell
    w: Point                 # start, on beta
    w_bar: Point             # end, on alpha or on the outer piece
    on_kappa: bool           # end lies on the outer piece
    cost: float
    primitives: Tuple[AnalyticPrimitive, ...]


def constant_clearance_arc(cell: RefinedCell, w: Point) -> ConstClearanceArc:
    scale = cell_scale(cell)
    tiny = RANGE_TOL * scale
    _, cw = cell.frame_of_point(w)
    if cw <= 0.0:
        raise PreconditionError("traverse start has non-positive clearance")
    if cw > cell.clr_beta + 10 * tiny:
        raise PreconditionError(
            f"clearance {cw:.6g} above the cell maximum {cell.clr_beta:.6g}")
    if cw <= cell.clr_alpha + tiny:
        u_bar, on_kappa = 0.0, False
    else:
        u_bar, on_kappa = kappa_frame_at_clearance(cell, cw), True
    w_bar = cell.point_of_frame(u_bar, cw)
    if cell.kind == "vertex":
        cost = max(cell.theta_beta - u_bar, 0.0)
        a0 = cell.theta_alpha_world + cell.sweep_sign * cell.theta_beta
        a1 = cell.theta_alpha_world + cell.sweep_sign * u_bar
        prim = AnalyticPrimitive(
            "clearance_arc", w, w_bar, cost,
            params=(cell.origin[0], cell.origin[1], cw, a0, a1))
    else:
        cost = max(cell.x_beta - u_bar, 0.0) / cw
        prim = AnalyticPrimitive("line_segment", w, w_bar, cost, params=(cw, cw))
    prims = (prim,) if cost > 0.0 else ()
    return ConstClearanceArc(cell, w, w_bar, on_kappa, cost, prims)


@dataclass(frozen=True)
class LambdaAscent:
    """Radial climb from p to an anchor w on beta, then the traverse at
    clr(w); the cheap way to leave the beta radial."""

    cell: RefinedCell
    p: Point
    w: Point
    w_bar: Point
    cost: float
    primitives: Tuple[AnalyticPrimitive, ...]


def lambda_path(cell: RefinedCell, p: Point, w: Point) -> LambdaAscent:
    scale = cell_scale(cell)
    tau = RANGE_TOL * scale
    _, cp = cell.frame_of_point(p)
    _, cw = cell.frame_of_point(w)
    if cp <= 0.0:
        raise PreconditionError("ascent start has non-positive clearance")
    if cw < cp - tau:
        raise PreconditionError("anchor clearance below the start clearance")
    cw = max(cw, cp)
    arc = constant_clearance_arc(cell, w)
    prims: List[AnalyticPrimitive] = []
    climb = math.log(cw / cp)
    if climb > 0.0:
        prims.append(AnalyticPrimitive("radial_segment", p, w, climb,
                                       params=(cp, cw)))
    prims.extend(arc.primitives)
    return LambdaAscent(cell, p, w, arc.w_bar, climb + arc.cost, tuple(prims))


# ---------------------------------------------------------------------------
# anchors


@dataclass(frozen=True)
class AnchorPair:
    """Cell-intrinsic anchor candidates on the beta radial.

    w_alpha: anchor whose traverse ends on alpha, at clearance equal to the
    cell width; set only for edge-feature cells whose width fits below the
    alpha clearance.  w_kappa: anchor whose traverse ends on the outer
    piece, from the clamped first-order condition of the piece's shape.
    """

    cell: RefinedCell
    w_alpha: Optional[Point]
    w_alpha_clearance: Optional[float]
    w_kappa: Point
    w_kappa_clearance: float
    case_tag: str            # "kappa-line" | "kappa-parabola" | "kappa-flat"
    param: float             # the condition's parameter value after clamping
    clamped: bool


def _positive_cubic_root(a: float, xb: float) -> float:
    """Unique positive root of 2t^3 + 4a t^2 + 8a(a - xb) t - 16 a^3."""
    def val(t: float) -> float:
        return 2.0 * t ** 3 + 4.0 * a * t * t + 8.0 * a * (a - xb) * t - 16.0 * a ** 3

    lo, hi = 0.0, xb + 4.0 * a
    if not (val(lo) < 0.0 <= val(hi)):
        raise InternalError("anchor cubic lost its sign change")
    for _ in range(CUBIC_ITERS):
        mid = 0.5 * (lo + hi)
        if val(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def anchor_points(cell: RefinedCell) -> AnchorPair:
    tiny = RANGE_TOL * cell_scale(cell)
    width = cell_width(cell)
    w_alpha = None
    wa_clr = None
    if cell.kind == "vertex":
        # Climbing before a full-width traverse never pays off, so the
        # alpha-side anchor degenerates to the start point and is omitted.
        th_a = -cell.case_phi
        th_b = cell.theta_beta - cell.case_phi
        target = QUARTER_PI if cell.case == "line" else HALF_PI
        th = min(max(target, th_a), th_b)
        clamped = not (th_a < target < th_b)
        if cell.case == "line":
            c = cell.case_h / math.cos(th)
            tag = "kappa-line"
        else:
            c = cell.case_h / (1.0 + math.cos(th))
            tag = "kappa-parabola"
        param = th
    else:
        # Traverse cost width/c plus climb log(c) is stationary at c = width.
        if width <= cell.clr_alpha + tiny:
            wa_clr = width
            w_alpha = cell.point_of_frame(width, wa_clr)
        if cell.case == "line":
            if abs(cell.line_slope) <= FLAT_SLOPE:
                tag, param, clamped = "kappa-flat", cell.x_beta, True
                c = cell.clr_beta
            else:
                x0 = -cell.line_y0 / cell.line_slope  # piece crosses the feature line
                ta, tb = -x0, cell.x_beta - x0
                t = tb / cell.line_slope
                param = min(max(t, ta), tb)
                clamped = param != t
                c = param * cell.line_slope
                tag = "kappa-line"
        else:
            a = 0.5 * cell.par_h
            ta, tb = -cell.par_xf, cell.x_beta - cell.par_xf
            t = _positive_cubic_root(a, tb)
            param = min(max(t, ta), tb)
            clamped = param != t
            c = param * param / (4.0 * a) + a
            tag = "kappa-parabola"
    c = min(max(c, cell.clr_alpha), cell.clr_beta)
    w_kappa = cell.point_of_frame(width, c)
    return AnchorPair(cell, w_alpha, wa_clr, w_kappa, c, tag, param, clamped)


@dataclass(frozen=True)
class AnchorChoice:
    w: Point
    clearance: float
    lambda_cost: float
    label: str               # "p" | "w_alpha" | "w_kappa"


def best_anchor(cell: RefinedCell, p: Point) -> AnchorChoice:
    """Cheapest anchor for leaving the beta radial from p: the argmin of
    climb-plus-traverse cost over p and the cell-intrinsic candidates at
    or above p's clearance; ties go to the lowest clearance."""
    tau = RANGE_TOL * cell_scale(cell)
    _, cp = cell.frame_of_point(p)
    if cp <= 0.0:
        raise PreconditionError("anchor start has non-positive clearance")
    pair = anchor_points(cell)
    cands: List[Tuple[str, float]] = [("p", cp)]
    if pair.w_alpha is not None:
        cands.append(("w_alpha", pair.w_alpha_clearance))
    cands.append(("w_kappa", pair.w_kappa_clearance))
    best: Optional[Tuple[str, float, float]] = None
    for label, cw in cands:
        if cw < cp - tau:
            continue
        cw = max(cw, cp)
        cost = math.log(cw / cp) + traverse_cost(cell, cw)
        if best is None or cost < best[2] - 1e-12 * (1.0 + abs(cost)) or \
                (abs(cost - best[2]) <= 1e-12 * (1.0 + abs(cost)) and cw < best[1]):
            best = (label, cw, cost)
    label, cw, cost = best
    width = cell_width(cell)
    w = p if label == "p" else cell.point_of_frame(width, cw)
    return AnchorChoice(w, cw, cost, label)


# ---------------------------------------------------------------------------
# boundary-to-boundary paths


@dataclass(frozen=True)
class WellBehavedPath:
    path: Path
    anchor_used: str         # "p" | "w_alpha" | "w_kappa" | "none"

    @property
    def cost(self) -> float:
        return self.path.cost

    @property
    def primitives(self) -> Tuple[AnalyticPrimitive, ...]:
        return self.path.primitives


def classify_boundary_point(cell: RefinedCell, p: Point) -> Tuple[str, ...]:
    """Which boundary sides contain p: subset of alpha, beta, kappa."""
    scale = cell_scale(cell)
    tol = CLASSIFY_TOL * scale
    u, c = cell.frame_of_point(p)
    width = cell_width(cell)
    out = []
    utol = tol / max(cell.clr_beta, tol) if cell.kind == "vertex" else tol
    if abs(u) <= utol:
        out.append("alpha")
    if abs(u - width) <= utol:
        out.append("beta")
    if 0.0 - utol <= u <= width + utol:
        cu = kappa_clearance_at_frame(cell, min(max(u, 0.0), width))
        if abs(c - cu) <= 10 * tol:
            out.append("kappa")
    if not out:
        raise PreconditionError(f"point {p} is not on the cell boundary")
    return tuple(out)


def kappa_clearance_at_frame(cell: RefinedCell, u: float) -> float:
    """Clearance of the outer-piece point at frame coordinate u."""
    if cell.kind == "vertex":
        if cell.case == "line":
            return cell.case_h / math.cos(u - cell.case_phi)
        return cell.case_h / (1.0 + math.cos(u - cell.case_phi))
    if cell.case == "line":
        return cell.line_y0 + cell.line_slope * u
    return ((u - cell.par_xf) ** 2 + cell.par_h ** 2) / (2.0 * cell.par_h)


def _radial_portion(cell: RefinedCell, p: Point, q: Point) -> List[AnalyticPrimitive]:
    _, cp = cell.frame_of_point(p)
    _, cq = cell.frame_of_point(q)
    if min(cp, cq) <= 0.0:
        raise PreconditionError("radial move from zero clearance has no finite cost")
    cost = abs(math.log(cq / cp))
    if cost == 0.0 and p == q:
        return []
    return [AnalyticPrimitive("radial_segment", p, q, cost, params=(cp, cq))]


def _kappa_portion(cell: RefinedCell, p: Point, q: Point) -> List[AnalyticPrimitive]:
    curve = cell.kappa.curve
    tp = curve.param_of_point(p)
    tq = curve.param_of_point(q)
    if tp == tq:
        return []
    cost = curve.cost(min(tp, tq), max(tp, tq))
    return [AnalyticPrimitive("voronoi_edge_portion", p, q, cost,
                              edge=curve, params=(tp, tq))]


def _walk_avoiding_feature(cell: RefinedCell, p: Point, sides_p: Tuple[str, ...],
                           q: Point, sides_q: Tuple[str, ...]) -> List[AnalyticPrimitive]:
    """Boundary walk between points on alpha or kappa, never entering the
    cell interior: along alpha to its outer end, then along the outer piece."""
    common = [s for s in sides_p if s in sides_q and s != "beta"]
    if common:
        side = common[0]
        if side == "alpha":
            return _radial_portion(cell, p, q)
        return _kappa_portion(cell, p, q)
    if "alpha" in sides_p:
        a_pt, k_pt = p, q
        flip = False
    else:
        a_pt, k_pt = q, p
        flip = True
    u_t = cell.point_of_frame(0.0, cell.clr_alpha)  # corner joining alpha and kappa
    prims = _radial_portion(cell, a_pt, u_t) + _kappa_portion(cell, u_t, k_pt)
    if flip:
        return list(Path(tuple(prims)).reversed().primitives)
    return prims


def well_behaved_path(cell: RefinedCell, p: Point, q: Point) -> WellBehavedPath:
    """Near-optimal route between two cell-boundary points that touches the
    cell interior along at most one climb-plus-traverse."""
    scale = cell_scale(cell)
    chain_tol = 1e-6 * scale
    sides_p = classify_boundary_point(cell, p)
    sides_q = classify_boundary_point(cell, q)
    common = [s for s in sides_p if s in sides_q]
    if common:
        side = common[0]
        if side == "kappa" and p != q:
            prims = _kappa_portion(cell, p, q)
        elif side in ("alpha", "beta") and p != q:
            prims = _radial_portion(cell, p, q)
        else:
            prims = []
        return WellBehavedPath(make_path(prims, chain_tol), "none")
    p_on_beta = "beta" in sides_p
    q_on_beta = "beta" in sides_q
    if not p_on_beta and not q_on_beta:
        prims = _walk_avoiding_feature(cell, p, sides_p, q, sides_q)
        return WellBehavedPath(make_path(prims, chain_tol), "none")
    if q_on_beta and not p_on_beta:
        rev = well_behaved_path(cell, q, p)
        return WellBehavedPath(rev.path.reversed(), rev.anchor_used)
    choice = best_anchor(cell, p)
    lam = lambda_path(cell, p, choice.w)
    bar_sides = classify_boundary_point(cell, lam.w_bar)
    prims = list(lam.primitives)
    prims += _walk_avoiding_feature(cell, lam.w_bar, bar_sides, q, sides_q)
    return WellBehavedPath(make_path(prims, chain_tol), choice.label)
