"""Nearest-feature diagram of a scene, refined into well-shaped cells.

Free space is partitioned by nearest obstacle feature.  Each feature's
region is star-shaped around the feature and is swept exactly: for every
sweep direction (angle for vertices, foot position for edges) the radius at
which some competitor feature takes over has a closed form, so the region
boundary is an envelope of analytic curves with breakpoints found by sign
changes.  The boundary pieces between adjacent regions are straight or
parabolic bisector curves.

The refinement inserts split points at interior clearance minima of the
boundary pieces and at the points where the source and target connect, then
cuts every region along the radial through each boundary node.  Every
refined cell is bounded by its feature, two straight radial sides (alpha at
the lower-clearance end, beta at the higher) and one outer piece kappa
along which clearance is monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .curves import LineBisector, ParabolaBisector
from .errors import InternalError, PreconditionError
from .geometry import Feature, Point, Scene, clearance, wrap_angle

GRID = 1024              # sweep samples per feature
CLUSTER_TOL = 1e-7       # node clustering, scaled by scene size
PIECE_EQ_TOL = 1e-7      # equidistance check at piece midpoints, scaled
SNAP_TOL = 1e-9          # source/target snap to the diagram, scaled
BISECT_ITERS = 48
TWO_PI = 2.0 * math.pi


def _unit(dx: float, dy: float) -> Point:
    n = math.hypot(dx, dy)
    return (dx / n, dy / n)


def wrap_positive(a: float) -> float:
    a = math.fmod(a, TWO_PI)
    return a + TWO_PI if a < 0.0 else a


# ---------------------------------------------------------------------------
# structures


@dataclass
class Node:
    index: int
    point: Point
    clearance: float


@dataclass
class DiagramEdge:
    """One piece of the bisector between features pair[0] and pair[1],
    between nodes n0 (at curve parameter t0) and n1 (at t1), t0 < t1."""

    index: int
    pair: Tuple[int, int]
    curve: object
    t0: float
    t1: float
    n0: int
    n1: int

    @property
    def cost(self) -> float:
        return self.curve.cost(self.t0, self.t1)

    def point_at(self, t: float) -> Point:
        p = self.curve.point_batch(np.asarray([t]))[0]
        return (float(p[0]), float(p[1]))


@dataclass
class Radial:
    """Straight cell side from a point of the feature to a boundary node;
    clearance grows linearly from 0 at the feature to the node clearance."""

    feature_index: int
    inner: Point
    outer_node: int
    outer_point: Point
    clearance: float
    direction: Point
    degenerate: bool
    terminals: List[Tuple[str, Point, float]] = field(default_factory=list)

    def point_at_clearance(self, c: float) -> Point:
        return (self.inner[0] + c * self.direction[0],
                self.inner[1] + c * self.direction[1])


@dataclass
class RefinedCell:
    """Cell of one feature bounded by radials alpha/beta and outer piece
    kappa, with clr(alpha node) <= clr(beta node) and clearance monotone
    along kappa from the alpha end to the beta end.

    Vertex-cell frame: polar about the vertex, angle 0 along alpha,
    positive toward beta (theta_beta = angular width).  The outer piece is
    rho(theta) = h / cos(theta - phi) for a straight piece at distance h,
    or rho(theta) = H / (1 + cos(theta - phi)) for a parabolic piece whose
    focus is the vertex.

    Edge-cell frame: x along the feature from the alpha foot toward beta
    (x_beta = width), y = clearance.  The outer piece is y = y0 + slope * x
    or the parabola y = ((x - xf)^2 + h^2) / (2 h).
    """

    index: int
    feature_index: int
    kind: str                    # "vertex" | "edge"
    alpha: Radial
    beta: Radial
    kappa: DiagramEdge
    kappa_alpha_end: int         # 0 if kappa.t0 is the alpha-side end else 1
    case: str                    # "line" | "parabola"
    # vertex frame
    origin: Point = (0.0, 0.0)
    theta_alpha_world: float = 0.0
    sweep_sign: int = 1
    theta_beta: float = 0.0
    case_h: float = 0.0          # h (line) or H (parabola focus-directrix)
    case_phi: float = 0.0        # frame angle of the foot / apex direction
    # edge frame
    x_dir: Point = (1.0, 0.0)
    normal: Point = (0.0, 1.0)
    x_beta: float = 0.0
    line_y0: float = 0.0         # line case: y at x=0
    line_slope: float = 0.0
    par_xf: float = 0.0          # parabola case: apex abscissa in frame
    par_h: float = 0.0

    @property
    def clr_alpha(self) -> float:
        return self.alpha.clearance

    @property
    def clr_beta(self) -> float:
        return self.beta.clearance

    def frame_of_point(self, p: Point) -> Tuple[float, float]:
        if self.kind == "vertex":
            dx, dy = p[0] - self.origin[0], p[1] - self.origin[1]
            r = math.hypot(dx, dy)
            rel = wrap_positive(self.sweep_sign * (math.atan2(dy, dx) - self.theta_alpha_world))
            if rel > self.theta_beta + 1e-6:
                rel -= TWO_PI
            return (rel, r)
        dx, dy = p[0] - self.alpha.inner[0], p[1] - self.alpha.inner[1]
        return (dx * self.x_dir[0] + dy * self.x_dir[1],
                dx * self.normal[0] + dy * self.normal[1])

    def point_of_frame(self, u: float, c: float) -> Point:
        if self.kind == "vertex":
            a = self.theta_alpha_world + self.sweep_sign * u
            return (self.origin[0] + c * math.cos(a), self.origin[1] + c * math.sin(a))
        return (self.alpha.inner[0] + u * self.x_dir[0] + c * self.normal[0],
                self.alpha.inner[1] + u * self.x_dir[1] + c * self.normal[1])

    def kappa_clearance(self, t: float) -> float:
        return self.kappa.curve.clearance_at(t)

    def kappa_t_alpha(self) -> float:
        return self.kappa.t0 if self.kappa_alpha_end == 0 else self.kappa.t1

    def kappa_t_beta(self) -> float:
        return self.kappa.t1 if self.kappa_alpha_end == 0 else self.kappa.t0

    def kappa_t_at_clearance(self, c: float) -> float:
        """Curve parameter of the unique kappa point at clearance c."""
        curve = self.kappa.curve
        ta, tb = self.kappa_t_alpha(), self.kappa_t_beta()
        lo, hi = (ta, tb) if ta < tb else (tb, ta)
        if isinstance(curve, LineBisector) and curve.model == "const":
            raise PreconditionError("constant-clearance piece has no clearance inverse")
        if isinstance(curve, LineBisector) and curve.model == "affine":
            t = curve.param_at_clearance(c, +1)
        else:
            mid = curve.clearance_min_param()
            branch = +1 if lo >= mid - 1e-9 * max(1.0, abs(mid)) else -1
            t = curve.param_at_clearance(c, branch)
        return min(max(t, lo), hi)

    def frame_angle_of_direction(self, world_angle: float) -> float:
        return wrap_angle(self.sweep_sign * (world_angle - self.theta_alpha_world))


@dataclass
class Terminal:
    label: str
    point: Point
    clearance: float
    feature_index: int
    node_index: int
    interior: bool
    radial: Optional[Radial] = None
    cells: Tuple[int, ...] = ()


@dataclass
class VoronoiDiagram:
    scene: Scene
    nodes: List[Node]
    edges: List[DiagramEdge]
    cells: List[RefinedCell]
    cells_by_feature: Dict[int, List[int]]
    source: Terminal
    target: Terminal

    def validate(self) -> List[str]:
        """Structural invariants; returns human-readable violations."""
        out = []
        sc = self.scene
        tol = PIECE_EQ_TOL * sc.scale
        for e in self.edges:
            tm = 0.5 * (e.t0 + e.t1)
            p = e.point_at(tm)
            d = sc.feature_distances(np.asarray([p]))[0]
            da, db = d[e.pair[0]], d[e.pair[1]]
            if abs(da - db) > tol:
                out.append(f"edge {e.index}: not equidistant ({da:.6g} vs {db:.6g})")
            if d.min() < da - tol:
                out.append(f"edge {e.index}: another feature is closer at its midpoint")
            for n, t in ((e.n0, e.t0), (e.n1, e.t1)):
                q = e.point_at(t)
                nd = self.nodes[n]
                if math.hypot(q[0] - nd.point[0], q[1] - nd.point[1]) > 10 * tol:
                    out.append(f"edge {e.index}: endpoint off node {n}")
        for c in self.cells:
            ca, cb = c.clr_alpha, c.clr_beta
            if ca > cb + tol:
                out.append(f"cell {c.index}: alpha clearance above beta")
            lo = c.kappa_clearance(c.kappa_t_alpha())
            hi = c.kappa_clearance(c.kappa_t_beta())
            if abs(lo - ca) > 10 * tol or abs(hi - cb) > 10 * tol:
                out.append(f"cell {c.index}: kappa end clearances disagree with radials")
            ts = np.linspace(c.kappa.t0, c.kappa.t1, 17)
            cl = c.kappa.curve.clearance_batch(ts)
            mono = np.all(np.diff(cl) >= -tol) or np.all(np.diff(cl) <= tol)
            if not mono:
                out.append(f"cell {c.index}: kappa clearance not monotone")
            for rad in (c.alpha, c.beta):
                if not rad.degenerate:
                    ln = math.hypot(rad.outer_point[0] - rad.inner[0],
                                    rad.outer_point[1] - rad.inner[1])
                    if abs(ln - rad.clearance) > 10 * tol:
                        out.append(f"cell {c.index}: radial length differs from clearance")
        return out


# ---------------------------------------------------------------------------
# crossing radii


class _Workspace:
    """Cached per-scene arrays for vectorized crossing-radius queries."""

    def __init__(self, scene: Scene):
        self.scene = scene
        feats = scene.features
        self.n = len(feats)
        self.vert_idx = np.asarray([f.index for f in feats if f.kind == "vertex"], dtype=int)
        self.vert_pts = np.asarray([f.a for f in feats if f.kind == "vertex"],
                                   dtype=float).reshape(-1, 2)
        edges = [f for f in feats if f.kind == "edge"]
        self.edge_idx = np.asarray([f.index for f in edges], dtype=int)
        self.edge_a = np.asarray([f.a for f in edges], dtype=float).reshape(-1, 2)
        self.edge_dir = np.asarray([f.direction for f in edges], dtype=float).reshape(-1, 2)
        self.edge_nrm = np.asarray([f.normal for f in edges], dtype=float).reshape(-1, 2)
        self.edge_len = np.asarray([f.length for f in edges], dtype=float)
        self.tau = 1e-9 * scene.scale
        self.reflex = _reflex_vertex_indices(scene)

    def radii(self, B: np.ndarray, U: np.ndarray) -> np.ndarray:
        """(N, F) crossing radii: smallest r >= 0 at which feature j gets as
        close to B + r*U as the swept feature (distance r); inf if never."""
        B = np.asarray(B, dtype=float).reshape(-1, 2)
        U = np.asarray(U, dtype=float).reshape(-1, 2)
        N = len(B)
        out = np.full((N, self.n), np.inf)
        if len(self.vert_idx):
            vx = self.vert_pts[None, :, 0] - B[:, 0, None]
            vy = self.vert_pts[None, :, 1] - B[:, 1, None]
            uv = U[:, 0, None] * vx + U[:, 1, None] * vy
            vv = vx * vx + vy * vy
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(uv > 1e-300, vv / (2.0 * uv), np.inf)
            out[:, self.vert_idx] = r
        if len(self.edge_idx):
            with np.errstate(divide="ignore", invalid="ignore"):
                bx = B[:, 0, None] - self.edge_a[None, :, 0]
                by = B[:, 1, None] - self.edge_a[None, :, 1]
                d0 = bx * self.edge_nrm[None, :, 0] + by * self.edge_nrm[None, :, 1]
                mu = (U[:, 0, None] * self.edge_nrm[None, :, 0]
                      + U[:, 1, None] * self.edge_nrm[None, :, 1])
                ok = (d0 > -self.tau) & (mu < 1.0 - 1e-15)
                r = np.where(ok, np.maximum(d0, 0.0) / (1.0 - mu), np.inf)
                fp = (bx * self.edge_dir[None, :, 0] + by * self.edge_dir[None, :, 1]
                      + r * (U[:, 0, None] * self.edge_dir[None, :, 0]
                             + U[:, 1, None] * self.edge_dir[None, :, 1]))
                good = (np.isfinite(r) & (fp >= -self.tau)
                        & (fp <= self.edge_len[None, :] + self.tau))
            out[:, self.edge_idx] = np.where(good, r, np.inf)
        out[:, self.reflex] = np.inf
        return out

    def owner_radius(self, j: int, b: Point, u: Point) -> float:
        """Crossing radius of one feature, tolerating the zero limit at
        corners (used at interval endpoints where the guarded batch formula
        degenerates)."""
        f = self.scene.features[j]
        if f.kind == "vertex":
            vx, vy = f.a[0] - b[0], f.a[1] - b[1]
            vv = vx * vx + vy * vy
            if vv <= self.tau * self.tau:
                return 0.0
            uv = u[0] * vx + u[1] * vy
            return vv / (2.0 * uv) if uv > 0.0 else math.inf
        m, d, a = f.normal, f.direction, f.a
        d0 = m[0] * (b[0] - a[0]) + m[1] * (b[1] - a[1])
        mu = m[0] * u[0] + m[1] * u[1]
        if d0 < -self.tau or mu >= 1.0 - 1e-15:
            return math.inf
        r = max(d0, 0.0) / (1.0 - mu)
        fp = (d[0] * (b[0] - a[0]) + d[1] * (b[1] - a[1])
              + r * (d[0] * u[0] + d[1] * u[1]))
        if fp < -self.tau or fp > f.length + self.tau:
            return math.inf
        return r


def _reflex_vertex_indices(scene: Scene) -> np.ndarray:
    """Vertex features at reflex polygon corners (never uniquely nearest)."""
    idx = []
    by_owner = {(f.owner, f.kind): f for f in scene.features}
    for pi, ring in enumerate(scene.obstacles):
        k = len(ring)
        if k < 3:
            continue
        for i in range(k):
            v = ring[i]
            dp = _unit(v[0] - ring[i - 1][0], v[1] - ring[i - 1][1])
            dn = _unit(ring[(i + 1) % k][0] - v[0], ring[(i + 1) % k][1] - v[1])
            if dp[0] * dn[1] - dp[1] * dn[0] <= 1e-12:
                f = by_owner.get(((pi, i), "vertex"))
                if f is not None:
                    idx.append(f.index)
    return np.asarray(idx, dtype=int)


# ---------------------------------------------------------------------------
# sweep domains


@dataclass
class _SweepDomain:
    feature: Feature
    kind: str               # "vertex" | "edge"
    t0: float
    t1: float
    cyclic: bool
    theta0: float = 0.0     # vertex sweeps: world angle at t=0
    anchor: float = 0.0     # cyclic sweeps: parameter origin for assembly

    def bases(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == "vertex":
            return np.tile(np.asarray(self.feature.point), (len(ts), 1))
        a, d = self.feature.a, self.feature.direction
        return np.stack([a[0] + ts * d[0], a[1] + ts * d[1]], axis=1)

    def dirs(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.kind == "vertex":
            ang = self.theta0 + ts
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)
        n = self.feature.normal
        return np.tile(np.asarray(n), (len(ts), 1))

    def base_at(self, t: float) -> Point:
        if self.kind == "vertex":
            return self.feature.point
        a, d = self.feature.a, self.feature.direction
        return (a[0] + t * d[0], a[1] + t * d[1])

    def dir_at(self, t: float) -> Point:
        if self.kind == "vertex":
            ang = self.theta0 + t
            return (math.cos(ang), math.sin(ang))
        return self.feature.normal

    def param_of_point(self, p: Point) -> float:
        """Sweep parameter of a boundary point (for ordering pieces).
        Cyclic domains return values in [anchor, anchor + 2*pi)."""
        if self.kind == "vertex":
            v = self.feature.point
            rel = wrap_positive(math.atan2(p[1] - v[1], p[0] - v[0]) - self.theta0)
            if self.cyclic:
                return self.anchor + wrap_positive(rel - self.anchor)
            if rel > (self.t1 - self.t0) + 1e-6:
                rel -= TWO_PI
            return rel
        return self.feature.foot_param(p)


def _sweep_domains(scene: Scene) -> List[_SweepDomain]:
    doms = []
    for f in scene.features:
        if f.kind == "edge":
            doms.append(_SweepDomain(f, "edge", 0.0, f.length, False))
            continue
        pi, i = f.owner
        ring = scene.obstacles[pi]
        k = len(ring)
        if k == 1:
            doms.append(_SweepDomain(f, "vertex", 0.0, TWO_PI, True))
            continue
        if k == 2:
            w = ring[1 - i]
            dp = _unit(f.a[0] - w[0], f.a[1] - w[1])
            theta0 = math.atan2(dp[1], dp[0]) - 0.5 * math.pi
            doms.append(_SweepDomain(f, "vertex", 0.0, math.pi, False, theta0=theta0))
            continue
        v = ring[i]
        dp = _unit(v[0] - ring[i - 1][0], v[1] - ring[i - 1][1])
        dn = _unit(ring[(i + 1) % k][0] - v[0], ring[(i + 1) % k][1] - v[1])
        if dp[0] * dn[1] - dp[1] * dn[0] <= 1e-12:
            continue  # reflex corner: no region of its own
        np_ang = math.atan2(-dp[0], dp[1])   # right normal of incoming edge
        nn_ang = math.atan2(-dn[0], dn[1])   # right normal of outgoing edge
        span = wrap_positive(nn_ang - np_ang)
        doms.append(_SweepDomain(f, "vertex", 0.0, span, False, theta0=np_ang))
    return doms


def _exclusion_indices(scene: Scene, f: Feature) -> List[int]:
    """Competitors never admitted against this sweep: the feature itself,
    its ring neighbors (tied against it everywhere), and edges whose
    supporting line contains the whole sweep base locus (their line tie is
    a zero-measure artifact; ownership near them flows through their
    endpoint vertices)."""
    by_owner = {(ft.owner, ft.kind): ft.index for ft in scene.features}
    pi, i = f.owner
    out = [f.index]
    if pi >= 0:
        k = len(scene.obstacles[pi])
        if f.kind == "vertex":
            for j in ((i, (i - 1) % k) if k >= 2 else ()):
                e = by_owner.get(((pi, j), "edge"))
                if e is not None and e not in out:
                    out.append(e)
        else:
            for j in (i, (i + 1) % k):
                v = by_owner.get(((pi, j), "vertex"))
                if v is not None and v not in out:
                    out.append(v)
            # neighbor edges across a convex corner never pinch this band;
            # across a reflex corner they do and must stay in
            for j, shared in (((i - 1) % k, i), ((i + 1) % k, (i + 1) % k)):
                e = by_owner.get(((pi, j), "edge"))
                if e is None or e in out or e == f.index:
                    continue
                prev_local = (shared - 1) % k
                dp = _unit(scene.obstacles[pi][shared][0] - scene.obstacles[pi][prev_local][0],
                           scene.obstacles[pi][shared][1] - scene.obstacles[pi][prev_local][1])
                nxt_local = (shared + 1) % k
                dn = _unit(scene.obstacles[pi][nxt_local][0] - scene.obstacles[pi][shared][0],
                           scene.obstacles[pi][nxt_local][1] - scene.obstacles[pi][shared][1])
                if dp[0] * dn[1] - dp[1] * dn[0] >= -1e-12:
                    out.append(e)
    tau = 1e-9 * scene.scale
    base = f.point if f.kind == "vertex" else f.a
    for g in scene.features:
        if g.kind != "edge" or g.index in out:
            continue
        m = g.normal
        off = m[0] * (base[0] - g.a[0]) + m[1] * (base[1] - g.a[1])
        if abs(off) > tau:
            continue
        if f.kind == "vertex":
            out.append(g.index)
        else:
            d1, d2 = f.direction, g.direction
            if abs(d1[0] * d2[1] - d1[1] * d2[0]) <= 1e-12:
                out.append(g.index)
    return out


# ---------------------------------------------------------------------------
# bisector curve construction


def bisector_curve(scene: Scene, fi: int, fj: int):
    """Canonical bisector curve for an unordered feature pair, or None when
    the pair admits no free-space bisector."""
    F, G = scene.features[fi], scene.features[fj]
    if F.kind == "edge" and G.kind == "vertex":
        F, G = G, F
    if F.kind == "vertex" and G.kind == "vertex":
        v, w = F.point, G.point
        h = 0.5 * math.hypot(w[0] - v[0], w[1] - v[1])
        if h <= 0.0:
            return None
        u = _unit(w[0] - v[0], w[1] - v[1])
        mid = (0.5 * (v[0] + w[0]), 0.5 * (v[1] + w[1]))
        return LineBisector(mid, (-u[1], u[0]), "point", h, 0.0)
    if F.kind == "vertex":
        pi, i = F.owner
        gpi, gi = G.owner
        if pi == gpi and pi >= 0:
            k = len(scene.obstacles[pi])
            if i == gi or i == (gi + 1) % k:
                return LineBisector(F.point, G.normal, "affine", 0.0, 1.0)
        x, h = G.line_frame(F.point)
        if h <= 1e-12 * scene.scale:
            return None
        return ParabolaBisector(G.a, G.direction, G.normal, x, h)
    e1, e2 = F.direction, G.direction
    m1, m2 = F.normal, G.normal
    cross = e1[0] * e2[1] - e1[1] * e2[0]
    if abs(cross) <= 1e-12:
        gap = m1[0] * (G.a[0] - F.a[0]) + m1[1] * (G.a[1] - F.a[1])
        if m1[0] * m2[0] + m1[1] * m2[1] > 0.0 or gap <= 1e-12 * scene.scale:
            return None
        base = (F.a[0] + 0.5 * gap * m1[0], F.a[1] + 0.5 * gap * m1[1])
        return LineBisector(base, e1, "const", 0.5 * gap, 0.0)
    # supporting lines cross at X; bisector of the two free half-planes
    dax, day = G.a[0] - F.a[0], G.a[1] - F.a[1]
    s = (dax * e2[1] - day * e2[0]) / cross
    X = (F.a[0] + s * e1[0], F.a[1] + s * e1[1])
    dmx, dmy = m1[0] - m2[0], m1[1] - m2[1]
    u = _unit(-dmy, dmx)
    k = m1[0] * u[0] + m1[1] * u[1]
    if k < 0.0:
        u = (-u[0], -u[1])
        k = -k
    if k <= 1e-15:
        return None
    return LineBisector(X, u, "affine", 0.0, k)


# ---------------------------------------------------------------------------
# diagram builder


class _Builder:
    def __init__(self, scene: Scene, grid: int = GRID):
        self.scene = scene
        self.ws = _Workspace(scene)
        self.grid = grid
        self.scale = scene.scale
        self.nodes: List[Node] = []
        self.pieces: Dict[int, DiagramEdge] = {}
        self.by_pair: Dict[Tuple[int, int], List[int]] = {}
        self.curves: Dict[Tuple[int, int], object] = {}
        self.next_pid = 0
        self.domains: Dict[int, _SweepDomain] = {}
        self.exclusions: Dict[int, List[int]] = {}

    def _radii_at(self, b: Point, u: Point, exclude: Sequence[int]) -> np.ndarray:
        r = self.ws.radii(np.asarray([b]), np.asarray([u]))[0]
        r[list(exclude)] = np.inf
        return r

    # -- sweeps ----------------------------------------------------------

    def sweep(self, dom: _SweepDomain) -> List[Tuple[float, float, int]]:
        """Intervals (t_lo, t_hi, owner feature) covering the sweep domain.
        Cyclic domains return intervals over [anchor, anchor + 2*pi]."""
        excl = self.exclusions[dom.feature.index]
        ts = np.linspace(dom.t0, dom.t1, self.grid + 1)
        B, U = dom.bases(ts), dom.dirs(ts)
        R = self.ws.radii(B, U)
        R[:, excl] = np.inf
        owners = np.argmin(R, axis=1)
        env = R[np.arange(len(ts)), owners]
        if not np.all(np.isfinite(env)):
            raise InternalError(f"unbounded sweep for feature {dom.feature.index}")

        def owner_at(t: float) -> int:
            r = self._radii_at(dom.base_at(t), dom.dir_at(t), excl)
            return int(np.argmin(r))

        breaks: List[Tuple[float, int, int]] = []  # (t, owner_left, owner_right)

        def refine(tl: float, tr: float, ol: int, orr: int, depth: int) -> None:
            lo, hi = tl, tr
            for _ in range(BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                r = self._radii_at(dom.base_at(mid), dom.dir_at(mid), excl)
                if r[ol] <= r[orr]:
                    lo = mid
                else:
                    hi = mid
            t_star = 0.5 * (lo + hi)
            if depth < 6:
                delta = max((tr - tl) * 1e-3, 1e-13 * max(1.0, abs(t_star)))
                for probe, expected in ((t_star - delta, ol), (t_star + delta, orr)):
                    if tl < probe < tr:
                        j = owner_at(probe)
                        if j != expected:
                            refine(tl, probe, ol, j, depth + 1)
                            refine(probe, tr, j, orr, depth + 1)
                            return
            breaks.append((t_star, ol, orr))

        for i in range(len(ts) - 1):
            if owners[i] != owners[i + 1]:
                refine(float(ts[i]), float(ts[i + 1]),
                       int(owners[i]), int(owners[i + 1]), 0)
        breaks.sort(key=lambda bk: bk[0])

        width_tol = 1e-12 * max(1.0, dom.t1 - dom.t0)
        if dom.cyclic:
            if not breaks:
                raise InternalError("cyclic sweep found a single owner")
            dom.anchor = breaks[0][0]
            cuts = [bk[0] for bk in breaks] + [breaks[0][0] + TWO_PI]
            ows = [bk[2] for bk in breaks]
            intervals = []
            for i in range(len(cuts) - 1):
                if cuts[i + 1] - cuts[i] > width_tol:
                    intervals.append((cuts[i], cuts[i + 1], ows[i]))
            return intervals
        cuts = [dom.t0] + [bk[0] for bk in breaks] + [dom.t1]
        ows = ([breaks[0][1]] + [bk[2] for bk in breaks]) if breaks else [int(owners[0])]
        intervals = []
        for i in range(len(cuts) - 1):
            if cuts[i + 1] - cuts[i] > width_tol:
                intervals.append((cuts[i], cuts[i + 1], ows[i]))
        return intervals

    def envelope_candidate(self, dom: _SweepDomain, t: float, owner: int) -> Point:
        """Boundary point at sweep parameter t against a known owner."""
        b, u = dom.base_at(t), dom.dir_at(t)
        r = self.ws.owner_radius(owner, b, u)
        if not math.isfinite(r):
            rr = self._radii_at(b, u, self.exclusions[dom.feature.index])
            r = float(rr.min())
            if not math.isfinite(r):
                raise InternalError(
                    f"no envelope radius at t={t} for feature {dom.feature.index}")
        return (b[0] + r * u[0], b[1] + r * u[1])

    # -- nodes -----------------------------------------------------------

    def cluster_nodes(self, cands: np.ndarray) -> np.ndarray:
        tree = cKDTree(cands)
        pairs = tree.query_pairs(CLUSTER_TOL * self.scale, output_type="ndarray")
        parent = np.arange(len(cands))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, bb in pairs:
            ra, rb = find(a), find(bb)
            if ra != rb:
                parent[rb] = ra
        roots = np.asarray([find(i) for i in range(len(cands))])
        uniq, inverse = np.unique(roots, return_inverse=True)
        pts = np.zeros((len(uniq), 2))
        counts = np.zeros(len(uniq))
        np.add.at(pts, inverse, cands)
        np.add.at(counts, inverse, 1.0)
        pts /= counts[:, None]
        clr = self.scene.clearance_values(pts)
        for i in range(len(uniq)):
            self.nodes.append(Node(i, (float(pts[i, 0]), float(pts[i, 1])), float(clr[i])))
        return inverse

    # -- pieces ----------------------------------------------------------

    def add_node(self, point: Point, clr: float) -> int:
        n = Node(len(self.nodes), point, clr)
        self.nodes.append(n)
        return n.index

    def add_piece(self, pair, curve, t0, t1, n0, n1) -> int:
        pid = self.next_pid
        self.next_pid += 1
        self.pieces[pid] = DiagramEdge(pid, pair, curve, t0, t1, n0, n1)
        self.by_pair.setdefault(pair, []).append(pid)
        return pid

    def remove_piece(self, pid: int) -> DiagramEdge:
        e = self.pieces.pop(pid)
        self.by_pair[e.pair].remove(pid)
        return e

    def piece_valid_at(self, pair, curve, t: float) -> bool:
        p = curve.point_batch(np.asarray([t]))[0]
        d = self.scene.feature_distances(p.reshape(1, 2))[0]
        tol = PIECE_EQ_TOL * self.scale
        da, db = d[pair[0]], d[pair[1]]
        return abs(da - db) <= tol and d.min() >= da - tol

    def make_pieces(self, pair, node_pairs: List[Tuple[int, int]]) -> None:
        """One piece per distinct claimed interval. Both features sweep the
        shared boundary, so each real piece arrives as two mirror claims."""
        curve = self.curves[pair]
        seen = set()
        for na, nb in node_pairs:
            if na == nb:
                continue
            key = (na, nb) if na < nb else (nb, na)
            if key in seen:
                continue
            seen.add(key)
            ta = curve.param_of_point(self.nodes[na].point)
            tb = curve.param_of_point(self.nodes[nb].point)
            if tb < ta:
                ta, tb, na, nb = tb, ta, nb, na
            if tb - ta <= 1e-12 * max(1.0, self.scale):
                continue
            for fr in (0.25, 0.5, 0.75):
                t = ta + fr * (tb - ta)
                if not self.piece_valid_at(pair, curve, t):
                    raise InternalError(
                        f"pair {pair}: claimed piece fails validation")
            self.add_piece(pair, curve, ta, tb, na, nb)

    def split_piece(self, pid: int, t_star: float) -> int:
        """Split a piece at parameter t_star; returns the node index there.
        Snaps to an existing end node when t_star is at a piece end."""
        e = self.pieces[pid]
        tol = 1e-9 * self.scale
        if t_star <= e.t0 + tol:
            return e.n0
        if t_star >= e.t1 - tol:
            return e.n1
        n = self.add_node(curve_point(e.curve, t_star), e.curve.clearance_at(t_star))
        self.remove_piece(pid)
        self.add_piece(e.pair, e.curve, e.t0, t_star, e.n0, n)
        self.add_piece(e.pair, e.curve, t_star, e.t1, n, e.n1)
        return n

    def find_piece(self, pair, t: float) -> Optional[int]:
        tol = 1e-9 * self.scale
        best, best_pid = math.inf, None
        for pid in self.by_pair.get(pair, ()):
            e = self.pieces[pid]
            if e.t0 - tol <= t <= e.t1 + tol:
                return pid
            gap = min(abs(t - e.t0), abs(t - e.t1))
            if gap < best:
                best, best_pid = gap, pid
        if best <= 1e-6 * self.scale:
            return best_pid
        return None


def curve_point(curve, t: float) -> Point:
    p = curve.point_batch(np.asarray([t]))[0]
    return (float(p[0]), float(p[1]))


def build_diagram(scene: Scene, grid: int = GRID) -> VoronoiDiagram:
    b = _Builder(scene, grid)
    doms = _sweep_domains(scene)
    for dom in doms:
        b.domains[dom.feature.index] = dom
        b.exclusions[dom.feature.index] = _exclusion_indices(scene, dom.feature)

    cands: List[Point] = []
    claims: List[Tuple[int, int, int, int]] = []  # fi, fj, cand lo, cand hi
    for dom in doms:
        for (ta, tb, owner) in b.sweep(dom):
            pa = b.envelope_candidate(dom, ta, owner)
            pb = b.envelope_candidate(dom, tb, owner)
            ca = len(cands)
            cands.append(pa)
            cb = len(cands)
            cands.append(pb)
            claims.append((dom.feature.index, owner, ca, cb))

    cand_to_node = b.cluster_nodes(np.asarray(cands))

    by_pair_nodes: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for fi, fj, ca, cb in claims:
        pair = (fi, fj) if fi < fj else (fj, fi)
        by_pair_nodes.setdefault(pair, []).append(
            (int(cand_to_node[ca]), int(cand_to_node[cb])))
    for pair, node_ids in by_pair_nodes.items():
        curve = bisector_curve(scene, pair[0], pair[1])
        if curve is None:
            raise InternalError(f"no bisector curve for claimed pair {pair}")
        b.curves[pair] = curve
        b.make_pieces(pair, node_ids)

    # split pieces at interior clearance minima so outer edges are monotone
    margin = 1e-7 * scene.scale
    for pid in list(b.pieces.keys()):
        e = b.pieces[pid]
        tmin = e.curve.clearance_min_param()
        if tmin is not None and e.t0 + margin < tmin < e.t1 - margin:
            b.split_piece(pid, tmin)

    src = _attach_terminal(b, "source", scene.source)
    tgt = _attach_terminal(b, "target", scene.target)

    edges, cells, cbf, registry = _assemble_cells(b)
    source = _finalize_terminal(b, src, cells, registry)
    target = _finalize_terminal(b, tgt, cells, registry)
    return VoronoiDiagram(scene, b.nodes, edges, cells, cbf, source, target)


# ---------------------------------------------------------------------------
# terminals


@dataclass
class _PendingTerminal:
    label: str
    point: Point
    clearance: float
    feature_index: int
    node_index: int
    interior: bool


def _terminal_feature(b: _Builder, p: Point, value: float) -> Feature:
    """Among features tied at the nearest distance, the one whose region
    contains p: an edge whose free-side band covers p, else a swept vertex."""
    scene = b.scene
    tau = 1e-9 * scene.scale
    d = scene.feature_distances(np.asarray([p]))[0]
    tied = [f for f in scene.features if d[f.index] <= value + tau]
    for f in tied:
        if f.kind != "edge":
            continue
        fp = f.foot_param(p)
        side = (f.normal[0] * (p[0] - f.a[0]) + f.normal[1] * (p[1] - f.a[1]))
        if tau < fp < f.length - tau and side >= -tau:
            return f
    reflex = set(b.ws.reflex.tolist())
    for f in tied:
        if f.kind == "vertex" and f.index not in reflex:
            return f
    for f in tied:
        if f.kind != "edge":
            continue
        fp = f.foot_param(p)
        side = (f.normal[0] * (p[0] - f.a[0]) + f.normal[1] * (p[1] - f.a[1]))
        if -tau <= fp <= f.length + tau and side >= -tau:
            return f
    raise InternalError(f"no owning feature for point {p}")


def _attach_terminal(b: _Builder, label: str, p: Point) -> _PendingTerminal:
    scene = b.scene
    cres = clearance(scene, p)
    f = _terminal_feature(b, p, cres.value)
    for n in b.nodes:
        if math.hypot(p[0] - n.point[0], p[1] - n.point[1]) <= CLUSTER_TOL * b.scale:
            return _PendingTerminal(label, p, cres.value, f.index, n.index, False)
    base = f.point if f.kind == "vertex" else f.foot(p)
    r_p = math.hypot(p[0] - base[0], p[1] - base[1])
    snap = SNAP_TOL * scene.scale
    if r_p <= snap:
        raise InternalError(f"{label} has no radial direction")
    u = ((p[0] - base[0]) / r_p, (p[1] - base[1]) / r_p)
    excl = b.exclusions.get(f.index) or _exclusion_indices(scene, f)
    radii = b._radii_at(base, u, excl)
    owner = int(np.argmin(radii))
    r_exit = float(radii[owner])
    if not math.isfinite(r_exit) or r_exit < r_p - 1e-6 * scene.scale:
        raise InternalError(f"{label} connector leaves its region ({r_exit} < {r_p})")
    X = (base[0] + r_exit * u[0], base[1] + r_exit * u[1])
    exit_node = None
    for n in b.nodes:
        if math.hypot(X[0] - n.point[0], X[1] - n.point[1]) <= CLUSTER_TOL * b.scale:
            exit_node = n.index
            break
    if exit_node is None:
        pair = (f.index, owner) if f.index < owner else (owner, f.index)
        curve = b.curves.get(pair)
        if curve is None:
            raise InternalError(f"{label} exit hit pair {pair} with no pieces")
        t_exit = curve.param_of_point(X)
        pid = b.find_piece(pair, t_exit)
        if pid is None:
            raise InternalError(f"{label} exit missed every piece of pair {pair}")
        exit_node = b.split_piece(pid, t_exit)
    if r_exit - r_p <= snap:
        return _PendingTerminal(label, p, cres.value, f.index, exit_node, False)
    return _PendingTerminal(label, p, cres.value, f.index, exit_node, True)


def _finalize_terminal(b: _Builder, pend: _PendingTerminal,
                       cells: List[RefinedCell], registry) -> Terminal:
    if not pend.interior:
        adj = tuple(c.index for c in cells
                    if c.alpha.outer_node == pend.node_index
                    or c.beta.outer_node == pend.node_index)
        return Terminal(pend.label, pend.point, pend.clearance, pend.feature_index,
                        pend.node_index, False, None, adj)
    f = b.scene.features[pend.feature_index]
    base = f.point if f.kind == "vertex" else f.foot(pend.point)
    radial = None
    for (node_idx, inner), rad in registry.items():
        if node_idx == pend.node_index and \
                math.hypot(inner[0] - base[0], inner[1] - base[1]) <= 1e-6 * b.scale:
            radial = rad
            break
    if radial is None:
        raise InternalError(f"{pend.label} radial not found after assembly")
    radial.terminals.append((pend.label, pend.point, pend.clearance))
    adj = tuple(c.index for c in cells if c.alpha is radial or c.beta is radial)
    return Terminal(pend.label, pend.point, pend.clearance, pend.feature_index,
                    pend.node_index, True, radial, adj)


# ---------------------------------------------------------------------------
# cell assembly


def _assemble_cells(b: _Builder):
    edges: List[DiagramEdge] = []
    for pid in sorted(b.pieces.keys()):
        e = b.pieces[pid]
        edges.append(DiagramEdge(len(edges), e.pair, e.curve, e.t0, e.t1, e.n0, e.n1))

    incident: Dict[int, List[DiagramEdge]] = {}
    for e in edges:
        incident.setdefault(e.pair[0], []).append(e)
        incident.setdefault(e.pair[1], []).append(e)

    cells: List[RefinedCell] = []
    cbf: Dict[int, List[int]] = {}
    registry: Dict[Tuple[int, Tuple[float, float]], Radial] = {}

    def get_radial(fi: int, inner: Point, node_idx: int, outward: Point) -> Radial:
        for (n_idx, inn), rad in registry.items():
            if n_idx == node_idx and \
                    math.hypot(inn[0] - inner[0], inn[1] - inner[1]) <= 1e-6 * b.scale:
                return rad
        node = b.nodes[node_idx]
        dx, dy = node.point[0] - inner[0], node.point[1] - inner[1]
        ln = math.hypot(dx, dy)
        degenerate = ln <= 1e-9 * b.scale
        direction = outward if degenerate else (dx / ln, dy / ln)
        rad = Radial(fi, inner, node_idx, node.point, node.clearance,
                     direction, degenerate)
        registry[(node_idx, (inner[0], inner[1]))] = rad
        return rad

    for fi, dom in b.domains.items():
        pieces = incident.get(fi, [])
        if not pieces:
            raise InternalError(f"feature {fi} has no boundary pieces")
        f = dom.feature
        entries = []
        for e in pieces:
            s0 = dom.param_of_point(b.nodes[e.n0].point)
            s1 = dom.param_of_point(b.nodes[e.n1].point)
            if s0 <= s1:
                lo, hi, n_lo, n_hi = s0, s1, e.n0, e.n1
            else:
                lo, hi, n_lo, n_hi = s1, s0, e.n1, e.n0
            if dom.cyclic:
                sm = dom.param_of_point(e.point_at(0.5 * (e.t0 + e.t1)))
                if not (lo - 1e-9 <= sm <= hi + 1e-9):
                    # piece straddles the cyclic anchor cut
                    lo, hi, n_lo, n_hi = hi, lo + TWO_PI, n_hi, n_lo
            entries.append((lo, hi, e, n_lo, n_hi))
        entries.sort(key=lambda t: (t[0], t[1]))
        span = dom.t1 - dom.t0
        tol_d = 1e-6 * max(span, 1.0)
        if dom.cyclic:
            # the anchor is arbitrary; require full angular coverage instead
            total = sum(ent[1] - ent[0] for ent in entries)
            if abs(total - TWO_PI) > tol_d:
                raise InternalError(
                    f"feature {fi}: pieces do not span the sweep domain")
        elif abs(entries[0][0] - dom.t0) > tol_d or \
                abs(entries[-1][1] - dom.t1) > tol_d:
            raise InternalError(f"feature {fi}: pieces do not span the sweep domain")
        for i in range(len(entries) - 1):
            if entries[i][4] != entries[i + 1][3]:
                raise InternalError(f"feature {fi}: pieces do not chain at a node")
        if dom.cyclic and entries[-1][4] != entries[0][3]:
            raise InternalError(f"feature {fi}: cyclic pieces do not close")

        def inner_of(node_idx: int) -> Point:
            if f.kind == "vertex":
                return f.point
            fp = min(max(f.foot_param(b.nodes[node_idx].point), 0.0), f.length)
            return (f.a[0] + fp * f.direction[0], f.a[1] + fp * f.direction[1])

        rads = []
        for ent in entries:
            rads.append(get_radial(fi, inner_of(ent[3]), ent[3], dom.dir_at(ent[0] % TWO_PI)))
        rads.append(get_radial(fi, inner_of(entries[-1][4]), entries[-1][4],
                               dom.dir_at(entries[-1][1] % TWO_PI)))

        for i, (s_lo, s_hi, e, n_lo, n_hi) in enumerate(entries):
            r_lo, r_hi = rads[i], rads[i + 1]
            lo_key = (b.nodes[n_lo].clearance, n_lo)
            hi_key = (b.nodes[n_hi].clearance, n_hi)
            if lo_key <= hi_key:
                alpha, beta, sweep_sign = r_lo, r_hi, 1
                kappa_alpha_end = 0 if e.n0 == n_lo else 1
            else:
                alpha, beta, sweep_sign = r_hi, r_lo, -1
                kappa_alpha_end = 0 if e.n0 == n_hi else 1
            cell = _make_cell(b, len(cells), f, alpha, beta, e, kappa_alpha_end,
                              sweep_sign, s_hi - s_lo)
            cells.append(cell)
            cbf.setdefault(fi, []).append(cell.index)

    return edges, cells, cbf, registry


def _make_cell(b: _Builder, index: int, f: Feature, alpha: Radial, beta: Radial,
               e: DiagramEdge, kappa_alpha_end: int, sweep_sign: int,
               span: float) -> RefinedCell:
    curve = e.curve
    if f.kind == "vertex":
        v = f.point
        ta = math.atan2(alpha.direction[1], alpha.direction[0])
        cell = RefinedCell(index, f.index, "vertex", alpha, beta, e, kappa_alpha_end,
                           case="", origin=v, theta_alpha_world=ta,
                           sweep_sign=sweep_sign, theta_beta=span)
        if isinstance(curve, LineBisector):
            if curve.model != "point":
                raise InternalError("vertex cell bounded by a non-point line piece")
            cell.case = "line"
            cell.case_h = curve.p1
            foot = curve_point(curve, curve.p2)
            cell.case_phi = cell.frame_angle_of_direction(
                math.atan2(foot[1] - v[1], foot[0] - v[0]))
        else:
            cell.case = "parabola"
            cell.case_h = curve.h
            cell.case_phi = cell.frame_angle_of_direction(
                math.atan2(-curve.ydir[1], -curve.ydir[0]))
        return cell

    n = f.normal
    d = f.direction
    dx = beta.inner[0] - alpha.inner[0]
    dy = beta.inner[1] - alpha.inner[1]
    along = dx * d[0] + dy * d[1]
    sgn = 1.0 if along >= 0 else -1.0
    x_dir = (sgn * d[0], sgn * d[1])
    x_beta = abs(along)
    cell = RefinedCell(index, f.index, "edge", alpha, beta, e, kappa_alpha_end,
                       case="", x_dir=x_dir, normal=n, x_beta=x_beta,
                       sweep_sign=sweep_sign)
    if isinstance(curve, LineBisector):
        cell.case = "line"
        cell.line_y0 = alpha.clearance
        cell.line_slope = 0.0 if x_beta <= 1e-12 * b.scale \
            else (beta.clearance - alpha.clearance) / x_beta
    else:
        cell.case = "parabola"
        apex = curve_point(curve, curve.xf)
        cell.par_xf = ((apex[0] - alpha.inner[0]) * x_dir[0]
                       + (apex[1] - alpha.inner[1]) * x_dir[1])
        cell.par_h = curve.h
    return cell
