"""Search graphs over the refined diagram and the staged path driver.

Three graphs of increasing resolution are built on the cell structure.
The first augments the diagram skeleton with one cheap climb-and-traverse
arc bundle per cell and yields a coarse upper estimate of the optimal
cost.  The second samples the high radial of every cell at even cost
spacing derived from a candidate estimate and tightens the estimate to a
constant factor by exponential search over halved estimates.  The third
marks bounded-cost portions of every cell side, samples them at spacing
proportional to eps, and connects locally reachable sample pairs inside
each cell by exact single-feature geodesics; its best path is the final
(1 + eps)-approximate answer.  The driver keeps the best path seen across
all stages, so later stages never regress.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from functools import lru_cache
from heapq import heappop, heappush
from time import perf_counter
from typing import Dict, List, Optional, Sequence, Tuple

from .cellpaths import anchor_points, cell_scale, cell_width, constant_clearance_arc
from .diagram import DiagramEdge, Radial, RefinedCell, VoronoiDiagram, build_diagram
from .errors import InternalError, PreconditionError, UnreachableTargetError
from .geometry import Path, Scene, make_path
from .reachability import local_cost, local_optimal_path

Point = Tuple[float, float]

COST_FLOOR = 1e-12       # estimates at or below this count as a zero cost
SEARCH_OVERSHOOT = 23    # stage-1 overestimate factor per diagram cell
DEFAULT_C_SCALE = 1.0    # divisor hardening eps before the final stage
QUANT = 1e-9             # vertex merge quantum, scaled by scene size
WALK_CAP = 200           # hard cap on exponential-walk step generation
SIZE_C_VERTS = 128       # sanity ceiling: final-stage vertices per n^2/eps
SIZE_C_EDGES = 512       # sanity ceiling: final-stage edges per (n/eps)^2 log


@dataclass
class GraphVertex:
    index: int
    point: Point
    clearance: float


@dataclass
class GraphEdge:
    index: int
    u: int
    v: int
    cost: float
    path: Optional[Path] = None   # oriented from vertex u to vertex v
    local: Optional[Tuple[RefinedCell, Point, Point]] = None

    def realize(self) -> Path:
        """Materialize the payload; deferred for single-cell geodesics."""
        if self.path is None:
            cell, a, b = self.local
            self.path = local_optimal_path(cell, a, b, check=False)
        return self.path


@dataclass
class SearchGraph:
    stage_tag: str           # "G1" | "G2" | "G3"
    vertices: List[GraphVertex]
    edges: List[GraphEdge]
    source: int
    target: int
    adjacency: List[List[Tuple[int, int]]]   # per vertex: (neighbor, edge)


@dataclass(frozen=True)
class StageResult:
    stage: int
    cost: float
    path: Path
    search_param: Optional[float] = None
    graph_vertices: int = 0
    graph_edges: int = 0


@dataclass(frozen=True)
class Edgelet:
    """Marked portion of one cell side, in that side's coordinate.

    Radial sides use clearance bounds (lo <= hi); the outer side uses
    curve parameter bounds (lo <= hi in parameter order).
    """

    cell_index: int
    side: str                # "alpha" | "beta" | "kappa"
    role: str                # alpha_marked | beta_marked | kappa_whole |
    lo: float                # kappa_low | kappa_high
    hi: float
    cost: float


def spacing_complexity(scene: Scene) -> int:
    """Obstacle complexity used in the cost-spacing denominators."""
    return max(2, sum(1 for f in scene.features if f.kind == "vertex"))


def search_step_count(vd: VoronoiDiagram) -> int:
    """Number of estimate halvings covering the stage-1 overshoot."""
    return int(math.ceil(math.log2(SEARCH_OVERSHOOT * max(len(vd.cells), 1))))


# ---------------------------------------------------------------------------
# graph assembly: merged vertices plus boundary portions


class _Assembly:
    def __init__(self, vd: VoronoiDiagram, stage_tag: str):
        self.vd = vd
        self.stage_tag = stage_tag
        self.scale = vd.scene.scale
        self.quant = QUANT * self.scale
        self.vertices: List[GraphVertex] = []
        self.edges: List[GraphEdge] = []
        self._keys: Dict[tuple, int] = {}
        self._pair_seen: set = set()
        self._radials: Dict[int, Tuple[Radial, List[Tuple[float, int]]]] = {}
        self._kappas: Dict[int, List[Tuple[float, int]]] = {}

    def _new_vertex(self, key: tuple, point: Point, clearance: float) -> int:
        idx = self._keys.get(key)
        if idx is not None:
            return idx
        idx = len(self.vertices)
        self.vertices.append(GraphVertex(idx, point, clearance))
        self._keys[key] = idx
        return idx

    def node_vertex(self, node_index: int) -> int:
        nd = self.vd.nodes[node_index]
        return self._new_vertex(("n", node_index), nd.point, nd.clearance)

    def radial_vertex(self, rad: Radial, clearance: float,
                      point: Optional[Point] = None) -> int:
        if clearance >= rad.clearance - self.quant:
            return self.node_vertex(rad.outer_node)
        rid = id(rad)
        entry = self._radials.get(rid)
        if entry is None:
            entry = (rad, [(rad.clearance, self.node_vertex(rad.outer_node))])
            self._radials[rid] = entry
        key = ("r", rid, round(clearance / self.quant))
        known = self._keys.get(key)
        if known is not None:
            return known
        if point is None:
            point = rad.point_at_clearance(clearance)
        idx = self._new_vertex(key, point, clearance)
        entry[1].append((clearance, idx))
        return idx

    def kappa_vertex(self, edge: DiagramEdge, t: float,
                     point: Optional[Point] = None) -> int:
        samples = self._kappas.get(edge.index)
        if samples is None:
            samples = [(edge.t0, self.node_vertex(edge.n0)),
                       (edge.t1, self.node_vertex(edge.n1))]
            self._kappas[edge.index] = samples
        # never merge a positive-clearance sample into a zero-clearance
        # corner node; costs to such a corner diverge
        if t - edge.t0 <= self.quant and \
                self.vd.nodes[edge.n0].clearance > 0.0:
            return self.node_vertex(edge.n0)
        if edge.t1 - t <= self.quant and \
                self.vd.nodes[edge.n1].clearance > 0.0:
            return self.node_vertex(edge.n1)
        key = ("k", edge.index, round(t / self.quant))
        known = self._keys.get(key)
        if known is not None:
            return known
        if point is None:
            point = edge.point_at(t)
        idx = self._new_vertex(key, point, edge.curve.clearance_at(t))
        samples.append((t, idx))
        return idx

    def terminal_vertex(self, term) -> int:
        if term.interior:
            return self.radial_vertex(term.radial, term.clearance, term.point)
        return self.node_vertex(term.node_index)

    def add_edge(self, u: int, v: int, cost: float,
                 path: Optional[Path] = None,
                 local: Optional[Tuple[RefinedCell, Point, Point]] = None
                 ) -> None:
        if u == v:
            return
        pair = (u, v) if u < v else (v, u)
        if pair in self._pair_seen:
            return
        self._pair_seen.add(pair)
        self.edges.append(GraphEdge(len(self.edges), u, v, cost, path, local))

    def _flush_portions(self) -> None:
        from .geometry import AnalyticPrimitive

        for rad, samples in self._radials.values():
            samples.sort()
            for (c0, v0), (c1, v1) in zip(samples, samples[1:]):
                if v0 == v1 or c0 <= 0.0:
                    continue
                cost = math.log(c1 / c0)
                p0, p1 = self.vertices[v0].point, self.vertices[v1].point
                prim = AnalyticPrimitive("radial_segment", p0, p1, cost,
                                         params=(c0, c1))
                self.add_edge(v0, v1, cost, Path((prim,)))
        for edge in self.vd.edges:
            samples = self._kappas.get(edge.index)
            if samples is None:
                samples = [(edge.t0, self.node_vertex(edge.n0)),
                           (edge.t1, self.node_vertex(edge.n1))]
            samples.sort()
            curve = edge.curve
            for (t0, v0), (t1, v1) in zip(samples, samples[1:]):
                if v0 == v1:
                    continue
                cost = curve.cost(t0, t1)
                if not math.isfinite(cost):
                    continue
                p0, p1 = self.vertices[v0].point, self.vertices[v1].point
                prim = AnalyticPrimitive("voronoi_edge_portion", p0, p1, cost,
                                         edge=curve, params=(t0, t1))
                self.add_edge(v0, v1, cost, Path((prim,)))

    def finish(self, source: int, target: int) -> SearchGraph:
        self._flush_portions()
        adjacency: List[List[Tuple[int, int]]] = [[] for _ in self.vertices]
        for e in self.edges:
            adjacency[e.u].append((e.v, e.index))
            adjacency[e.v].append((e.u, e.index))
        return SearchGraph(self.stage_tag, self.vertices, self.edges,
                           source, target, adjacency)


def _add_traverse_bundle(asm: _Assembly, cell: RefinedCell,
                         clearances: Sequence[float]) -> None:
    """Vertices and climb-free traverse arcs for the given anchor set."""
    tiny = QUANT * asm.scale
    for cw in clearances:
        if cw <= tiny or cw > cell.clr_beta + tiny:
            continue
        w = cell.beta.point_at_clearance(min(cw, cell.clr_beta))
        arc = constant_clearance_arc(cell, w)
        v_w = asm.radial_vertex(cell.beta, min(cw, cell.clr_beta), w)
        if arc.on_kappa:
            t_bar = cell.kappa.curve.param_of_point(arc.w_bar)
            t_bar = min(max(t_bar, cell.kappa.t0), cell.kappa.t1)
            v_bar = asm.kappa_vertex(cell.kappa, t_bar, arc.w_bar)
        else:
            v_bar = asm.radial_vertex(cell.alpha, cw, arc.w_bar)
        if arc.primitives:
            asm.add_edge(v_w, v_bar, arc.cost, Path(arc.primitives))


def _cell_anchor_clearances(cell: RefinedCell) -> List[float]:
    pair = anchor_points(cell)
    out = [pair.w_kappa_clearance]
    if pair.w_alpha_clearance is not None:
        out.append(pair.w_alpha_clearance)
    return out


# ---------------------------------------------------------------------------
# stage 1


def build_G1(vd: VoronoiDiagram) -> SearchGraph:
    asm = _Assembly(vd, "G1")
    source = asm.terminal_vertex(vd.source)
    target = asm.terminal_vertex(vd.target)
    clr_s = min(vd.source.clearance, vd.target.clearance)
    tiny = QUANT * asm.scale
    for cell in vd.cells:
        if cell.clr_beta <= tiny:
            continue
        clearances = _cell_anchor_clearances(cell)
        if clr_s < cell.clr_beta - tiny:
            clearances.append(clr_s)
        _add_traverse_bundle(asm, cell, clearances)
    graph = asm.finish(source, target)
    v_cap = len(vd.nodes) + 6 * len(vd.cells) + 4
    e_cap = 3 * v_cap + len(vd.edges) + 3 * len(vd.cells)
    if len(graph.vertices) > v_cap or len(graph.edges) > e_cap:
        raise InternalError("coarse graph exceeded its linear size budget")
    return graph


def stage1(vd: VoronoiDiagram) -> StageResult:
    graph = build_G1(vd)
    cost, path = dijkstra(graph, graph.source, graph.target)
    return StageResult(1, cost, path, None,
                       len(graph.vertices), len(graph.edges))


# ---------------------------------------------------------------------------
# stage 2


def marked_radial_interval(cell: RefinedCell, d: float, clr_lo: float,
                           clr_hi: float, side: str) -> Tuple[float, float]:
    """Clearance bounds of the marked portion on one radial side."""
    top = cell.clr_alpha if side == "alpha" else cell.clr_beta
    lo = min(top, clr_hi / math.exp(d))
    hi = min(top, clr_lo * math.exp(d))
    return lo, hi


def _geometric_samples(lo: float, hi: float, spacing: float) -> List[float]:
    """Clearances from hi down to lo with even cost spacing, ends included."""
    if hi <= 0.0 or lo > hi:
        return []
    if lo <= 0.0:
        raise PreconditionError("marked portion reaches zero clearance")
    span = math.log(hi / lo)
    if span <= spacing * 1e-9:
        return [hi]
    steps = int(span / spacing)
    out = [hi * math.exp(-k * spacing) for k in range(steps + 1)]
    if span - steps * spacing > spacing * 1e-9:
        out.append(lo)
    return out


def build_G2(vd: VoronoiDiagram, d: float, clr_lo: Optional[float] = None,
             clr_hi: Optional[float] = None) -> SearchGraph:
    if d <= 0.0:
        raise PreconditionError("cost estimate must be positive")
    if clr_lo is None:
        clr_lo = min(vd.source.clearance, vd.target.clearance)
    if clr_hi is None:
        clr_hi = max(vd.source.clearance, vd.target.clearance)
    n = spacing_complexity(vd.scene)
    spacing = d / n
    asm = _Assembly(vd, "G2")
    source = asm.terminal_vertex(vd.source)
    target = asm.terminal_vertex(vd.target)
    tiny = QUANT * asm.scale
    for cell in vd.cells:
        if cell.clr_beta <= tiny:
            continue
        lo, hi = marked_radial_interval(cell, d, clr_lo, clr_hi, "beta")
        samples = _geometric_samples(lo, hi, spacing)
        if len(samples) > 2 * n + 3:
            raise InternalError("marked portion produced too many samples")
        _add_traverse_bundle(asm, cell, samples + _cell_anchor_clearances(cell))
    return asm.finish(source, target)


def stage2(vd: VoronoiDiagram, d_tilde: float,
           baseline: Optional[StageResult] = None) -> StageResult:
    if d_tilde <= COST_FLOOR:
        if baseline is None:
            raise PreconditionError("zero estimate needs a baseline path")
        return StageResult(2, baseline.cost, baseline.path, d_tilde, 0, 0)
    best_cost = math.inf
    best_path: Optional[Path] = None
    best_d = d_tilde
    best_sizes = (0, 0)
    for i in range(search_step_count(vd) + 1):
        d_i = d_tilde / (2.0 ** i)
        graph = build_G2(vd, d_i)
        try:
            cost, path = dijkstra(graph, graph.source, graph.target)
        except UnreachableTargetError:
            continue
        if cost < best_cost:
            best_cost = cost
            best_path = path
            best_d = d_i
            best_sizes = (len(graph.vertices), len(graph.edges))
    if baseline is not None and baseline.cost < best_cost:
        best_cost, best_path = baseline.cost, baseline.path
    if best_path is None:
        raise UnreachableTargetError("no stage-2 graph connected the endpoints")
    return StageResult(2, best_cost, best_path, best_d,
                       best_sizes[0], best_sizes[1])


# ---------------------------------------------------------------------------
# stage 3: edgelets, shadow points, candidate walks


def _kappa_cost_bounds(cell: RefinedCell) -> Tuple[float, float, int]:
    """Outer-side parameter ends ordered from the low-clearance end."""
    ta, tb = cell.kappa_t_alpha(), cell.kappa_t_beta()
    sign = 1 if tb >= ta else -1
    return ta, tb, sign


def mark_edgelets(cell: RefinedCell, d: float, clr_lo: float,
                  clr_hi: float) -> List[Edgelet]:
    if d <= 0.0:
        raise PreconditionError("cost estimate must be positive")
    out: List[Edgelet] = []
    for side, role in (("alpha", "alpha_marked"), ("beta", "beta_marked")):
        lo, hi = marked_radial_interval(cell, d, clr_lo, clr_hi, side)
        if lo <= 0.0 or hi <= lo:
            continue
        out.append(Edgelet(cell.index, side, role, lo, hi, math.log(hi / lo)))
    curve = cell.kappa.curve
    ta, tb, sign = _kappa_cost_bounds(cell)
    clr_ta = curve.clearance_at(ta)
    total = curve.cost(ta, tb) if clr_ta > 0.0 else math.inf
    if total <= 2.0 * d:
        out.append(Edgelet(cell.index, "kappa", "kappa_whole",
                           min(ta, tb), max(ta, tb), total))
        return out
    # reaching a zero-clearance corner costs more than any budget, so the
    # low piece collapses to nothing when the corner sits on an obstacle
    u_prime = curve.param_at_cost(ta, 2.0 * d, sign) if clr_ta > 0.0 else ta
    c_vplus = min(cell.clr_beta, clr_lo * math.exp(d))
    if c_vplus <= cell.clr_alpha:
        v_prime = ta
    else:
        v_prime = cell.kappa_t_at_clearance(c_vplus)
    beyond = (v_prime - u_prime) * sign > 0.0
    if beyond and clr_ta > 0.0:
        mid = curve.cost(min(u_prime, v_prime), max(u_prime, v_prime))
        if mid <= 4.0 * d:
            out.append(Edgelet(cell.index, "kappa", "kappa_whole",
                               min(ta, v_prime), max(ta, v_prime),
                               curve.cost(min(ta, v_prime),
                                          max(ta, v_prime))))
            return out
    elif not beyond:
        out.append(Edgelet(cell.index, "kappa", "kappa_whole",
                           min(ta, u_prime), max(ta, u_prime),
                           curve.cost(min(ta, u_prime), max(ta, u_prime))))
        return out
    if u_prime != ta:
        out.append(Edgelet(cell.index, "kappa", "kappa_low",
                           min(ta, u_prime), max(ta, u_prime), 2.0 * d))
    v_dprime = curve.param_at_cost(v_prime, 4.0 * d, -sign)
    out.append(Edgelet(cell.index, "kappa", "kappa_high",
                       min(v_prime, v_dprime), max(v_prime, v_dprime), 4.0 * d))
    return out


def shadow_point(cell: RefinedCell, p: Point, xi: Edgelet) -> Point:
    """Walk seed for p against an edgelet on another side of the cell."""
    from .cellpaths import classify_boundary_point

    sides = classify_boundary_point(cell, p)
    if "alpha" in sides or "kappa" in sides:
        return p
    _, cp = cell.frame_of_point(p)
    threshold = _shadow_threshold(cell, xi.side)
    if cp >= threshold:
        return p
    return cell.beta.point_at_clearance(threshold)


def _shadow_threshold(cell: RefinedCell, xi_side: str) -> float:
    pair = anchor_points(cell)
    if xi_side == "kappa":
        return pair.w_kappa_clearance
    if pair.w_alpha_clearance is not None:
        return pair.w_alpha_clearance
    return -math.inf


@lru_cache(maxsize=4096)
def walk_steps(eps: float, limit: int) -> Tuple[int, ...]:
    """Distinct cumulative offsets floor((1+eps)^i) up to limit."""
    if eps <= 0.0:
        raise PreconditionError("walk needs a positive eps")
    out: List[int] = []
    val = 1.0
    for _ in range(WALK_CAP):
        step = int(val)
        if step > limit:
            break
        if not out or step != out[-1]:
            out.append(step)
        val *= 1.0 + eps
    return tuple(out)


def candidate_indices(m: int, below: Optional[int], above: Optional[int],
                      eps: float) -> List[int]:
    """Clearance-sorted indices kept on one edgelet of m samples."""
    if m <= 0:
        return []
    keep = {0, m - 1}
    if below is not None:
        keep.add(below)
        for off in walk_steps(eps, below):
            keep.add(below - off)
    if above is not None:
        keep.add(above)
        for off in walk_steps(eps, m - 1 - above):
            keep.add(above + off)
    return sorted(keep)


def candidate_set(cell: RefinedCell, p: Point,
                  edgelets: Sequence[Tuple[Edgelet, Sequence[float]]],
                  eps: float,
                  p_sides: Optional[Sequence[str]] = None,
                  p_clearance: Optional[float] = None
                  ) -> List[Tuple[int, int]]:
    """Candidate neighbors of p as (edgelet position, sample position).

    Each entry of `edgelets` pairs an edgelet with its sample clearances
    sorted ascending.  Edgelets sharing a side with p are skipped.
    """
    from .cellpaths import classify_boundary_point

    if p_sides is None:
        p_sides = classify_boundary_point(cell, p)
    if p_clearance is None:
        _, p_clearance = cell.frame_of_point(p)
    out: List[Tuple[int, int]] = []
    for ei, (xi, clearances) in enumerate(edgelets):
        if xi.side in p_sides:
            continue
        m = len(clearances)
        if m == 0:
            continue
        if "beta" in p_sides:
            seed_clr = max(p_clearance, _shadow_threshold(cell, xi.side))
        else:
            seed_clr = p_clearance
        hi_idx = bisect_right(clearances, seed_clr)
        lo_idx = hi_idx - 1
        below = lo_idx if lo_idx >= 0 else None
        above = hi_idx if hi_idx < m else None
        for si in candidate_indices(m, below, above, eps):
            out.append((ei, si))
    return out


@dataclass
class _SampleRef:
    vertex: int
    point: Point
    clearance: float
    frame_u: float
    sides: Tuple[str, ...]


def _sample_radial_edgelet(asm: _Assembly, cell: RefinedCell, el: Edgelet,
                           spacing: float) -> List[_SampleRef]:
    rad = cell.alpha if el.side == "alpha" else cell.beta
    width = cell_width(cell)
    out = []
    for c in sorted(_geometric_samples(el.lo, el.hi, spacing)):
        pt = rad.point_at_clearance(c)
        v = asm.radial_vertex(rad, c, pt)
        u = 0.0 if el.side == "alpha" else width
        out.append(_SampleRef(v, pt, c, u, (el.side,)))
    return out


def _sample_kappa_edgelet(asm: _Assembly, cell: RefinedCell, el: Edgelet,
                          spacing: float) -> List[_SampleRef]:
    curve = cell.kappa.curve
    ta = cell.kappa_t_alpha()
    lo_t, hi_t = (el.lo, el.hi) if abs(el.lo - ta) <= abs(el.hi - ta) \
        else (el.hi, el.lo)
    params = [hi_t]
    remaining = el.cost
    t = hi_t
    sign = 1 if lo_t > hi_t else -1
    cap = int(el.cost / spacing) + 8
    while remaining > spacing * (1.0 + 1e-9) and len(params) < cap:
        t = curve.param_at_cost(t, spacing, sign)
        t = min(max(t, min(lo_t, hi_t)), max(lo_t, hi_t))
        params.append(t)
        remaining -= spacing
    if abs(params[-1] - lo_t) > 0.0:
        params.append(lo_t)
    out = []
    for t in params:
        v = asm.kappa_vertex(cell.kappa, t)
        pt = asm.vertices[v].point
        u, c = cell.frame_of_point(pt)
        if c <= 0.0:
            continue
        out.append(_SampleRef(v, pt, c, u, ("kappa",)))
    out.sort(key=lambda s: s.clearance)
    return out


def build_G3(vd: VoronoiDiagram, d: float, eps: float,
             clr_lo: Optional[float] = None,
             clr_hi: Optional[float] = None) -> SearchGraph:
    if d <= 0.0:
        raise PreconditionError("cost estimate must be positive")
    if not 0.0 < eps <= 1.0:
        raise PreconditionError("eps must lie in (0, 1]")
    if clr_lo is None:
        clr_lo = min(vd.source.clearance, vd.target.clearance)
    if clr_hi is None:
        clr_hi = max(vd.source.clearance, vd.target.clearance)
    n = spacing_complexity(vd.scene)
    spacing = eps * d / n
    asm = _Assembly(vd, "G3")
    source = asm.terminal_vertex(vd.source)
    target = asm.terminal_vertex(vd.target)
    tiny = QUANT * asm.scale
    for cell in vd.cells:
        if cell.clr_beta <= tiny:
            continue
        groups: List[Tuple[Edgelet, List[_SampleRef]]] = []
        for el in mark_edgelets(cell, d, clr_lo, clr_hi):
            if el.side == "kappa":
                refs = _sample_kappa_edgelet(asm, cell, el, spacing)
            else:
                refs = _sample_radial_edgelet(asm, cell, el, spacing)
            groups.append((el, refs))
        _connect_cell_samples(asm, cell, groups, eps)
    graph = asm.finish(source, target)
    _assert_g3_sizes(vd, graph, eps)
    return graph


def _connect_cell_samples(asm: _Assembly, cell: RefinedCell,
                          groups: List[Tuple[Edgelet, List[_SampleRef]]],
                          eps: float) -> None:
    from .reachability import _gap_tol

    edgelets = [(el, [s.clearance for s in refs]) for el, refs in groups]
    tol = _gap_tol(cell)
    tiny_u = 1e-12 if cell.kind == "vertex" else 1e-9 * cell_scale(cell)
    pair_seen = asm._pair_seen
    for gi, (el, refs) in enumerate(groups):
        for ref in refs:
            cands = candidate_set(cell, ref.point, edgelets, eps,
                                  p_sides=ref.sides, p_clearance=ref.clearance)
            for ei, si in cands:
                other = groups[ei][1][si]
                if other.vertex == ref.vertex:
                    continue
                pair = (min(ref.vertex, other.vertex),
                        max(ref.vertex, other.vertex))
                if pair in pair_seen:
                    continue
                if not _pair_reachable(cell, ref, other, tol, tiny_u):
                    continue
                cost = local_cost(cell, ref.point, other.point)
                asm.add_edge(ref.vertex, other.vertex, cost,
                             local=(cell, ref.point, other.point))


def _pair_reachable(cell: RefinedCell, a: _SampleRef, b: _SampleRef,
                    tol: float, tiny_u: float) -> bool:
    """Reachability of two boundary samples, decided in the cell frame.

    The gap between the geodesic height and the outer boundary is concave
    in the frame coordinate, so its maximum is certified by a concavity
    envelope refined adaptively; closed-form slopes resolve tangencies at
    endpoints sitting on the outer boundary.
    """
    from .reachability import _curve_slope, _curve_value

    ua, ub = a.frame_u, b.frame_u
    lo, hi = (ua, ub) if ua <= ub else (ub, ua)
    if hi - lo <= tiny_u:
        return True
    if cell.kind == "vertex":
        ha, hb = math.log(a.clearance), math.log(b.clearance)
        slope = (hb - ha) / (ub - ua)

        def gap(u: float) -> float:
            return ha + slope * (u - ua) - _curve_value(cell, u)

        def dgap(u: float) -> float:
            return slope - _curve_slope(cell, u)

        peak = min(max(cell.case_phi, lo), hi)
    else:
        ha, hb = a.clearance, b.clearance
        cent = (ub * ub + hb * hb - ua * ua - ha * ha) / (2.0 * (ub - ua))

        def gap(u: float) -> float:
            y2 = ha * ha + (ua - u) * (ua + u - 2.0 * cent)
            return math.sqrt(max(y2, 0.0)) - _curve_value(cell, u)

        def dgap(u: float) -> float:
            y2 = ha * ha + (ua - u) * (ua + u - 2.0 * cent)
            y = math.sqrt(max(y2, 1e-300))
            return (cent - u) / y - _curve_slope(cell, u)

        peak = min(max(cent, lo), hi)
    ga, gb = gap(lo), gap(hi)
    if ga > tol or gb > tol:
        return False
    slope_tol = tol / (hi - lo)
    if ga >= -tol and dgap(lo) > slope_tol:
        return False
    if gb >= -tol and dgap(hi) < -slope_tol:
        return False
    m = peak if lo + tiny_u < peak < hi - tiny_u else 0.5 * (lo + hi)
    gm = gap(m)
    if gm > tol:
        return False
    l, r, gl, gr = lo, hi, ga, gb
    for _ in range(64):
        s_lm = (gm - gl) / (m - l)
        s_mr = (gr - gm) / (r - m)
        ub_val = gm + min((r - m) * max(s_lm, 0.0),
                          (m - l) * max(-s_mr, 0.0))
        if ub_val <= tol:
            return True
        if r - l <= tiny_u:
            return gm <= tol
        if m - l >= r - m:
            x = 0.5 * (l + m)
            gx = gap(x)
            if gx > tol:
                return False
            if gx >= gm:
                r, gr, m, gm = m, gm, x, gx
            else:
                l, gl = x, gx
        else:
            x = 0.5 * (m + r)
            gx = gap(x)
            if gx > tol:
                return False
            if gx >= gm:
                l, gl, m, gm = m, gm, x, gx
            else:
                r, gr = x, gx
    return gm <= tol


def _assert_g3_sizes(vd: VoronoiDiagram, graph: SearchGraph,
                     eps: float) -> None:
    n = max(len(vd.cells), spacing_complexity(vd.scene), 2)
    v_cap = SIZE_C_VERTS * n * n / eps
    e_cap = SIZE_C_EDGES * (n / eps) ** 2 * (1.0 + math.log(n / eps))
    if len(graph.vertices) > v_cap or len(graph.edges) > e_cap:
        raise InternalError("final-stage graph exceeded its size budget")


def stage3(vd: VoronoiDiagram, d: float, eps: float,
           baseline: Optional[StageResult] = None) -> StageResult:
    if d <= COST_FLOOR:
        if baseline is None:
            raise PreconditionError("zero estimate needs a baseline path")
        return StageResult(3, baseline.cost, baseline.path, d, 0, 0)
    graph = build_G3(vd, d, eps)
    try:
        cost, path = dijkstra(graph, graph.source, graph.target)
    except UnreachableTargetError:
        if baseline is None:
            raise
        return StageResult(3, baseline.cost, baseline.path, d,
                           len(graph.vertices), len(graph.edges))
    if baseline is not None and baseline.cost < cost:
        cost, path = baseline.cost, baseline.path
    return StageResult(3, cost, path, d,
                       len(graph.vertices), len(graph.edges))


# ---------------------------------------------------------------------------
# shortest path


def dijkstra(graph: SearchGraph, s_vertex: int,
             t_vertex: int) -> Tuple[float, Path]:
    """Least-cost route between two graph vertices.

    Returns the graph distance and the concatenated geometric payload.
    Ties break deterministically toward the lower vertex index.
    """
    n = len(graph.vertices)
    if not (0 <= s_vertex < n and 0 <= t_vertex < n):
        raise PreconditionError("endpoint vertex outside the graph")
    if s_vertex == t_vertex:
        return 0.0, Path(())
    dist = [math.inf] * n
    prev: List[Optional[Tuple[int, int]]] = [None] * n
    dist[s_vertex] = 0.0
    heap: List[Tuple[float, int]] = [(0.0, s_vertex)]
    costs = [e.cost for e in graph.edges]
    while heap:
        du, u = heappop(heap)
        if u == t_vertex:
            break
        if du > dist[u]:
            continue
        for v, ei in graph.adjacency[u]:
            nd = du + costs[ei]
            if nd < dist[v] or (nd == dist[v] and prev[v] is not None
                                and u < prev[v][0]):
                dist[v] = nd
                prev[v] = (u, ei)
                heappush(heap, (nd, v))
    if not math.isfinite(dist[t_vertex]):
        raise UnreachableTargetError("target vertex is not connected")
    pieces: List[Path] = []
    v = t_vertex
    while v != s_vertex:
        u, ei = prev[v]
        edge = graph.edges[ei]
        piece = edge.realize()
        pieces.append(piece if edge.u == u else piece.reversed())
        v = u
    chain = []
    for piece in reversed(pieces):
        chain.extend(piece.primitives)
    return dist[t_vertex], make_path(chain, 1e-6 * _graph_scale(graph))


def _graph_scale(graph: SearchGraph) -> float:
    xs = [v.point[0] for v in graph.vertices]
    ys = [v.point[1] for v in graph.vertices]
    if not xs:
        return 1.0
    return max(max(xs) - min(xs), max(ys) - min(ys), 1.0)


# ---------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class ApproximationOutcome:
    scene: Scene
    epsilon: float
    c_scale: float
    result: StageResult
    stage1: StageResult
    stage2: StageResult
    stage3: StageResult
    timings: Dict[str, float] = field(default_factory=dict)


class Planner:
    """Caches the diagram and the eps-independent stages for one scene."""

    def __init__(self, scene: Scene, vd: Optional[VoronoiDiagram] = None):
        self.scene = scene
        self.diagram = vd if vd is not None else build_diagram(scene)
        self._stage1: Optional[StageResult] = None
        self._stage2: Optional[StageResult] = None
        self.timings: Dict[str, float] = {}

    def run_stage1(self) -> StageResult:
        if self._stage1 is None:
            t0 = perf_counter()
            self._stage1 = stage1(self.diagram)
            self.timings["stage1"] = perf_counter() - t0
        return self._stage1

    def run_stage2(self) -> StageResult:
        if self._stage2 is None:
            r1 = self.run_stage1()
            t0 = perf_counter()
            self._stage2 = stage2(self.diagram, r1.cost, baseline=r1)
            self.timings["stage2"] = perf_counter() - t0
        return self._stage2

    def solve(self, eps: float,
              c_scale: float = DEFAULT_C_SCALE) -> ApproximationOutcome:
        if not 0.0 < eps <= 1.0:
            raise PreconditionError("eps must lie in (0, 1]")
        if c_scale < 1.0:
            raise PreconditionError("the eps divisor must be at least 1")
        r1 = self.run_stage1()
        r2 = self.run_stage2()
        t0 = perf_counter()
        r3 = stage3(self.diagram, r2.cost, min(eps / c_scale, 1.0),
                    baseline=r2)
        timings = dict(self.timings)
        timings["stage3"] = perf_counter() - t0
        final = min((r3, r2, r1), key=lambda r: (r.cost, r.stage))
        if self.scene.swapped:
            r1, r2, r3, final = (replace(r, path=r.path.reversed())
                                 for r in (r1, r2, r3, final))
        return ApproximationOutcome(self.scene, eps, c_scale, final,
                                    r1, r2, r3, timings)


def approximate(scene: Scene, eps: float,
                c_scale: float = DEFAULT_C_SCALE) -> ApproximationOutcome:
    """End-to-end staged solve returning the best path and diagnostics."""
    return Planner(scene).solve(eps, c_scale)
