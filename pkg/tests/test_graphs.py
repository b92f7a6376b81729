"""Staged search graphs: skeleton bundles, sampling, walks, and the driver."""

import math
import random

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sparse_dijkstra

from clearpath import make_scene, path_cost_numeric
from clearpath.diagram import build_diagram
from clearpath.errors import (ClearpathError, PreconditionError,
                              UnreachableTargetError)
from clearpath.geometry import Path, clearance
from clearpath.graphs import (
    GraphEdge,
    GraphVertex,
    Planner,
    SearchGraph,
    _geometric_samples,
    build_G1,
    build_G2,
    build_G3,
    candidate_indices,
    dijkstra,
    mark_edgelets,
    marked_radial_interval,
    search_step_count,
    shadow_point,
    spacing_complexity,
    stage1,
    stage2,
    stage3,
    walk_steps,
)
from clearpath.oracle import OracleConfig, grid_oracle_path
from conftest import random_scene

COST_TOL = 1e-9          # additive slack on graph cost comparisons
REL_TOL = 1e-6           # relative slack against quadrature re-measurement
LOWER_BOUND_TOL = 1e-9   # slack on the log-clearance edge lower bound


# ---------------------------------------------------------------------------
# shared scenes


def scene_point_radial():
    """Point obstacle with both endpoints on one radial: cost ln 2 exactly."""
    return make_scene([[(0.0, 0.0)]], (-50.0, -50.0, 50.0, 50.0),
                      (10.0, 0.0), (20.0, 0.0))


def scene_quarter_turn():
    """Point obstacle, quarter turn with clearance growth e."""
    return make_scene([[(0.0, 0.0)]], (-50.0, -50.0, 50.0, 50.0),
                      (1.0, 0.0), (0.0, math.e))


def scene_from_seed(seed, s, t):
    obstacles, box = random_scene(seed)
    return make_scene(obstacles, box, s, t)


def scene_with_random_endpoints(seed):
    """Conftest scene with rejection-sampled endpoints, or None."""
    try:
        obstacles, box = random_scene(seed)
    except Exception:
        return None
    rng = random.Random(seed * 7919 + 13)
    for _ in range(60):
        s = (rng.uniform(box[0] + 3, box[2] - 3),
             rng.uniform(box[1] + 3, box[3] - 3))
        t = (rng.uniform(box[0] + 3, box[2] - 3),
             rng.uniform(box[1] + 3, box[3] - 3))
        if math.hypot(s[0] - t[0], s[1] - t[1]) < 25.0:
            continue
        try:
            sc = make_scene(obstacles, box, s, t)
        except ClearpathError:
            continue
        if min(clearance(sc, s).value, clearance(sc, t).value) < 2.0:
            continue
        return sc
    return None


# ---------------------------------------------------------------------------
# exponential walks and candidate selection


def test_walk_steps_values():
    assert walk_steps(0.5, 99) == (1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86)
    assert walk_steps(1.0, 10) == (1, 2, 4, 8)
    assert walk_steps(0.5, 0) == ()
    steps = walk_steps(0.25, 10_000)
    assert all(b > a for a, b in zip(steps, steps[1:]))
    with pytest.raises(PreconditionError):
        walk_steps(0.0, 5)


def test_candidate_indices_walk_example():
    # 100 clearance-sorted samples, seed below them all, growth 1.5:
    # kept indices are the endpoints plus the upward walk from 0.
    got = candidate_indices(100, None, 0, 0.5)
    assert got == [0, 1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86, 99]
    assert len(got) == 13


def test_candidate_indices_edge_cases():
    assert candidate_indices(0, None, None, 0.5) == []
    assert candidate_indices(1, None, None, 0.5) == [0]
    assert candidate_indices(5, None, None, 0.5) == [0, 4]
    # seed above all samples: downward walk from the top
    got = candidate_indices(10, 9, None, 1.0)
    assert got == [0, 1, 5, 7, 8, 9]
    # straddling seeds walk both ways
    got = candidate_indices(9, 4, 5, 1.0)
    assert got == [0, 2, 3, 4, 5, 6, 7, 8]


# ---------------------------------------------------------------------------
# geometric sampling of radial portions


def test_geometric_samples_even_spacing():
    vals = _geometric_samples(1.0, math.exp(2.0), 0.5)
    logs = [math.log(v) for v in vals]
    assert logs == pytest.approx([2.0, 1.5, 1.0, 0.5, 0.0])


def test_geometric_samples_residual_end():
    vals = _geometric_samples(1.0, math.exp(1.7), 0.5)
    assert len(vals) == 5
    assert vals[0] == pytest.approx(math.exp(1.7))
    assert vals[-1] == pytest.approx(1.0)
    gaps = [math.log(a / b) for a, b in zip(vals, vals[1:])]
    assert gaps[:3] == pytest.approx([0.5, 0.5, 0.5])
    assert gaps[3] == pytest.approx(0.2)


def test_geometric_samples_degenerate():
    assert _geometric_samples(2.0, 1.0, 0.5) == []
    assert _geometric_samples(3.0, 3.0, 0.5) == [3.0]
    assert _geometric_samples(1.0, 0.0, 0.5) == []


# ---------------------------------------------------------------------------
# shortest-path search


def toy_graph(n, edges, source, target):
    verts = [GraphVertex(i, (float(i), 0.0), 1.0) for i in range(n)]
    ge = [GraphEdge(k, u, v, w, Path(())) for k, (u, v, w) in enumerate(edges)]
    adj = [[] for _ in range(n)]
    for e in ge:
        adj[e.u].append((e.v, e.index))
        adj[e.v].append((e.u, e.index))
    return SearchGraph("G1", verts, ge, source, target, adj)


def test_dijkstra_matches_sparse_reference():
    for seed in (1, 2, 3):
        rng = random.Random(seed)
        n = 60
        best = {}
        for _ in range(240):
            u, v = rng.randrange(n), rng.randrange(n)
            if u != v:
                key = (min(u, v), max(u, v))
                w = rng.uniform(0.05, 4.0)
                best[key] = min(w, best.get(key, math.inf))
        edges = [(u, v, w) for (u, v), w in sorted(best.items())]
        g = toy_graph(n, edges, 0, n - 1)
        rows = [e[0] for e in edges] + [e[1] for e in edges]
        cols = [e[1] for e in edges] + [e[0] for e in edges]
        vals = [e[2] for e in edges] * 2
        mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
        ref = sparse_dijkstra(mat, directed=False, indices=0)
        for t in range(1, n):
            g2 = SearchGraph(g.stage_tag, g.vertices, g.edges, 0, t,
                             g.adjacency)
            if math.isinf(ref[t]):
                with pytest.raises(UnreachableTargetError):
                    dijkstra(g2, 0, t)
            else:
                cost, _ = dijkstra(g2, 0, t)
                assert cost == pytest.approx(ref[t], abs=1e-9)


def test_dijkstra_trivial_and_unreachable():
    g = toy_graph(4, [(0, 1, 1.0), (2, 3, 1.0)], 0, 3)
    with pytest.raises(UnreachableTargetError):
        dijkstra(g, 0, 3)
    cost, path = dijkstra(g, 2, 2)
    assert cost == 0.0 and path.primitives == ()
    with pytest.raises(PreconditionError):
        dijkstra(g, 0, 99)


def test_dijkstra_deterministic_ties():
    # two equal-cost routes: the lower-index predecessor wins, repeatably
    edges = [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]
    g = toy_graph(4, edges, 0, 3)
    runs = {dijkstra(g, 0, 3)[0] for _ in range(3)}
    assert len(runs) == 1


# ---------------------------------------------------------------------------
# stage 1: coarse skeleton estimate


def test_stage1_same_radial_is_log_ratio():
    sc = scene_point_radial()
    vd = build_diagram(sc)
    r = stage1(vd)
    assert r.cost == pytest.approx(math.log(2.0), abs=1e-12)
    assert r.stage == 1
    assert path_cost_numeric(sc, r.path) == pytest.approx(math.log(2.0),
                                                          rel=1e-9)


def test_stage1_quarter_turn_climb_plus_arc():
    # best coarse route climbs the start radial (cost 1) then traverses a
    # quarter arc (cost pi/2); the true optimum is the straight blend
    sc = scene_quarter_turn()
    vd = build_diagram(sc)
    r = stage1(vd)
    assert r.cost == pytest.approx(1.0 + 0.5 * math.pi, abs=1e-9)
    exact = math.sqrt(1.0 + (0.5 * math.pi) ** 2)
    assert exact <= r.cost <= 23 * max(len(vd.cells), 1) * exact


def test_stage1_runs_across_random_scenes():
    ran = 0
    for seed in range(24):
        sc = scene_with_random_endpoints(seed)
        if sc is None:
            continue
        vd = build_diagram(sc)
        r = stage1(vd)
        assert math.isfinite(r.cost) and r.cost >= 0.0
        lower = abs(math.log(vd.target.clearance / vd.source.clearance))
        assert r.cost >= lower - COST_TOL
        ran += 1
    assert ran >= 12


# ---------------------------------------------------------------------------
# marked portions and second-stage search


def test_marked_radial_interval_clamps():
    sc = scene_quarter_turn()
    vd = build_diagram(sc)
    cell = vd.cells[0]
    d = 0.3
    lo, hi = marked_radial_interval(cell, d, 1.0, 2.0, "beta")
    assert lo == pytest.approx(min(cell.clr_beta, 2.0 / math.exp(d)))
    assert hi == pytest.approx(min(cell.clr_beta, 1.0 * math.exp(d)))


def test_stage2_never_worse_and_search_param_in_range():
    sc = scene_quarter_turn()
    vd = build_diagram(sc)
    r1 = stage1(vd)
    r2 = stage2(vd, r1.cost, baseline=r1)
    assert r2.cost <= r1.cost + COST_TOL
    assert r2.stage == 2
    steps = search_step_count(vd)
    assert r1.cost / 2.0 ** steps - COST_TOL <= r2.search_param <= r1.cost
    exact = math.sqrt(1.0 + (0.5 * math.pi) ** 2)
    assert r2.cost >= exact - COST_TOL


def test_g2_planar_embedding():
    from shapely.geometry import LineString

    for sc in (scene_quarter_turn(),):
        vd = build_diagram(sc)
        d = stage1(vd).cost
        g = build_G2(vd, d)
        lines = []
        for e in g.edges:
            ts = np.linspace(0.0, 1.0, 33)
            pts = np.concatenate([prim.trace(ts)
                                  for prim in e.realize().primitives])
            lines.append((e, LineString(pts)))
        crossings = 0
        for i in range(len(lines)):
            ei, li = lines[i]
            for j in range(i + 1, len(lines)):
                ej, lj = lines[j]
                if {ei.u, ei.v} & {ej.u, ej.v}:
                    continue
                if li.crosses(lj):
                    crossings += 1
        assert crossings == 0


def test_g2_marked_sample_counts_assert():
    # the in-build ceiling of 2n + 3 samples per high radial must hold
    # across scenes; building is enough, the builder raises otherwise
    for seed in (3, 7, 15):
        sc = scene_with_random_endpoints(seed)
        if sc is None:
            continue
        vd = build_diagram(sc)
        d = stage1(vd).cost
        if d <= 0.0:
            continue
        for scale in (1.0, 0.25, 1.0 / 64.0):
            build_G2(vd, max(d * scale, 1e-9))


# ---------------------------------------------------------------------------
# edgelet marking


def pick_cell(vd, min_alpha=1e-6, min_cost=0.5):
    for cell in vd.cells:
        if cell.clr_alpha <= min_alpha or cell.clr_beta <= cell.clr_alpha:
            continue
        ta, tb = cell.kappa_t_alpha(), cell.kappa_t_beta()
        if cell.kappa.curve.cost(min(ta, tb), max(ta, tb)) >= min_cost:
            return cell
    return None


def test_edgelet_whole_outer_piece():
    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    assert cell is not None
    curve = cell.kappa.curve
    ta, tb = sorted((cell.kappa_t_alpha(), cell.kappa_t_beta()))
    total = curve.cost(ta, tb)
    d = total / 1.5
    els = mark_edgelets(cell, d, cell.clr_alpha, cell.clr_beta)
    kappas = [e for e in els if e.side == "kappa"]
    assert len(kappas) == 1
    assert kappas[0].role == "kappa_whole"
    assert kappas[0].cost == pytest.approx(total)
    assert (kappas[0].lo, kappas[0].hi) == pytest.approx((ta, tb))


def test_edgelet_two_pieces_measured_costs():
    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    curve = cell.kappa.curve
    ta, tb = sorted((cell.kappa_t_alpha(), cell.kappa_t_beta()))
    total = curve.cost(ta, tb)
    d = total / 20.0
    clr_lo = cell.clr_beta / math.exp(d)
    els = mark_edgelets(cell, d, clr_lo, clr_lo)
    kappas = {e.role: e for e in els if e.side == "kappa"}
    assert set(kappas) == {"kappa_low", "kappa_high"}
    low, high = kappas["kappa_low"], kappas["kappa_high"]
    assert curve.cost(low.lo, low.hi) == pytest.approx(2.0 * d, abs=1e-6)
    assert curve.cost(high.lo, high.hi) == pytest.approx(4.0 * d, abs=1e-6)
    # the low piece starts at the inner corner
    t_alpha = cell.kappa_t_alpha()
    assert min(abs(low.lo - t_alpha), abs(low.hi - t_alpha)) < 1e-9
    # the high piece hangs from the clearance cap and walks downward
    cap = min(cell.clr_beta, clr_lo * math.exp(d))
    ends = sorted((curve.clearance_at(high.lo), curve.clearance_at(high.hi)))
    assert ends[1] == pytest.approx(cap, rel=1e-9)
    assert ends[0] < cap


def test_edgelet_merged_when_cap_is_low():
    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    curve = cell.kappa.curve
    ta, tb = sorted((cell.kappa_t_alpha(), cell.kappa_t_beta()))
    total = curve.cost(ta, tb)
    d = total / 20.0
    # cap below the inner corner clearance: the marked piece is the single
    # budgeted stretch from the corner
    clr_lo = cell.clr_alpha / math.exp(d) / 4.0
    els = mark_edgelets(cell, d, clr_lo, clr_lo)
    kappas = [e for e in els if e.side == "kappa"]
    assert len(kappas) == 1
    assert kappas[0].role == "kappa_whole"
    assert curve.cost(kappas[0].lo, kappas[0].hi) == pytest.approx(2.0 * d,
                                                                   abs=1e-6)


def test_edgelet_beta_empty_when_cap_below_floor():
    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    d = 0.25
    # both endpoint clearances far above the cell: floor clamps to the top
    clr = cell.clr_beta * math.exp(3.0 * d)
    els = mark_edgelets(cell, d, clr, clr)
    assert not [e for e in els if e.side == "beta"]


def test_edgelet_costs_capped_across_scenes():
    for seed in (3, 7, 15, 21):
        sc = scene_with_random_endpoints(seed)
        if sc is None:
            continue
        vd = build_diagram(sc)
        d = stage2(vd, stage1(vd).cost, baseline=stage1(vd)).cost
        if d <= 0.0:
            continue
        clr_lo = min(vd.source.clearance, vd.target.clearance)
        clr_hi = max(vd.source.clearance, vd.target.clearance)
        for cell in vd.cells:
            if cell.clr_beta <= 1e-9:
                continue
            for el in mark_edgelets(cell, d, clr_lo, clr_hi):
                if el.side in ("alpha", "beta"):
                    assert el.cost <= 2.0 * d + COST_TOL
                assert el.cost <= 6.0 * d + COST_TOL
                assert el.hi >= el.lo


def test_edgelet_zero_clearance_corner_skipped():
    # cells whose outer piece starts on an obstacle contact keep only the
    # capped piece; walking a budget from the contact is impossible
    found = False
    for seed in range(12):
        sc = scene_with_random_endpoints(seed)
        if sc is None:
            continue
        vd = build_diagram(sc)
        for cell in vd.cells:
            if cell.clr_beta <= 1e-9:
                continue
            ta = cell.kappa_t_alpha()
            if cell.kappa.curve.clearance_at(ta) > 1e-12:
                continue
            found = True
            els = mark_edgelets(cell, 0.5, 1.0, 2.0)
            for el in els:
                if el.side != "kappa":
                    continue
                assert el.role != "kappa_low"
                c0 = cell.kappa.curve.clearance_at(el.lo)
                c1 = cell.kappa.curve.clearance_at(el.hi)
                assert min(c0, c1) > 0.0
        if found:
            break
    assert found


# ---------------------------------------------------------------------------
# shadow points


def test_shadow_point_identity_off_the_high_radial():
    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    els = mark_edgelets(cell, 0.2, cell.clr_alpha, cell.clr_beta)
    xi = [e for e in els if e.side == "kappa"][0]
    p = cell.alpha.point_at_clearance(0.5 * cell.clr_alpha)
    assert shadow_point(cell, p, xi) == pytest.approx(p)


def test_shadow_point_lifts_low_beta_points():
    from clearpath.cellpaths import anchor_points

    vd = build_diagram(scene_quarter_turn())
    cell = pick_cell(vd)
    pair = anchor_points(cell)
    els = mark_edgelets(cell, 0.2, cell.clr_alpha, cell.clr_beta)
    xi = [e for e in els if e.side == "kappa"][0]
    if pair.w_kappa_clearance > cell.clr_alpha * 1.000001:
        low = cell.beta.point_at_clearance(
            0.5 * (cell.clr_alpha + pair.w_kappa_clearance))
        lifted = shadow_point(cell, low, xi)
        _, c = cell.frame_of_point(lifted)
        assert c == pytest.approx(pair.w_kappa_clearance)
    high = cell.beta.point_at_clearance(
        0.5 * (pair.w_kappa_clearance + cell.clr_beta))
    assert shadow_point(cell, high, xi) == pytest.approx(high)


# ---------------------------------------------------------------------------
# full staged driver


def test_stage_chain_monotone_with_quadrature():
    for seed, s, t in ((3, (12.0, 14.0), (87.0, 89.0)),
                       (7, (12.0, 14.0), (87.0, 89.0))):
        sc = scene_from_seed(seed, s, t)
        pl = Planner(sc)
        out = pl.solve(0.25)
        assert out.stage2.cost <= out.stage1.cost + COST_TOL
        assert out.stage3.cost <= out.stage2.cost + COST_TOL
        assert out.result.cost == min(out.stage1.cost, out.stage2.cost,
                                      out.stage3.cost)
        for r in (out.stage1, out.stage2, out.stage3):
            q = path_cost_numeric(sc, r.path)
            assert q == pytest.approx(r.cost, rel=REL_TOL, abs=1e-9)


def test_stage3_eps_monotone():
    sc = scene_from_seed(7, (12.0, 14.0), (87.0, 89.0))
    pl = Planner(sc)
    costs = [pl.solve(eps).stage3.cost for eps in (0.5, 0.25, 0.1)]
    assert costs[1] <= costs[0] + COST_TOL
    assert costs[2] <= costs[1] + COST_TOL


def test_swapped_endpoints_keep_user_order():
    # source clearance above target: the scene swaps internally and the
    # driver must hand back paths running in the caller's direction
    sc = make_scene([[(0.0, 0.0)]], (-50.0, -50.0, 50.0, 50.0),
                    (20.0, 0.0), (10.0, 0.0))
    assert sc.swapped
    out = Planner(sc).solve(0.5)
    first = out.result.path.primitives[0]
    last = out.result.path.primitives[-1]
    assert first.start == pytest.approx((20.0, 0.0))
    assert last.end == pytest.approx((10.0, 0.0))
    assert out.result.cost == pytest.approx(math.log(2.0), abs=1e-9)


def test_lower_bound_invariant_all_stages():
    # every edge respects the log-clearance-ratio lower bound on cost
    for seed, s, t in ((3, (12.0, 14.0), (87.0, 89.0)),
                       (7, (12.0, 14.0), (87.0, 89.0))):
        sc = scene_from_seed(seed, s, t)
        vd = build_diagram(sc)
        d1 = stage1(vd).cost
        graphs = [build_G1(vd), build_G2(vd, d1), build_G3(vd, d1, 0.5)]
        for g in graphs:
            for e in g.edges:
                cu = g.vertices[e.u].clearance
                cv = g.vertices[e.v].clearance
                assert cu > 0.0 and cv > 0.0
                assert e.cost >= abs(math.log(cv / cu)) - LOWER_BOUND_TOL


def test_g3_edge_costs_match_quadrature():
    sc = scene_from_seed(7, (12.0, 14.0), (87.0, 89.0))
    vd = build_diagram(sc)
    r1 = stage1(vd)
    r2 = stage2(vd, r1.cost, baseline=r1)
    g = build_G3(vd, r2.cost, 0.5)
    rng = random.Random(11)
    sample = rng.sample(range(len(g.edges)), min(250, len(g.edges)))
    for ei in sample:
        e = g.edges[ei]
        q = path_cost_numeric(sc, e.realize())
        assert q == pytest.approx(e.cost, rel=REL_TOL, abs=1e-9), \
            f"edge {ei} cost {e.cost} re-measured {q}"


def test_g3_connects_endpoints_without_fallback():
    sc = scene_from_seed(7, (12.0, 14.0), (87.0, 89.0))
    vd = build_diagram(sc)
    r1 = stage1(vd)
    g = build_G3(vd, r1.cost, 0.5)
    cost, path = dijkstra(g, g.source, g.target)
    assert math.isfinite(cost) and cost > 0.0
    assert path.primitives[0].start == pytest.approx(sc.source)
    assert path.primitives[-1].end == pytest.approx(sc.target)


# ---------------------------------------------------------------------------
# oracle-crossing containment: the marked portions computed with any
# estimate at or above the true cost must contain every boundary crossing
# of an independently found near-optimal path


def _dist_to_segment(p, a, b):
    ax, ay = a
    vx, vy = b[0] - ax, b[1] - ay
    L2 = vx * vx + vy * vy
    if L2 <= 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = max(0.0, min(1.0, ((p[0] - ax) * vx + (p[1] - ay) * vy) / L2))
    return math.hypot(p[0] - ax - t * vx, p[1] - ay - t * vy)


def _radial_ends(rad):
    return rad.inner, rad.point_at_clearance(rad.clearance)


def _crossing_ok(vd, edgelets_by_cell, cells_a, cells_b, x, pad):
    """The crossing point x must lie inside a marked piece of the side it
    crosses, for at least one adjacent cell on each flank."""
    ok_flags = []
    for side_cells in (cells_a, cells_b):
        side_ok = False
        for ci in side_cells:
            cell = vd.cells[ci]
            els = edgelets_by_cell[ci]
            u, c = cell.frame_of_point(x)
            for rad, name in ((cell.alpha, "alpha"), (cell.beta, "beta")):
                a, b = _radial_ends(rad)
                if _dist_to_segment(x, a, b) <= pad:
                    for el in els:
                        if el.side == name and \
                                el.lo - pad <= c <= el.hi + pad:
                            side_ok = True
            t = cell.kappa.curve.param_of_point(x)
            gap = abs(c - cell.kappa.curve.clearance_at(t))
            if gap <= pad:
                for el in els:
                    if el.side == "kappa" and el.lo - pad <= t <= el.hi + pad:
                        side_ok = True
        ok_flags.append(side_ok)
    return all(ok_flags)


def test_oracle_crossings_inside_marked_pieces():
    from clearpath.oracle import _cell_membership

    checked_scenes = 0
    checked_crossings = 0
    seed = 0
    while checked_scenes < 30 and seed < 90:
        sc = scene_with_random_endpoints(seed)
        seed += 1
        if sc is None:
            continue
        vd = build_diagram(sc)
        cfg = OracleConfig(grid_resolution=160)
        d, poly = grid_oracle_path(sc, sc.source, sc.target, cfg)
        if not math.isfinite(d) or len(poly) < 2:
            continue
        clr_lo = min(vd.source.clearance, vd.target.clearance)
        clr_hi = max(vd.source.clearance, vd.target.clearance)
        edgelets_by_cell = {c.index: mark_edgelets(c, d, clr_lo, clr_hi)
                            for c in vd.cells if c.clr_beta > 1e-9}
        pts = np.asarray(poly)
        member = np.zeros((len(vd.cells), len(pts)), dtype=bool)
        memb_slack = 1e-7 * sc.scale
        for ci, cell in enumerate(vd.cells):
            member[ci] = _cell_membership(cell, pts, memb_slack)
        sets = [frozenset(np.flatnonzero(member[:, k]))
                for k in range(len(pts))]
        h = math.hypot(sc.bounding_box[2] - sc.bounding_box[0],
                       sc.bounding_box[3] - sc.bounding_box[1]) / 160.0
        pad = 4.0 * h

        def cells_at(pt, slack):
            arr = np.asarray([pt])
            return frozenset(
                ci for ci, cell in enumerate(vd.cells)
                if _cell_membership(cell, arr, slack)[0])

        for k in range(len(pts) - 1):
            sa, sb = sets[k], sets[k + 1]
            if (sa & sb) or not sa or not sb:
                continue
            a, b = tuple(pts[k]), tuple(pts[k + 1])
            for _ in range(30):
                m = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
                sm = cells_at(m, memb_slack)
                if sm & sa:
                    a = m
                elif sm & sb:
                    b = m
                else:
                    break
            x = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
            near = cells_at(x, 0.5 * pad)
            flank_a = near & sa
            flank_b = near & sb
            if not flank_a or not flank_b:
                continue
            valid_a = {ci for ci in flank_a if ci in edgelets_by_cell}
            valid_b = {ci for ci in flank_b if ci in edgelets_by_cell}
            if not valid_a or not valid_b:
                continue
            assert _crossing_ok(vd, edgelets_by_cell, valid_a, valid_b,
                                x, pad), \
                f"seed {seed - 1}: crossing at {x} escaped the marked pieces"
            checked_crossings += 1
        checked_scenes += 1
    assert checked_scenes >= 20
    assert checked_crossings >= 30


# ---------------------------------------------------------------------------
# graph size scaling


def test_g3_growth_tracks_eps():
    sc = scene_from_seed(7, (12.0, 14.0), (87.0, 89.0))
    vd = build_diagram(sc)
    r1 = stage1(vd)
    sizes = {}
    for eps in (0.4, 0.2, 0.1):
        g = build_G3(vd, r1.cost, eps)
        sizes[eps] = (len(g.vertices), len(g.edges))
    # halving eps roughly doubles the vertex count; allow generous slack
    # but catch superlinear blowups
    assert sizes[0.2][0] <= 2.6 * sizes[0.4][0] + 64
    assert sizes[0.1][0] <= 2.6 * sizes[0.2][0] + 64
    assert sizes[0.1][0] >= sizes[0.2][0] >= sizes[0.4][0]


def test_spacing_complexity_counts_vertex_features():
    sc = scene_quarter_turn()
    assert spacing_complexity(sc) == 2
    sc2 = scene_from_seed(7, (12.0, 14.0), (87.0, 89.0))
    n_expected = sum(1 for f in sc2.features if f.kind == "vertex")
    assert spacing_complexity(sc2) == max(2, n_expected)
