"""Nearest-feature diagram construction: frozen structures and invariants."""

import math
import random

import numpy as np
import pytest

from clearpath import make_scene
from clearpath.curves import LineBisector, ParabolaBisector
from clearpath.diagram import VoronoiDiagram, build_diagram
from clearpath.geometry import AnalyticPrimitive, clearance, path_cost_numeric

SQ2 = math.sqrt(2.0)


def build(obstacles, box, s, t) -> VoronoiDiagram:
    scene = make_scene(obstacles, box, s, t)
    vd = build_diagram(scene)
    assert vd.validate() == []
    return vd


def node_clearances(vd: VoronoiDiagram):
    return sorted(round(n.clearance, 6) for n in vd.nodes)


# ---------------------------------------------------------------------------
# frozen structures for hand-checked scenes


def test_empty_box_structure():
    # Four wall bisector rays meeting at the center.
    vd = build([], (0, 0, 100, 100), (20, 50), (80, 50))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (5, 4, 8)
    assert node_clearances(vd) == [0.0, 0.0, 0.0, 0.0, 50.0]
    center = [n for n in vd.nodes if n.clearance == 50.0][0]
    assert center.point == pytest.approx((50.0, 50.0))


def test_square_in_box_structure():
    # Unit-square obstacle centered in a 10x10 box: 4 diagonal bisector
    # junctions at clearance 8 - 4*sqrt(2), plus per-side midline nodes.
    vd = build([[(4, 4), (6, 4), (6, 6), (4, 6)]], (0, 0, 10, 10), (2, 5), (8, 5))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (18, 18, 36)
    junction = round(8 - 4 * SQ2, 6)
    cls = node_clearances(vd)
    assert cls.count(junction) == 4
    assert cls.count(0.0) == 4
    assert cls.count(2.0) == 10


def test_point_obstacle_structure():
    # Point obstacle at the center of a 40x40 box: the region boundary is a
    # square of parabolic arcs with junctions at clearance 20*(2 - sqrt(2)).
    vd = build([[(20, 20)]], (0, 0, 40, 40), (5, 20), (35, 20))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (12, 12, 24)
    junction = round(20 * (2 - SQ2), 6)
    cls = node_clearances(vd)
    assert cls.count(junction) == 4
    assert cls.count(10.0) == 4  # parabola apex splits on each side
    assert cls.count(0.0) == 4


def test_segment_obstacle_structure():
    # Horizontal segment (10,10)-(30,10) in a 40x40 box; every node below
    # was verified against the closed-form bisectors by hand.
    vd = build([[(10, 10), (30, 10)]], (0, 0, 40, 40), (20, 15), (20, 5))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (16, 16, 32)
    pts = sorted((round(n.point[0], 6), round(n.point[1], 6)) for n in vd.nodes)
    j = round(10 * (2 - SQ2), 6)
    expected = sorted([
        (0.0, 0.0), (0.0, 40.0), (40.0, 40.0), (40.0, 0.0),  # box corner pinches
        (10.0, 5.0), (30.0, 5.0),            # south midline ends
        (20.0, 5.0),                         # target split on the midline
        (5.0, 10.0), (35.0, 10.0),           # endpoint-parabola apexes
        (10.0, 20.0), (30.0, 20.0),          # west/east parabola junctions
        (j, j), (round(40 - j, 6), j),       # south wall-wall junctions
        (15.0, 25.0), (25.0, 25.0),          # north midline junctions
        (20.0, 25.0),                        # source connector exit
    ])
    assert pts == expected


def test_l_shape_structure():
    vd = build([[(10, 10), (30, 10), (30, 16), (16, 16), (16, 30), (10, 30)]],
               (0, 0, 40, 40), (5, 35), (35, 5))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (21, 21, 42)
    cls = node_clearances(vd)
    assert cls.count(0.0) == 5  # four box corners plus the reflex pinch
    reflex = [n for n in vd.nodes if n.clearance == 0.0
              and n.point == pytest.approx((16.0, 16.0))]
    assert len(reflex) == 1


def test_two_triangle_structure():
    vd = build([[(10, 10), (18, 12), (12, 18)], [(30, 28), (22, 26), (28, 20)]],
               (0, 0, 40, 40), (3, 3), (37, 37))
    assert (len(vd.nodes), len(vd.edges), len(vd.cells)) == (29, 30, 60)


# ---------------------------------------------------------------------------
# invariants beyond validate()


def test_edges_equidistant_everywhere(two_triangle_scene):
    vd = build_diagram(two_triangle_scene)
    tol = 1e-6 * two_triangle_scene.scale
    for e in vd.edges:
        ts = np.linspace(e.t0, e.t1, 9)[1:-1]
        pts = e.curve.point_batch(ts)
        d = two_triangle_scene.feature_distances(pts)
        da, db = d[:, e.pair[0]], d[:, e.pair[1]]
        assert np.max(np.abs(da - db)) < tol
        assert np.min(d, axis=1).min() > np.minimum(da, db).min() - tol


def test_edge_costs_match_quadrature(square_scene):
    # Closed-form piece costs against independent numeric integration.
    vd = build_diagram(square_scene)
    checked = 0
    for e in vd.edges:
        if e.cost == 0.0 or not math.isfinite(e.cost):
            continue
        prim = AnalyticPrimitive("voronoi_edge_portion", e.point_at(e.t0),
                                 e.point_at(e.t1), e.cost, edge=e.curve,
                                 params=(e.t0, e.t1))
        num = path_cost_numeric(square_scene, prim)
        assert num == pytest.approx(e.cost, rel=1e-6)
        checked += 1
    assert checked >= 10


def test_param_at_cost_round_trip():
    rng = random.Random(7)
    curves = [
        LineBisector((0.0, 0.0), (1.0, 0.0), "point", 1.0, 0.0),
        LineBisector((2.0, 1.0), (0.0, 1.0), "point", 0.5, -2.0),
        LineBisector((0.0, 0.0), (1.0, 0.0), "affine", 1.0, 0.4),
        LineBisector((0.0, 0.0), (0.6, 0.8), "const", 2.5),
        ParabolaBisector((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), 0.5, 2.0),
    ]
    for curve in curves:
        for _ in range(50):
            t0 = rng.uniform(-3.0, 3.0)
            t1 = rng.uniform(-3.0, 3.0)
            if isinstance(curve, LineBisector) and curve.model == "affine":
                t0, t1 = abs(t0), abs(t1)  # keep clearance positive
            c = curve.cost(t0, t1)
            lo, hi = min(t0, t1), max(t0, t1)
            assert curve.param_at_cost(lo, c, +1) == pytest.approx(hi, abs=1e-9)
            assert curve.param_at_cost(hi, c, -1) == pytest.approx(lo, abs=1e-9)


def test_point_bisector_cost_is_asinh():
    # Two point obstacles at (0,-1) and (0,1): clearance along the x-axis
    # bisector is sqrt(1+x^2), so cost from 0 to x is asinh(x).
    curve = LineBisector((0.0, 0.0), (1.0, 0.0), "point", 1.0, 0.0)
    assert curve.cost(0.0, 1.0) == pytest.approx(math.asinh(1.0))
    assert curve.param_at_cost(0.0, 1.0, +1) == pytest.approx(math.sinh(1.0))
    assert curve.param_at_cost(0.0, 1.0, +1) == pytest.approx(1.1752011936438014)


def kappa_radius_at(cell, u: float) -> float:
    """Outer-boundary clearance of a cell at frame abscissa/angle u."""
    if cell.kind == "vertex":
        if cell.case == "line":
            return cell.case_h / math.cos(u - cell.case_phi)
        return cell.case_h / (1.0 + math.cos(u - cell.case_phi))
    if cell.case == "line":
        return cell.line_y0 + cell.line_slope * u
    return ((u - cell.par_xf) ** 2 + cell.par_h ** 2) / (2.0 * cell.par_h)


def test_cell_interiors_owned_by_their_feature(two_triangle_scene):
    vd = build_diagram(two_triangle_scene)
    rng = random.Random(3)
    tol = 1e-7 * two_triangle_scene.scale
    for cell in vd.cells:
        width = cell.theta_beta if cell.kind == "vertex" else cell.x_beta
        if width <= 1e-9:
            continue
        for _ in range(10):
            u = rng.uniform(0.15, 0.85) * width
            c = rng.uniform(0.2, 0.9) * kappa_radius_at(cell, u)
            if cell.kind == "edge" and c <= 0:
                continue
            p = cell.point_of_frame(u, c)
            d = two_triangle_scene.feature_distances(np.asarray([p]))[0]
            assert d[cell.feature_index] <= d.min() + tol


def test_cell_frame_round_trip(square_scene):
    vd = build_diagram(square_scene)
    rng = random.Random(11)
    for cell in vd.cells:
        width = cell.theta_beta if cell.kind == "vertex" else cell.x_beta
        for _ in range(5):
            u = rng.uniform(0.0, width)
            c = rng.uniform(0.3, 1.0) * max(kappa_radius_at(cell, u), 1e-6)
            p = cell.point_of_frame(u, c)
            u2, c2 = cell.frame_of_point(p)
            assert u2 == pytest.approx(u, abs=1e-9)
            assert c2 == pytest.approx(c, abs=1e-9)


def test_kappa_clearance_inverse(two_triangle_scene):
    vd = build_diagram(two_triangle_scene)
    for cell in vd.cells:
        lo, hi = cell.clr_alpha, cell.clr_beta
        if hi - lo <= 1e-9:
            continue
        for frac in (0.25, 0.5, 0.75):
            c = lo + frac * (hi - lo)
            t = cell.kappa_t_at_clearance(c)
            assert cell.kappa_clearance(t) == pytest.approx(c, abs=1e-7)


# ---------------------------------------------------------------------------
# terminals


def test_terminal_nodes_and_clearance(square_scene):
    vd = build_diagram(square_scene)
    for term, pt in ((vd.source, square_scene.source),
                     (vd.target, square_scene.target)):
        assert term.point == pytest.approx(pt)
        assert term.clearance == pytest.approx(clearance(square_scene, pt).value)
        assert term.cells
        for ci in term.cells:
            cell = vd.cells[ci]
            u, c = cell.frame_of_point(term.point)
            width = cell.theta_beta if cell.kind == "vertex" else cell.x_beta
            assert -1e-7 <= u <= width + 1e-7


def test_terminal_on_diagram_edge_splits_it():
    # Target sits exactly on the midline between segment and south wall.
    vd = build([[(10, 10), (30, 10)]], (0, 0, 40, 40), (20, 15), (20, 5))
    assert not vd.target.interior
    tn = vd.nodes[vd.target.node_index]
    assert tn.point == pytest.approx((20.0, 5.0))
    incident = [e for e in vd.edges if tn.index in (e.n0, e.n1)]
    assert len(incident) >= 2


# ---------------------------------------------------------------------------
# randomized robustness


def test_random_scenes_build_and_validate():
    from conftest import random_scene

    built = 0
    for seed in range(40):
        obstacles, box = random_scene(seed)
        try:
            scene = make_scene(obstacles, box, (5, 5), (95, 95))
        except Exception:
            continue  # generator may self-intersect; skip those seeds
        if min(clearance(scene, (5, 5)).value,
               clearance(scene, (95, 95)).value) < 1.0:
            continue
        vd = build_diagram(scene)
        assert vd.validate() == []
        built += 1
    assert built >= 30


def test_scale_invariance():
    counts = []
    for s in (1e-3, 1.0, 1e3):
        vd = build([[(4 * s, 4 * s), (6 * s, 4 * s), (6 * s, 6 * s), (4 * s, 6 * s)]],
                   (0, 0, 10 * s, 10 * s), (2 * s, 5 * s), (8 * s, 5 * s))
        counts.append((len(vd.nodes), len(vd.edges), len(vd.cells)))
    assert counts[0] == counts[1] == counts[2] == (18, 18, 36)
