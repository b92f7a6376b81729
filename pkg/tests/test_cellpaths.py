"""In-cell routing: traverses, anchors, and boundary-to-boundary paths."""

import math
import random

import numpy as np
import pytest

from clearpath import make_scene
from clearpath.cellpaths import (
    AnchorPair,
    anchor_points,
    best_anchor,
    cell_width,
    classify_boundary_point,
    constant_clearance_arc,
    kappa_clearance_at_frame,
    lambda_path,
    traverse_cost,
    well_behaved_path,
)
from clearpath.diagram import Radial, RefinedCell, build_diagram
from clearpath.errors import PreconditionError
from clearpath.geometry import path_cost_numeric
from clearpath.oracle import OracleConfig, cell_oracle

QUARTER_PI = 0.25 * math.pi
HALF_PI = 0.5 * math.pi


# ---------------------------------------------------------------------------
# synthetic cells with hand-picked frames


def vertex_cell(theta_beta: float, case: str, h: float, phi: float) -> RefinedCell:
    """Vertex-feature cell around the origin with alpha along +x."""
    def rho(u):
        if case == "line":
            return h / math.cos(u - phi)
        return h / (1.0 + math.cos(u - phi))

    clr_a, clr_b = rho(0.0), rho(theta_beta)
    ca, sa = 1.0, 0.0
    cb, sb = math.cos(theta_beta), math.sin(theta_beta)
    alpha = Radial(0, (0.0, 0.0), -1, (clr_a * ca, clr_a * sa), clr_a, (ca, sa), False)
    beta = Radial(0, (0.0, 0.0), -1, (clr_b * cb, clr_b * sb), clr_b, (cb, sb), False)
    return RefinedCell(0, 0, "vertex", alpha, beta, None, 0, case,
                       origin=(0.0, 0.0), theta_alpha_world=0.0, sweep_sign=1,
                       theta_beta=theta_beta, case_h=h, case_phi=phi)


def edge_cell(x_beta: float, case: str, y0: float = 0.0, slope: float = 0.0,
              xf: float = 0.0, h: float = 0.0) -> RefinedCell:
    """Edge-feature cell with the feature along the x axis from (0,0)."""
    def lim(u):
        if case == "line":
            return y0 + slope * u
        return ((u - xf) ** 2 + h * h) / (2.0 * h)

    clr_a, clr_b = lim(0.0), lim(x_beta)
    alpha = Radial(0, (0.0, 0.0), -1, (0.0, clr_a), clr_a, (0.0, 1.0), False)
    beta = Radial(0, (x_beta, 0.0), -1, (x_beta, clr_b), clr_b, (0.0, 1.0), False)
    return RefinedCell(0, 0, "edge", alpha, beta, None, 0, case,
                       x_dir=(1.0, 0.0), normal=(0.0, 1.0), x_beta=x_beta,
                       line_y0=y0, line_slope=slope, par_xf=xf, par_h=h)


# ---------------------------------------------------------------------------
# constant-clearance traverses


def test_quarter_circle_traverse():
    cell = vertex_cell(HALF_PI, "parabola", 2.0, 0.0)
    c = 0.8 * cell.clr_alpha
    arc = constant_clearance_arc(cell, cell.point_of_frame(HALF_PI, c))
    assert arc.cost == pytest.approx(HALF_PI)
    assert not arc.on_kappa
    assert arc.w_bar == pytest.approx(cell.point_of_frame(0.0, c))


def test_horizontal_traverse_cost():
    # Width 2 at clearance 2: length/clearance = 1.
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    arc = constant_clearance_arc(cell, cell.point_of_frame(2.0, 2.0))
    assert arc.cost == pytest.approx(1.0)
    assert not arc.on_kappa


def test_traverse_ends_on_kappa_above_alpha_clearance():
    cell = edge_cell(2.0, "line", y0=1.0, slope=1.5)
    c = 2.5  # above clr_alpha=1, below clr_beta=4
    arc = constant_clearance_arc(cell, cell.point_of_frame(2.0, c))
    assert arc.on_kappa
    x_bar = (c - 1.0) / 1.5
    assert arc.w_bar == pytest.approx((x_bar, c))
    assert arc.cost == pytest.approx((2.0 - x_bar) / c)


def test_traverse_clearance_out_of_range():
    cell = edge_cell(2.0, "line", y0=1.0, slope=1.5)
    with pytest.raises(PreconditionError):
        constant_clearance_arc(cell, cell.point_of_frame(2.0, 5.0))


# ---------------------------------------------------------------------------
# ascent fragments


def test_lambda_cost_vertex_full_sweep():
    # Quarter sweep, climb from clearance 1 to e: cost 1 + pi/2.
    cell = vertex_cell(HALF_PI, "parabola", 6.0, 0.0)
    assert cell.clr_alpha > math.e  # traverse at e spans the full width
    p = cell.point_of_frame(HALF_PI, 1.0)
    w = cell.point_of_frame(HALF_PI, math.e)
    lam = lambda_path(cell, p, w)
    assert lam.cost == pytest.approx(1.0 + HALF_PI)
    assert not constant_clearance_arc(cell, w).on_kappa


def test_lambda_cost_edge():
    # Width 2, climb 1 -> 2 then traverse at 2: ln 2 + 1.
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    p = cell.point_of_frame(2.0, 1.0)
    w = cell.point_of_frame(2.0, 2.0)
    lam = lambda_path(cell, p, w)
    assert lam.cost == pytest.approx(math.log(2.0) + 1.0)


def test_lambda_trivial_at_p():
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    p = cell.point_of_frame(2.0, 1.5)
    lam = lambda_path(cell, p, p)
    assert lam.cost == pytest.approx(traverse_cost(cell, 1.5))
    assert lam.cost == pytest.approx(2.0 / 1.5)


def test_lambda_rejects_descending_anchor():
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    p = cell.point_of_frame(2.0, 2.0)
    w = cell.point_of_frame(2.0, 1.0)
    with pytest.raises(PreconditionError):
        lambda_path(cell, p, w)


# ---------------------------------------------------------------------------
# anchors: closed-form conditions


def test_vertex_line_anchor_unclamped():
    # Foot angle 0, span past 45 degrees: condition lands exactly there.
    cell = vertex_cell(1.0, "line", 1.0, 0.0)
    pair = anchor_points(cell)
    assert pair.w_alpha is None
    assert pair.case_tag == "kappa-line"
    assert pair.param == pytest.approx(QUARTER_PI)
    assert not pair.clamped
    assert pair.w_kappa_clearance == pytest.approx(1.0 / math.cos(QUARTER_PI))


def test_vertex_line_anchor_clamps_to_ends():
    narrow = vertex_cell(0.5, "line", 1.0, 0.0)   # beta end below 45 degrees
    pair = anchor_points(narrow)
    assert pair.clamped
    assert pair.param == pytest.approx(0.5)
    assert pair.w_kappa_clearance == pytest.approx(narrow.clr_beta)
    offset = vertex_cell(0.5, "line", 1.0, -1.0)  # alpha end above 45 degrees
    pair = anchor_points(offset)
    assert pair.clamped
    assert pair.param == pytest.approx(1.0)
    assert pair.w_kappa_clearance == pytest.approx(offset.clr_alpha)


def test_vertex_parabola_anchor():
    cell = vertex_cell(2.2, "parabola", 1.0, -0.2)
    pair = anchor_points(cell)
    assert pair.case_tag == "kappa-parabola"
    assert pair.param == pytest.approx(HALF_PI)
    assert not pair.clamped
    assert pair.w_kappa_clearance == pytest.approx(1.0 / (1.0 + math.cos(HALF_PI)))


def test_edge_width_anchor():
    # Width 2 fits under the alpha clearance: anchor at clearance 2.
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    pair = anchor_points(cell)
    assert pair.w_alpha is not None
    assert pair.w_alpha_clearance == pytest.approx(2.0)
    wide = edge_cell(3.0, "line", y0=2.5, slope=5.0)
    assert anchor_points(wide).w_alpha is None


def test_edge_line_anchor_condition():
    # Unclamped optimum at clearance x_beta + y0/slope.
    cell = edge_cell(4.0, "line", y0=1.0, slope=2.0)
    pair = anchor_points(cell)
    assert pair.case_tag == "kappa-line"
    assert not pair.clamped
    assert pair.w_kappa_clearance == pytest.approx(4.0 + 0.5)
    g = lambda c: math.log(c) + traverse_cost(cell, c)
    c = pair.w_kappa_clearance
    d = (g(c + 1e-6) - g(c - 1e-6)) / 2e-6
    assert abs(d) < 1e-6


def test_edge_parabola_anchor_cubic_root():
    # a=1, beta abscissa 4 from the apex: the cubic 2t^3+4t^2-24t-16 has
    # its unique positive root at 2.96238861 (verified by two independent
    # solvers), so the anchor sits at clearance root^2/4 + 1.
    cell = edge_cell(4.0, "parabola", xf=0.0, h=2.0)
    pair = anchor_points(cell)
    assert pair.case_tag == "kappa-parabola"
    assert not pair.clamped
    root = 2.9623886081840305
    assert pair.param == pytest.approx(root, abs=1e-9)
    assert pair.w_kappa_clearance == pytest.approx(root * root / 4.0 + 1.0)
    cubic = 2 * root ** 3 + 4 * root ** 2 - 24 * root - 16
    assert abs(cubic) < 1e-7


def test_flat_outer_piece_anchor():
    cell = edge_cell(2.0, "line", y0=1.5, slope=0.0)
    pair = anchor_points(cell)
    assert pair.case_tag == "kappa-flat"
    assert pair.w_kappa_clearance == pytest.approx(1.5)


# ---------------------------------------------------------------------------
# best anchor selection


def test_best_anchor_prefers_width_anchor():
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    p = cell.point_of_frame(2.0, 0.5)
    choice = best_anchor(cell, p)
    assert choice.label == "w_alpha"
    assert choice.clearance == pytest.approx(2.0)
    assert choice.lambda_cost == pytest.approx(math.log(4.0) + 1.0)
    assert choice.lambda_cost < 2.0 / 0.5  # beats staying at p


def test_best_anchor_p_when_above_candidates():
    cell = edge_cell(2.0, "line", y0=2.5, slope=5.0)
    pair = anchor_points(cell)
    cp = max(pair.w_alpha_clearance, pair.w_kappa_clearance) + 1.0
    assert cp < cell.clr_beta
    p = cell.point_of_frame(2.0, cp)
    choice = best_anchor(cell, p)
    assert choice.label == "p"
    assert choice.w == p


def test_best_anchor_matches_lambda_path_cost():
    rng = random.Random(3)
    cells = [
        vertex_cell(1.1, "line", 1.0, -0.4),
        vertex_cell(2.0, "parabola", 1.5, -0.6),
        edge_cell(3.0, "line", y0=1.0, slope=0.8),
        edge_cell(2.5, "parabola", xf=-0.5, h=1.6),
    ]
    for cell in cells:
        for _ in range(10):
            cp = rng.uniform(0.1, 1.0) * cell.clr_beta
            p = cell.point_of_frame(cell_width(cell), cp)
            choice = best_anchor(cell, p)
            lam = lambda_path(cell, p, choice.w)
            assert lam.cost == pytest.approx(choice.lambda_cost, abs=1e-9)


# ---------------------------------------------------------------------------
# anchor optimality: dense scan over 200 real cells


def collect_cells(min_count: int):
    from conftest import random_scene
    out = []
    seed = 0
    while len(out) < min_count and seed < 200:
        obstacles, box = random_scene(seed)
        seed += 1
        try:
            scene = make_scene(obstacles, box, (5, 5), (95, 95))
        except Exception:
            continue
        try:
            vd = build_diagram(scene)
        except Exception:
            continue
        for cell in vd.cells:
            if cell_width(cell) > 1e-4 and cell.clr_beta > 1e-6:
                out.append(cell)
    return out[:min_count]


def scan_traverse_costs(cell: RefinedCell, cs: np.ndarray) -> np.ndarray:
    """Vectorized reimplementation of the traverse cost for the scan."""
    if cell.kind == "vertex":
        if cell.case == "line":
            u = cell.case_phi + np.arccos(np.minimum(1.0, cell.case_h / cs))
        else:
            u = cell.case_phi + np.arccos(
                np.clip(cell.case_h / cs - 1.0, -1.0, 1.0))
        u = np.clip(u, 0.0, cell.theta_beta)
        u = np.where(cs <= cell.clr_alpha, 0.0, u)
        return cell.theta_beta - u
    if cell.case == "line":
        if abs(cell.line_slope) <= 1e-12:
            u = np.zeros_like(cs)
        else:
            u = (cs - cell.line_y0) / cell.line_slope
    else:
        u = cell.par_xf + np.sqrt(
            np.maximum(2.0 * cell.par_h * cs - cell.par_h ** 2, 0.0))
    u = np.clip(u, 0.0, cell.x_beta)
    u = np.where(cs <= cell.clr_alpha, 0.0, u)
    return (cell.x_beta - u) / cs


def test_anchor_optimality_dense_scan():
    cells = collect_cells(200)
    assert len(cells) == 200
    rng = random.Random(41)
    width = None
    for cell in cells:
        width = cell_width(cell)
        for _ in range(20):
            cp = rng.uniform(0.05, 1.0) * cell.clr_beta
            p = cell.point_of_frame(width, cp)
            choice = best_anchor(cell, p)
            cs = np.linspace(cp, cell.clr_beta, 1000)
            costs = np.log(cs / cp) + scan_traverse_costs(cell, cs)
            assert float(costs.min()) >= choice.lambda_cost - 1e-6, \
                f"cell {cell.index} {cell.kind}/{cell.case}"


def test_anchor_stationarity_on_real_cells():
    cells = collect_cells(200)
    seen = 0
    for cell in cells:
        pair = anchor_points(cell)
        c = pair.w_kappa_clearance
        if pair.clamped or c <= cell.clr_alpha * 1.001 or c >= cell.clr_beta * 0.999:
            continue
        if cell.kind == "vertex":
            expr = math.tan(pair.param) - 1.0 if cell.case == "line" \
                else math.tan(0.5 * pair.param) - 1.0
        elif cell.case == "line":
            x0 = -cell.line_y0 / cell.line_slope
            expr = (pair.param * cell.line_slope - (cell.x_beta - x0)) \
                / max(1.0, abs(cell.x_beta - x0))
        else:
            a = 0.5 * cell.par_h
            xb = cell.x_beta - cell.par_xf
            t = pair.param
            expr = (2 * t ** 3 + 4 * a * t * t + 8 * a * (a - xb) * t
                    - 16 * a ** 3) / max(1.0, 16 * a ** 3)
        assert abs(expr) < 1e-8
        seen += 1
    assert seen >= 3


# ---------------------------------------------------------------------------
# boundary-to-boundary paths on real cells


@pytest.fixture(scope="module")
def two_obstacle_diagram():
    scene = make_scene(
        [[(4, 4), (6, 4), (6, 6), (4, 6)], [(7.5, 7.5), (8.5, 7.7), (8.0, 8.6)]],
        (0, 0, 10, 10), (2, 5), (8, 5))
    return scene, build_diagram(scene)


def boundary_point(cell, side, f):
    w = cell_width(cell)
    if side == "alpha":
        return cell.point_of_frame(0.0, max(f, 0.05) * cell.clr_alpha)
    if side == "beta":
        return cell.point_of_frame(w, max(f, 0.05) * cell.clr_beta)
    u = f * w
    return cell.point_of_frame(u, kappa_clearance_at_frame(cell, u))


def test_well_behaved_paths_all_side_pairs(two_obstacle_diagram):
    scene, vd = two_obstacle_diagram
    rng = random.Random(9)
    checked = 0
    for cell in vd.cells:
        if cell_width(cell) <= 1e-4 or cell.clr_alpha <= 1e-6:
            continue
        for sp in ("alpha", "beta", "kappa"):
            for sq in ("alpha", "beta", "kappa"):
                p = boundary_point(cell, sp, rng.uniform(0.2, 0.9))
                q = boundary_point(cell, sq, rng.uniform(0.2, 0.9))
                wb = well_behaved_path(cell, p, q)
                if wb.primitives:
                    num = path_cost_numeric(scene, wb.path)
                    assert num == pytest.approx(wb.cost, rel=1e-5, abs=1e-9)
                    assert wb.path.start == pytest.approx(p, abs=1e-6)
                    assert wb.path.end == pytest.approx(q, abs=1e-6)
                checked += 1
    assert checked >= 200


def test_well_behaved_radial_portion_is_exact(two_obstacle_diagram):
    scene, vd = two_obstacle_diagram
    cell = next(c for c in vd.cells if cell_width(c) > 0.1 and c.clr_alpha > 0.2)
    p = boundary_point(cell, "alpha", 0.3)
    q = boundary_point(cell, "alpha", 0.8)
    wb = well_behaved_path(cell, p, q)
    assert wb.anchor_used == "none"
    assert wb.cost == pytest.approx(math.log(0.8 * cell.clr_alpha
                                             / (0.3 * cell.clr_alpha)))


def test_well_behaved_reversal_symmetry(two_obstacle_diagram):
    scene, vd = two_obstacle_diagram
    rng = random.Random(23)
    for cell in vd.cells[:20]:
        if cell_width(cell) <= 1e-4 or cell.clr_alpha <= 1e-6:
            continue
        p = boundary_point(cell, "beta", rng.uniform(0.3, 0.9))
        q = boundary_point(cell, "kappa", rng.uniform(0.2, 0.8))
        a = well_behaved_path(cell, p, q)
        b = well_behaved_path(cell, q, p)
        assert a.cost == pytest.approx(b.cost, abs=1e-9)


def test_well_behaved_bounds_vs_cell_oracle(two_obstacle_diagram):
    # Paths that never touch beta stay within 3x the in-cell optimum;
    # paths leaving beta stay within 11x.
    scene, vd = two_obstacle_diagram
    rng = random.Random(17)
    cells = [c for c in vd.cells
             if cell_width(c) > 0.05 and c.clr_alpha > 0.05][:10]
    assert len(cells) >= 6
    cfg = OracleConfig(grid_resolution=96)
    for cell in cells:
        for sp, sq, bound in (("alpha", "kappa", 3), ("alpha", "alpha", 3),
                              ("kappa", "kappa", 3), ("beta", "alpha", 11),
                              ("beta", "kappa", 11)):
            p = boundary_point(cell, sp, rng.uniform(0.3, 0.9))
            q = boundary_point(cell, sq, rng.uniform(0.3, 0.9))
            wb = well_behaved_path(cell, p, q)
            orc = cell_oracle(cell, scene, p, q, cfg)
            assert wb.cost <= bound * orc + 1e-4


def test_classification(two_obstacle_diagram):
    scene, vd = two_obstacle_diagram
    cell = next(c for c in vd.cells if cell_width(c) > 0.1 and c.clr_alpha > 0.2)
    assert "alpha" in classify_boundary_point(cell, boundary_point(cell, "alpha", 0.5))
    assert "beta" in classify_boundary_point(cell, boundary_point(cell, "beta", 0.5))
    assert "kappa" in classify_boundary_point(cell, boundary_point(cell, "kappa", 0.4))
    corner = cell.point_of_frame(0.0, cell.clr_alpha)
    sides = classify_boundary_point(cell, corner)
    assert "alpha" in sides and "kappa" in sides
    with pytest.raises(PreconditionError):
        classify_boundary_point(cell, cell.point_of_frame(
            0.5 * cell_width(cell), 0.5 * cell.clr_alpha))
