import math
import random
import sys

sys.path.insert(0, "tests")
from conftest import random_scene

from clearpath import make_scene
from clearpath.cellpaths import cell_width, kappa_clearance_at_frame
from clearpath.diagram import build_diagram
from clearpath.reachability import (
    EdgePortion, locally_reachable, locally_reachable_dense,
    reachable_portion, tangent_witness, transform, local_cost,
    local_optimal_path,
)
from clearpath.geometry import path_cost_numeric

def boundary_point(cell, side, f):
    w = cell_width(cell)
    if side == "alpha":
        return cell.point_of_frame(0.0, max(f, 0.02) * cell.clr_alpha)
    if side == "beta":
        return cell.point_of_frame(w, max(f, 0.02) * cell.clr_beta)
    u = f * w
    return cell.point_of_frame(u, kappa_clearance_at_frame(cell, u))

def edge_param_points(cell, side, n):
    """n sample points along a side with their parameters."""
    w = cell_width(cell)
    out = []
    for i in range(n):
        f = (i + 0.5) / n
        if side == "kappa":
            u = f * w
            out.append((u, cell.point_of_frame(u, kappa_clearance_at_frame(cell, u))))
        else:
            clr = cell.clr_alpha if side == "alpha" else cell.clr_beta
            c = f * clr
            u = 0.0 if side == "alpha" else w
            out.append((c, cell.point_of_frame(u, c)))
    return out

cells = []
seed = 0
while len(cells) < 80 and seed < 100:
    obstacles, box = random_scene(seed)
    seed += 1
    try:
        scene = make_scene(obstacles, box, (5, 5), (95, 95))
        vd = build_diagram(scene)
    except Exception:
        continue
    for c in vd.cells:
        if cell_width(c) > 1e-3 and c.clr_alpha > 1e-6:
            cells.append((scene, c))
cells = cells[:80]
print(f"{len(cells)} cells")

rng = random.Random(7)

# 1) analytic predicate vs dense fallback
mismatch = 0
total = 0
for scene, cell in cells:
    for _ in range(12):
        p = boundary_point(cell, rng.choice(["alpha", "beta", "kappa"]), rng.random())
        q = boundary_point(cell, rng.choice(["alpha", "beta", "kappa"]), rng.random())
        a = locally_reachable(cell, p, q)
        d = locally_reachable_dense(cell, p, q)
        total += 1
        if a != d:
            mismatch += 1
            print("MISMATCH", cell.kind, cell.case, p, q)
print(f"predicate vs dense: {mismatch}/{total} mismatches")

# 2) reachable_portion vs dense scan along each side
N = 400
bad = 0
checked = 0
for scene, cell in cells[:60]:
    p = boundary_point(cell, rng.choice(["alpha", "beta", "kappa"]), rng.random())
    for side in ("alpha", "beta", "kappa"):
        port = reachable_portion(cell, p, side)
        marks = []
        for val, q in edge_param_points(cell, side, N):
            marks.append((val, locally_reachable(cell, p, q)))
        # dense reachable set
        reach = [v for v, ok in marks if ok]
        spacing = (marks[1][0] - marks[0][0]) if len(marks) > 1 else 0.0
        checked += 1
        if port.empty:
            if reach and len(reach) > 2:
                bad += 1
                print("EMPTY but dense reach", cell.kind, cell.case, side, len(reach))
            continue
        if not reach:
            # portion nonempty but dense empty: allow tiny portions
            span = port.hi - port.lo
            if span > 2.5 * spacing:
                bad += 1
                print("NONEMPTY but dense empty", cell.kind, cell.case, side,
                      port.lo, port.hi)
            continue
        lo_d, hi_d = min(reach), max(reach)
        # within 2 spacings
        lo_a = port.lo if side == "kappa" else marks[0][0]
        if side != "kappa":
            lo_a = min(v for v, _ in marks)  # lowest sampled clearance
        if abs(hi_d - port.hi) > 2.5 * spacing or (side == "kappa" and abs(lo_d - port.lo) > 2.5 * spacing):
            bad += 1
            print("BOUNDARY off", cell.kind, cell.case, side,
                  "dense", lo_d, hi_d, "analytic", port.lo, port.hi, "h", spacing)
        # single run check
        flags = [ok for _, ok in marks]
        runs = sum(1 for i in range(1, len(flags)) if flags[i] != flags[i-1])
        if runs > 2:
            bad += 1
            print("MULTI-RUN", cell.kind, cell.case, side, runs)
print(f"portions: {bad} bad of {checked}")

# 3) witness consistency: locally_reachable(p,q) == q in portion(side(q))
bad2 = 0
for scene, cell in cells[:40]:
    for _ in range(8):
        sp = rng.choice(["alpha", "beta", "kappa"])
        sq = rng.choice(["alpha", "beta", "kappa"])
        p = boundary_point(cell, sp, rng.random())
        fq = rng.uniform(0.03, 0.97)
        q = boundary_point(cell, sq, fq)
        port = reachable_portion(cell, p, sq)
        w = cell_width(cell)
        if sq == "kappa":
            val = fq * w
            slack = 1e-6 * max(w, 1.0)
        else:
            clr = cell.clr_alpha if sq == "alpha" else cell.clr_beta
            val = max(fq, 0.02) * clr
            slack = 1e-6 * clr
        inp = port.contains(val, slack)
        lr = locally_reachable(cell, p, q)
        if inp != lr:
            # borderline?
            if not (port.contains(val, 1e-3 * max(val, 1.0)) != port.contains(val, -1e-3 * max(val, 1.0))):
                bad2 += 1
                print("WITNESS MISMATCH", cell.kind, cell.case, sp, sq, val, port.lo, port.hi, lr)
print(f"witness consistency: {bad2} mismatches")

# 4) symmetry + path cost quadrature
bad3 = 0
for scene, cell in cells[:40]:
    for _ in range(6):
        p = boundary_point(cell, rng.choice(["alpha", "beta", "kappa"]), rng.random())
        q = boundary_point(cell, rng.choice(["alpha", "beta", "kappa"]), rng.random())
        if locally_reachable(cell, p, q) != locally_reachable(cell, q, p):
            bad3 += 1
            print("ASYM", cell.kind, cell.case)
        if locally_reachable(cell, p, q):
            path = local_optimal_path(cell, p, q)
            lc = local_cost(cell, p, q)
            if abs(path.cost - lc) > 1e-9 * max(1, lc):
                bad3 += 1
                print("COST disagree", path.cost, lc)
            if path.primitives:
                num = path_cost_numeric(scene, path)
                if abs(num - lc) > 1e-5 * max(1, lc):
                    bad3 += 1
                    print("QUAD disagree", cell.kind, cell.case, num, lc)
print(f"symmetry/path: {bad3} bad")
