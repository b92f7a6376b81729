import numpy as np
from clearpath.geometry import make_scene
from clearpath.diagram import build_diagram


def run(name, obstacles, box, s, t):
    print(f"=== {name} ===")
    scene = make_scene(obstacles, box, s, t)
    d = build_diagram(scene)
    clrs = sorted(round(n.clearance, 6) for n in d.nodes)
    print(f"  nodes={len(d.nodes)} edges={len(d.edges)} cells={len(d.cells)}")
    print(f"  node clearances: {clrs}")
    bad = d.validate()
    if bad:
        for m in bad[:8]:
            print("  VIOLATION:", m)
    else:
        print("  no violations")
    for term in (d.source, d.target):
        print(f"  {term.label}: interior={term.interior} cells={sorted(term.cells)}")
    return d


run("empty box", [], (0.0, 0.0, 100.0, 100.0), (20.0, 50.0), (80.0, 50.0))
run("square in box", [[(4.0, 4.0), (6.0, 4.0), (6.0, 6.0), (4.0, 6.0)]],
    (0.0, 0.0, 10.0, 10.0), (2.0, 5.0), (8.0, 5.0))
run("point obstacle", [[(20.0, 20.0)]], (0.0, 0.0, 40.0, 40.0),
    (5.0, 20.0), (35.0, 20.0))
run("segment obstacle", [[(10.0, 10.0), (30.0, 10.0)]], (0.0, 0.0, 40.0, 40.0),
    (20.0, 15.0), (20.0, 5.0))
run("L shape", [[(10.0, 10.0), (30.0, 10.0), (30.0, 16.0), (16.0, 16.0),
                 (16.0, 30.0), (10.0, 30.0)]],
    (0.0, 0.0, 40.0, 40.0), (5.0, 35.0), (35.0, 5.0))
run("two triangles", [[(10.0, 10.0), (18.0, 12.0), (12.0, 18.0)],
                      [(30.0, 28.0), (22.0, 26.0), (28.0, 20.0)]],
    (0.0, 0.0, 40.0, 40.0), (3.0, 3.0), (37.0, 37.0))
print("all built")
