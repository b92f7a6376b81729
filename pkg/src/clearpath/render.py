"""SVG 1.1 diagnostic rendering.

Layers, each toggled by flag: the scene (obstacles and bounding box), the
nearest-feature diagram edges (dashed), the refinement radials (solid when
they end at a junction or box node, dotted when they end at an interior
split node), graph sample points, marked edgelets, and a solved path.
World y points up; the document flips it so drawings match the plane.
"""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .diagram import VoronoiDiagram
from .geometry import Path, Scene

PATH_NODES = 64      # polyline nodes per path primitive
CURVE_NODES = 48     # polyline nodes per diagram edge
MARGIN_FRAC = 0.04   # whitespace around the bounding box
CANVAS = 900.0       # document width in px

STYLE = {
    "obstacle": 'fill="#4a4a4a" stroke="#111111" stroke-width="{w}"',
    "box": 'fill="none" stroke="#111111" stroke-width="{w}"',
    "voronoi": 'fill="none" stroke="#c05020" stroke-width="{w}" '
               'stroke-dasharray="{d2} {d1}"',
    "radial_solid": 'fill="none" stroke="#2a7a2a" stroke-width="{w}"',
    "radial_dotted": 'fill="none" stroke="#2050c0" stroke-width="{w}" '
                     'stroke-dasharray="{d1} {d1}"',
    "sample": 'fill="#7a2a7a" stroke="none"',
    "edgelet": 'fill="none" stroke="#c0a020" stroke-width="{W}" '
               'stroke-linecap="round" opacity="0.6"',
    "path": 'fill="none" stroke="#c01040" stroke-width="{W}" '
            'stroke-linecap="round"',
    "terminal": 'fill="#c01040" stroke="#111111" stroke-width="{w}"',
}

ALL_LAYERS = ("scene", "voronoi", "radials", "samples", "edgelets", "path")


class _Canvas:
    def __init__(self, box: Tuple[float, float, float, float]):
        xmin, ymin, xmax, ymax = box
        span = max(xmax - xmin, ymax - ymin)
        self.margin = MARGIN_FRAC * span
        self.scale = CANVAS / (xmax - xmin + 2 * self.margin)
        self.xmin = xmin - self.margin
        self.ymax = ymax + self.margin
        self.width = CANVAS
        self.height = (ymax - ymin + 2 * self.margin) * self.scale
        self.stroke = max(1.0, 0.0012 * CANVAS)
        self.elements: List[str] = []

    def map(self, p: Tuple[float, float]) -> Tuple[float, float]:
        return ((p[0] - self.xmin) * self.scale,
                (self.ymax - p[1]) * self.scale)

    def style(self, key: str, wide: float = 3.0) -> str:
        return STYLE[key].format(w=f"{self.stroke:.2f}",
                                 W=f"{wide * self.stroke:.2f}",
                                 d1=f"{2 * self.stroke:.2f}",
                                 d2=f"{5 * self.stroke:.2f}")

    def polyline(self, pts: Sequence[Tuple[float, float]], key: str,
                 wide: float = 3.0, closed: bool = False) -> None:
        mapped = [self.map(p) for p in pts]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in mapped)
        tag = "polygon" if closed else "polyline"
        self.elements.append(f'<{tag} points="{coords}" '
                             f'{self.style(key, wide)}/>')

    def dot(self, p: Tuple[float, float], key: str, r: float = 2.0) -> None:
        x, y = self.map(p)
        self.elements.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" '
                             f'r="{r * self.stroke:.2f}" '
                             f'{self.style(key)}/>')

    def document(self) -> str:
        body = "\n".join(f"  {el}" for el in self.elements)
        return ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{self.width:.0f}" height="{self.height:.0f}" '
                f'viewBox="0 0 {self.width:.2f} {self.height:.2f}">\n'
                f'{body}\n</svg>\n')


def _split_nodes(vd: VoronoiDiagram) -> set:
    """Nodes where exactly two pieces of one bisector meet: interior
    refinement splits, drawn dotted."""
    incident: Dict[int, List[Tuple[int, int]]] = {}
    for e in vd.edges:
        for n in (e.n0, e.n1):
            incident.setdefault(n, []).append(e.pair)
    return {n for n, pairs in incident.items()
            if len(pairs) == 2 and pairs[0] == pairs[1]}


def _curve_points(edge, n: int = CURVE_NODES) -> List[Tuple[float, float]]:
    ts = [edge.t0 + (edge.t1 - edge.t0) * k / (n - 1) for k in range(n)]
    pts = edge.curve.point_batch(ts)
    return [(float(x), float(y)) for x, y in pts]


def render_svg(scene: Scene,
               refined: Optional[VoronoiDiagram] = None,
               graph=None,
               path: Optional[Path] = None,
               edgelets: Optional[Iterable] = None,
               layers: Sequence[str] = ALL_LAYERS) -> str:
    """SVG document text with the requested layers."""
    cv = _Canvas(scene.bounding_box)
    on = set(layers)

    if "scene" in on:
        xmin, ymin, xmax, ymax = scene.bounding_box
        cv.polyline([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)],
                    "box", closed=True)
        for ring in scene.obstacles:
            if len(ring) == 1:
                cv.dot(ring[0], "obstacle", r=3.0)
            elif len(ring) == 2:
                cv.polyline(list(ring), "obstacle")
            else:
                cv.polyline(list(ring), "obstacle", closed=True)
        cv.dot(scene.source, "terminal", r=4.0)
        cv.dot(scene.target, "terminal", r=4.0)

    if refined is not None and "voronoi" in on:
        for e in refined.edges:
            cv.polyline(_curve_points(e), "voronoi")

    if refined is not None and "radials" in on:
        dotted = _split_nodes(refined)
        seen = set()
        for cell in refined.cells:
            for rad in (cell.alpha, cell.beta):
                key = (rad.outer_node, round(rad.inner[0], 9),
                       round(rad.inner[1], 9))
                if key in seen or rad.clearance <= 0.0:
                    continue
                seen.add(key)
                kind = ("radial_dotted" if rad.outer_node in dotted
                        else "radial_solid")
                cv.polyline([rad.inner, rad.outer_point], kind)

    if refined is not None and edgelets is not None and "edgelets" in on:
        for cell, els in edgelets:
            for el in els:
                if el.side == "kappa":
                    n = 24
                    ts = [el.lo + (el.hi - el.lo) * k / (n - 1)
                          for k in range(n)]
                    pts = cell.kappa.curve.point_batch(ts)
                    cv.polyline([(float(x), float(y)) for x, y in pts],
                                "edgelet", wide=4.0)
                else:
                    rad = cell.alpha if el.side == "alpha" else cell.beta
                    cv.polyline([rad.point_at_clearance(el.lo),
                                 rad.point_at_clearance(el.hi)],
                                "edgelet", wide=4.0)

    if graph is not None and "samples" in on:
        for v in graph.vertices:
            cv.dot(v.point, "sample", r=1.6)

    if path is not None and "path" in on:
        ts = [k / (PATH_NODES - 1) for k in range(PATH_NODES)]
        for prim in path.primitives:
            pts = prim.trace(ts)
            cv.polyline([(float(x), float(y)) for x, y in pts],
                        "path", wide=2.5)

    return cv.document()


def save_svg(text: str, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
