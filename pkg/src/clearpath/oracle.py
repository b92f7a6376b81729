"""Brute-force grid oracle for reciprocal-clearance shortest-path costs.

The oracle discretizes free space into a grid graph whose edge costs are
length times a three-sample trapezoidal mean of 1/clearance, then runs a
sparse-graph shortest-path search.  Grid node positions depend only on the
bounding box, so doubling the resolution keeps every existing node; the
result converges to the true minimal cost from above and is used as an
independent upper-bound reference everywhere a closed form or an
algorithmic stage needs validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sparse_dijkstra

from .diagram import RefinedCell
from .errors import PreconditionError
from .geometry import Point, Scene, _point_in_ring_batch

FLOOR_FRACTION = 1e-4    # default clearance floor: bbox diagonal times this
CONNECT_FACTOR = 1.75    # terminal connection radius in grid spacings
CHUNK = 200_000          # rows per batched clearance query


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: int = 512
    clearance_floor: Optional[float] = None
    sixteen_connected: bool = True
    restrict_to_cell: Optional[RefinedCell] = None

    def floor_for(self, diag: float) -> float:
        f = self.clearance_floor if self.clearance_floor is not None \
            else FLOOR_FRACTION * diag
        if self.grid_resolution < 16 or f <= 0.0:
            raise PreconditionError("resolution >= 16 and positive floor required")
        return f


_OFFSETS_8 = ((1, 0), (0, 1), (1, 1), (1, -1))
_OFFSETS_16 = _OFFSETS_8 + ((2, 1), (1, 2), (2, -1), (1, -2))


# ---------------------------------------------------------------------------
# cell-restricted geometry helpers


def _cell_frame_batch(cell: RefinedCell, pts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized frame coordinates (u, c) of points for one cell."""
    if cell.kind == "vertex":
        dx = pts[:, 0] - cell.origin[0]
        dy = pts[:, 1] - cell.origin[1]
        r = np.hypot(dx, dy)
        rel = cell.sweep_sign * (np.arctan2(dy, dx) - cell.theta_alpha_world)
        rel = np.mod(rel, 2.0 * math.pi)
        rel = np.where(rel > cell.theta_beta + 1e-6, rel - 2.0 * math.pi, rel)
        return rel, r
    dx = pts[:, 0] - cell.alpha.inner[0]
    dy = pts[:, 1] - cell.alpha.inner[1]
    return (dx * cell.x_dir[0] + dy * cell.x_dir[1],
            dx * cell.normal[0] + dy * cell.normal[1])


def _cell_kappa_clearance(cell: RefinedCell, u: np.ndarray) -> np.ndarray:
    if cell.kind == "vertex":
        if cell.case == "line":
            return cell.case_h / np.cos(u - cell.case_phi)
        return cell.case_h / (1.0 + np.cos(u - cell.case_phi))
    if cell.case == "line":
        return cell.line_y0 + cell.line_slope * u
    return ((u - cell.par_xf) ** 2 + cell.par_h ** 2) / (2.0 * cell.par_h)


def _cell_membership(cell: RefinedCell, pts: np.ndarray, slack: float) -> np.ndarray:
    u, c = _cell_frame_batch(cell, pts)
    width = cell.theta_beta if cell.kind == "vertex" else cell.x_beta
    uslack = slack / max(cell.clr_beta, slack) if cell.kind == "vertex" else slack
    lim = _cell_kappa_clearance(cell, np.clip(u, 0.0, width))
    return ((u >= -uslack) & (u <= width + uslack)
            & (c > 0.0) & (c <= lim + slack))


def _cell_bbox(cell: RefinedCell) -> Tuple[float, float, float, float]:
    width = cell.theta_beta if cell.kind == "vertex" else cell.x_beta
    us = np.linspace(0.0, width, 33)
    cs = _cell_kappa_clearance(cell, us)
    pts = [cell.alpha.inner, cell.beta.inner]
    for u, c in zip(us, cs):
        pts.append(cell.point_of_frame(float(u), float(c)))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    pad = 1e-6 * max(max(xs) - min(xs), max(ys) - min(ys), 1e-300)
    return (min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)


# ---------------------------------------------------------------------------
# obstacle tests


def _segments_cross_batch(a: np.ndarray, b: np.ndarray,
                          c: Point, d: Point) -> np.ndarray:
    """Which segments a[i]-b[i] properly cross segment c-d.  Touching at a
    shared point does not count; the grid keeps its nodes strictly inside
    free space, so near-tangent contacts are already cost-penalized."""
    def orient(px, py, qx, qy, rx, ry):
        return (qx - px) * (ry - py) - (qy - py) * (rx - px)

    o1 = orient(c[0], c[1], d[0], d[1], a[:, 0], a[:, 1])
    o2 = orient(c[0], c[1], d[0], d[1], b[:, 0], b[:, 1])
    o3 = orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1],
                np.full(len(a), c[0]), np.full(len(a), c[1]))
    o4 = orient(a[:, 0], a[:, 1], b[:, 0], b[:, 1],
                np.full(len(a), d[0]), np.full(len(a), d[1]))
    return (o1 * o2 < 0.0) & (o3 * o4 < 0.0)


def _ring_segments(scene: Scene) -> List[Tuple[Point, Point]]:
    segs = []
    for ring in scene.obstacles:
        k = len(ring)
        if k == 1:
            continue
        for i in range(k if k >= 3 else 1):
            segs.append((ring[i], ring[(i + 1) % k]))
    return segs


# ---------------------------------------------------------------------------
# grid graph


class _GridGraph:
    """Shared grid machinery for the free-space and in-cell oracles."""

    def __init__(self, scene: Scene, config: OracleConfig):
        self.scene = scene
        self.config = config
        self.cell = config.restrict_to_cell
        box = scene.bounding_box if self.cell is None else _cell_bbox(self.cell)
        xmin, ymin, xmax, ymax = box
        self.floor = config.floor_for(math.hypot(xmax - xmin, ymax - ymin))
        R = config.grid_resolution
        self.h = max(xmax - xmin, ymax - ymin) / R
        nx = int(math.floor((xmax - xmin) / self.h + 1e-9)) + 1
        ny = int(math.floor((ymax - ymin) / self.h + 1e-9)) + 1
        gx, gy = np.meshgrid(xmin + self.h * np.arange(nx),
                             ymin + self.h * np.arange(ny), indexing="ij")
        self.pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        self.nx, self.ny = nx, ny
        clr = self._clearance(self.pts)
        self.free = self._free_mask(self.pts, clr)
        self.inv_clr = np.where(clr > 0, 1.0 / np.maximum(clr, 1e-300), np.inf)
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.costs: List[float] = []
        self.extra_pts: List[Point] = []
        self._segs = _ring_segments(scene) if self.cell is None else []
        self._grid_edges()

    def _clearance(self, pts: np.ndarray) -> np.ndarray:
        if self.cell is not None:
            f = self.scene.features[self.cell.feature_index]
            fn = f.distance_batch
        else:
            fn = self.scene.clearance_values
        if len(pts) <= CHUNK:
            return fn(pts)
        return np.concatenate([fn(pts[i:i + CHUNK])
                               for i in range(0, len(pts), CHUNK)])

    def _free_mask(self, pts: np.ndarray, clr: np.ndarray) -> np.ndarray:
        free = clr >= self.floor
        if self.cell is not None:
            return free & _cell_membership(self.cell, pts, 1e-7 * self.h)
        for ring in self.scene.obstacles:
            if len(ring) < 3:
                continue
            for i in range(0, len(pts), CHUNK):
                sl = slice(i, i + CHUNK)
                free[sl] &= ~_point_in_ring_batch(ring, pts[sl])
        return free

    def _filter_edges(self, a: np.ndarray, b: np.ndarray
                      ) -> Tuple[np.ndarray, np.ndarray]:
        """Keep edges whose interiors stay in free space; returns the mask
        and the midpoint clearances of the kept edges."""
        mid = 0.5 * (a + b)
        if self.cell is not None:
            ok = np.ones(len(a), dtype=bool)
            for frac in (0.25, 0.5, 0.75):
                s = a + frac * (b - a)
                ok &= _cell_membership(self.cell, s, 1e-7 * self.h)
            clr_m = np.zeros(len(a))
            if ok.any():
                clr_m[ok] = self._clearance(mid[ok])
            ok &= clr_m >= self.floor
            return ok, clr_m
        clr_m = self._clearance(mid)
        ok = self._free_mask(mid, clr_m)
        if ok.any() and self._segs:
            # an edge crossing an obstacle has a midpoint within half its
            # length of the crossed boundary, so only near edges need the
            # exact segment test
            idx = np.flatnonzero(ok)
            lengths = np.hypot(b[idx, 0] - a[idx, 0], b[idx, 1] - a[idx, 1])
            check = idx[clr_m[idx] <= lengths]
            if len(check):
                cross = np.zeros(len(check), dtype=bool)
                for c, d in self._segs:
                    cross |= _segments_cross_batch(a[check], b[check], c, d)
                ok[check[cross]] = False
        return ok, clr_m

    def _append_edges(self, src: np.ndarray, dst_or_node, a: np.ndarray,
                      b: np.ndarray, fa: np.ndarray, fb: np.ndarray,
                      clr_m: np.ndarray) -> None:
        length = np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])
        cost = length * (fa + 2.0 / clr_m + fb) * 0.25
        self.rows.extend(np.asarray(src).ravel().tolist()
                         if np.ndim(src) else [src] * len(cost))
        self.cols.extend(np.asarray(dst_or_node).ravel().tolist())
        self.costs.extend(cost.tolist())

    def _grid_edges(self) -> None:
        offsets = _OFFSETS_16 if self.config.sixteen_connected else _OFFSETS_8
        index = np.arange(self.nx * self.ny).reshape(self.nx, self.ny)
        for di, dj in offsets:
            i0, i1 = max(0, -di), self.nx - max(0, di)
            j0, j1 = max(0, -dj), self.ny - max(0, dj)
            if i1 <= i0 or j1 <= j0:
                continue
            src = index[i0:i1, j0:j1].ravel()
            dst = index[i0 + di:i1 + di, j0 + dj:j1 + dj].ravel()
            keep = self.free[src] & self.free[dst]
            src, dst = src[keep], dst[keep]
            if not len(src):
                continue
            a, b = self.pts[src], self.pts[dst]
            ok, clr_m = self._filter_edges(a, b)
            src, dst = src[ok], dst[ok]
            if not len(src):
                continue
            self._append_edges(src, dst, a[ok], b[ok], self.inv_clr[src],
                               self.inv_clr[dst], clr_m[ok])

    def add_terminal(self, p: Point) -> int:
        pt = np.asarray([p], dtype=float)
        clr_p = self._clearance(pt)
        if clr_p[0] < self.floor:
            raise PreconditionError(f"terminal {p} below the clearance floor")
        if not self._free_mask(pt, clr_p)[0]:
            raise PreconditionError(f"terminal {p} outside the search region")
        node = len(self.pts) + len(self.extra_pts)
        self.extra_pts.append(p)
        d = np.hypot(self.pts[:, 0] - p[0], self.pts[:, 1] - p[1])
        d[~self.free] = np.inf
        near = np.flatnonzero(d <= CONNECT_FACTOR * self.h * math.sqrt(2.0))
        if not len(near):
            near = np.asarray([int(np.argmin(d))])
        a = np.repeat(pt, len(near), axis=0)
        b = self.pts[near]
        ok, clr_m = self._filter_edges(a, b)
        near = near[ok]
        if not len(near):
            raise PreconditionError(f"terminal {p} cannot reach the grid")
        fa = np.full(len(near), 1.0 / clr_p[0])
        self._append_edges(node, near, a[ok], b[ok], fa,
                           self.inv_clr[near], clr_m[ok])
        return node

    def shortest(self, src: int, dst: int) -> float:
        n = len(self.pts) + len(self.extra_pts)
        mat = csr_matrix((self.costs, (self.rows, self.cols)), shape=(n, n))
        dist = _sparse_dijkstra(mat, directed=False, indices=src)
        return float(dist[dst])

    def shortest_with_path(self, src: int, dst: int
                           ) -> Tuple[float, List[Point]]:
        n = len(self.pts) + len(self.extra_pts)
        mat = csr_matrix((self.costs, (self.rows, self.cols)), shape=(n, n))
        dist, pred = _sparse_dijkstra(mat, directed=False, indices=src,
                                      return_predecessors=True)
        if not math.isfinite(dist[dst]):
            return float(dist[dst]), []
        order = [dst]
        while order[-1] != src:
            order.append(int(pred[order[-1]]))
        pts: List[Point] = []
        for idx in reversed(order):
            if idx < len(self.pts):
                pts.append((float(self.pts[idx, 0]), float(self.pts[idx, 1])))
            else:
                pts.append(self.extra_pts[idx - len(self.pts)])
        return float(dist[dst]), pts


def grid_oracle(scene: Scene, p: Point, q: Point,
                config: OracleConfig = OracleConfig()) -> float:
    """Upper bound on the minimal reciprocal-clearance cost from p to q."""
    g = _GridGraph(scene, config)
    return g.shortest(g.add_terminal(p), g.add_terminal(q))


def grid_oracle_path(scene: Scene, p: Point, q: Point,
                     config: OracleConfig = OracleConfig()
                     ) -> Tuple[float, List[Point]]:
    """Oracle cost together with the grid polyline that achieves it."""
    g = _GridGraph(scene, config)
    return g.shortest_with_path(g.add_terminal(p), g.add_terminal(q))


def cell_oracle(cell: RefinedCell, scene: Scene, p: Point, q: Point,
                config: Optional[OracleConfig] = None) -> float:
    """Upper bound on the minimal cost between p and q for paths confined
    to one refined cell, costed against the cell's own feature."""
    if config is None:
        config = OracleConfig(grid_resolution=96)
    cfg = OracleConfig(config.grid_resolution, config.clearance_floor,
                       config.sixteen_connected, cell)
    return grid_oracle(scene, p, q, cfg)
