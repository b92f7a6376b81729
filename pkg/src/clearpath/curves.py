"""Bisector curves between obstacle features.

Each curve is parameterized by a natural coordinate: signed arc length for
straight bisectors, directrix abscissa for parabolic ones.  Along any curve
the clearance (distance to either defining feature) has a closed form, and
so do the reciprocal-clearance cost between two parameters and the inverse
queries (parameter at a prescribed cost or clearance).  Clearance models
for straight bisectors:

  point   c(s) = sqrt(h^2 + (s - s0)^2)   between two vertices
  affine  c(s) = c0 + k * s, k != 0       crossing edge bisectors
  const   c(s) = c                        midline of facing parallel edges
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import PreconditionError

Point = Tuple[float, float]


@dataclass(frozen=True)
class LineBisector:
    base: Point
    direction: Point          # unit
    model: str                # "point" | "affine" | "const"
    p1: float                 # point: h      affine: c0   const: c
    p2: float = 0.0           # point: s0     affine: k

    def point_batch(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.stack([self.base[0] + ts * self.direction[0],
                         self.base[1] + ts * self.direction[1]], axis=1)

    def speed_batch(self, ts: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(ts, dtype=float))

    def clearance_batch(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.model == "point":
            return np.hypot(self.p1, ts - self.p2)
        if self.model == "affine":
            return self.p1 + self.p2 * ts
        return np.full_like(ts, self.p1)

    def clearance_at(self, t: float) -> float:
        return float(self.clearance_batch(np.asarray([t]))[0])

    def cost(self, t0: float, t1: float) -> float:
        if t1 < t0:
            t0, t1 = t1, t0
        if self.model == "point":
            return math.asinh((t1 - self.p2) / self.p1) - math.asinh((t0 - self.p2) / self.p1)
        if self.model == "affine":
            c0 = self.p1 + self.p2 * t0
            c1 = self.p1 + self.p2 * t1
            if c0 <= 0.0 or c1 <= 0.0:
                return math.inf
            return abs(math.log(c1 / c0) / self.p2)
        return (t1 - t0) / self.p1

    def param_at_cost(self, t_from: float, cost: float, sign: int) -> float:
        """Parameter reached from t_from after accumulating the given cost in
        the +param (sign=+1) or -param (sign=-1) direction."""
        if self.model == "point":
            u = math.asinh((t_from - self.p2) / self.p1) + sign * cost
            return self.p2 + self.p1 * math.sinh(u)
        if self.model == "affine":
            c_from = self.p1 + self.p2 * t_from
            if c_from <= 0.0:
                raise PreconditionError("cannot move at cost from zero clearance")
            c_to = c_from * math.exp(sign * self.p2 * cost)
            return (c_to - self.p1) / self.p2
        return t_from + sign * cost * self.p1

    def clearance_min_param(self) -> Optional[float]:
        return self.p2 if self.model == "point" else None

    def param_at_clearance(self, c: float, branch: int) -> float:
        """Parameter with clearance c; branch +1 takes the larger solution."""
        if self.model == "point":
            if c < self.p1:
                raise PreconditionError("clearance below the curve minimum")
            return self.p2 + branch * math.sqrt(max(c * c - self.p1 * self.p1, 0.0))
        if self.model == "affine":
            return (c - self.p1) / self.p2
        raise PreconditionError("constant-clearance bisector has no clearance inverse")

    def param_of_point(self, p: Point) -> float:
        return ((p[0] - self.base[0]) * self.direction[0]
                + (p[1] - self.base[1]) * self.direction[1])


@dataclass(frozen=True)
class ParabolaBisector:
    """Bisector of a vertex (focus) and an edge's supporting line (directrix).

    Frame: origin at the directrix base point, x along the directrix
    direction, y along the free-side normal.  The focus sits at (xf, h),
    h > 0; the curve is y(x) = ((x - xf)^2 + h^2) / (2 h) and the parameter
    is the frame abscissa x.
    """

    origin: Point
    xdir: Point
    ydir: Point
    xf: float
    h: float

    def _frame_y(self, xs: np.ndarray) -> np.ndarray:
        return ((xs - self.xf) ** 2 + self.h ** 2) / (2.0 * self.h)

    def point_batch(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        ys = self._frame_y(ts)
        return np.stack([
            self.origin[0] + ts * self.xdir[0] + ys * self.ydir[0],
            self.origin[1] + ts * self.xdir[1] + ys * self.ydir[1]], axis=1)

    def speed_batch(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.sqrt(1.0 + ((ts - self.xf) / self.h) ** 2)

    def clearance_batch(self, ts: np.ndarray) -> np.ndarray:
        return self._frame_y(np.asarray(ts, dtype=float))

    def clearance_at(self, t: float) -> float:
        return float(self._frame_y(np.asarray([float(t)]))[0])

    def cost(self, t0: float, t1: float) -> float:
        return 2.0 * abs(math.asinh((t1 - self.xf) / self.h)
                         - math.asinh((t0 - self.xf) / self.h))

    def param_at_cost(self, t_from: float, cost: float, sign: int) -> float:
        u = math.asinh((t_from - self.xf) / self.h) + sign * 0.5 * cost
        return self.xf + self.h * math.sinh(u)

    def clearance_min_param(self) -> Optional[float]:
        return self.xf

    def param_at_clearance(self, c: float, branch: int) -> float:
        if c < 0.5 * self.h:
            raise PreconditionError("clearance below the parabola apex")
        return self.xf + branch * math.sqrt(max(2.0 * self.h * c - self.h * self.h, 0.0))

    def param_of_point(self, p: Point) -> float:
        return ((p[0] - self.origin[0]) * self.xdir[0]
                + (p[1] - self.origin[1]) * self.xdir[1])
