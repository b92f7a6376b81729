"""Shared fixtures: small scenes used across the test modules."""

import math
import random

import numpy as np
import pytest

from clearpath import make_scene
from clearpath.geometry import Scene, clearance


@pytest.fixture
def empty_scene() -> Scene:
    """No obstacles: clearance is the distance to the bounding-box walls."""
    return make_scene([], (0.0, 0.0, 100.0, 100.0), (10.0, 50.0), (90.0, 50.0))


@pytest.fixture
def point_scene() -> Scene:
    """Single point obstacle centered in a large box."""
    return make_scene([[(20.0, 20.0)]], (0.0, 0.0, 40.0, 40.0),
                      (21.0, 20.0), (25.0, 20.0))


@pytest.fixture
def square_scene() -> Scene:
    """Axis-aligned square in the middle of a box."""
    return make_scene([[(4.0, 4.0), (6.0, 4.0), (6.0, 6.0), (4.0, 6.0)]],
                      (0.0, 0.0, 10.0, 10.0), (2.0, 5.0), (8.0, 5.0))


@pytest.fixture
def two_triangle_scene() -> Scene:
    """Two triangles forming a corridor between source and target."""
    return make_scene(
        [[(3.0, 2.0), (5.0, 2.0), (4.0, 4.0)],
         [(3.0, 8.0), (5.0, 8.0), (4.0, 6.0)]],
        (0.0, 0.0, 10.0, 10.0), (1.0, 5.0), (9.0, 5.0))


def random_scene(seed: int):
    """Obstacle set and box for seeded robustness tests; some seeds produce
    intersecting obstacles that make_scene rejects, callers skip those."""
    rng = random.Random(seed)
    box = (0.0, 0.0, 100.0, 100.0)
    obstacles = []
    for _ in range(rng.randint(1, 4)):
        cx, cy = rng.uniform(20, 80), rng.uniform(20, 80)
        kind = rng.random()
        if kind < 0.3:
            obstacles.append([(cx, cy)])
        elif kind < 0.6:
            ang = rng.uniform(0, math.pi)
            span = rng.uniform(5, 15)
            obstacles.append([(cx - span * math.cos(ang), cy - span * math.sin(ang)),
                              (cx + span * math.cos(ang), cy + span * math.sin(ang))])
        else:
            k = rng.randint(3, 6)
            pts = []
            for i in range(k):
                a = 2 * math.pi * i / k + rng.uniform(-0.2, 0.2)
                r = rng.uniform(4, 10)
                pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
            obstacles.append(pts)
    return obstacles, box


def sample_free_point(scene: Scene, rng: random.Random, min_clearance: float):
    """Rejection-sample a free point with at least the given clearance."""
    xmin, ymin, xmax, ymax = scene.bounding_box
    for _ in range(10000):
        p = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        if clearance(scene, p).value >= min_clearance:
            return p
    raise AssertionError("could not sample a free point")


def polyline_cost_riemann(scene: Scene, pts: np.ndarray, n: int = 4000) -> float:
    """Crude midpoint-rule cost of a polyline; independent of the package
    quadrature, used to sanity-check it."""
    pts = np.asarray(pts, dtype=float)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        seg = np.linalg.norm(b - a)
        if seg == 0:
            continue
        ts = (np.arange(n) + 0.5) / n
        mid = a[None, :] + ts[:, None] * (b - a)[None, :]
        clr = scene.clearance_values(mid)
        assert np.all(clr > 0), "polyline leaves free space"
        total += float(np.sum(seg / n / clr))
    return total
