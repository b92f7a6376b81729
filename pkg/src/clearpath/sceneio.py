"""Scene and result files.

Scenes use a line-oriented text format, version-stamped and diffable:

    clearpath-scene 1
    box <xmin> <ymin> <xmax> <ymax>
    obstacle <x,y> <x,y> ...        # one line per ring, 1 vertex = point
    source <x> <y>
    target <x> <y>

Blank lines and `#` comments are ignored.  Exactly one box, source, and
target line must appear; obstacle lines may repeat.  Results serialize to
JSON with the solve cost, per-stage costs and graph sizes, and the path as
a list of primitive records.
"""

import json
import math
from typing import Dict, List, Sequence, Tuple

from .errors import SceneValidationError
from .geometry import Path, Point, Scene, make_scene
from .graphs import ApproximationOutcome

FORMAT_NAME = "clearpath-scene"
FORMAT_VERSION = 1


def _finite_floats(tokens: Sequence[str], lineno: int, what: str) -> List[float]:
    out = []
    for tok in tokens:
        try:
            v = float(tok)
        except ValueError:
            raise SceneValidationError(
                f"line {lineno}: {what}: not a number: {tok!r}")
        if not math.isfinite(v):
            raise SceneValidationError(
                f"line {lineno}: {what}: non-finite value {tok!r}")
        out.append(v)
    return out


def _parse_ring(tokens: Sequence[str], lineno: int) -> Tuple[Point, ...]:
    if not tokens:
        raise SceneValidationError(
            f"line {lineno}: obstacle: ring has no vertices")
    ring = []
    for tok in tokens:
        parts = tok.split(",")
        if len(parts) != 2:
            raise SceneValidationError(
                f"line {lineno}: obstacle: expected x,y pair, got {tok!r}")
        x, y = _finite_floats(parts, lineno, "obstacle vertex")
        ring.append((x, y))
    return tuple(ring)


def parse_scene(text: str) -> Scene:
    """Validated Scene from format text; errors carry line context."""
    header_seen = False
    box = source = target = None
    obstacles: List[Tuple[Point, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key, args = tokens[0], tokens[1:]
        if not header_seen:
            if key != FORMAT_NAME:
                raise SceneValidationError(
                    f"line {lineno}: expected header {FORMAT_NAME!r}, "
                    f"got {key!r}")
            if args != [str(FORMAT_VERSION)]:
                raise SceneValidationError(
                    f"line {lineno}: unsupported format version {args!r}")
            header_seen = True
            continue
        if key == "box":
            if box is not None:
                raise SceneValidationError(f"line {lineno}: duplicate box")
            if len(args) != 4:
                raise SceneValidationError(
                    f"line {lineno}: box needs 4 numbers")
            box = tuple(_finite_floats(args, lineno, "box"))
        elif key == "obstacle":
            obstacles.append(_parse_ring(args, lineno))
        elif key in ("source", "target"):
            if (source if key == "source" else target) is not None:
                raise SceneValidationError(f"line {lineno}: duplicate {key}")
            if len(args) != 2:
                raise SceneValidationError(
                    f"line {lineno}: {key} needs 2 numbers")
            x, y = _finite_floats(args, lineno, key)
            if key == "source":
                source = (x, y)
            else:
                target = (x, y)
        else:
            raise SceneValidationError(
                f"line {lineno}: unknown directive {key!r}")
    if not header_seen:
        raise SceneValidationError("empty document: missing header line")
    for name, val in (("box", box), ("source", source), ("target", target)):
        if val is None:
            raise SceneValidationError(f"missing {name} line")
    return make_scene(obstacles, box, source, target)


def serialize_scene(scene: Scene) -> str:
    """Format text that parses back to an identical Scene."""
    src, tgt = scene.source, scene.target
    if scene.swapped:
        src, tgt = tgt, src
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}",
             "box " + " ".join(repr(v) for v in scene.bounding_box)]
    for ring in scene.obstacles:
        lines.append("obstacle " +
                     " ".join(f"{repr(x)},{repr(y)}" for x, y in ring))
    lines.append(f"source {src[0]!r} {src[1]!r}")
    lines.append(f"target {tgt[0]!r} {tgt[1]!r}")
    return "\n".join(lines) + "\n"


def load_scene(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scene(fh.read())


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_scene(scene))


def path_record(path: Path) -> List[Dict]:
    out = []
    for prim in path.primitives:
        out.append({
            "kind": prim.kind,
            "feature": None if prim.feature is None else prim.feature.index,
            "start": list(prim.start),
            "end": list(prim.end),
            "params": list(prim.params),
            "cost": prim.cost,
        })
    return out


def result_record(outcome: ApproximationOutcome) -> Dict:
    stages = (outcome.stage1, outcome.stage2, outcome.stage3)
    return {
        "version": FORMAT_VERSION,
        "cost": outcome.result.cost,
        "epsilon": outcome.epsilon,
        "c_scale": outcome.c_scale,
        "stage_costs": [outcome.stage1.cost, outcome.stage2.cost,
                        outcome.result.cost],
        "winning_stage": outcome.result.stage,
        "path": path_record(outcome.result.path),
        "graph_stats": {
            f"stage{r.stage}": {"vertices": r.graph_vertices,
                                "edges": r.graph_edges,
                                "cost": r.cost,
                                "search_param": r.search_param}
            for r in stages
        },
        "timings": dict(outcome.timings),
    }


def save_result(outcome: ApproximationOutcome, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result_record(outcome), fh, indent=2)
        fh.write("\n")
