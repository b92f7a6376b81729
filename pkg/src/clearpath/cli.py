"""Command-line interface.

Subcommands: solve (staged approximation), oracle (dense-grid reference
cost), diagram (SVG dump of the refined diagram), check (solve vs oracle
with a pass/fail verdict).  Exit codes: 0 success, 1 failed check,
2 scene or argument validation, 3 unreachable target, 4 internal error.
"""

import argparse
import json
import sys
from typing import List, Optional

from .diagram import build_diagram
from .errors import (ClearpathError, InternalError, PreconditionError,
                     SceneValidationError, UnreachableTargetError)
from .graphs import DEFAULT_C_SCALE, Planner
from .oracle import OracleConfig, grid_oracle
from .render import render_svg, save_svg
from .sceneio import load_scene, result_record, save_result


def _epsilon(text: str) -> float:
    val = float(text)
    if not 0.0 < val <= 1.0:
        raise argparse.ArgumentTypeError("epsilon must be in (0, 1]")
    return val


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="clearpath",
        description="Approximate minimal-cost paths under the "
                    "reciprocal-clearance length metric.")
    sub = ap.add_subparsers(dest="command", required=True)

    sv = sub.add_parser("solve", help="run the staged approximation")
    sv.add_argument("scene", help="scene file")
    sv.add_argument("--epsilon", type=_epsilon, required=True,
                    help="approximation parameter in (0, 1]")
    sv.add_argument("--stage", type=int, choices=(1, 2, 3), default=3,
                    help="stop after this stage (default: run all)")
    sv.add_argument("--json", metavar="OUT", help="write the result record")
    sv.add_argument("--svg", metavar="OUT", help="render scene and path")
    sv.add_argument("--c-scale", type=float, default=DEFAULT_C_SCALE,
                    help="extra tightening of the sampling parameter (>= 1)")
    sv.add_argument("--seedless", action="store_true",
                    help="no-op; runs are always deterministic")

    orc = sub.add_parser("oracle", help="dense-grid reference cost")
    orc.add_argument("scene", help="scene file")
    orc.add_argument("--resolution", type=int, default=512,
                     help="grid nodes along the long box side")
    orc.add_argument("--json", metavar="OUT", help="write cost record")

    dg = sub.add_parser("diagram", help="render the refined diagram")
    dg.add_argument("scene", help="scene file")
    dg.add_argument("--svg", metavar="OUT", help="output file (default"
                    " stdout)")

    ck = sub.add_parser("check", help="solve, then compare to the oracle")
    ck.add_argument("scene", help="scene file")
    ck.add_argument("--epsilon", type=_epsilon, required=True)
    ck.add_argument("--resolution", type=int, default=512)
    return ap


def cmd_solve(args) -> int:
    scene = load_scene(args.scene)
    planner = Planner(scene)
    if args.stage == 1:
        r = planner.run_stage1()
        print(f"stage1 {r.cost:.12g}")
        return 0
    if args.stage == 2:
        r1 = planner.run_stage1()
        r2 = planner.run_stage2()
        print(f"stage1 {r1.cost:.12g}")
        print(f"stage2 {r2.cost:.12g}")
        return 0
    out = planner.solve(args.epsilon, args.c_scale)
    print(f"stage1 {out.stage1.cost:.12g}")
    print(f"stage2 {out.stage2.cost:.12g}")
    print(f"stage3 {out.stage3.cost:.12g}")
    print(f"cost {out.result.cost:.12g}")
    if args.json:
        save_result(out, args.json)
    if args.svg:
        vd = planner.vd
        save_svg(render_svg(scene, refined=vd, path=out.result.path,
                            layers=("scene", "voronoi", "radials", "path")),
                 args.svg)
    return 0


def cmd_oracle(args) -> int:
    scene = load_scene(args.scene)
    if args.resolution < 8:
        raise PreconditionError("resolution must be at least 8")
    cfg = OracleConfig(grid_resolution=args.resolution)
    src, tgt = scene.source, scene.target
    if scene.swapped:
        src, tgt = tgt, src
    cost = grid_oracle(scene, src, tgt, cfg)
    print(f"oracle {cost:.12g}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"cost": cost, "resolution": args.resolution}, fh,
                      indent=2)
            fh.write("\n")
    return 0


def cmd_diagram(args) -> int:
    scene = load_scene(args.scene)
    vd = build_diagram(scene)
    doc = render_svg(scene, refined=vd,
                     layers=("scene", "voronoi", "radials"))
    if args.svg:
        save_svg(doc, args.svg)
        print(f"diagram {len(vd.cells)} cells, {len(vd.edges)} edges "
              f"-> {args.svg}")
    else:
        sys.stdout.write(doc)
    return 0


def cmd_check(args) -> int:
    scene = load_scene(args.scene)
    out = Planner(scene).solve(args.epsilon)
    cfg = OracleConfig(grid_resolution=args.resolution)
    src, tgt = scene.source, scene.target
    if scene.swapped:
        src, tgt = tgt, src
    reference = grid_oracle(scene, src, tgt, cfg)
    ratio = out.result.cost / reference if reference > 0 else float("inf")
    bound = (1.0 + args.epsilon) * 1.05
    verdict = "pass" if ratio <= bound else "FAIL"
    print(f"cost {out.result.cost:.12g}")
    print(f"oracle {reference:.12g}")
    print(f"ratio {ratio:.6f} bound {bound:.6f} {verdict}")
    return 0 if verdict == "pass" else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "oracle": cmd_oracle,
                "diagram": cmd_diagram, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except (SceneValidationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnreachableTargetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InternalError, ClearpathError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
