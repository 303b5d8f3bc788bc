"""Batch command-line front end.

Exit codes are a stable contract: 0 success, 1 processing failure (with a
machine-readable JSON error on stderr), 2 usage error. Derivative methods
reject --threshold before any pixel is read; threshold methods demand it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import documents, extraction, synth
from .core import Axis, ChannelPolicy, invert, load_image, save_image
from .errors import GridcraftError
from .gridding import (
    CellGrid,
    GridLines,
    Method,
    MethodKind,
    Template,
    grid_image,
    grid_pipeline,
    template_match,
)
from .profiles import derivative, export_profile_csv, stddev_profile, sum_profile

__all__ = ["main"]

_METHOD_NAMES = {kind.value: kind for kind in MethodKind}


def _default_jobs(args_jobs: int | None) -> int:
    if args_jobs is not None:
        return args_jobs
    env = os.environ.get("GRIDCRAFT_JOBS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _emit_error(exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return 1


# ---------------------------------------------------------------- grid ----

def _add_grid_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("grid", help="grid an image into subarrays and spot cells")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=sorted(_METHOD_NAMES))
    p.add_argument("--threshold", type=float, default=None,
                   help="range fraction in (0,1); required by sum/stddev, forbidden otherwise")
    p.add_argument("--smooth", type=int, default=1, metavar="W",
                   help="odd moving-average window for derivative methods (default 1 = off)")
    p.add_argument("--template", default=None, metavar="SPEC",
                   help="template spec file (key=value), required by --method template")
    p.add_argument("--out", required=True, help="grid document JSON path")
    p.add_argument("--cells", default=None, help="also write the cells CSV here")
    p.add_argument("--crop-dir", default=None, help="also write per-cell PNG crops here")
    p.add_argument("--invert", action="store_true", help="dark-spot scan: use max - I")
    p.add_argument("--scope", choices=("full", "subarrays"), default="full",
                   help="'subarrays' stops after the subarray split (debugging)")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker pool for per-subarray gridding (default: GRIDCRAFT_JOBS or CPUs)")
    p.set_defaults(func=cmd_grid)


def _validate_grid_args(args: argparse.Namespace, parser: argparse.ArgumentParser) -> MethodKind:
    kind = _METHOD_NAMES[args.method]
    if kind in (MethodKind.SUM_THRESHOLD, MethodKind.STDDEV_THRESHOLD):
        if args.threshold is None:
            parser.error(f"--method {args.method} requires --threshold")
        if not 0.0 < args.threshold < 1.0:
            parser.error("--threshold must lie strictly between 0 and 1")
    elif args.threshold is not None:
        parser.error(f"--method {args.method} does not take a threshold")
    if kind is MethodKind.TEMPLATE_MATCH and not args.template:
        parser.error("--method template requires --template SPEC")
    if args.smooth < 1 or args.smooth % 2 == 0:
        parser.error("--smooth must be an odd positive integer")
    if args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be >= 1")
    if args.scope == "subarrays" and (args.cells or args.crop_dir):
        parser.error("--cells/--crop-dir need a full run, not --scope subarrays")
    return kind


def cmd_grid(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    kind = _validate_grid_args(args, parser)
    jobs = _default_jobs(args.jobs)

    t0 = time.perf_counter()
    img = load_image(args.input, ChannelPolicy.LUMINANCE)
    if args.invert:
        img = invert(img)
    t_load = time.perf_counter()

    if kind is MethodKind.TEMPLATE_MATCH:
        try:
            template = Template.from_text(Path(args.template).read_text())
        except (OSError, ValueError) as exc:
            parser.error(f"bad template spec: {exc}")
        result = template_match(img, template)
        sub_grid = CellGrid(
            col_lines=GridLines(Axis.COLUMNS, (0, img.width)),
            row_lines=GridLines(Axis.ROWS, (0, img.height)),
        )
        spot_grids: list[list[CellGrid]] | None = [[result.grid]]
        method_desc = {
            "name": kind.value,
            "template": {
                "n_rows": template.n_rows, "n_cols": template.n_cols,
                "pitch_x": template.pitch_x, "pitch_y": template.pitch_y,
                "spot_radius": template.spot_radius, "margin": template.margin,
            },
            "offset": list(result.offset),
            "score": result.score,
        }
        t_sub = t_spots = time.perf_counter()
    else:
        method = Method(kind, args.threshold)
        method_desc = {
            "name": kind.value,
            "threshold_fraction": args.threshold,
            "smooth_window": args.smooth,
        }
        sub_grid = grid_image(img, method, args.smooth)
        t_sub = time.perf_counter()
        if args.scope == "subarrays":
            spot_grids = None
            t_spots = t_sub
        else:
            _, spot_grids = grid_pipeline(img, method, args.smooth, jobs=jobs,
                                          sub_grid=sub_grid)
            t_spots = time.perf_counter()

    outputs_start = time.perf_counter()
    if args.cells or args.crop_dir:
        cells = extraction.extract_all_cells(img, sub_grid, spot_grids)
        if args.cells:
            extraction.write_cells_csv(args.cells, img, cells)
        if args.crop_dir:
            extraction.write_crops(args.crop_dir, img, cells)
    t_outputs = time.perf_counter()

    timing = {
        "load": round((t_load - t0) * 1000, 3),
        "subarray_grid": round((t_sub - t_load) * 1000, 3),
        "spot_grids": round((t_spots - t_sub) * 1000, 3),
        "outputs": round((t_outputs - outputs_start) * 1000, 3),
    }
    doc = documents.build_document(args.input, img, method_desc, sub_grid, spot_grids, timing)
    Path(args.out).write_text(documents.dumps_document(doc))
    return 0


# ------------------------------------------------------------- profile ----

def _add_profile_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("profile", help="dump a projection profile as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", required=True, choices=("sum", "stddev"))
    p.add_argument("--axis", required=True, choices=("cols", "rows"))
    p.add_argument("--derivative", type=int, default=0, metavar="N",
                   help="difference the profile N times")
    p.add_argument("--out", required=True, help="CSV path (index,value)")
    p.add_argument("--invert", action="store_true")
    p.set_defaults(func=cmd_profile)


def cmd_profile(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.derivative < 0:
        parser.error("--derivative must be >= 0")
    img = load_image(args.input, ChannelPolicy.LUMINANCE)
    if args.invert:
        img = invert(img)
    axis = Axis.COLUMNS if args.axis == "cols" else Axis.ROWS
    profile = sum_profile(img, axis) if args.kind == "sum" else stddev_profile(img, axis)
    for _ in range(args.derivative):
        profile = derivative(profile)
    export_profile_csv(profile, args.out)
    return 0


# --------------------------------------------------------------- synth ----

def _add_synth_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("synth", help="generate a synthetic array plus ground truth")
    p.add_argument("--spec", default=None, help="key=value spec file")
    p.add_argument("--preset", choices=("fig3",), default=None,
                   help="built-in spec instead of --spec")
    p.add_argument("--out-image", required=True, help="16-bit grayscale PNG")
    p.add_argument("--out-truth", required=True, help="ground-truth grid JSON")
    p.add_argument("--out-centers", default=None, help="spot centers CSV")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.set_defaults(func=cmd_synth)


def cmd_synth(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if (args.spec is None) == (args.preset is None):
        parser.error("exactly one of --spec and --preset is required")
    if args.preset:
        spec = synth.fig3_like_spec()
    else:
        spec_path = Path(args.spec)
        if not spec_path.exists():
            parser.error(f"spec file not found: {spec_path}")
        try:
            spec = synth.SyntheticSpec.from_text(spec_path.read_text())
        except GridcraftError as exc:
            parser.error(str(exc))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)

    img, truth = synth.generate(spec)
    save_image(img, args.out_image, bit_depth=16)
    doc = documents.truth_document(truth, image_path=str(args.out_image))
    Path(args.out_truth).write_text(documents.dumps_document(doc))
    if args.out_centers:
        documents.write_centers_csv(args.out_centers, truth)
    return 0


# ---------------------------------------------------------------- eval ----

def _add_eval_parser(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("eval", help="score a found grid against ground truth")
    p.add_argument("--found", required=True, help="grid document JSON")
    p.add_argument("--truth", required=True, help="truth grid document JSON")
    p.add_argument("--tol", type=float, required=True, help="match tolerance, pixels")
    p.add_argument("--report", default=None, help="write the full report JSON here")
    p.add_argument("--input", default=None,
                   help="image path: adds a spots-per-cell histogram for the found grid")
    p.set_defaults(func=cmd_eval)


def _fmt_score(label: str, s: dict) -> str:
    return (f"  {label}: matched={s['matched_cuts']} missed={s['missed_cuts']} "
            f"spurious={s['spurious_cuts']} mean|off|={s['mean_abs_offset']:.3f}px "
            f"max|off|={s['max_abs_offset']:.3f}px")


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.tol < 0:
        parser.error("--tol must be >= 0")
    try:
        found = documents.load_document(args.found)
        truth = documents.load_document(args.truth)
        report = extraction.score_documents(found, truth, args.tol)
    except (OSError, ValueError, json.JSONDecodeError, GridcraftError) as exc:
        parser.error(f"cannot score: {exc}")

    if args.input:
        img = load_image(args.input, ChannelPolicy.LUMINANCE)
        sub_grid, spot_grids = documents.grids_from_document(found)
        if spot_grids is None:
            parser.error("--input histogram needs a full grid document, not subarray-only")
        try:
            cells = extraction.extract_all_cells(img, sub_grid, spot_grids)
        except GridcraftError as exc:
            parser.error(f"image does not match the found grid: {exc}")
        hist = extraction.spot_count_histogram(img, cells)
        report["spot_histogram"] = {str(k): hist[k] for k in sorted(hist)}

    print("subarray cuts:")
    print(_fmt_score("cols", report["subarrays"]["cols"]))
    print(_fmt_score("rows", report["subarrays"]["rows"]))
    spots = report.get("spots")
    if isinstance(spots, dict) and "cols" in spots:
        print("spot cuts (all subarrays):")
        print(_fmt_score("cols", spots["cols"]))
        print(_fmt_score("rows", spots["rows"]))
    elif isinstance(spots, dict):
        print(f"spot cuts: {spots.get('skipped', 'not scored')}")
    if "spot_histogram" in report:
        print(f"spots per cell: {report['spot_histogram']}")
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------- main ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridcraft",
        description="Automatic microarray gridding from projection profiles and templates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_grid_parser(sub)
    _add_profile_parser(sub)
    _add_synth_parser(sub)
    _add_eval_parser(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except GridcraftError as exc:
        return _emit_error(exc)
    except OSError as exc:
        return _emit_error(exc)


if __name__ == "__main__":
    sys.exit(main())
