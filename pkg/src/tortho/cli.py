"""Command-line front end.

Subcommands mirror the pipeline stages: ``align``, ``partition``,
``render``, ``eval`` and ``info``. Exit codes: 0 success, 1 usage,
2 data or format problem, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .alignment import RigidTransform, apply_transform, manhattan_align
from .errors import (
    AlignmentError,
    ArgumentError,
    ConfigError,
    DegenerateFitError,
    FormatError,
    NumericError,
    PlanningError,
    TorthoError,
)
from .evaluation import edge_quality, psnr, ratio_errors, ssim
from .formats import RunConfig, read_config, read_field, read_sfm, write_field, write_raster
from .formats.raster_io import read_image
from .partition import plan_partition
from .tdom import camera_centroid, grid_from_field, render_tdom

log = logging.getLogger("tortho")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _setup_logging():
    level = os.environ.get("TORTHO_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _load_transform(path):
    if not path:
        return None
    with open(path, encoding="utf-8") as fh:
        try:
            return RigidTransform.from_dict(json.load(fh))
        except (KeyError, ValueError, TypeError, AlignmentError) as exc:
            raise FormatError(f"{path}: bad transform file ({exc})") from None


def _write_text(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _parse_grid(s):
    try:
        m, n = (int(v) for v in s.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid expects MxN, got {s!r}") from None
    return m, n


# -- subcommands ------------------------------------------------------------


def cmd_align(args):
    model = read_sfm(args.sfm)
    pts = model.xyz if len(model.xyz) >= 3 else model.camera_centers
    T = manhattan_align(pts, model.camera_centers, model.optical_axes)
    _write_text(json.dumps(T.to_dict(), indent=2) + "\n", args.out_transform)
    log.info("alignment rotation det=%.12f", float(np.linalg.det(T.rotation)))
    if args.field:
        if not args.out_field:
            raise UsageError("--field requires --out-field")
        write_field(apply_transform(read_field(args.field), T), args.out_field)
    return EXIT_OK


def cmd_partition(args):
    cfg = read_config(args.config) if args.config else RunConfig()
    m, n = _parse_grid(args.grid) if args.grid else (cfg.partition_m, cfg.partition_n)
    model = read_sfm(args.sfm)
    T = _load_transform(args.transform)
    if T is not None:
        model = model.transformed(T)
    ratio = cfg.expand_ratio if args.expand is None else args.expand
    thr = cfg.visibility_threshold if args.threshold is None else args.threshold
    try:
        plan = plan_partition(model.cameras, model.point_ids, model.xyz, model.tracks, m, n, ratio, thr)
    except ArgumentError as exc:
        raise PlanningError(str(exc)) from None
    _write_text(plan.dumps(), args.out)
    return EXIT_OK


def cmd_render(args):
    cfg = read_config(args.config) if args.config else RunConfig()
    cfg = cfg.updated(
        sx=args.sx,
        sy=args.sy,
        width=args.width,
        height=args.height,
        background=args.background,
        sh_degree=args.sh_degree,
        threads=args.threads,
        use_fagk=False if args.no_fagk else None,
    )
    if cfg.sx is None or cfg.sy is None:
        raise UsageError("render needs --sx and --sy (or a config that sets them)")
    field = read_field(args.field)
    if field.count == 0 and cfg.width is None:
        raise FormatError("empty field: give --width/--height explicitly")
    if args.center:
        centroid = tuple(args.center)
    elif args.sfm:
        model = read_sfm(args.sfm)
        T = _load_transform(args.transform)
        if T is not None:
            model = model.transformed(T)
        centroid = camera_centroid(model.camera_centers)
    else:
        lo, hi = field.bounds
        centroid = (float(0.5 * (lo[0] + hi[0])), float(0.5 * (lo[1] + hi[1])))
    bounds = field.bounds if field.count else (np.zeros(3), np.zeros(3))
    grid = grid_from_field(bounds, centroid, cfg.sx, cfg.sy, cfg.width, cfg.height)
    result = render_tdom(field, grid, cfg.background, cfg.render_options())
    img, wf = write_raster(result.raster, grid, args.out)
    log.info("wrote %s and %s (%dx%d)", img, wf, grid.width, grid.height)
    return EXIT_OK


def _read_pairs(path):
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for need in ("ratio_ours", "ratio_ref"):
            if need not in cols:
                raise FormatError(f"{path}: missing column {need!r}")
        for k, row in enumerate(reader, start=2):
            try:
                pair = (float(row["ratio_ours"]), float(row["ratio_ref"]))
            except (TypeError, ValueError):
                raise FormatError(f"{path}:{k}: non-numeric ratio") from None
            groups.setdefault(row.get("reference") or "reference", []).append((row.get("id") or "", pair))
    return groups


def cmd_eval_ratios(args):
    groups = _read_pairs(args.pairs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["reference", "id", "ratio_ours", "ratio_ref", "abs_err", "rel_err_percent"])
    summaries = {}
    for name, rows in groups.items():
        s = ratio_errors([p for _, p in rows])
        summaries[name] = s
        for (rid, _), r in zip(rows, s.records):
            w.writerow([name, rid, f"{r.ratio_ours:.6f}", f"{r.ratio_ref:.6f}", f"{r.abs_err:.6f}", f"{r.rel_err_percent:.5f}"])
        w.writerow([name, "mean", "", "", f"{s.mean_abs:.6f}", f"{s.mean_rel_percent:.5f}"])
    _write_text(buf.getvalue(), args.out)
    if args.figure:
        from .plotting import ratio_figure

        ratio_figure(summaries, args.figure)
    return EXIT_OK


def cmd_eval_edges(args):
    cfg = read_config(args.config) if args.config else RunConfig()
    image = read_image(args.tdom)
    roi = args.roi or (0, 0, image.shape[1], image.shape[0])
    high = args.high if args.high is not None else cfg.canny_high
    report = edge_quality(image, roi, high, k=cfg.line_k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line", "n_points", "n_inliers", "inlier_fraction", "rms_px", "angle_deg"])
    for row in report.rows():
        w.writerow([row["line"], row["n_points"], row["n_inliers"], f"{row['inlier_fraction']:.4f}",
                    f"{row['rms_px']:.4f}", f"{row['angle_deg']:.3f}"])
    _write_text(buf.getvalue(), args.out)
    if args.figure:
        from .evaluation import to_gray
        from .plotting import edge_figure

        edge_figure(to_gray(image), report, args.figure)
    return EXIT_OK


def cmd_eval_compare(args):
    a, b = read_image(args.a), read_image(args.b)
    if a.shape != b.shape:
        raise FormatError(f"image sizes differ: {a.shape} vs {b.shape}")
    _write_text(f"metric,value\npsnr_db,{psnr(a, b):.6f}\nssim,{ssim(a, b):.6f}\n", args.out)
    return EXIT_OK


def cmd_info(args):
    lines = []
    if args.field:
        f = read_field(args.field)
        lines.append(f"field: {args.field}")
        lines.append(f"  gaussians: {f.count}")
        lines.append(f"  fagk: {'yes' if f.fagk_enabled else 'no'}")
        if f.count:
            lo, hi = f.bounds
            lines.append("  bounds min: " + " ".join(f"{v:.6g}" for v in lo))
            lines.append("  bounds max: " + " ".join(f"{v:.6g}" for v in hi))
    if args.sfm:
        m = read_sfm(args.sfm)
        lines.append(f"sfm: {args.sfm}")
        lines.append(f"  images: {len(m.cameras)}")
        lines.append(f"  points: {len(m.xyz)}")
        if m.cameras:
            cx, cy = camera_centroid(m.camera_centers)
            lines.append(f"  camera centroid: {cx:.6f} {cy:.6f}")
    if not lines:
        raise UsageError("info needs --field and/or --sfm")
    _write_text("\n".join(lines) + "\n", None)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="tortho", description="True orthophotos from Gaussian fields.")
    p.add_argument("--version", action="version", version=f"tortho {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("align", help="Manhattan-align a reconstruction")
    a.add_argument("--sfm", required=True)
    a.add_argument("--field")
    a.add_argument("--out-transform", required=True)
    a.add_argument("--out-field")
    a.set_defaults(func=cmd_align)

    pt = sub.add_parser("partition", help="plan a divide-and-conquer split")
    pt.add_argument("--sfm", required=True)
    pt.add_argument("--grid", help="MxN, e.g. 2x2")
    pt.add_argument("--expand", type=float)
    pt.add_argument("--threshold", type=float)
    pt.add_argument("--transform")
    pt.add_argument("--config")
    pt.add_argument("--out")
    pt.set_defaults(func=cmd_partition)

    r = sub.add_parser("render", help="render a TDOM and its world file")
    r.add_argument("--field", required=True)
    r.add_argument("--sx", type=float)
    r.add_argument("--sy", type=float)
    r.add_argument("--out", required=True)
    r.add_argument("--sfm", help="use the camera centroid of this model as the TDOM centre")
    r.add_argument("--transform", help="alignment transform applied to --sfm cameras")
    r.add_argument("--center", type=float, nargs=2, metavar=("X", "Y"))
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--background", type=float, nargs=3, metavar=("R", "G", "B"))
    r.add_argument("--sh-degree", type=int)
    r.add_argument("--no-fagk", action="store_true")
    r.add_argument("--threads", type=int)
    r.add_argument("--config")
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("eval", help="quality reports")
    esub = e.add_subparsers(dest="mode", parser_class=_Parser)
    er = esub.add_parser("ratios", help="length-ratio precision table")
    er.add_argument("--pairs", required=True, help="CSV with ratio_ours, ratio_ref[, id, reference]")
    er.add_argument("--out")
    er.add_argument("--figure")
    er.set_defaults(func=cmd_eval_ratios)
    ee = esub.add_parser("edges", help="Canny + iterative line-fit statistics")
    ee.add_argument("--tdom", required=True)
    ee.add_argument("--roi", type=int, nargs=4, metavar=("X0", "Y0", "X1", "Y1"))
    ee.add_argument("--high", type=float)
    ee.add_argument("--config")
    ee.add_argument("--out")
    ee.add_argument("--figure")
    ee.set_defaults(func=cmd_eval_edges)
    ec = esub.add_parser("compare", help="PSNR and SSIM between two images")
    ec.add_argument("--a", required=True)
    ec.add_argument("--b", required=True)
    ec.add_argument("--out")
    ec.set_defaults(func=cmd_eval_compare)

    i = sub.add_parser("info", help="summarise a field and/or an SfM model")
    i.add_argument("--field")
    i.add_argument("--sfm")
    i.set_defaults(func=cmd_info)
    return p


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required (align, partition, render, eval, info)")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AlignmentError, NumericError, DegenerateFitError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ConfigError, PlanningError, TorthoError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
