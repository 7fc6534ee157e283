"""Command-line front end for the landing stack.

Subcommands cover the four workflows: single-image detection with
annotated artifacts, sequence tracking to CSV, reference-feature
capture, and the closed-loop landing simulation with trace and plot
output.

Exit codes are fixed so suites can be shell-scripted:
  0  success / landed
  1  unusable input (missing file, empty sequence, bad scenario)
  2  no detection
  3  simulation timeout
  4  simulation divergence
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import detect as detect_mod
from . import draw, imgproc, servo, sim
from . import track as track_mod
from .config import RunConfig, config_help_text, load_config, parse_config_text
from .errors import ConfigError, PadlandError

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_NO_DETECTION = 2
EXIT_TIMEOUT = 3
EXIT_DIVERGED = 4

_OUTCOME_CODES = {"landed": EXIT_OK, "timeout": EXIT_TIMEOUT,
                  "diverged": EXIT_DIVERGED}

_FRAME_SUFFIXES = (".pgm", ".png")


def _resolve_config(args, scenario: str | None = None) -> RunConfig:
    """Merge defaults <- --config file <- scenario file <- --set <- --seed."""
    cfg = load_config(args.config)
    if scenario is not None:
        text = Path(scenario).read_text(encoding="ascii")
        for key, value in parse_config_text(text).items():
            cfg.set(key, value)
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.set("sim.seed", args.seed)
    return cfg


def _intrinsics_for(cfg: RunConfig, img: np.ndarray) -> tuple[float, float, float, float]:
    """Config intrinsics with the principal point defaulting to the
    center of the actual image rather than the configured frame size."""
    h, w = img.shape[:2]
    fx = float(cfg["cam.fx"])
    fy = float(cfg["cam.fy"])
    cx = float(cfg["cam.cx"])
    cy = float(cfg["cam.cy"])
    if cx < 0:
        cx = (w - 1) / 2.0
    if cy < 0:
        cy = (h - 1) / 2.0
    return fx, fy, cx, cy


def _check_report_text(det: detect_mod.HelipadDetection) -> str:
    c, r = det.circle, det.checks
    lines = [
        f"circle_cx {float(c.cx)!r}",
        f"circle_cy {float(c.cy)!r}",
        f"circle_r {float(c.r)!r}",
        f"center_ratio {float(r.center_ratio)!r}",
        f"centroid_ratio {float(r.centroid_ratio)!r}",
        f"area_ratio {float(r.area_ratio)!r}",
        f"diagonals_ok {str(r.diagonals_ok).lower()}",
        f"centroid_ok {str(r.centroid_ok).lower()}",
        f"area_ok {str(r.area_ok).lower()}",
        f"ok {str(r.ok).lower()}",
    ]
    return "\n".join(lines) + "\n"


def _write_corners(path, pts: np.ndarray) -> None:
    """Golden corner file: 12 lines of `label u v`."""
    with open(path, "w", encoding="ascii") as fh:
        for k, (u, v) in enumerate(np.asarray(pts, dtype=np.float64)):
            fh.write(f"{k} {float(u)!r} {float(v)!r}\n")


def cmd_detect(args) -> int:
    cfg = _resolve_config(args)
    img = imgproc.read_image(args.image)
    det, why = detect_mod.detect_helipad_verbose(img, cfg)
    if det is None:
        print(f"no detection ({why})")
        return EXIT_NO_DETECTION
    prefix = args.out if args.out else str(Path(args.image).with_suffix(""))
    imgproc.write_ppm(prefix + "_annotated.ppm", draw.annotate_detection(img, det))
    with open(prefix + "_checks.txt", "w", encoding="ascii") as fh:
        fh.write(_check_report_text(det))
    _write_corners(prefix + "_corners.txt", det.corners_full)
    c = det.circle
    print(f"detection: circle ({c.cx:.1f}, {c.cy:.1f}) r={c.r:.1f}, "
          f"12 corners -> {prefix}_annotated.ppm")
    return EXIT_OK


def _list_frames(dirpath: str) -> list[Path]:
    d = Path(dirpath)
    if not d.is_dir():
        raise PadlandError(f"not a directory: {dirpath}")
    return sorted(p for p in d.iterdir()
                  if p.suffix.lower() in _FRAME_SUFFIXES)


def cmd_track(args) -> int:
    cfg = _resolve_config(args)
    frames = _list_frames(args.frames)
    if len(frames) < 2:
        print(f"error: need at least 2 frames, found {len(frames)} in "
              f"{args.frames}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out_csv = args.out if args.out else "track.csv"
    sup = track_mod.LandingSupervisor(cfg)
    amin = float(cfg["checks.area_min"])
    amax = float(cfg["checks.area_max"])
    n_ok = 0
    lines = ["frame,mode,bbox,area_ratio"]
    for path in frames:
        step = sup.step(imgproc.read_image(path))
        if step.bbox is not None:
            b = step.bbox
            bbox_s = f"{b.x0:.2f} {b.y0:.2f} {b.x1:.2f} {b.y1:.2f}"
        else:
            bbox_s = ""
        if step.detection is not None:
            ratio = step.detection.checks.area_ratio
        elif step.mask is not None:
            ratio = detect_mod.check_area(step.mask, amin, amax)[1]
        else:
            ratio = float("nan")
        n_ok += step.ok
        lines.append(f"{path.name},{step.mode},{bbox_s},{ratio:.6f}")
    with open(out_csv, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"tracked {n_ok}/{len(frames)} frames -> {out_csv}")
    return EXIT_OK


def cmd_capture_reference(args) -> int:
    cfg = _resolve_config(args)
    img = imgproc.read_image(args.image)
    det = detect_mod.detect_helipad(img, cfg)
    if det is None:
        print("no detection: reference not written")
        return EXIT_NO_DETECTION
    fx, fy, cx, cy = _intrinsics_for(cfg, img)
    s_star = servo.normalize_points(det.corners_full, fx, fy, cx, cy).ravel()
    out_path = args.out if args.out else "reference.txt"
    servo.save_reference(out_path, s_star)
    print(f"reference features -> {out_path}")
    return EXIT_OK


def _svg_polyline(pts: list[tuple[float, float]], color: str,
                  width: float = 1.5, dash: str | None = None) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" '
            f'stroke-width="{width}"{extra} points="{coords}"/>')


def error_plot_svg(times, errs, eps: float | None = None,
                   width: int = 640, height: int = 400) -> str:
    """Standalone SVG line plot of the feature error norm over time.

    Gaps (nan error on frames with no verified mark) break the line so
    missed stretches are visible rather than interpolated over.
    """
    ml, mr, mt, mb = 64, 16, 20, 44
    pw, ph = width - ml - mr, height - mt - mb
    finite = [(float(t), float(e)) for t, e in zip(times, errs)
              if math.isfinite(e)]
    tmax = max((t for t, _ in finite), default=1.0) or 1.0
    emax = max((e for _, e in finite), default=1.0) or 1.0
    if eps is not None:
        emax = max(emax, eps)
    emax *= 1.05

    def sx(t: float) -> float:
        return ml + pw * t / tmax

    def sy(e: float) -> float:
        return mt + ph * (1.0 - e / emax)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black" stroke-width="1"/>',
    ]
    n_ticks = 5
    for i in range(n_ticks + 1):
        tv = tmax * i / n_ticks
        x = sx(tv)
        parts.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" '
                     f'y2="{mt + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{mt + ph + 18}" font-size="11" '
                     f'text-anchor="middle" font-family="sans-serif">'
                     f'{tv:.1f}</text>')
        ev = emax * i / n_ticks
        y = sy(ev)
        parts.append(f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" '
                     f'y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.2f}" font-size="11" '
                     f'text-anchor="end" font-family="sans-serif">'
                     f'{ev:.3f}</text>')
    parts.append(f'<text x="{ml + pw / 2:.2f}" y="{height - 8}" '
                 'font-size="12" text-anchor="middle" '
                 'font-family="sans-serif">time [s]</text>')
    parts.append(f'<text x="14" y="{mt + ph / 2:.2f}" font-size="12" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'transform="rotate(-90 14 {mt + ph / 2:.2f})">'
                 'feature error norm</text>')
    if eps is not None:
        y = sy(eps)
        parts.append(_svg_polyline([(ml, y), (ml + pw, y)], "#888888",
                                   width=1.0, dash="4 3"))
    run: list[tuple[float, float]] = []
    for t, e in zip(times, errs):
        if math.isfinite(e):
            run.append((sx(float(t)), sy(float(e))))
        elif run:
            parts.append(_svg_polyline(run, "#1060c0"))
            run = []
    if run:
        parts.append(_svg_polyline(run, "#1060c0"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_sim(args) -> int:
    cfg = _resolve_config(args, scenario=args.scenario)
    trace = sim.run_closed_loop(cfg)
    prefix = args.out if args.out else "sim"
    csv_path = prefix + "_trace.csv"
    svg_path = prefix + "_error.svg"
    trace.to_csv(csv_path)
    times = [row.t for row in trace.rows]
    with open(svg_path, "w", encoding="ascii") as fh:
        fh.write(error_plot_svg(times, trace.err_norms, eps=trace.eps))
    fs = trace.final_state
    print(f"{trace.outcome}: {len(trace.rows)} steps, final pose "
          f"x={fs.x:.4f} y={fs.y:.4f} z={fs.z:.4f} yaw={fs.yaw:.4f} "
          f"-> {csv_path}, {svg_path}")
    return _OUTCOME_CODES[trace.outcome]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="config file with `key = value` lines")
    p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                   dest="overrides", help="override one config knob (repeatable)")
    p.add_argument("--seed", type=int, metavar="N",
                   help="shorthand for --set sim.seed=N")
    p.add_argument("--out", metavar="PREFIX",
                   help="output path or prefix (command-specific default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padland",
        description="Helipad detection, tracking and visual-servoing landing stack.")
    sub = parser.add_subparsers(dest="command", required=True)

    kwargs = dict(epilog=config_help_text(),
                  formatter_class=argparse.RawDescriptionHelpFormatter)

    p = sub.add_parser("detect", help="detect the pad in one image and "
                       "write annotated artifacts", **kwargs)
    p.add_argument("image", help="input image (PGM, or PNG with Pillow)")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("track", help="run the detect/track supervisor over "
                       "a frame directory", **kwargs)
    p.add_argument("frames", help="directory of frames, processed in name order")
    _add_common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("capture-reference", help="extract and save the "
                       "normalized reference features from an image", **kwargs)
    p.add_argument("image", help="reference view of the pad")
    _add_common(p)
    p.set_defaults(func=cmd_capture_reference)

    p = sub.add_parser("sim", help="run the closed-loop landing simulation",
                       **kwargs)
    p.add_argument("scenario", nargs="?",
                   help="scenario config file (defaults apply when omitted)")
    _add_common(p)
    p.set_defaults(func=cmd_sim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PadlandError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
