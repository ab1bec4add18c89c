"""plotkit CLI: render figure panels from a result directory."""

from __future__ import annotations

import argparse
import sys

from . import frames, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="render privacy-accuracy figures from result CSVs")
    parser.add_argument("--results", required=True, help="directory with results.csv")
    parser.add_argument("--out", required=True, help="output directory for SVG panels")
    parser.add_argument("--panels", default=",".join(render.PANELS),
                        help="comma list from: " + ",".join(render.PANELS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    panels = [p.strip() for p in args.panels.split(",") if p.strip()]
    try:
        frame = frames.load_results(args.results)
        written = render.render_figures(frame, args.out, panels)
    except (frames.SchemaError, render.RenderError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
