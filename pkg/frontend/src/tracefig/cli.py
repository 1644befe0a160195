"""Command line figure emitter.

Exit codes: 0 ok, 1 usage error, 2 malformed input data.
"""

import argparse
import sys

from .render import CsvFormatError, PlotSpec, render_errorbars

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="tracefig")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot", help="error-bar curves from aggregate CSVs")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--label", action="append", required=True, metavar="NAME=CSV",
                   help="curve label and its aggregate CSV (repeatable)")
    p.add_argument("--title", default="")
    p.add_argument("--linear-x", action="store_true",
                   help="linear instead of log sample axis")
    p.add_argument("--log-y", action="store_true")
    return parser


def cmd_plot(args):
    entries = []
    for item in args.label:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            print("usage error: --label expects NAME=CSV, got %r" % item,
                  file=sys.stderr)
            return EXIT_USAGE
        entries.append((name, path))
    try:
        spec = PlotSpec(entries=entries, out=args.out, title=args.title,
                        x_log=not args.linear_x, y_log=args.log_y)
    except ValueError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        image, sidecar = render_errorbars(spec)
    except (CsvFormatError, OSError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    print(image)
    print(sidecar)
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    return cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
