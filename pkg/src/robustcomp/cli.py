"""Command line entry point: run experiments, aggregate traces, self-test.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 solver failure.
"""

import argparse
import glob as globmod
import sys
import tempfile

from . import harness

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class UsageError(Exception):
    pass


def build_parser():
    parser = _Parser(prog="robustcomp")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)

    p_agg = sub.add_parser("aggregate", help="aggregate trace CSVs at checkpoints")
    p_agg.add_argument("--glob", required=True, dest="pattern")
    p_agg.add_argument("--out", default="aggregate.csv")
    p_agg.add_argument("--column", default="mse",
                       choices=["objective", "gap", "mse"])
    p_agg.add_argument("--checkpoints", type=int, default=30)

    sub.add_parser("selftest", help="run a small smoke experiment")
    return parser


def _read_trace(path):
    from .trace import RunTrace, TraceRow
    tr = RunTrace()
    with open(path) as fh:
        header = fh.readline().strip()
        if header != harness.TRACE_HEADER:
            raise harness.DataError("%s: expected header %r" % (path, harness.TRACE_HEADER))
        for line in fh:
            it, samples, obj, gap, mse, ty, tz = line.strip().split(",")
            tr.append(TraceRow(iteration=int(it), samples=int(samples),
                               objective=float(obj), gap=float(gap),
                               metric=float(mse), trunc_y=int(ty), trunc_z=int(tz)))
    return tr


def cmd_run(args):
    try:
        cfg = harness.load_config(args.config)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = harness.run_experiment(cfg)
    except harness.DataError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except harness.SolverError as exc:
        print("solver failure: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_aggregate(args):
    paths = sorted(globmod.glob(args.pattern))
    if not paths:
        print("no traces match %r" % args.pattern, file=sys.stderr)
        return EXIT_DATA
    try:
        traces = [_read_trace(p) for p in paths]
    except (harness.DataError, ValueError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    attr = {"mse": "metric", "gap": "gap", "objective": "objective"}[args.column]
    budget = max(tr.total_samples for tr in traces)
    grid = harness.checkpoints(budget, args.checkpoints)
    table = harness.aggregate_trials(traces, grid,
                                     value=lambda r: getattr(r, attr))
    harness.write_aggregate_csv(table, args.out)
    print(args.out)
    return EXIT_OK


def cmd_selftest(args):
    with tempfile.TemporaryDirectory() as tmp:
        cfg = harness.ExperimentConfig(
            problem={"type": "synthetic", "p": "3", "d": "4", "mu": "1.0"},
            solver={"kind": "rrosc", "eps0": "4.0", "k": "5", "m": "4"},
            trials=1, seed=7, sample_budget=5000, output_dir=tmp)
        try:
            paths = harness.run_experiment(cfg)
        except harness.SolverError as exc:
            print("selftest solver failure: %s" % exc, file=sys.stderr)
            return EXIT_SOLVER
        print("selftest ok (%d artifacts)" % len(paths))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    handler = {"run": cmd_run, "aggregate": cmd_aggregate,
               "selftest": cmd_selftest}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
