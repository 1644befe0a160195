"""Seeded multi-trial experiment runner: solver dispatch, MSE evaluation,
checkpoint aggregation and CSV emission."""

import configparser
import math
import os

import numpy as np
from dataclasses import dataclass, field, replace
from typing import Optional

from . import __version__
from .data import (corrupt_labels, load_libsvm, pareto, sparse_noise,
                   split_validation, student_t)
from .dro import DroInstance, calibrate_constants, make_dro_spec, make_synthetic
from .mscg import MscgConfig, run_mscg, run_rmscg
from .problem import composite_smoothness
from .prox import NONE, l1, l2
from .rosc import make_schedule, run_rrosc
from .trace import concat_traces

DEFAULT_GRID = tuple(10.0 ** k for k in range(-5, 6))

TRACE_HEADER = "iter,samples,objective,gap,mse,trunc_y,trunc_z"
AGGREGATE_HEADER = "samples,mean,std"


class DataError(Exception):
    pass


class SolverError(Exception):
    pass


@dataclass
class ExperimentConfig:
    problem: dict
    solver: dict
    trials: int = 1
    seed: int = 0
    sample_budget: int = 10000
    n_checkpoints: int = 30
    output_dir: str = "out"
    model_selection: bool = False
    reg_grid: tuple = DEFAULT_GRID
    step_grid: tuple = DEFAULT_GRID

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sample_budget < 1:
            raise ValueError("sample_budget must be >= 1")


def evaluate_mse(w, test):
    """Mean squared prediction error of the linear model w on a dataset."""
    if len(test) == 0:
        raise ValueError("empty evaluation set")
    resid = np.asarray(test.features @ w).ravel() - test.labels
    return float(np.mean(resid ** 2))


def checkpoints(budget, n=30):
    """Log-spaced sample checkpoints up to the budget, deduplicated."""
    pts = np.unique(np.geomspace(1, budget, num=n).astype(int))
    pts[-1] = budget
    return np.unique(pts)


def aggregate_trials(traces, grid, value=lambda row: row.metric):
    """Per checkpoint: mean and sample std (ddof=1; 0 for a single trial) of
    the traced metric, carried forward from the last row at or before it."""
    if not traces:
        raise ValueError("need at least one trace")
    table = []
    for cp in grid:
        vals = []
        for tr in traces:
            last = None
            for row in tr.rows:
                if row.samples <= cp:
                    last = row
                else:
                    break
            if last is None and tr.rows:
                last = tr.rows[0]
            vals.append(value(last) if last is not None else float("nan"))
        vals = np.array(vals, dtype=float)
        mean = float(np.mean(vals))
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        table.append((int(cp), mean, std))
    return table


def _parse_noise(token):
    name, _, arg = token.strip().partition(":")
    if name == "pareto":
        return pareto(float(arg))
    if name == "student_t":
        return student_t(float(arg))
    if name == "sparse":
        return sparse_noise(float(arg))
    if name == "gaussian":
        from .data import gaussian
        return gaussian()
    raise ValueError("unknown noise kind %r" % token)


def _parse_regularizer(kind, weight):
    if kind in ("none", ""):
        return NONE
    if kind == "l1":
        return l1(weight)
    if kind == "l2":
        return l2(weight)
    raise ValueError("unknown regularizer %r" % kind)


def load_config(path):
    """Read the flat INI-style experiment description."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    exp = cp["experiment"] if "experiment" in cp else {}
    prob = dict(cp["problem"]) if "problem" in cp else {}
    solv = dict(cp["solver"]) if "solver" in cp else {}
    sel = cp["model_selection"] if "model_selection" in cp else {}

    def grid_of(raw):
        return tuple(float(x) for x in raw.split(",")) if raw else DEFAULT_GRID

    return ExperimentConfig(
        problem=prob, solver=solv,
        trials=int(exp.get("trials", 1)),
        seed=int(exp.get("seed", 0)),
        sample_budget=int(exp.get("sample_budget", 10000)),
        n_checkpoints=int(exp.get("checkpoints", 30)),
        output_dir=exp.get("output_dir", "out"),
        model_selection=str(sel.get("enabled", "false")).lower() == "true",
        reg_grid=grid_of(sel.get("reg_grid", "")),
        step_grid=grid_of(sel.get("step_grid", "")))


def _build_problem(cfg, trial_rng, reg_weight=None):
    """Returns (spec, valid_dataset_or_None). The synthetic instance is fixed
    by the experiment seed; data corruption uses the per-trial rng."""
    p = cfg.problem
    kind = p.get("type", "synthetic")
    if kind == "synthetic":
        reg = _parse_regularizer(p.get("regularizer", "none"),
                                 reg_weight if reg_weight is not None
                                 else float(p.get("reg_weight", 0.0)))
        spec = make_synthetic(
            p=int(p.get("p", 5)), d=int(p.get("d", 20)),
            mu_target=float(p.get("mu", 0.5)),
            noise_family=_parse_noise(p.get("noise", "gaussian")),
            rng=np.random.default_rng(cfg.seed),
            sigma0=float(p.get("sigma0", 0.0)),
            sigma1=float(p.get("sigma1", 0.0)),
            cond=float(p.get("cond", 4.0)),
            radius=float(p.get("radius", 10.0)),
            regularizer=reg)
        return spec, None
    if kind == "dro":
        try:
            data = load_libsvm(p["dataset"])
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(str(exc))
        train, valid = split_validation(
            data, float(p.get("valid_fraction", 0.10)), trial_rng)
        kinds = [_parse_noise(tok) for tok in
                 p.get("noise_kinds",
                       "pareto:1.01,pareto:2.01,student_t:2.5,"
                       "student_t:5,sparse:5,sparse:10").split(",")]
        sources = corrupt_labels(train, kinds, trial_rng)
        reg = _parse_regularizer(p.get("regularizer", "none"),
                                 reg_weight if reg_weight is not None
                                 else float(p.get("reg_weight", 0.0)))
        inst = DroInstance(sources=sources,
                           temperature=float(p.get("temperature", 1.0)),
                           regularizer=reg, dim=train.dim)
        consts = calibrate_constants(inst, np.zeros(train.dim),
                                     mu=float(p.get("mu", 0.1)),
                                     rng=np.random.default_rng(cfg.seed))
        return make_dro_spec(inst, consts), valid
    raise ValueError("unknown problem type %r" % kind)


def _run_solver(cfg, spec, rng, metric, eta_override=None):
    s = cfg.solver
    kind = s.get("kind", "mscg")
    budget = cfg.sample_budget
    L = composite_smoothness(spec)
    eta_cap = 1.0 / (2.0 * L)
    eta = min(float(eta_override if eta_override is not None
                    else s.get("eta", eta_cap)), eta_cap)
    w_0 = np.zeros(spec.dim_d)
    delta = float(s.get("delta", 0.05))
    m = int(s.get("m", 8))
    try:
        if kind == "mscg":
            T = int(s.get("t", math.ceil(budget / (2 * m))))
            mscg_cfg = MscgConfig(eta=eta, T=T, batch_schedule=m)
            return run_mscg(spec, w_0, mscg_cfg, rng, metric=metric,
                            sample_budget=budget)
        if kind in ("rmscg", "rmscg_robust"):
            T = int(s.get("t", max(1, math.ceil(4.0 / (spec.constants.mu * eta)))))
            K = int(s.get("k", 40))
            est = "robust" if kind == "rmscg_robust" else "non_robust"
            _, trace = run_rmscg(spec, w_0, eta, T, int(s.get("m1", m)), K, est,
                                 rng, delta=delta, metric=metric,
                                 sample_budget=budget)
            return trace
        if kind == "rrosc":
            eps0 = float(s.get("eps0", 1.0))
            K = int(s.get("k", 10))
            eps_target = float(s.get("eps_target", eps0 / 2.0 ** K))
            scheds = make_schedule(spec, eps0, eps_target, delta, m,
                                   int(s.get("c", 1)))
            if "d" in s:  # fixed ball radius overrides the schedule-derived one
                scheds = [replace(sc, D_k=float(s["d"])) for sc in scheds]
            if eta_override is not None:
                scheds = [replace(sc, eta_k=min(eta, sc.eta_k),
                                  T_k=max(1, math.ceil(10.0 / (spec.constants.mu
                                                               * min(eta, sc.eta_k)))))
                          for sc in scheds]
            _, traces = run_rrosc(spec, w_0, scheds, delta, rng, metric=metric,
                                  sample_budget=budget)
            return concat_traces(traces)
    except (FloatingPointError, RuntimeError, ValueError) as exc:
        raise SolverError(str(exc))
    raise ValueError("unknown solver kind %r" % kind)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_trace_csv(trace, path):
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for row in trace.rows:
            fh.write(",".join([str(row.iteration), str(row.samples),
                               _fmt(row.objective), _fmt(row.gap),
                               _fmt(row.metric), str(row.trunc_y),
                               str(row.trunc_z)]) + "\n")


def write_aggregate_csv(table, path):
    with open(path, "w") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for samples, mean, std in table:
            fh.write("%d,%s,%s\n" % (samples, _fmt(float(mean)), _fmt(float(std))))


def read_aggregate_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if header != AGGREGATE_HEADER:
            raise DataError("%s: expected header %r" % (path, AGGREGATE_HEADER))
        return [(int(a), float(b), float(c))
                for a, b, c in (line.strip().split(",") for line in fh if line.strip())]


def _select_hyperparameters(cfg):
    """Pick (reg_weight, eta) by validation MSE at the budget, seed-fixed."""
    best = (math.inf, None, None)
    for reg_w in cfg.reg_grid:
        for eta in cfg.step_grid:
            rng = np.random.default_rng(cfg.seed)
            spec, valid = _build_problem(cfg, rng, reg_weight=reg_w)
            metric = (lambda w, v=valid: evaluate_mse(w, v)) if valid is not None else None
            try:
                trace = _run_solver(cfg, spec, rng, metric, eta_override=eta)
            except SolverError:
                continue
            if not trace.rows:
                continue
            score = trace.rows[-1].metric if valid is not None else trace.rows[-1].gap
            if np.isfinite(score) and score < best[0]:
                best = (score, reg_w, eta)
    if best[1] is None:
        raise SolverError("model selection found no finite candidate")
    return best[1], best[2]


def run_experiment(cfg):
    """Run all trials, write per-trial trace CSVs, the aggregate table and a
    manifest. Returns the list of written paths."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    reg_weight = eta_override = None
    if cfg.model_selection:
        reg_weight, eta_override = _select_hyperparameters(cfg)

    traces = []
    failures = []
    seeds = [cfg.seed ^ t for t in range(cfg.trials)]
    for t, seed_t in enumerate(seeds):
        rng = np.random.default_rng(seed_t)
        spec, valid = _build_problem(cfg, rng, reg_weight=reg_weight)
        metric = (lambda w, v=valid: evaluate_mse(w, v)) if valid is not None else None
        try:
            trace = _run_solver(cfg, spec, rng, metric, eta_override=eta_override)
        except SolverError as exc:
            failures.append((t, str(exc)))
            continue
        traces.append((t, trace))
    if not traces:
        raise SolverError("all %d trials failed: %s" % (cfg.trials, failures))

    paths = []
    for t, trace in traces:
        path = os.path.join(cfg.output_dir, "trace_trial%d.csv" % t)
        write_trace_csv(trace, path)
        paths.append(path)

    grid = checkpoints(cfg.sample_budget, cfg.n_checkpoints)
    is_dro = cfg.problem.get("type", "synthetic") == "dro"
    value = (lambda r: r.metric) if is_dro else (lambda r: r.gap)
    table = aggregate_trials([tr for _, tr in traces], grid, value=value)
    agg_path = os.path.join(cfg.output_dir, "aggregate.csv")
    write_aggregate_csv(table, agg_path)
    paths.append(agg_path)

    manifest = os.path.join(cfg.output_dir, "manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("version: robustcomp-%s\n" % __version__)
        fh.write("seeds: %s\n" % ",".join(str(s) for s in seeds))
        if failures:
            fh.write("failed_trials: %s\n" % failures)
        if reg_weight is not None:
            fh.write("selected_reg_weight: %s\nselected_eta: %s\n"
                     % (reg_weight, eta_override))
        for section, items in (("experiment", {
                "trials": cfg.trials, "seed": cfg.seed,
                "sample_budget": cfg.sample_budget,
                "output_dir": cfg.output_dir}),
                ("problem", cfg.problem), ("solver", cfg.solver)):
            fh.write("[%s]\n" % section)
            for k in sorted(items):
                fh.write("%s = %s\n" % (k, items[k]))
    paths.append(manifest)
    return paths
