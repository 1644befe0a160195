"""Mini-batch stochastic compositional proximal gradient and its restarted form.

The basic solver estimates the inner value and Jacobian on two independent
mini-batches per iteration (plain means, or robust estimators), then takes a
proximal step along z^T grad_f(y). The restarted wrapper reruns it from the
averaged iterate with doubled batch sizes.
"""

import math

import numpy as np
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .problem import composite_smoothness, full_objective
from .prox import prox_step
from .robust_mean import group_counts, rme_vector
from .trace import RunTrace, TraceRow, concat_traces


@dataclass(frozen=True)
class MscgConfig:
    eta: float
    T: int
    batch_schedule: Union[int, Callable[[int], int]]
    estimator: str = "non_robust"  # "non_robust" | "robust"
    delta: Optional[float] = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.estimator not in ("non_robust", "robust"):
            raise ValueError("unknown estimator: %r" % (self.estimator,))
        if self.estimator == "robust" and not (self.delta and 0 < self.delta < 1):
            raise ValueError("robust estimator needs delta in (0, 1)")

    def batch(self, t):
        m = self.batch_schedule(t) if callable(self.batch_schedule) else self.batch_schedule
        if m < 1:
            raise ValueError("batch schedule must be >= 1")
        return int(m)

    def validate(self, spec):
        L = composite_smoothness(spec)
        if L > 0 and self.eta > 1.0 / (2.0 * L) + 1e-12:
            raise ValueError("eta=%g exceeds 1/(2L)=%g" % (self.eta, 1.0 / (2.0 * L)))


def mscg_iterate(spec, w_t, m_t, estimator, rng, delta=None):
    """Estimate (g(w_t), grad g(w_t)) from two independent batches of size m_t.

    The value estimate uses only the first batch and the Jacobian estimate
    only the second; their independence matters for the convergence analysis.
    """
    if m_t < 1:
        raise ValueError("batch size must be >= 1")
    values1, _ = spec.inner_sample_batch(w_t, m_t, rng)
    _, jacs2 = spec.inner_sample_batch(w_t, m_t, rng)
    if estimator == "robust":
        n = values1.shape[0]
        _, k = group_counts(n, delta, "vector")
        y = rme_vector(values1, k)
        z = rme_vector(jacs2.reshape(n, -1), k).reshape(jacs2.shape[1:])
    else:
        y = values1.mean(axis=0)
        z = jacs2.mean(axis=0)
    return y, z


def run_mscg(spec, w_0, cfg, rng, metric=None, sample_budget=None, samples_offset=0):
    """Run T iterations of the mini-batch compositional proximal gradient.

    Returns a RunTrace whose averaged_point is the uniform average of
    w_1..w_T (defined as w_0 when no update happened). Stops early when the
    cumulative sample counter would pass sample_budget.
    """
    cfg.validate(spec)
    w = np.asarray(w_0, dtype=float).copy()
    trace = RunTrace()
    avg = np.zeros_like(w)
    n_avg = 0
    samples = samples_offset
    exact = spec.inner_mean is not None

    for t in range(cfg.T):
        m_t = cfg.batch(t)
        if sample_budget is not None and samples + 2 * m_t > sample_budget:
            break
        y, z = mscg_iterate(spec, w, m_t, cfg.estimator, rng, delta=cfg.delta)
        grad = z.T @ spec.outer_grad(y)
        w = prox_step(grad, w, cfg.eta, spec.regularizer)
        if not np.all(np.isfinite(w)):
            trace.diagnostics["diverged"] = True
            break
        avg += w
        n_avg += 1
        samples += 2 * m_t
        row = TraceRow(iteration=t, samples=samples)
        if exact:
            row.objective = full_objective(spec, w)
            if spec.optimum is not None:
                row.gap = row.objective - spec.optimum[1]
        if metric is not None:
            row.metric = metric(w)
        trace.append(row)

    trace.final_point = w
    trace.averaged_point = avg / n_avg if n_avg else np.asarray(w_0, dtype=float).copy()
    if trace.diagnostics.get("diverged"):
        raise FloatingPointError("diverged")
    return trace


def theorem1_batch(spec, eta, eps_prev):
    """Stage batch size from the non-robust restart analysis, when the
    constant bundle is fully known."""
    c = spec.constants
    num = 4.0 * (c.mu * eta * c.C_f ** 2 * c.sigma1 ** 2
                 + c.mu * eta * c.C_g ** 2 * c.L_f ** 2 * c.sigma0 ** 2
                 + c.C_g ** 2 * c.L_f ** 2 * c.sigma0 ** 2)
    return max(1, math.ceil(num / (c.mu * eps_prev)))


def run_rmscg(spec, w_0, eta, T, m_1, K, estimator, rng, delta=None,
              metric=None, sample_budget=None):
    """K restarts of run_mscg with constant per-stage batches m_k = 2^(k-1) m_1.

    Each stage starts from the previous stage's averaged point. Returns the
    final averaged point and the concatenated trace.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    w = np.asarray(w_0, dtype=float)
    traces = []
    samples = 0
    m_k = int(m_1)
    for _ in range(K):
        cfg = MscgConfig(eta=eta, T=T, batch_schedule=m_k,
                         estimator=estimator, delta=delta)
        tr = run_mscg(spec, w, cfg, rng, metric=metric,
                      sample_budget=sample_budget, samples_offset=samples)
        traces.append(tr)
        samples = tr.total_samples if tr.rows else samples
        w = tr.averaged_point
        m_k *= 2
        if sample_budget is not None and samples >= sample_budget:
            break
        if not tr.rows and sample_budget is not None:
            break
    return w, concat_traces(traces)
