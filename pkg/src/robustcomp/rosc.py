"""Reference-truncated solver with ball-constrained updates and its restart schedule.

Each stage anchors robust reference estimates of the inner value and Jacobian
at the stage start, replaces any fresh mini-batch estimate that strays beyond
a Lipschitz-plus-slack threshold by the reference, and keeps iterates inside a
shrinking ball around the anchor.
"""

import math

import numpy as np
from dataclasses import dataclass
from typing import Optional

from .problem import composite_smoothness, full_objective
from .prox import prox_step_ball
from .robust_mean import group_counts, rme_vector
from .trace import RunTrace, TraceRow, concat_traces

_LAMBDA_FLOOR = 1e-12


@dataclass
class TruncationState:
    w_0: np.ndarray
    y_ref: np.ndarray
    z_ref: np.ndarray
    nu: float
    lambda_y: float
    lambda_z: float
    D: float
    trunc_count_y: int = 0
    trunc_count_z: int = 0
    # reference errors against the analytic inner mean, when available
    ref_err_y: Optional[float] = None
    ref_err_z: Optional[float] = None


@dataclass(frozen=True)
class StageSchedule:
    k: int
    eps_k: float
    eta_k: float
    T_k: int
    D_k: float
    lambda_k_y: float
    lambda_k_z: float
    nu_k: float
    m: int
    b: int


def reference_estimates(spec, w_0, b, delta, rng):
    """Robust reference estimates of (g, grad g) at the stage anchor.

    One batch of b draws feeds both estimators (as in the solver's reference
    step); nu = sqrt(486 ln(1/delta) / b) is the confidence multiplier of the
    vector robust-mean bound, so ||y_ref - g(w_0)|| <= nu*sigma0 with
    probability >= 1 - delta.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    w_0 = np.asarray(w_0, dtype=float)
    values, jacs = spec.inner_sample_batch(w_0, b, rng)
    _, k = group_counts(b, delta, "vector")
    y_ref = rme_vector(values, k)
    z_ref = rme_vector(jacs.reshape(b, -1), k).reshape(jacs.shape[1:])
    nu = math.sqrt(486.0 * math.log(1.0 / delta) / b)
    state = TruncationState(w_0=w_0, y_ref=y_ref, z_ref=z_ref, nu=nu,
                            lambda_y=0.0, lambda_z=0.0, D=0.0)
    if spec.inner_mean is not None:
        g0, dg0 = spec.inner_mean(w_0)
        state.ref_err_y = float(np.linalg.norm(y_ref - g0))
        state.ref_err_z = float(np.linalg.norm(z_ref - dg0))
    return state


def truncate_reference(candidate, ref, w_t, w_0, lip, nu_sigma, lam):
    """Keep the candidate estimate if it stays within the reference threshold,
    otherwise fall back to the reference. The threshold is inclusive."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    if nu_sigma < 0:
        raise ValueError("nu_sigma must be >= 0")
    dist = np.linalg.norm(candidate - ref)
    threshold = lip * np.linalg.norm(np.asarray(w_t) - np.asarray(w_0)) + nu_sigma + lam
    if dist <= threshold:
        return candidate, False
    return ref, True


def run_rosc(spec, w_0, eta, T, D, lambda_y, lambda_z, m, b, delta, rng,
             nu=None, split_batches=False, metric=None,
             sample_budget=None, samples_offset=0):
    """One truncated stage: reference estimation followed by T ball-constrained
    proximal steps on truncated mini-batch estimates.

    By default one batch per iteration feeds both the value and Jacobian
    estimates; split_batches draws two independent batches instead (ablation).
    """
    L = composite_smoothness(spec)
    if L > 0 and eta > 1.0 / (2.0 * L) + 1e-12:
        raise ValueError("eta=%g exceeds 1/(2L)=%g" % (eta, 1.0 / (2.0 * L)))
    if m < 1 or b < 1:
        raise ValueError("m and b must be >= 1")
    c = spec.constants
    w_0 = np.asarray(w_0, dtype=float)

    state = reference_estimates(spec, w_0, b, delta, rng)
    state.D = D
    state.lambda_y = max(lambda_y, _LAMBDA_FLOOR)
    state.lambda_z = max(lambda_z, _LAMBDA_FLOOR)
    if nu is not None:
        state.nu = nu
    state.nu = min(state.nu, math.sqrt(max(T, 1)))

    sigma_hat_y = c.sigma0 / math.sqrt(m)
    sigma_hat_z = c.sigma1 / math.sqrt(m)
    exact = spec.inner_mean is not None
    # reference premise of the deterministic truncation bound
    premise_y = premise_z = None
    if exact:
        premise_y = state.ref_err_y <= state.nu * sigma_hat_y + 1e-12
        premise_z = state.ref_err_z <= state.nu * sigma_hat_z + 1e-12

    w = w_0.copy()
    trace = RunTrace()
    trace.diagnostics.update(premise_y=premise_y, premise_z=premise_z,
                             nu=state.nu, lemma_bound_violations=0)
    avg = np.zeros_like(w)
    n_avg = 0
    samples = samples_offset + b

    for t in range(T):
        draws = 2 * m if split_batches else m
        if sample_budget is not None and samples + draws > sample_budget:
            break
        values, jacs = spec.inner_sample_batch(w, m, rng)
        if split_batches:
            _, jacs = spec.inner_sample_batch(w, m, rng)
        y_t = values.mean(axis=0)
        z_t = jacs.mean(axis=0)
        # the slack term uses the per-batch deviation sigma/sqrt(m); this is
        # what makes the truncated estimate satisfy the deterministic bound
        # ||z_hat - grad g(w_t)|| <= 2 L_g ||w_t - w_0|| + 2 nu sigma_hat + lambda
        y_hat, cut_y = truncate_reference(y_t, state.y_ref, w, w_0,
                                          c.C_g, state.nu * sigma_hat_y, state.lambda_y)
        z_hat, cut_z = truncate_reference(z_t, state.z_ref, w, w_0,
                                          c.L_g, state.nu * sigma_hat_z, state.lambda_z)
        state.trunc_count_y += cut_y
        state.trunc_count_z += cut_z

        if exact and premise_z:
            _, dg_t = spec.inner_mean(w)
            bound = (2.0 * c.L_g * np.linalg.norm(w - w_0)
                     + 2.0 * state.nu * sigma_hat_z + state.lambda_z)
            if np.linalg.norm(z_hat - dg_t) > bound + 1e-9:
                trace.diagnostics["lemma_bound_violations"] += 1

        grad = z_hat.T @ spec.outer_grad(y_hat)
        w = prox_step_ball(grad, w, w_0, eta, D, spec.regularizer)
        if not np.all(np.isfinite(w)):
            raise FloatingPointError("diverged")
        avg += w
        n_avg += 1
        samples += draws
        row = TraceRow(iteration=t, samples=samples,
                       trunc_y=state.trunc_count_y, trunc_z=state.trunc_count_z)
        if exact:
            row.objective = full_objective(spec, w)
            if spec.optimum is not None:
                row.gap = row.objective - spec.optimum[1]
        if metric is not None:
            row.metric = metric(w)
        trace.append(row)

    trace.final_point = w
    trace.averaged_point = avg / n_avg if n_avg else w_0.copy()
    trace.diagnostics["state"] = state
    return trace


def _safe_min(bounds):
    finite = [x for x in bounds if np.isfinite(x) and x > 0]
    if not finite:
        raise ValueError("no finite step-size bound")
    return min(finite)


def make_schedule(spec, eps_0, eps_target, delta, m, c_groups=1):
    """Stage schedules for the restarted truncated solver.

    Per stage k: eps_k = eps_0/2^k, ball radius D_k = sqrt(2 eps_{k-1}/mu),
    step size eta_k = the tightest of the stage accuracy conditions,
    T_k = ceil(10/(mu eta_k)), reference batch b = ceil(18 c ln(1/delta)),
    and per-channel truncation slacks built from sigma/sqrt(m).
    """
    if not (0 < eps_target < eps_0):
        raise ValueError("need 0 < eps_target < eps_0")
    if c_groups < 1 or m < 1:
        raise ValueError("m and c must be >= 1")
    cc = spec.constants
    L = composite_smoothness(spec)
    log_d = math.log(1.0 / delta)
    b = math.ceil(18.0 * c_groups * log_d)
    K = math.ceil(math.log2(eps_0 / eps_target))
    schedules = []
    for k in range(1, K + 1):
        eps_prev = eps_0 / 2.0 ** (k - 1)
        eps_k = eps_0 / 2.0 ** k
        D_k = math.sqrt(2.0 * eps_prev / cc.mu)
        a3 = 3.0 * log_d + 2.0
        a1 = (log_d + 1.0) ** 2
        with np.errstate(divide="ignore"):
            bounds = [
                _div(1.0, 2.0 * L),
                _div(m * eps_prev, 160.0 * cc.sigma0 ** 2 * cc.C_g ** 2 * cc.L_f ** 2 * a3),
                _div(1.0, cc.C_g * math.sqrt(32.0 * cc.C_g ** 2 * cc.L_f ** 2 * a3)),
                _div(m * eps_prev, 160.0 * cc.sigma1 ** 2 * cc.C_f ** 2 * a3),
                _div(1.0, cc.L_g * math.sqrt(32.0 * cc.C_f ** 2 * a3)),
                _div(m * eps_prev, 1280.0 * cc.sigma0 ** 2 * cc.C_g ** 2 * cc.L_f ** 2 * a1),
                _div(1.0, 16.0 * cc.C_g * cc.L_f * (log_d + 1.0)),
                _div(m * eps_prev, 1280.0 * cc.sigma1 ** 2 * cc.C_f ** 2 * a1),
                _div(1.0, 16.0 * cc.L_g * cc.C_f * (log_d + 1.0)),
            ]
        eta_k = _safe_min(bounds)
        T_k = max(1, math.ceil(10.0 / (cc.mu * eta_k)))
        nu_k = min(math.sqrt(486.0 * log_d / b), math.sqrt(T_k))
        sm0 = cc.sigma0 / math.sqrt(m)
        sm1 = cc.sigma1 / math.sqrt(m)
        lam_y = max(cc.C_g * D_k, sm0 * math.sqrt(T_k)) + nu_k * sm0
        lam_z = max(cc.L_g * D_k, sm1 * math.sqrt(T_k)) + nu_k * sm1
        schedules.append(StageSchedule(
            k=k, eps_k=eps_k, eta_k=eta_k, T_k=T_k, D_k=D_k,
            lambda_k_y=max(lam_y, _LAMBDA_FLOOR),
            lambda_k_z=max(lam_z, _LAMBDA_FLOOR),
            nu_k=nu_k, m=int(m), b=int(b)))
    return schedules


def _div(num, den):
    return float("inf") if den == 0 else num / den


def run_rrosc(spec, w_0, schedules, delta, rng, metric=None, sample_budget=None):
    """Chain truncated stages; each stage re-anchors at the previous stage's
    averaged point and includes its reference batch in the sample count."""
    if not schedules:
        raise ValueError("need at least one stage schedule")
    w = np.asarray(w_0, dtype=float)
    traces = []
    samples = 0
    for s in schedules:
        tr = run_rosc(spec, w, s.eta_k, s.T_k, s.D_k, s.lambda_k_y, s.lambda_k_z,
                      s.m, s.b, delta, rng, nu=s.nu_k, metric=metric,
                      sample_budget=sample_budget, samples_offset=samples)
        traces.append(tr)
        samples = tr.total_samples if tr.rows else samples + s.b
        w = tr.averaged_point
        if sample_budget is not None and samples >= sample_budget:
            break
    return w, traces
