"""Concrete problem instances: the multi-source robust regression objective
and synthetic quadratic compositional problems with closed-form optima."""

import logging
import math

import numpy as np
from dataclasses import dataclass
from typing import List

from .data import Dataset, NoiseKind, draw_noise, noise_variance
from .problem import Constants, ProblemSpec
from .prox import Regularizer, NONE

log = logging.getLogger(__name__)


def lse_value(u, temperature):
    """Numerically stable temperature-scaled log-sum-exp."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    v = np.asarray(u, dtype=float) / temperature
    m = np.max(v)
    return float(temperature * (m + math.log(np.sum(np.exp(v - m)))))


def lse_grad(u, temperature):
    """Softmax of u/temperature; entries positive and summing to one."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    v = np.asarray(u, dtype=float) / temperature
    v = v - np.max(v)
    e = np.exp(v)
    return e / e.sum()


@dataclass(frozen=True)
class DroInstance:
    """m corrupted data sources under a temperature-scaled worst-case mixture
    of per-source expected square losses."""

    sources: List[Dataset]
    temperature: float
    regularizer: Regularizer
    dim: int

    def __post_init__(self):
        if len(self.sources) < 2:
            raise ValueError("need at least two sources")
        if any(len(s) == 0 for s in self.sources):
            raise ValueError("empty source")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")

    @property
    def n_sources(self):
        return len(self.sources)


def dro_inner_sample(inst, w, rng):
    """One inner draw: one example per source; value_i is the square loss and
    Jacobian row i its gradient. Rows are independent across sources."""
    values, jacs = dro_inner_sample_batch(inst, w, 1, rng)
    return values[0], jacs[0]


def dro_inner_sample_batch(inst, w, n, rng):
    m, d = inst.n_sources, inst.dim
    values = np.empty((n, m))
    jacs = np.empty((n, m, d))
    w = np.asarray(w, dtype=float)
    for i, src in enumerate(inst.sources):
        idx = rng.integers(0, len(src), size=n)
        x = src.features[idx]
        resid = np.asarray(x @ w).ravel() - src.labels[idx]
        values[:, i] = resid ** 2
        jacs[:, i, :] = 2.0 * resid[:, None] * x.toarray()
    return values, jacs


def calibrate_constants(inst, w_0, mu, n_pilot=1024, rng=None, robust=False,
                        delta=0.05):
    """Heuristic constant bundle for a data-backed instance.

    sigma0/sigma1 are pilot-sample deviations at w_0; C_g is a pilot
    second-moment estimate of the Jacobian; L_g comes from per-source Gram
    matrices. C_f = 1 and L_f = 1/temperature are exact for the outer
    log-sum-exp. With robust=True the pilot second moments are estimated by
    median-of-means, which keeps the bundle finite-scaled when the corrupted
    sources are so heavy-tailed that plain pilot variances blow up. Not
    covered by the convergence theory; documented as a calibration pass.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    values, jacs = dro_inner_sample_batch(inst, w_0, n_pilot, rng)
    v_mean = values.mean(axis=0)
    j_mean = jacs.mean(axis=0)
    if robust:
        from .robust_mean import group_counts, mom_scalar
        _, k = group_counts(n_pilot, delta, "scalar")
        second = lambda sq: mom_scalar(sq, k)
    else:
        second = np.mean
    sigma0 = math.sqrt(max(second(np.sum((values - v_mean) ** 2, axis=1)), 0.0))
    sigma1 = math.sqrt(max(second(np.sum((jacs - j_mean) ** 2, axis=(1, 2))), 0.0))
    C_g = math.sqrt(max(second(np.sum(jacs ** 2, axis=(1, 2))), 0.0))
    gram_sq = 0.0
    for src in inst.sources:
        G = (src.features.T @ src.features).toarray() / len(src)
        gram_sq += np.linalg.norm(G, 2) ** 2
    L_g = 2.0 * math.sqrt(gram_sq)
    return Constants(C_f=1.0, L_f=1.0 / inst.temperature, C_g=max(C_g, 1e-12),
                     L_g=max(L_g, 1e-12), sigma0=sigma0, sigma1=sigma1, mu=mu)


def make_dro_spec(inst, constants):
    """ProblemSpec for the robust-regression objective."""
    lam = inst.temperature
    return ProblemSpec(
        dim_p=inst.n_sources, dim_d=inst.dim,
        outer_value=lambda u: lse_value(u, lam),
        outer_grad=lambda u: lse_grad(u, lam),
        inner_sample_batch=lambda w, n, rng: dro_inner_sample_batch(inst, w, n, rng),
        constants=constants,
        regularizer=inst.regularizer)


def _standardized_draw(kind, rng, size):
    var = noise_variance(kind)
    if var is None:
        log.warning("noise family %s has infinite variance; drawing unscaled "
                    "(outside the bounded-second-moment assumption)", kind)
        return draw_noise(kind, rng, size=size)
    return draw_noise(kind, rng, size=size) / math.sqrt(var)


def make_synthetic(p, d, mu_target, noise_family=None, rng=None,
                   sigma0=0.0, sigma1=0.0, cond=4.0, radius=10.0,
                   regularizer=NONE):
    """Synthetic quadratic compositional problem with a closed-form optimum.

    g(w) = A w - b with the smallest nonzero eigenvalue of A^T A equal to
    mu_target, f(u) = ||u||^2/2, so F is mu_target-optimal strongly convex
    (the optimal set is an affine subspace when p < d). Per-sample noise of
    total scale sigma0 (values) and sigma1 (Jacobians) is drawn from the
    given family, standardized to unit variance where that is finite.
    """
    if p < 1 or d < 1:
        raise ValueError("p and d must be >= 1")
    if mu_target <= 0:
        raise ValueError("mu_target must be > 0")
    if rng is None:
        rng = np.random.default_rng(0)
    if noise_family is None:
        noise_family = NoiseKind("gaussian")

    r = min(p, d)
    sing_sq = np.linspace(mu_target, mu_target * cond, r)
    for _ in range(10):
        U, _ = np.linalg.qr(rng.standard_normal((p, r)))
        V, _ = np.linalg.qr(rng.standard_normal((d, r)))
        A = (U * np.sqrt(sing_sq)) @ V.T
        if np.linalg.matrix_rank(A) == r:
            break
    else:
        raise RuntimeError("failed to generate a non-degenerate map")
    b = rng.standard_normal(p)

    w_star = np.linalg.pinv(A) @ b
    resid = A @ w_star - b
    f_star = 0.5 * float(np.dot(resid, resid)) + regularizer.value(w_star)
    if regularizer.kind != "none":
        # closed-form optimum only holds for the unregularized quadratic
        raise ValueError("make_synthetic supports r = none only")

    frob = np.linalg.norm(A)
    constants = Constants(
        C_f=frob * radius + float(np.linalg.norm(resid)) + sigma0,
        L_f=1.0, C_g=frob + sigma1, L_g=0.0,
        sigma0=sigma0, sigma1=sigma1, mu=mu_target)

    scale0 = sigma0 / math.sqrt(p)
    scale1 = sigma1 / math.sqrt(p * d)

    def inner_sample_batch(w, n, rng_):
        base_v = A @ np.asarray(w, dtype=float) - b
        values = np.tile(base_v, (n, 1))
        jacs = np.tile(A, (n, 1, 1))
        if sigma0 > 0:
            values = values + scale0 * _standardized_draw(noise_family, rng_, (n, p))
        if sigma1 > 0:
            jacs = jacs + scale1 * _standardized_draw(noise_family, rng_, (n, p, d))
        return values, jacs

    def inner_mean(w):
        return A @ np.asarray(w, dtype=float) - b, A

    def dist_to_optimum(w):
        # distance to the optimal affine set {w : A w = A w*}
        return float(np.linalg.norm(V.T @ (np.asarray(w, dtype=float) - w_star)))

    return ProblemSpec(
        dim_p=p, dim_d=d,
        outer_value=lambda u: 0.5 * float(np.dot(u, u)),
        outer_grad=lambda u: np.asarray(u, dtype=float),
        inner_sample_batch=inner_sample_batch,
        constants=constants,
        regularizer=regularizer,
        inner_mean=inner_mean,
        optimum=(w_star, f_star),
        dist_to_optimum=dist_to_optimum)
