import numpy as np
import pytest

from robustcomp import (Constants, ProblemSpec, composite_smoothness,
                        full_objective, l1, make_synthetic)
from robustcomp.prox import NONE


def _const(C_f=1.0, L_f=1.0, C_g=1.0, L_g=1.0, sigma0=0.0, sigma1=0.0, mu=1.0):
    return Constants(C_f, L_f, C_g, L_g, sigma0, sigma1, mu)


def _toy_spec(g_value, regularizer=NONE, constants=None):
    """1-d identity-outer problem with a deterministic inner oracle."""
    def batch(w, n, rng):
        return np.full((n, 1), g_value(w)), np.ones((n, 1, 1))

    return ProblemSpec(
        dim_p=1, dim_d=1,
        outer_value=lambda u: float(u[0]),
        outer_grad=lambda u: np.ones(1),
        inner_sample_batch=batch,
        constants=constants or _const(),
        regularizer=regularizer)


def test_smoothness_paper_constant():
    spec = _toy_spec(lambda w: 0.0, constants=_const(C_f=1, L_g=1, C_g=1, L_f=1))
    assert composite_smoothness(spec) == 2.0


def test_smoothness_no_inner_curvature():
    spec = _toy_spec(lambda w: 0.0, constants=_const(C_f=3, L_g=0.5, C_g=0, L_f=1))
    assert composite_smoothness(spec) == 1.5


def test_smoothness_takes_conservative_max():
    spec = _toy_spec(lambda w: 0.0, constants=_const(C_f=2, L_g=3, C_g=1, L_f=5))
    assert composite_smoothness(spec) == 11.0


def test_constants_validation():
    with pytest.raises(ValueError):
        _const(mu=0.0)
    with pytest.raises(ValueError):
        _const(sigma0=-1.0)


def test_full_objective_identity_chain():
    spec = _toy_spec(lambda w: float(w[0]))
    assert full_objective(spec, np.array([3.0])) == pytest.approx(3.0)


def test_full_objective_with_l1():
    spec = _toy_spec(lambda w: 2.0, regularizer=l1(1.0))
    assert full_objective(spec, np.array([-3.0])) == pytest.approx(5.0)


def test_full_objective_nonfinite_error():
    spec = _toy_spec(lambda w: np.inf)
    with pytest.raises(FloatingPointError):
        full_objective(spec, np.array([0.0]))


def test_optimum_consistency():
    spec = make_synthetic(3, 5, 0.8, rng=np.random.default_rng(5))
    w_star, f_star = spec.optimum
    assert full_objective(spec, w_star) == pytest.approx(f_star, abs=1e-12)


def test_quadratic_growth():
    spec = make_synthetic(3, 5, 0.8, rng=np.random.default_rng(5))
    mu = spec.constants.mu
    rng = np.random.default_rng(12)
    for _ in range(1000):
        w = rng.standard_normal(5) * rng.uniform(0.1, 5.0)
        gap = spec.gap(w)
        dist = spec.dist_to_optimum(w)
        assert gap >= 0.5 * mu * dist ** 2 - 1e-9


def test_outer_grad_matches_finite_differences():
    spec = make_synthetic(4, 6, 0.5, rng=np.random.default_rng(8))
    rng = np.random.default_rng(13)
    h = 1e-6
    for _ in range(100):
        u = rng.standard_normal(4)
        grad = spec.outer_grad(u)
        fd = np.zeros(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd[j] = (spec.outer_value(u + e) - spec.outer_value(u - e)) / (2 * h)
        assert np.linalg.norm(fd - grad) <= 1e-6 * max(1.0, np.linalg.norm(grad))


def test_inner_sampling_unbiased():
    spec = make_synthetic(3, 4, 1.0, rng=np.random.default_rng(2),
                          sigma0=0.5, sigma1=0.5)
    rng = np.random.default_rng(3)
    w = rng.standard_normal(4)
    N = 20000
    values, _ = spec.inner_sample_batch(w, N, rng)
    g_w, _ = spec.inner_mean(w)
    err = np.linalg.norm(values.mean(axis=0) - g_w)
    assert err <= 3.0 * spec.constants.sigma0 / np.sqrt(N)
