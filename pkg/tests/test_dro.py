import math

import numpy as np
import pytest
from scipy import sparse as sp

from robustcomp import (DroInstance, Dataset, dro_inner_sample, l2, lse_grad,
                        lse_value, make_dro_spec, make_synthetic)
from robustcomp.dro import calibrate_constants, dro_inner_sample_batch
from robustcomp.problem import full_objective
from robustcomp.prox import NONE


def _dataset(X, y, provenance="test"):
    X = sp.csr_matrix(np.asarray(X, dtype=float))
    return Dataset(X, np.asarray(y, dtype=float), X.shape[1], provenance)


def _instance(n_sources=3, n=40, d=4, seed=0, temperature=1.0, reg=NONE):
    rng = np.random.default_rng(seed)
    sources = []
    for i in range(n_sources):
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        sources.append(_dataset(X, y, "src%d" % i))
    return DroInstance(sources=sources, temperature=temperature,
                       regularizer=reg, dim=d)


def test_lse_equal_coordinates():
    for lam in (0.5, 1.0, 3.0):
        u = np.full(4, 2.0)
        assert lse_value(u, lam) == pytest.approx(2.0 + lam * math.log(4))


def test_lse_closed_form():
    assert lse_value(np.array([0.0, math.log(3)]), 1.0) == pytest.approx(math.log(4))


def test_lse_shift_invariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        u = rng.standard_normal(5)
        c = float(rng.standard_normal())
        lam = float(rng.uniform(0.2, 3.0))
        assert lse_value(u + c, lam) == pytest.approx(lse_value(u, lam) + c)


def test_lse_no_overflow():
    assert np.isfinite(lse_value(np.array([1e300, -1e300]), 1.0))


def test_lse_grad_uniform_and_closed_form():
    g = lse_grad(np.zeros(4), 2.0)
    assert np.allclose(g, 0.25)
    g = lse_grad(np.array([0.0, math.log(3)]), 1.0)
    assert np.allclose(g, [0.25, 0.75])


def test_lse_grad_is_probability_vector():
    rng = np.random.default_rng(2)
    for _ in range(100):
        g = lse_grad(rng.standard_normal(6) * 10, float(rng.uniform(0.1, 5)))
        assert np.all(g > 0) and np.all(g < 1)
        assert abs(g.sum() - 1.0) <= 1e-12


def test_lse_grad_matches_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(100):
        u = rng.standard_normal(5)
        lam = float(rng.uniform(0.3, 2.0))
        g = lse_grad(u, lam)
        fd = np.array([(lse_value(u + h * e, lam) - lse_value(u - h * e, lam)) / (2 * h)
                       for e in np.eye(5)])
        assert np.linalg.norm(fd - g) <= 1e-8 * max(1.0, np.linalg.norm(g))


def test_inner_sample_zero_weight():
    inst = _instance()
    value, jac = dro_inner_sample(inst, np.zeros(4), np.random.default_rng(0))
    assert value.shape == (3,) and jac.shape == (3, 4)
    assert np.all(value >= 0)


def test_inner_sample_loss_formula():
    X = [[1.0, 2.0]]
    src = [_dataset(X, [3.0]), _dataset(X, [-1.0])]
    inst = DroInstance(sources=src, temperature=1.0, regularizer=NONE, dim=2)
    value, jac = dro_inner_sample(inst, np.zeros(2), np.random.default_rng(0))
    # w = 0: value_i = y_i^2, row_i = -2 y_i x_i
    assert np.allclose(value, [9.0, 1.0])
    assert np.allclose(jac, [[-6.0, -12.0], [2.0, 4.0]])


def test_inner_sample_zero_residual():
    w = np.array([1.0, -1.0])
    X = [[2.0, 1.0]]
    y = [1.0]  # w.x = 1
    src = [_dataset(X, y), _dataset(X, y)]
    inst = DroInstance(sources=src, temperature=1.0, regularizer=NONE, dim=2)
    value, jac = dro_inner_sample(inst, w, np.random.default_rng(0))
    assert np.allclose(value, 0.0) and np.allclose(jac, 0.0)


def test_inner_jacobian_matches_finite_differences():
    inst = _instance(n_sources=2, n=1)  # single example: draw is deterministic
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(100):
        w = rng.standard_normal(4)
        value, jac = dro_inner_sample(inst, w, np.random.default_rng(0))
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            vp, _ = dro_inner_sample(inst, w + e, np.random.default_rng(0))
            vm, _ = dro_inner_sample(inst, w - e, np.random.default_rng(0))
            fd = (vp - vm) / (2 * h)
            assert np.max(np.abs(fd - jac[:, j])) <= 1e-6 * max(1.0, np.max(np.abs(jac)))


def test_instance_validation():
    with pytest.raises(ValueError):
        _instance(n_sources=1)
    with pytest.raises(ValueError):
        _instance(temperature=0.0)


def test_dro_objective_dominates_each_source():
    inst = _instance(seed=5)
    consts = calibrate_constants(inst, np.zeros(4), mu=0.1)
    spec = make_dro_spec(inst, consts)
    rng = np.random.default_rng(6)
    big = np.random.default_rng(7)
    for _ in range(20):
        w = rng.standard_normal(4)
        values, _ = dro_inner_sample_batch(inst, w, 4000, big)
        u = values.mean(axis=0)
        obj = full_objective(spec, w, n_eval=4000, rng=np.random.default_rng(8))
        assert obj >= np.max(u) - 0.3  # Monte Carlo slack on both sides
        assert np.max(u) >= np.mean(u)


def test_dro_objective_convex_along_segments():
    inst = _instance(seed=9, n=25)
    consts = calibrate_constants(inst, np.zeros(4), mu=0.1)
    spec = make_dro_spec(inst, consts)

    def exact_obj(w):
        # finite sources: the inner expectation has a closed form
        u = np.array([np.mean((np.asarray(s.features @ w).ravel() - s.labels) ** 2)
                      for s in inst.sources])
        return lse_value(u, inst.temperature) + spec.regularizer.value(w)

    rng = np.random.default_rng(10)
    for _ in range(1000):
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        mid = 0.5 * (a + b)
        assert exact_obj(mid) <= 0.5 * exact_obj(a) + 0.5 * exact_obj(b) + 1e-9


def test_calibrated_outer_constants_are_exact():
    inst = _instance(temperature=0.5)
    consts = calibrate_constants(inst, np.zeros(4), mu=0.1)
    assert consts.C_f == 1.0
    assert consts.L_f == pytest.approx(2.0)


def test_synthetic_descent_reaches_optimum():
    spec = make_synthetic(2, 2, 1.0, rng=np.random.default_rng(11), radius=2.0)
    w_star, f_star = spec.optimum
    w = np.ones(2) * 3.0
    for _ in range(2000):
        g_w, A = spec.inner_mean(w)
        w = w - 0.1 * (A.T @ spec.outer_grad(g_w))
    assert np.linalg.norm(w - w_star) <= 1e-10


def test_synthetic_optimum_probes():
    spec = make_synthetic(3, 5, 0.9, rng=np.random.default_rng(12), radius=2.0)
    w_star, f_star = spec.optimum
    for j in range(5):
        e = np.zeros(5)
        e[j] = 0.01
        assert f_star <= full_objective(spec, w_star + e) + 1e-12


def test_synthetic_mu_matches_eigenvalue():
    spec = make_synthetic(3, 5, 0.9, rng=np.random.default_rng(13), radius=2.0)
    _, A = spec.inner_mean(np.zeros(5))
    eig = np.linalg.eigvalsh(A.T @ A)
    nonzero = eig[eig > 1e-10]
    assert nonzero.min() == pytest.approx(0.9, abs=1e-8)


def test_synthetic_rejects_regularizer():
    with pytest.raises(ValueError):
        make_synthetic(2, 2, 1.0, regularizer=l2(0.1))
