"""Closed-form proximal operators and the ball-constrained proximal step."""

import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True)
class Regularizer:
    """Convex regularizer r(w): none, l1 (weight*||w||_1) or l2 (weight/2*||w||_2^2)."""

    kind: str = "none"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "l1", "l2"):
            raise ValueError("unknown regularizer kind: %r" % (self.kind,))
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("regularizer weight must be finite and >= 0")

    def value(self, w):
        if self.kind == "l1":
            return self.weight * np.sum(np.abs(w))
        if self.kind == "l2":
            return 0.5 * self.weight * float(np.dot(w, w))
        return 0.0


NONE = Regularizer("none")


def l1(weight):
    return Regularizer("l1", float(weight))


def l2(weight):
    return Regularizer("l2", float(weight))


def soft_threshold(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def prox_step(grad, w_t, eta, r=NONE):
    """One proximal gradient step: argmin_w <grad,w> + ||w-w_t||^2/(2 eta) + r(w)."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("diverged gradient")
    if eta <= 0:
        raise ValueError("eta must be > 0")
    v = w_t - eta * np.asarray(grad, dtype=float)
    if r.kind == "l1":
        return soft_threshold(v, eta * r.weight)
    if r.kind == "l2":
        return v / (1.0 + eta * r.weight)
    return v


def project_ball(w, center, radius):
    """Euclidean projection of w onto the ball ||w - center|| <= radius."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    diff = w - center
    nrm = np.linalg.norm(diff)
    if nrm <= radius:
        return w
    return center + (radius / nrm) * diff


def _ball_objective(w, grad, w_t, eta, r):
    return float(np.dot(grad, w)) + np.dot(w - w_t, w - w_t) / (2.0 * eta) + r.value(w)


def prox_step_ball(grad, w_t, w_0, eta, D, r=NONE, max_iter=200):
    """Proximal step restricted to the ball ||w - w_0|| <= D.

    Solved exactly through the one-dimensional Lagrangian dual: for a
    multiplier tau >= 0 the inner problem is an ordinary prox step with
    curvature (1/eta + tau) and shifted center, and ||w(tau) - w_0|| is
    monotone non-increasing in tau, so bisection on tau is exact.
    """
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("diverged gradient")
    if eta <= 0 or D <= 0:
        raise ValueError("eta and D must be > 0")
    grad = np.asarray(grad, dtype=float)

    def solve(tau):
        curv = 1.0 / eta + tau
        center = (w_t / eta + tau * w_0) / curv
        return prox_step(grad, center, 1.0 / curv, r)

    w = solve(0.0)
    tol = 1e-10 * max(1.0, D)
    if np.linalg.norm(w - w_0) <= D + tol:
        return w

    # bracket: tau=0 infeasible, grow tau until the constraint is satisfied
    lo, hi = 0.0, 1.0
    w_hi = solve(hi)
    it = 0
    while np.linalg.norm(w_hi - w_0) > D:
        lo, hi = hi, 2.0 * hi
        w_hi = solve(hi)
        it += 1
        if it > max_iter:
            raise RuntimeError("ball prox failure: no feasible multiplier found")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        w_mid = solve(mid)
        nrm = np.linalg.norm(w_mid - w_0)
        if nrm > D:
            lo = mid
        else:
            hi, w_hi = mid, w_mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    # interval exhausted at float precision; hi is the feasible endpoint
    if np.linalg.norm(w_hi - w_0) <= D + 1e-9:
        return w_hi
    raise RuntimeError("ball prox failure: bisection did not converge")
