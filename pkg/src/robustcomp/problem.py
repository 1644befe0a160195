"""Compositional problem abstraction F(w) = f(E[g(w;xi)]) + r(w)."""

import numpy as np
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .prox import Regularizer, NONE


@dataclass(frozen=True)
class Constants:
    """Lipschitz/smoothness/noise constants of the composite problem."""

    C_f: float
    L_f: float
    C_g: float
    L_g: float
    sigma0: float
    sigma1: float
    mu: float

    def __post_init__(self):
        for name in ("C_f", "L_f", "C_g", "L_g"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError("%s must be finite and >= 0" % name)
        if self.sigma0 < 0 or self.sigma1 < 0:
            raise ValueError("noise scales must be >= 0")
        if not (self.mu > 0) or not np.isfinite(self.mu):
            raise ValueError("mu must be finite and > 0")


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable bundle of oracles and constants for one problem instance.

    inner_sample_batch(w, n, rng) draws n i.i.d. samples at once and returns
    (values, jacobians) of shapes (n, p) and (n, p, d); a single draw is the
    n=1 slice. When the inner expectation has a closed form, inner_mean(w)
    returns the exact (g(w), grad g(w)) pair and is used for tracing.
    """

    dim_p: int
    dim_d: int
    outer_value: Callable[[np.ndarray], float]
    outer_grad: Callable[[np.ndarray], np.ndarray]
    inner_sample_batch: Callable[[np.ndarray, int, np.random.Generator],
                                 Tuple[np.ndarray, np.ndarray]]
    constants: Constants
    regularizer: Regularizer = NONE
    inner_mean: Optional[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None
    optimum: Optional[Tuple[np.ndarray, float]] = None
    dist_to_optimum: Optional[Callable[[np.ndarray], float]] = None

    def inner_sample(self, w, rng):
        """One draw of (g(w;xi), grad g(w;xi))."""
        values, jacs = self.inner_sample_batch(w, 1, rng)
        return values[0], jacs[0]

    @property
    def smoothness(self):
        return composite_smoothness(self)

    @property
    def condition_number(self):
        return composite_smoothness(self) / self.constants.mu

    def gap(self, w):
        """F(w) - F*, only defined when the optimum is stored."""
        if self.optimum is None:
            raise ValueError("optimum not known for this problem")
        return full_objective(self, w) - self.optimum[1]


def composite_smoothness(spec):
    """Smoothness constant L of f(g(w)).

    The max of C_f*L_g + C_g^2*L_g and C_f*L_g + C_g^2*L_f; the larger
    constant only shrinks admissible step sizes, so it is always safe.
    """
    c = spec.constants
    return max(c.C_f * c.L_g + c.C_g ** 2 * c.L_g,
               c.C_f * c.L_g + c.C_g ** 2 * c.L_f)


def full_objective(spec, w, n_eval=2048, rng=None):
    """Plug-in objective estimate f(mean of inner values) + r(w).

    Used for tracing only, never inside solver updates. Problems with an
    analytic inner mean are evaluated exactly and n_eval is ignored.
    """
    w = np.asarray(w, dtype=float)
    if spec.inner_mean is not None:
        g_w, _ = spec.inner_mean(w)
    else:
        if n_eval < 1:
            raise ValueError("n_eval must be >= 1")
        if rng is None:
            rng = np.random.default_rng(0)
        values, _ = spec.inner_sample_batch(w, n_eval, rng)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite oracle output")
        g_w = values.mean(axis=0)
    val = spec.outer_value(np.asarray(g_w, dtype=float)) + spec.regularizer.value(w)
    if not np.isfinite(val):
        raise FloatingPointError("non-finite oracle output")
    return float(val)
