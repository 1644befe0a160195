"""Median-of-means and the ball-covering robust mean estimator."""

import math

import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True)
class RobustEstimate:
    value: np.ndarray
    groups_k: int
    group_size_m: int
    delta: float


def group_counts(n, delta, kind):
    """Number of groups k and group size m for n samples at confidence delta.

    Scalar data uses k = ceil(8 ln(1/delta)) forced odd (so the median is a
    single order statistic); vector data uses k = ceil(18 ln(1/delta)).
    k is clamped to n and m = floor(n/k).
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if kind not in ("scalar", "vector"):
        raise ValueError("kind must be 'scalar' or 'vector'")
    factor = 8.0 if kind == "scalar" else 18.0
    k = max(1, math.ceil(factor * math.log(1.0 / delta)))
    k = min(k, n)
    if kind == "scalar" and k % 2 == 0:
        k = k + 1 if k + 1 <= n else k - 1
        k = max(k, 1)
    m = n // k
    return m, k


def _group_means(samples, k):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n == 0:
        raise ValueError("empty sample set")
    if not (1 <= k <= n):
        raise ValueError("k must satisfy 1 <= k <= n")
    if not np.all(np.isfinite(samples)):
        raise ValueError("non-finite sample")
    m = n // k
    used = samples[: m * k]
    return used.reshape((k, m) + samples.shape[1:]).mean(axis=1)


def mom_scalar(samples, k):
    """Median of k contiguous group means of scalar samples."""
    means = _group_means(np.asarray(samples, dtype=float).ravel(), k)
    return float(np.median(means))


def rme_vector(samples, k):
    """Robust mean of vector samples: the group mean whose smallest ball
    covers at least half of all group means.

    Matrices should be flattened by the caller; distances are Euclidean
    (Frobenius after flattening). Ties in the covering radius go to the
    lowest group index.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2:
        raise ValueError("samples must be a 2-d array of row vectors")
    means = _group_means(samples, k)
    if k == 1:
        return means[0]
    # r_i = ceil(k/2)-th smallest distance from mean i to all group means
    diff = means[:, None, :] - means[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    dist.sort(axis=1)
    need = math.ceil(k / 2.0)
    radii = dist[:, need - 1]
    return means[int(np.argmin(radii))]
