"""Heavy-tailed noise generators and the regression dataset pipeline."""

import gzip
import math

import numpy as np
from dataclasses import dataclass
from scipy import sparse as sp


@dataclass(frozen=True)
class NoiseKind:
    """One of pareto(tail), student_t(dof) or sparse(beta, fraction, gaussian_sigma)."""

    kind: str
    tail: float = 0.0
    dof: float = 0.0
    beta: float = 0.0
    fraction: float = 0.0
    gaussian_sigma: float = 0.0


def pareto(tail):
    if tail <= 1.0:
        raise ValueError("pareto tail must be > 1 (mean undefined otherwise)")
    return NoiseKind("pareto", tail=float(tail))


def student_t(dof):
    if dof <= 0:
        raise ValueError("student_t dof must be > 0")
    return NoiseKind("student_t", dof=float(dof))


def sparse_noise(beta, fraction=0.1, gaussian_sigma=0.1):
    if beta <= 0:
        raise ValueError("beta must be > 0")
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must lie in (0, 1]")
    if gaussian_sigma < 0:
        raise ValueError("gaussian_sigma must be >= 0")
    return NoiseKind("sparse", beta=float(beta), fraction=float(fraction),
                     gaussian_sigma=float(gaussian_sigma))


def gaussian():
    return NoiseKind("gaussian")


def noise_variance(kind):
    """Analytic variance of a single draw, or None when infinite."""
    if kind.kind == "pareto":
        a = kind.tail
        if a <= 2.0:
            return None
        return a / ((a - 1.0) ** 2 * (a - 2.0))
    if kind.kind == "student_t":
        if kind.dof <= 2.0:
            return None
        return kind.dof / (kind.dof - 2.0)
    if kind.kind == "gaussian":
        return 1.0
    raise ValueError("no scalar variance for noise kind %r" % (kind.kind,))


def draw_noise(kind, rng, size=None):
    """Zero-mean scalar noise draws; sparse noise is vector-level and lives
    in corrupt_labels."""
    if kind.kind == "pareto":
        a = kind.tail
        # classical Pareto(shape a, scale 1) re-centered by its mean a/(a-1)
        return (1.0 + rng.pareto(a, size=size)) - a / (a - 1.0)
    if kind.kind == "student_t":
        return rng.standard_t(kind.dof, size=size)
    if kind.kind == "gaussian":
        return rng.standard_normal(size=size)
    raise ValueError("draw_noise does not handle kind %r" % (kind.kind,))


@dataclass(frozen=True)
class Dataset:
    features: sp.csr_matrix
    labels: np.ndarray
    dim: int
    provenance: str = ""

    def __len__(self):
        return self.labels.shape[0]


class LibsvmParseError(ValueError):
    pass


def load_libsvm(path):
    """Parse LIBSVM text: `label idx:val idx:val ...` with 1-based strictly
    increasing indices. Blank lines and '#' comments are skipped; .gz input
    is decompressed by extension."""
    opener = gzip.open if str(path).endswith(".gz") else open
    labels, rows, cols, vals = [], [], [], []
    dim = 0
    with opener(path, "rt") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError("line %d: malformed label %r" % (lineno, tokens[0]))
            if not math.isfinite(label):
                raise LibsvmParseError("line %d: non-finite label" % lineno)
            row = len(labels)
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError("line %d: malformed token %r" % (lineno, tok))
                if idx <= prev:
                    raise LibsvmParseError(
                        "line %d: feature index %d not strictly increasing" % (lineno, idx))
                if not math.isfinite(val):
                    raise LibsvmParseError("line %d: non-finite value" % lineno)
                prev = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
                dim = max(dim, idx)
            labels.append(label)
    features = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), max(dim, 1)))
    return Dataset(features=features, labels=np.array(labels, dtype=float),
                   dim=max(dim, 1), provenance=str(path))


def save_libsvm(data, path):
    """Inverse of load_libsvm; values are written with repr so representable
    decimals round-trip bit-exactly."""
    opener = gzip.open if str(path).endswith(".gz") else open
    csr = data.features.tocsr()
    with opener(path, "wt") as fh:
        for i in range(len(data)):
            start, end = csr.indptr[i], csr.indptr[i + 1]
            parts = [repr(float(data.labels[i]))]
            for j, v in zip(csr.indices[start:end], csr.data[start:end]):
                parts.append("%d:%s" % (j + 1, repr(float(v))))
            fh.write(" ".join(parts) + "\n")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def split_validation(data, fraction=0.10, rng=None):
    """Shuffle once and peel off round(fraction*n) examples as validation."""
    if not (0.0 < fraction < 1.0):
        raise ValueError("fraction must lie in (0, 1)")
    n = len(data)
    if n < 2:
        raise ValueError("need at least two examples to split")
    if rng is None:
        rng = np.random.default_rng(0)
    perm = rng.permutation(n)
    n_valid = _round_half_up(fraction * n)
    vidx, tidx = perm[:n_valid], perm[n_valid:]
    valid = Dataset(data.features[vidx], data.labels[vidx], data.dim,
                    data.provenance + "/valid")
    train = Dataset(data.features[tidx], data.labels[tidx], data.dim,
                    data.provenance + "/train")
    return train, valid


def corrupt_labels(data, kinds, rng):
    """One corrupted copy of the dataset per noise kind; feature storage is
    shared, only labels differ."""
    out = []
    for j, kind in enumerate(kinds):
        n = len(data)
        labels = data.labels.copy()
        if kind.kind == "sparse":
            n_hit = _round_half_up(kind.fraction * n)
            hit = rng.choice(n, size=n_hit, replace=False)
            labels[hit] += rng.uniform(-kind.beta, kind.beta, size=n_hit)
            if kind.gaussian_sigma > 0:
                labels += rng.normal(0.0, kind.gaussian_sigma, size=n)
        else:
            labels += draw_noise(kind, rng, size=n)
        out.append(Dataset(data.features, labels, data.dim,
                           data.provenance + "/source%d" % j))
    return out
