"""Probability vectors, transition kernels and log-domain accumulation.

All quantities are plain float64 numpy arrays.  A source distribution is a
1-D array over the source alphabet, a kernel ``Q`` is a 2-D array with
``Q[x, xhat] = Q(xhat | x)`` and a distortion matrix has the same layout.
Logarithms are natural throughout.
"""

import numpy as np

from .errors import DegenerateNormalizerError, DimensionError, NotOnSimplexError

SIMPLEX_TOL = 1e-12


def check_distribution(probs, name="distribution", tol=SIMPLEX_TOL):
    """Return ``probs`` as a float array after checking it lies on the simplex."""
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise NotOnSimplexError(f"{name} has negative or non-finite entries")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise NotOnSimplexError(f"{name} sums to {float(total)!r}, not 1")
    return arr / total


def source_distribution(probs, tol=SIMPLEX_TOL):
    """Validate a source distribution.

    Zero-mass symbols are rejected; strip them before calling.
    """
    p = check_distribution(probs, "source distribution", tol)
    if np.any(p == 0):
        zeros = np.flatnonzero(p == 0).tolist()
        raise NotOnSimplexError(f"source symbols {zeros} have zero mass; remove them")
    return p


def transition_kernel(rows, tol=SIMPLEX_TOL):
    Q = np.asarray(rows, dtype=float)
    if Q.ndim != 2 or Q.size == 0:
        raise DimensionError(f"kernel must be a non-empty 2-D array, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)) or np.any(Q < 0):
        raise NotOnSimplexError("kernel has negative or non-finite entries")
    sums = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise NotOnSimplexError(f"kernel rows {bad.tolist()} do not sum to 1")
    return Q / sums[:, None]


def distortion_matrix(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.size == 0:
        raise DimensionError(f"distortion must be a non-empty 2-D array, got shape {d.shape}")
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError("distortion entries must be finite and nonnegative")
    return d


def hamming(n, m=None):
    """Hamming distortion between alphabets of sizes ``n`` and ``m``."""
    m = n if m is None else m
    return 1.0 - np.eye(n, m)


def _check_pair(p, Q):
    if Q.ndim != 2 or Q.shape[0] != p.shape[0]:
        raise DimensionError(
            f"kernel shape {Q.shape} does not match source alphabet size {p.shape[0]}"
        )


def induced_marginal(p, Q):
    """Output distribution ``sum_x p(x) Q(.|x)``."""
    p = np.asarray(p, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _check_pair(p, Q)
    return p @ Q


def mutual_information(p, Q):
    """Mutual information I(X; Xhat) in nats, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _check_pair(p, Q)
    q = p @ Q
    joint = p[:, None] * Q
    mask = joint > 0
    ratio = Q[mask] / np.broadcast_to(q, Q.shape)[mask]
    return max(float(np.sum(joint[mask] * np.log(ratio))), 0.0)


def expected_distortion(p, Q, d):
    p = np.asarray(p, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = np.asarray(d, dtype=float)
    _check_pair(p, Q)
    if d.shape != Q.shape:
        raise DimensionError(f"distortion shape {d.shape} does not match kernel shape {Q.shape}")
    return float(np.sum(p[:, None] * Q * d))


def log_normalizer(q, logA):
    """Stable ``ln sum_i q(i) exp(logA[..., i])``.

    ``logA`` may be a single row or a matrix of rows; the shift is taken
    over entries with positive weight only, so zero-weight columns never
    cause underflow of the others.
    """
    q = np.asarray(q, dtype=float)
    logA = np.asarray(logA, dtype=float)
    if logA.shape[-1] != q.shape[0]:
        raise DimensionError(f"weights of length {q.shape[0]} vs rows of length {logA.shape[-1]}")
    support = q > 0
    vals = logA[..., support]
    if vals.shape[-1] == 0:
        raise DegenerateNormalizerError("weight vector has no mass")
    shift = np.max(vals, axis=-1)
    if np.any(np.isneginf(shift)):
        raise DegenerateNormalizerError("all weighted entries have logA = -inf")
    with np.errstate(invalid="ignore"):
        total = np.sum(q[support] * np.exp(vals - shift[..., None]), axis=-1)
    out = shift + np.log(total)
    return float(out) if np.ndim(out) == 0 else out
