"""Independent references: lattice search and binary closed forms.

:func:`grid_oracle` minimizes mutual information directly over a lattice of
row-stochastic kernels, with no use of the alternating-minimization
machinery.  The binary closed forms cover a Bernoulli source under Hamming
distortion, with and without a total-variation perception constraint.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import xlogy

from . import simplex
from .errors import DimensionError, OracleInfeasibleError
from .fdiv import get_divergence

MAX_FREE_PARAMETERS = 6
MAX_LATTICE_POINTS = 5 * 10**7
REFINE_BUDGET = 2 * 10**6
MAX_REFINE_PASSES = 50
BLOCK = 2**17
FEAS_TOL = 1e-12


def binary_entropy(x):
    """Binary entropy in nats."""
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log(1 - x)


def binary_rdf(p1, D):
    """Rate-distortion function of a Bernoulli(p1) source under Hamming distortion, in nats."""
    p1 = min(p1, 1.0 - p1)
    if D < 0:
        raise ValueError("distortion level must be nonnegative")
    if D >= p1:
        return 0.0
    return binary_entropy(p1) - binary_entropy(D)


def _tv_regions(p1, P):
    q1 = 1.0 - p1
    inactive_below = P / (1.0 - 2.0 * (p1 - P))
    zero_from = 2.0 * p1 * q1 - (q1 - p1) * P
    return inactive_below, zero_from


def closed_form_binary_tv(p1, D, P):
    """Bernoulli(p1) source, Hamming distortion, total-variation perception; nats.

    Three regimes: the perception constraint is slack and the rate equals
    the classical function; both constraints bind, which pins the joint law
    to ``P(X=1, Xhat=0) = (D + P) / 2`` and ``P(X=0, Xhat=1) = (D - P) / 2``
    (symbol 1 the minority); or the rate is zero.
    """
    p1 = min(p1, 1.0 - p1)
    if D < 0 or P < 0:
        raise ValueError("constraint levels must be nonnegative")
    if P >= p1 or p1 == 0.5:
        # a symmetric source already has a uniform classical output law
        return binary_rdf(p1, D)
    q1 = 1.0 - p1
    inactive_below, zero_from = _tv_regions(p1, P)
    if D >= zero_from:
        return 0.0
    if D <= inactive_below:
        return binary_rdf(p1, D)
    rate = (binary_entropy(p1 - P)
            - p1 * binary_entropy((D + P) / (2 * p1))
            - q1 * binary_entropy((D - P) / (2 * q1)))
    return max(rate, 0.0)


def binary_tv_multipliers(p1, D, P):
    """Lagrange multipliers ``(s1, s2)`` whose optimum sits at ``(D, P)``.

    These are the negative partial derivatives of :func:`closed_form_binary_tv`.
    In the slack regime ``s2 = 0`` and the optimum lands at ``D`` with a
    perception value below ``P``.
    """
    p1 = min(p1, 1.0 - p1)
    q1 = 1.0 - p1
    if not 0 < D < p1 + q1:
        raise ValueError("distortion level out of range")
    if P >= p1 or p1 == 0.5 or D <= _tv_regions(p1, P)[0]:
        if D >= p1:
            raise ValueError("zero-rate region has no unique multipliers")
        return math.log((1 - D) / D), 0.0
    if D >= _tv_regions(p1, P)[1]:
        raise ValueError("zero-rate region has no unique multipliers")
    a, b, qhat = (D + P) / 2, (D - P) / 2, p1 - P
    s1 = 0.5 * (math.log((p1 - a) / a) + math.log((q1 - b) / b))
    s2 = math.log((1 - qhat) / qhat) + 0.5 * math.log((p1 - a) / a) - 0.5 * math.log((q1 - b) / b)
    return s1, s2


@dataclass
class OracleResult:
    R: float
    argmin_Q: np.ndarray
    D_value: float
    P_value: float
    D_active: bool
    P_active: bool
    grid_step: float
    D_slack: float
    P_slack: float
    points: int


def _row_lattice(m, K):
    """All length-``m`` compositions of ``K``, scaled to the simplex."""
    rows = []
    for bars in combinations(range(K + m - 1), m - 1):
        edges = (-1,) + bars + (K + m - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(m)])
    return np.array(rows, dtype=float) / K


def _batch_divergence(spec, p, marg):
    pos = marg > 0
    safe = np.where(pos, marg, 1.0)
    vals = np.where(pos, safe * spec.generator(p / safe), 0.0).sum(axis=1)
    lost = ((~pos) * (p > 0) * p).sum(axis=1)
    with np.errstate(invalid="ignore"):
        extra = np.where(lost > 0, spec.slope_inf * lost, 0.0)
    return vals + extra


def _search(p, d, spec, row_sets, D, P, perceptible):
    """Exhaustive minimum over the product of per-row candidate sets.

    Uses ``I = sum_x p(x) sum_xhat Q ln Q - sum_xhat q ln q`` so that only
    the marginal has to be formed per kernel.
    """
    n = len(row_sets)
    neg_ent = [p[x] * xlogy(r, r).sum(axis=1) for x, r in enumerate(row_sets)]
    row_dist = [p[x] * (r @ d[x]) for x, r in enumerate(row_sets)]
    row_mass = [p[x] * r for x, r in enumerate(row_sets)]
    sizes = tuple(len(r) for r in row_sets)
    total = math.prod(sizes)
    best = (math.inf, None, None, None)
    for start in range(0, total, BLOCK):
        idx = np.unravel_index(np.arange(start, min(start + BLOCK, total)), sizes)
        dist = sum(row_dist[x][idx[x]] for x in range(n))
        ok = dist <= D + FEAS_TOL
        if not np.any(ok):
            continue
        idx = [i[ok] for i in idx]
        dist = dist[ok]
        marg = sum(row_mass[x][idx[x]] for x in range(n))
        if perceptible:
            ok = _batch_divergence(spec, p, marg) <= P + FEAS_TOL
            if not np.any(ok):
                continue
            idx = [i[ok] for i in idx]
            dist, marg = dist[ok], marg[ok]
        info = sum(neg_ent[x][idx[x]] for x in range(n)) - xlogy(marg, marg).sum(axis=1)
        k = int(np.argmin(info))
        if info[k] < best[0]:
            Q = np.stack([row_sets[x][idx[x][k]] for x in range(n)])
            div = float(_batch_divergence(spec, p, marg[k:k + 1])[0]) if perceptible else math.nan
            best = (max(float(info[k]), 0.0), Q, float(dist[k]), div)
    return best, total


def _local_rows(row, h, r):
    """Rows within ``r`` sub-steps of ``h / r`` of ``row`` in every free coordinate."""
    m = row.size
    offsets = np.arange(-r, r + 1) * (h / r)
    grids = np.meshgrid(*([offsets] * (m - 1)), indexing="ij")
    free = row[:-1] + np.stack([g.ravel() for g in grids], axis=1)
    last = 1.0 - free.sum(axis=1)
    rows = np.column_stack([free, last])
    keep = np.all(rows >= -1e-15, axis=1)
    return np.clip(rows[keep], 0.0, 1.0)


def grid_oracle(p, spec, d, D, P, grid_step=1e-2, refine=True):
    """Minimum mutual information over a kernel lattice, by brute force.

    Every row of the kernel ranges over a uniform lattice of the simplex
    with spacing ``grid_step``; the feasible lattice kernel of smallest
    mutual information is then polished by searches on a finer local
    lattice, recentred on each improved kernel.  Constraints are enforced
    exactly, so the returned rate is attained by a feasible kernel and is
    never below the true value.  ``D_slack``/``P_slack`` estimate how much one lattice cell
    moves each constraint.
    """
    p = simplex.source_distribution(p)
    d = simplex.distortion_matrix(d)
    spec = get_divergence(spec)
    n, m = d.shape
    if n != p.size:
        raise DimensionError(f"distortion has {n} rows for {p.size} source symbols")
    if n * (m - 1) > MAX_FREE_PARAMETERS:
        raise DimensionError(f"{n}x{m} kernels have more than {MAX_FREE_PARAMETERS} free parameters")
    if not 1e-4 <= grid_step <= 1e-1:
        raise ValueError("grid_step must lie in [1e-4, 1e-1]")
    perceptible = n == m
    K = int(round(1.0 / grid_step))
    h = 1.0 / K
    lattice = _row_lattice(m, K)
    if len(lattice) ** n > MAX_LATTICE_POINTS:
        raise ValueError(f"lattice of {len(lattice) ** n} kernels is too large; coarsen grid_step")

    (R, Q, dist, div), points = _search(p, d, spec, [lattice] * n, D, P, perceptible)
    if Q is None:
        raise OracleInfeasibleError(f"no lattice kernel meets D <= {D} and P <= {P}")
    if refine:
        free = n * (m - 1)
        r = 10
        while (2 * r + 1) ** free > REFINE_BUDGET and r > 1:
            r -= 1
        # recentre until the incumbent stops improving; a single window can
        # miss the optimum when it sits in a thin wedge between two active
        # constraints
        for _ in range(MAX_REFINE_PASSES):
            (R2, Q2, dist2, div2), extra = _search(
                p, d, spec, [_local_rows(Q[x], h, r) for x in range(n)], D, P, perceptible
            )
            points += extra
            if Q2 is None or R2 >= R - 1e-15:
                break
            R, Q, dist, div = R2, Q2, dist2, div2

    d_slack = h * float(np.ptp(d)) if d.size > 1 else 0.0
    p_slack = 0.0
    if perceptible:
        marg = p @ Q
        with np.errstate(divide="ignore", invalid="ignore"):
            g = spec.g(np.where(marg > 0, p / np.where(marg > 0, marg, 1.0), 0.0))
        p_slack = 2.0 * h * float(np.max(np.abs(g))) if np.all(marg > 0) else math.inf
    return OracleResult(
        R=R,
        argmin_Q=Q,
        D_value=dist,
        P_value=div,
        D_active=dist >= D - d_slack,
        P_active=perceptible and div >= P - p_slack,
        grid_step=h,
        D_slack=d_slack,
        P_slack=p_slack,
        points=points,
    )
