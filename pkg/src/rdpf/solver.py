"""Alternating minimization for the rate-distortion-perception function.

For multipliers ``s = (s1, s2)`` the solver looks for the output
distribution ``q`` that minimizes

    I(X; Xhat) + s1 E[d(X, Xhat)] + s2 D_f(p || q_Xhat).

Each step builds the log-kernel

    logA(x, xhat) = -s1 d(x, xhat) - s2 g(p(xhat) / q(xhat))

from the current iterate, computes the update factors

    c(xhat) = sum_x p(x) A(x, xhat) / sum_i q(i) A(x, i)

and moves ``q <- q * c``.  The statistic

    omega = ln max c - sum q c ln c

is the gap between a lower and an upper bound on the rate at the current
(distortion, perception) pair; iteration stops once it drops below the
tolerance and the optimality residual on ``c`` is small enough.

``mode="exact-implicit"`` instead evaluates ``g`` at the *next* iterate,
resolving the self-reference with a damped inner fixed-point loop.  It is a
diagnostic: both schemes share their fixed points.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp, xlogy

from . import simplex
from .errors import (
    DegenerateNormalizerError,
    DimensionError,
    LambdaInfeasibleError,
    SingularRatioError,
)
from .fdiv import divergence, get_divergence

CONVERGED = "converged"
MAX_ITERS = "max-iters"
DIVERGED = "diverged"
SUPPORT_COLLAPSED = "support-collapsed"

APPROXIMATE = "approximate"
EXACT_IMPLICIT = "exact-implicit"

EXACT_MAX_ALPHABET = 16
INNER_DAMPING = 0.5


class Multipliers(NamedTuple):
    s1: float
    s2: float


def as_multipliers(s):
    s1, s2 = (float(v) for v in s)
    if not (s1 >= 0 and s2 >= 0) or math.isinf(s1) or math.isinf(s2):
        raise ValueError(f"multipliers must be finite and nonnegative, got {(s1, s2)}")
    return Multipliers(s1, s2)


@dataclass(frozen=True)
class SolverConfig:
    """Controls for :func:`solve`.

    ``kkt_factor`` adds a second stopping requirement: the optimality
    residual of :func:`kkt_residual` must be at most ``kkt_factor * epsilon``.
    ``omega`` alone bounds the rate gap but lets small output masses keep
    large ``|c - 1|``.  Set it to ``None`` to stop on ``omega`` only.

    ``inner_fallback`` lets exact-implicit mode take an approximate step
    when the inner solve has no solution, which happens when a step of a
    kinked generator such as TV has to cross ``q(i) = p(i)``.  Without it
    such a step ends the run as diverged.
    """

    epsilon: float = 1e-9
    max_iters: int = 100_000
    q_floor: float = 1e-15
    mode: str = APPROXIMATE
    inner_tol: float = 1e-14
    inner_max_iters: int = 10_000
    kkt_factor: Optional[float] = 10.0
    inner_fallback: bool = True
    divergence_window: int = 50
    q0: Optional[tuple] = None
    record_trace: bool = True
    record_iterates: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.q_floor < 0:
            raise ValueError("q_floor must be nonnegative")
        if self.mode not in (APPROXIMATE, EXACT_IMPLICIT):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class SolverState:
    """Iterate ``q`` together with everything derived from it."""

    q: np.ndarray
    logA: np.ndarray
    log_norm: np.ndarray
    c: np.ndarray
    omega: float
    iteration: int = 0

    @property
    def next_q(self):
        return self.q * self.c


class TraceRecord(NamedTuple):
    iteration: int
    omega: float
    lower: float
    upper: float
    D: float
    P: float
    objective: float


@dataclass
class SolveResult:
    Q: np.ndarray
    q: np.ndarray
    D: float
    P: float
    R: float
    lower: float
    upper: float
    iterations: int
    status: str
    s: Multipliers
    divergence: str
    omega: float
    kkt_violation: float
    state: SolverState
    trace: list = field(default_factory=list)
    iterates: Optional[list] = None
    explicit_steps: int = 0

    @property
    def converged(self):
        return self.status == CONVERGED


def _check_problem(p, d, s, spec):
    p = simplex.source_distribution(p)
    d = simplex.distortion_matrix(d)
    s = as_multipliers(s)
    spec = get_divergence(spec)
    if d.shape[0] != p.shape[0]:
        raise DimensionError(f"distortion has {d.shape[0]} rows for {p.shape[0]} source symbols")
    if s.s2 > 0 and d.shape[0] != d.shape[1]:
        raise DimensionError("a perception constraint needs equal source and reconstruction alphabets")
    return p, d, s, spec


def _perceptible(p, d):
    return d.shape[0] == d.shape[1]


def _g_at(spec, p, v):
    """Exponent term at ``v``; zero-mass symbols take the ``t -> inf`` limit."""
    g = np.empty_like(v)
    pos = v > 0
    g[pos] = spec.g(p[pos] / v[pos])
    if not np.all(pos):
        if math.isinf(spec.g_inf):
            raise SingularRatioError(
                f"{spec.name} exponent term is unbounded at zero-mass symbols "
                f"{np.flatnonzero(~pos).tolist()}"
            )
        g[~pos] = spec.g_inf
    return g


def exponent_kernel(p, q, spec, s, d):
    """``logA(x, xhat) = -s1 d(x, xhat) - s2 g(p(xhat) / q(xhat))``."""
    s1, s2 = as_multipliers(s)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = np.asarray(d, dtype=float)
    if q.shape[0] != d.shape[1]:
        raise DimensionError(f"q has {q.shape[0]} entries for {d.shape[1]} reconstruction symbols")
    logA = -s1 * d
    if s2 > 0:
        if p.shape != q.shape:
            raise DimensionError("a perception constraint needs equal source and reconstruction alphabets")
        logA = logA - s2 * _g_at(get_divergence(spec), p, q)
    return logA


def omega_statistic(q, c):
    """``ln max c - sum q c ln c``, evaluated as a nonnegative sum.

    ``sum q c`` is one in exact arithmetic; normalizing by it and writing
    each term as ``w (ln max c - ln c)`` keeps rounding in ``c`` from
    pushing the statistic below zero.
    """
    w = q * c
    total = w.sum()
    pos = w > 0
    log_max = np.log(np.max(c))
    return float(np.sum(w[pos] * (log_max - np.log(c[pos]))) / total)


def _update_factors(q, p, logA):
    log_norm = simplex.log_normalizer(q, logA)
    W = np.exp(logA - log_norm[:, None])
    return log_norm, p @ W


def evaluate_state(q, p, spec, s, d, iteration=0):
    logA = exponent_kernel(p, q, spec, s, d)
    log_norm, c = _update_factors(q, p, logA)
    return SolverState(q, logA, log_norm, c, omega_statistic(q, c), iteration)


def _advance(q_new, q_floor):
    q_new = q_new / q_new.sum()
    tiny = (q_new > 0) & (q_new < q_floor)
    if np.any(tiny):
        q_new = np.where(tiny, 0.0, q_new)
        q_new = q_new / q_new.sum()
    return q_new


def iterate_once(state, p, spec, s, d, q_floor=0.0):
    """One approximate step: ``q <- q * c`` and re-evaluate at the new iterate."""
    q_new = _advance(state.q * state.c, q_floor)
    return evaluate_state(q_new, p, spec, s, d, state.iteration + 1)


def reconstruct_kernel(q, logA):
    """``Q(xhat | x) = q(xhat) A(x, xhat) / sum_i q(i) A(x, i)``."""
    q = np.asarray(q, dtype=float)
    logA = np.asarray(logA, dtype=float)
    log_norm = simplex.log_normalizer(q, logA)
    return q * np.exp(logA - log_norm[:, None])


def kkt_residual(q, p, logA):
    """Update factors ``c`` and the worst violation of the optimality conditions.

    At an optimum ``c <= 1`` everywhere with equality on the support of ``q``.
    """
    q = np.asarray(q, dtype=float)
    _, c = _update_factors(q, np.asarray(p, dtype=float), np.asarray(logA, dtype=float))
    return c, _kkt_violation(q, c)


def _kkt_violation(q, c):
    pos = q > 0
    on = np.abs(c[pos] - 1.0)
    off = np.maximum(c[~pos] - 1.0, 0.0)
    return float(max(on.max(initial=0.0), off.max(initial=0.0)))


class _Certificate(NamedTuple):
    lower: float
    upper: float
    D: float
    P: float
    w_tilde: float


def _certificate(state, p, spec, s, d):
    s1, s2 = s
    q, c = state.q, state.c
    Q = q * np.exp(state.logA - state.log_norm[:, None])
    D = simplex.expected_distortion(p, Q, d)
    q_next = state.next_q
    P = divergence(spec, p, q_next) if _perceptible(p, d) else math.nan

    w = -float(p @ state.log_norm)
    if s2 > 0:
        pos = q_next > 0
        t = p[pos] / q[pos]
        w += s2 * float(np.sum(q_next[pos] * t * spec.df(t)))
        w += s2 * (P - float(np.sum(q_next[pos] * spec.generator(t))))
    base = w - s1 * D - (s2 * P if s2 > 0 else 0.0)
    lower = base - math.log(float(np.max(c)))
    upper = base - float(np.sum(q * xlogy(c, c)))
    return _Certificate(lower, upper, D, P, w)


def bound_pair(state, p, spec, s, d):
    """Lower and upper bounds on the rate at the state's (distortion, perception).

    Both share ``W - s1 D - s2 P`` and differ by exactly ``omega``.  The upper
    bound equals the mutual information of the reconstructed kernel.
    """
    p, d, s, spec = _check_problem(p, d, s, spec)
    cert = _certificate(state, p, spec, s, d)
    return cert.lower, cert.upper


def w_tilde(state, p, spec, s, d):
    p, d, s, spec = _check_problem(p, d, s, spec)
    return _certificate(state, p, spec, s, d).w_tilde


def lagrangian_lower_bound(lam, state, p, spec, s, d, tol=1e-10):
    """Dual lower bound ``sum_x p(x) ln lam(x) - s1 D - s2 sum p Q g``.

    ``lam`` must be nonnegative with ``sum_x p(x) lam(x) A(x, xhat) <= 1`` for
    every ``xhat``; otherwise :class:`LambdaInfeasibleError` is raised.
    """
    p, d, s, spec = _check_problem(p, d, s, spec)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != p.shape:
        raise DimensionError(f"lambda has shape {lam.shape}, expected {p.shape}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise LambdaInfeasibleError("lambda must be finite and nonnegative")
    with np.errstate(divide="ignore"):
        log_pl = np.log(p * lam)
    log_load = logsumexp(state.logA + log_pl[:, None], axis=0)
    worst = int(np.argmax(log_load))
    if log_load[worst] > math.log1p(tol):
        raise LambdaInfeasibleError(
            f"sum_x p(x) lambda(x) A(x, {worst}) = {math.exp(log_load[worst]):.12g} exceeds 1",
            violating=worst,
        )
    s1, s2 = s
    Q = reconstruct_kernel(state.q, state.logA)
    D = simplex.expected_distortion(p, Q, d)
    with np.errstate(divide="ignore"):
        value = float(p @ np.log(lam)) - s1 * D
    if s2 > 0:
        q_next = p @ Q
        pos = q_next > 0
        value -= s2 * float(np.sum(q_next[pos] * spec.g(p[pos] / state.q[pos])))
    return value


def _initial_q(config, d):
    n = d.shape[1]
    if config.q0 is None:
        return np.full(n, 1.0 / n)
    q0 = simplex.check_distribution(config.q0, "initial q")
    if q0.shape[0] != n:
        raise DimensionError(f"initial q has {q0.shape[0]} entries, expected {n}")
    if np.any(q0 <= 0):
        raise ValueError("initial q must have nonzero components")
    return q0


def _diverging(envelope, window):
    if len(envelope) < window + 1:
        return False
    vals = list(envelope)[-(window + 1):]
    return all(b > a for a, b in zip(vals, vals[1:]))


def _stalled_on_collapse(state, tol, epsilon):
    """A zero-mass symbol wants mass back while the support has converged."""
    q, c = state.q, state.c
    zero = q == 0
    if not np.any(zero) or np.max(c[zero]) - 1.0 <= tol:
        return False
    pos = ~zero
    omega_support = omega_statistic(q[pos], c[pos])
    return omega_support <= epsilon and float(np.max(np.abs(c[pos] - 1.0))) <= max(tol, epsilon)


def _finite(state):
    return math.isfinite(state.omega) and np.all(np.isfinite(state.c)) and np.all(np.isfinite(state.q))


def _inner_step(state, p, spec, s, d, config):
    """Resolve ``q' = q * c(q; A evaluated at q')`` by damped iteration."""
    q = state.q
    guess = q * state.c
    guess = guess / guess.sum()
    for _ in range(config.inner_max_iters):
        logA = exponent_kernel(p, guess, spec, s, d)
        _, c = _update_factors(q, p, logA)
        F = q * c
        if np.max(np.abs(F - guess)) <= config.inner_tol:
            return F
        guess = (1.0 - INNER_DAMPING) * guess + INNER_DAMPING * F
    return None


def solve(p, spec, s, d, config=None):
    """Run the alternating minimization for one pair of multipliers.

    Never raises on numerical failure of the iteration; the returned
    :class:`SolveResult` carries the status and the iterate with the
    smallest optimality residual seen.
    """
    config = config or SolverConfig()
    p, d, s, spec = _check_problem(p, d, s, spec)
    exact = config.mode == EXACT_IMPLICIT
    if exact and d.shape[1] > EXACT_MAX_ALPHABET:
        raise DimensionError(f"exact-implicit mode supports at most {EXACT_MAX_ALPHABET} symbols")

    state = evaluate_state(_initial_q(config, d), p, spec, s, d)
    kkt_tol = None if config.kkt_factor is None else config.kkt_factor * config.epsilon
    trace = []
    iterates = [] if config.record_iterates else None
    envelope = deque(maxlen=config.divergence_window + 2)
    prev_omega = None
    best, best_violation = state, math.inf
    status = MAX_ITERS
    explicit_steps = 0

    while True:
        if not _finite(state):
            status = DIVERGED
            break
        if iterates is not None:
            iterates.append(state.q.copy())
        if config.record_trace:
            cert = _certificate(state, p, spec, s, d)
            objective = cert.upper + s.s1 * cert.D + (s.s2 * cert.P if s.s2 > 0 else 0.0)
            trace.append(TraceRecord(state.iteration, state.omega, cert.lower, cert.upper,
                                     cert.D, cert.P, objective))
        violation = _kkt_violation(state.q, state.c)
        if violation < best_violation:
            best, best_violation = state, violation
        if state.omega <= config.epsilon and (kkt_tol is None or violation <= kkt_tol):
            status = CONVERGED
            break
        if _stalled_on_collapse(state, kkt_tol or config.epsilon, config.epsilon):
            status = SUPPORT_COLLAPSED
            break
        envelope.append(state.omega if prev_omega is None else max(state.omega, prev_omega))
        prev_omega = state.omega
        if _diverging(envelope, config.divergence_window):
            status = DIVERGED
            break
        if state.iteration >= config.max_iters:
            break
        try:
            if exact:
                q_next = _inner_step(state, p, spec, s, d, config)
                if q_next is None:
                    if not config.inner_fallback:
                        status = DIVERGED
                        break
                    explicit_steps += 1
                    q_next = state.next_q
                state = evaluate_state(_advance(q_next, config.q_floor), p, spec, s, d,
                                       state.iteration + 1)
            else:
                state = iterate_once(state, p, spec, s, d, config.q_floor)
        except (SingularRatioError, DegenerateNormalizerError, FloatingPointError):
            status = DIVERGED
            break

    final = state if status in (CONVERGED, SUPPORT_COLLAPSED) else best
    result = _package(final, p, spec, s, d, status, state.iteration, trace, iterates)
    result.explicit_steps = explicit_steps
    return result


def solve_exact_implicit(p, spec, s, d, config=None):
    config = replace(config or SolverConfig(), mode=EXACT_IMPLICIT)
    return solve(p, spec, s, d, config)


def _package(state, p, spec, s, d, status, iterations, trace, iterates):
    cert = _certificate(state, p, spec, s, d)
    Q = reconstruct_kernel(state.q, state.logA)
    return SolveResult(
        Q=Q,
        q=p @ Q,
        D=cert.D,
        P=cert.P,
        R=cert.upper,
        lower=cert.lower,
        upper=cert.upper,
        iterations=iterations,
        status=status,
        s=s,
        divergence=spec.name,
        omega=state.omega,
        kkt_violation=_kkt_violation(state.q, state.c),
        state=state,
        trace=trace,
        iterates=iterates,
    )
