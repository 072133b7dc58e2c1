"""Linearization of the update map ``q -> q * c(q)`` at a fixed point.

With ``W(x, i) = A(x, i) / sum_k q*(k) A(x, k)``,

    M[i, j]  = q*(i) sum_x p(x) W(x, i) W(x, j)
    Gamma    = s2 diag(q*(i) d^2/dq(i)^2 D_f(p || q) at q*)

the approximate scheme has Jacobian ``(I - M)(I - Gamma)`` and the exact
scheme's Jacobian ``J`` solves ``J = (I - M)(I - Gamma J)``.  The spectral
radius of the former governs the local contraction rate of :func:`solve`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import simplex
from .errors import CurvatureUnavailableError, DimensionError
from .fdiv import curvature_vector, get_divergence
from .solver import (
    _advance,
    _check_problem,
    _kkt_violation,
    _update_factors,
    exponent_kernel,
)

OK = "ok"
CURVATURE_UNAVAILABLE = "curvature-unavailable"
SINGULAR = "singular"
REDUCED_SUPPORT = "reduced-support"


def assemble_M(q_star, p, logA):
    q_star = np.asarray(q_star, dtype=float)
    p = np.asarray(p, dtype=float)
    logA = np.asarray(logA, dtype=float)
    log_norm = simplex.log_normalizer(q_star, logA)
    W = np.exp(logA - log_norm[:, None])
    return q_star[:, None] * ((W.T * p) @ W)


def assemble_Gamma(q_star, p, spec, s2):
    q_star = np.asarray(q_star, dtype=float)
    if s2 == 0:
        return np.zeros((q_star.size, q_star.size))
    return np.diag(s2 * q_star * curvature_vector(spec, p, q_star))


def jacobian_approx(M, Gamma):
    M = np.asarray(M, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if M.shape != Gamma.shape or M.shape[0] != M.shape[1]:
        raise DimensionError(f"shapes {M.shape} and {Gamma.shape} do not agree")
    eye = np.eye(M.shape[0])
    return (eye - M) @ (eye - Gamma)


def jacobian_exact(M, Gamma):
    """Solve ``J = (I - M)(I - Gamma J)`` for ``J``.

    Raises ``numpy.linalg.LinAlgError`` if ``I + (I - M) Gamma`` is singular.
    """
    M = np.asarray(M, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if M.shape != Gamma.shape or M.shape[0] != M.shape[1]:
        raise DimensionError(f"shapes {M.shape} and {Gamma.shape} do not agree")
    eye = np.eye(M.shape[0])
    lhs = eye + (eye - M) @ Gamma
    if np.linalg.cond(lhs) > 1e14:
        raise np.linalg.LinAlgError("I + (I - M) Gamma is singular")
    return np.linalg.solve(lhs, eye - M)


def spectral_radius(J):
    return float(np.max(np.abs(np.linalg.eigvals(J))))


def empirical_rate(iterates, q_star, floor=1e-13, min_points=20):
    """Geometric contraction rate fitted to ``||q_n - q*||``.

    Fits ``ln ||q_n - q*||`` against ``n`` by least squares over the later
    half of the iterates whose error is above ``floor`` and returns the
    exponentiated slope.  Returns ``0.0`` when every iterate already sits at
    ``q*`` and ``None`` when fewer than ``min_points`` iterates are usable.
    """
    q_star = np.asarray(q_star, dtype=float)
    errors = np.array([np.linalg.norm(np.asarray(q) - q_star) for q in iterates])
    if errors.size and np.all(errors <= floor):
        return 0.0
    usable = np.flatnonzero(errors > floor)
    if usable.size < min_points:
        return None
    tail = usable[-max(min_points, usable.size // 2):]
    slope = np.polyfit(tail.astype(float), np.log(errors[tail]), 1)[0]
    return float(math.exp(slope))


@dataclass
class SpectralReport:
    M: Optional[np.ndarray]
    Gamma: Optional[np.ndarray]
    J_exact: Optional[np.ndarray]
    J_approx: Optional[np.ndarray]
    eigenvalues_M: Optional[np.ndarray]
    eigenvalues_exact: Optional[np.ndarray]
    eigenvalues_approx: Optional[np.ndarray]
    spectral_radius_exact: Optional[float]
    spectral_radius_approx: Optional[float]
    empirical_rate: Optional[float]
    status: str

    def to_json(self):
        def pairs(vals):
            if vals is None:
                return None
            return [[float(v.real), float(v.imag)] for v in np.sort_complex(np.asarray(vals, complex))]

        return {
            "status": self.status,
            "eigenvalues_M": pairs(self.eigenvalues_M),
            "eigenvalues": pairs(self.eigenvalues_approx),
            "eigenvalues_exact": pairs(self.eigenvalues_exact),
            "spectral_radius": self.spectral_radius_approx,
            "spectral_radius_exact": self.spectral_radius_exact,
            "empirical_rate": self.empirical_rate,
        }


def analyze(q_star, p, spec, s, d, iterates=None):
    """Assemble the full :class:`SpectralReport` at ``q_star``."""
    p, d, s, spec = _check_problem(p, d, s, spec)
    q_star = np.asarray(q_star, dtype=float)
    rate = empirical_rate(iterates, q_star) if iterates is not None else None
    if not np.all(q_star > 0):
        # linearization is only analyzed at full-support fixed points
        return SpectralReport(None, None, None, None, None, None, None, None, None, rate,
                              REDUCED_SUPPORT)
    logA = exponent_kernel(p, q_star, spec, s, d)
    M = assemble_M(q_star, p, logA)
    eig_M = np.linalg.eigvals(M)
    status = OK
    try:
        Gamma = assemble_Gamma(q_star, p, spec, s.s2)
    except CurvatureUnavailableError:
        return SpectralReport(M, None, None, None, eig_M, None, None, None, None, rate,
                              CURVATURE_UNAVAILABLE)
    J_a = jacobian_approx(M, Gamma)
    eig_a = np.linalg.eigvals(J_a)
    try:
        J = jacobian_exact(M, Gamma)
        eig_J = np.linalg.eigvals(J)
        rho_J = float(np.max(np.abs(eig_J)))
    except np.linalg.LinAlgError:
        J = eig_J = rho_J = None
        status = SINGULAR
    return SpectralReport(M, Gamma, J, J_a, eig_M, eig_J, eig_a, rho_J,
                          float(np.max(np.abs(eig_a))), rate, status)


def report_for(result, p, d, q_star=None):
    """Spectral report at the final iterate of a :class:`~rdpf.solver.SolveResult`."""
    q_star = result.state.q if q_star is None else q_star
    return analyze(q_star, p, result.divergence, result.s, d, result.iterates)


def locate_fixed_point(p, spec, s, d, tol=1e-13, max_iters=200_000, q_floor=1e-15):
    """Fixed point of ``q -> q * c(q)`` regardless of its stability.

    Runs the damped map ``q <- (1 - beta) q + beta q c(q)``, halving ``beta``
    whenever the residual ``max |c - 1|`` grows.  Damping keeps the fixed
    points and rescales the Jacobian eigenvalues to ``1 - beta (1 - theta)``,
    so a small enough ``beta`` contracts whenever every eigenvalue of the
    undamped Jacobian is real and below one.  Masses below ``q_floor`` are
    set to zero, so reduced-support fixed points are reached exactly.
    """
    p, d, s, spec = _check_problem(p, d, s, spec)
    n = d.shape[1]
    q = np.full(n, 1.0 / n)
    beta = 1.0
    prev = math.inf
    for _ in range(max_iters):
        logA = exponent_kernel(p, q, spec, s, d)
        _, c = _update_factors(q, p, logA)
        residual = _kkt_violation(q, c)
        if residual <= tol:
            return q
        if residual > prev:
            beta *= 0.5
        prev = residual
        q = _advance((1.0 - beta) * q + beta * q * c, q_floor)
    raise RuntimeError(f"fixed point not located within {max_iters} iterations (residual {prev:.3g})")


def approx_radius(p, spec, s, d):
    """Spectral radius of ``(I - M)(I - Gamma)`` at the fixed point for ``s``."""
    p, d, s, spec = _check_problem(p, d, s, spec)
    q = locate_fixed_point(p, spec, s, d)
    logA = exponent_kernel(p, q, spec, s, d)
    J_a = jacobian_approx(assemble_M(q, p, logA), assemble_Gamma(q, p, spec, s.s2))
    return spectral_radius(J_a)


def instability_threshold(p, spec, s1, d, s2_start=1.0, rtol=1e-6, s2_cap=1e6):
    """Smallest ``s2`` at which ``rho((I - M)(I - Gamma))`` reaches one.

    Brackets by doubling from ``s2_start`` and then bisects.  Returns
    ``math.inf`` if no crossing is found below ``s2_cap``.
    """
    spec = get_divergence(spec)
    lo, hi = 0.0, float(s2_start)
    while approx_radius(p, spec, (s1, hi), d) < 1.0:
        lo, hi = hi, 2.0 * hi
        if hi > s2_cap:
            return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if approx_radius(p, spec, (s1, mid), d) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
