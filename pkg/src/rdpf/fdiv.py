"""f-divergence generators.

An :class:`FDivergence` bundles a convex generator ``f`` with ``f(1) = 0``,
a fixed selection from its subdifferential and (when it exists) its second
derivative.  The divergence is ``D_f(p || q) = sum_i q(i) f(p(i) / q(i))``.

The update kernel of the solver needs the partial derivative of
``q -> D_f(p || q)`` with respect to one coordinate,

    g(t) = f(t) - t f'(t),   t = p(i) / q(i),

which :func:`g_term` evaluates, and the spectral analysis needs the second
partial ``f''(t) p(i)^2 / q(i)^3`` (:func:`perception_curvature`).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .errors import CurvatureUnavailableError, DimensionError, SingularRatioError


@dataclass(frozen=True)
class FDivergence:
    """Generator of an f-divergence.

    Attributes
    ----------
    name : str
        Identifier used on the command line.
    f, df, d2f : callable
        Vectorized generator, subgradient selection and second derivative
        on ``t > 0``.  ``d2f`` is ``None`` when ``f`` is not twice
        differentiable.
    f0 : float
        ``lim f(t)`` as ``t -> 0+``.
    slope_inf : float
        ``lim f(t) / t`` as ``t -> inf``; the weight of ``p(i)`` when
        ``q(i) = 0``.
    g_inf : float
        ``lim f(t) - t f'(t)`` as ``t -> inf``; used for reconstruction
        symbols whose mass has collapsed to zero.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Optional[Callable[[np.ndarray], np.ndarray]]
    f0: float
    slope_inf: float
    g_inf: float

    def __repr__(self):
        return f"FDivergence({self.name!r})"

    def generator(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t == 0, self.f0, self.f(t))
        return out

    def g(self, t):
        """``f(t) - t f'(t)`` with the ``t -> 0`` limit ``f(0+)``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t == 0, self.f0, self.f(t) - t * self.df(t))
        return out


def _kl_f(t):
    return xlogy(t, t)


def _kl_df(t):
    return np.log(t) + 1.0


def _kl_d2f(t):
    return 1.0 / t


def _tv_f(t):
    return 0.5 * np.abs(t - 1.0)


def _tv_df(t):
    # np.sign(0) == 0 picks the midpoint of [-1/2, 1/2] at the kink
    return 0.5 * np.sign(t - 1.0)


def _chi2_f(t):
    return (t - 1.0) ** 2


def _chi2_df(t):
    return 2.0 * (t - 1.0)


def _chi2_d2f(t):
    return np.full_like(np.asarray(t, dtype=float), 2.0)


def _hellinger_f(t):
    return (np.sqrt(t) - 1.0) ** 2


def _hellinger_df(t):
    return 1.0 - 1.0 / np.sqrt(t)


def _hellinger_d2f(t):
    return 0.5 * t ** -1.5


KL = FDivergence("kl", _kl_f, _kl_df, _kl_d2f, f0=0.0, slope_inf=math.inf, g_inf=-math.inf)
TV = FDivergence("tv", _tv_f, _tv_df, None, f0=0.5, slope_inf=0.5, g_inf=-0.5)
CHI2 = FDivergence("chi2", _chi2_f, _chi2_df, _chi2_d2f, f0=1.0, slope_inf=math.inf, g_inf=-math.inf)
HELLINGER = FDivergence(
    "hellinger", _hellinger_f, _hellinger_df, _hellinger_d2f, f0=1.0, slope_inf=1.0, g_inf=-math.inf
)

DIVERGENCES = {spec.name: spec for spec in (KL, TV, CHI2, HELLINGER)}


def get_divergence(name):
    if isinstance(name, FDivergence):
        return name
    try:
        return DIVERGENCES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown divergence {name!r}; choose from {', '.join(DIVERGENCES)}"
        ) from None


def _same_alphabet(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"divergence needs vectors on one alphabet, got {p.shape} and {q.shape}")
    return p, q


def divergence(spec, p, q):
    """``D_f(p || q)``; returns ``math.inf`` when the divergence is infinite."""
    spec = get_divergence(spec)
    p, q = _same_alphabet(p, q)
    pos = q > 0
    total = float(np.sum(q[pos] * spec.generator(p[pos] / q[pos])))
    # q(i) = 0: perspective limit p(i) * lim f(t)/t, and 0 f(0/0) := 0
    lost = p[~pos]
    lost = lost[lost > 0]
    if lost.size:
        if math.isinf(spec.slope_inf):
            return math.inf
        total += spec.slope_inf * float(lost.sum())
    return max(total, 0.0)


def g_vector(spec, p, v):
    """Exponent term ``g(p(i) / v(i))`` for every symbol; ``v`` must be positive."""
    spec = get_divergence(spec)
    p, v = _same_alphabet(p, v)
    if np.any(v <= 0):
        raise SingularRatioError(f"v vanishes at symbols {np.flatnonzero(v <= 0).tolist()}")
    return spec.g(p / v)


def g_term(spec, p, v, xhat):
    spec = get_divergence(spec)
    p, v = _same_alphabet(p, v)
    if v[xhat] <= 0:
        raise SingularRatioError(f"v({xhat}) = 0")
    return float(spec.g(p[xhat] / v[xhat]))


def curvature_vector(spec, p, q):
    """``d^2/dq(i)^2 D_f(p || q)`` for every symbol."""
    spec = get_divergence(spec)
    if spec.d2f is None:
        raise CurvatureUnavailableError(f"{spec.name} has no second derivative")
    p, q = _same_alphabet(p, q)
    if np.any(q <= 0):
        raise SingularRatioError(f"q vanishes at symbols {np.flatnonzero(q <= 0).tolist()}")
    t = p / q
    with np.errstate(divide="ignore", invalid="ignore"):
        t2f = np.where(t == 0, 0.0, t * t * spec.d2f(t))
    return t2f / q


def perception_curvature(spec, p, q, xhat):
    return float(curvature_vector(spec, p, q)[xhat])
