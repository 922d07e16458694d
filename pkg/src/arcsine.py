"""
Lamperti arcsine laws and one-sided stable samplers.

This module contains:
- ``SimplexPoint``: a probability vector on the simplex
- The two-component Lamperti density and its CDF (closed form and quadrature)
- Kanter's sampler for positive alpha-stable variables and the simplex
  variable ``Z = zeta / sum(zeta)`` built from it
- Kolmogorov-Smirnov statistics used as goodness-of-fit references
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .config import CDF_ABS_TOLERANCE
from .utils import NumericError


# --- Custom Exceptions ---

class QuadratureError(NumericError):
    """Adaptive quadrature of the Lamperti density missed its error target."""
    pass


@dataclass(frozen=True)
class SimplexPoint:
    """Point ``p`` of ``S_0 = {p in [0,1]^d : sum p = 1}``."""

    components: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.components) == 0:
            raise ValueError("a simplex point needs at least one component")
        if any(c < 0.0 or not math.isfinite(c) for c in self.components):
            raise ValueError(f"simplex components must be finite and nonnegative: {self.components}")
        if abs(math.fsum(self.components) - 1.0) > 1e-12:
            raise ValueError(f"simplex components must sum to 1: {self.components}")

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> SimplexPoint:
        """Normalise nonnegative weights (not all zero) onto the simplex."""
        w = [float(x) for x in weights]
        total = math.fsum(w)
        if total <= 0.0:
            raise ValueError(f"weights must have a positive sum: {w}")
        return cls(tuple(x / total for x in w))

    @classmethod
    def vertex(cls, d: int, k: int) -> SimplexPoint:
        return cls(tuple(1.0 if i == k else 0.0 for i in range(d)))

    @property
    def d(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.array(self.components, dtype=float)

    def distance(self, other: SimplexPoint | np.ndarray) -> float:
        """Sup-norm distance to another point."""
        other = other.as_array() if isinstance(other, SimplexPoint) else np.asarray(other)
        return float(np.max(np.abs(self.as_array() - other)))


def _check_alpha_p(alpha: float, p: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1) for a density, got {alpha}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def _p_hat(p: float) -> float:
    return 1.0 / p - 1.0


def _denominator(alpha: float, p_hat: float, t, s):
    """``p^2 t^(2a) + 2 p t^a s^a cos(pi a) + s^(2a)`` with ``s = 1 - t``."""
    ta, sa = t ** alpha, s ** alpha
    return p_hat * p_hat * ta * ta + 2.0 * p_hat * ta * sa * math.cos(alpha * math.pi) + sa * sa


def lamperti_pdf(alpha: float, p: float, t: float | np.ndarray) -> float | np.ndarray:
    """Density of the first component of ``Z`` for ``d = 2``.

    Args:
        alpha: Stability index in (0, 1).
        p: Mean of the law, in (0, 1).
        t: Point(s) of the open interval (0, 1).

    Raises:
        ValueError: ``alpha`` or ``p`` out of range, or ``t`` at or outside
            the endpoints where the density diverges.
    """
    _check_alpha_p(alpha, p)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0) or np.any(t_arr >= 1.0):
        raise ValueError("the Lamperti density is defined on the open interval (0, 1)")
    p_hat = _p_hat(p)
    s = 1.0 - t_arr
    numerator = t_arr ** alpha * s ** (alpha - 1.0) + t_arr ** (alpha - 1.0) * s ** alpha
    value = p_hat * math.sin(alpha * math.pi) / math.pi * numerator / _denominator(alpha, p_hat, t_arr, s)
    return float(value) if np.ndim(t) == 0 else value


def lamperti_cdf_closed(alpha: float, p: float, t: float | np.ndarray) -> float | np.ndarray:
    """Closed-form CDF from the ratio law of two independent positive stable variables."""
    _check_alpha_p(alpha, p)
    t_arr = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        w = _p_hat(p) * (t_arr / (1.0 - t_arr)) ** alpha
    sin_a, cos_a = math.sin(math.pi * alpha), math.cos(math.pi * alpha)
    value = (np.arctan((w + cos_a) / sin_a) - math.pi / 2.0 + math.pi * alpha) / (math.pi * alpha)
    value = np.where(t_arr >= 1.0, 1.0, np.where(t_arr <= 0.0, 0.0, value))
    return float(value) if np.ndim(t) == 0 else value


def _tail_integral(alpha: float, p_hat: float, upper: float, from_right: bool) -> float:
    """Mass of ``[0, upper]`` (or ``[1 - upper, 1]``) via ``u = t**alpha``."""
    c = p_hat * math.sin(alpha * math.pi) / (math.pi * alpha)

    def integrand(u: float) -> float:
        near = u ** (1.0 / alpha)  # distance to the endpoint
        far = 1.0 - near
        t, s = (far, near) if from_right else (near, far)
        # density * dt/du, with the endpoint power cancelled
        return c * (near + far) * far ** (alpha - 1.0) / _denominator(alpha, p_hat, t, s)

    value, error = integrate.quad(integrand, 0.0, upper ** alpha, epsabs=1e-12, epsrel=1e-12, limit=200)
    if error > CDF_ABS_TOLERANCE:
        raise QuadratureError(f"Lamperti CDF quadrature error {error:.2e} exceeds {CDF_ABS_TOLERANCE:.0e}")
    return value


def lamperti_cdf(alpha: float, p: float, t: float) -> float:
    """CDF of the Lamperti law by adaptive quadrature.

    ``[0, 1]`` is split at ``1/2`` and each half is integrated in the variable
    ``u = t**alpha`` (respectively ``(1 - t)**alpha``), which removes the
    endpoint singularity.  Absolute error at most ``1e-8``.

    Raises:
        ValueError: Parameters out of range.
        QuadratureError: The quadrature error estimate is too large.
    """
    _check_alpha_p(alpha, p)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return 0.0
    if t == 1.0:
        return 1.0
    p_hat = _p_hat(p)
    if t <= 0.5:
        return _tail_integral(alpha, p_hat, t, from_right=False)
    left_half = _tail_integral(alpha, p_hat, 0.5, from_right=False)
    right_half = _tail_integral(alpha, p_hat, 0.5, from_right=True)
    beyond = _tail_integral(alpha, p_hat, 1.0 - t, from_right=True)
    return min(1.0, max(0.0, left_half + right_half - beyond))


@dataclass(frozen=True)
class LampertiDist:
    """Law of the first component of ``Z_{alpha,(p, 1-p)}``; a point mass at ``p`` when ``alpha = 1``."""

    alpha: float
    p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def p_hat(self) -> float:
        return _p_hat(self.p) if self.p > 0.0 else math.inf

    @property
    def is_point_mass(self) -> bool:
        return self.alpha == 1.0 or self.p in (0.0, 1.0)

    @property
    def mean(self) -> float:
        return self.p

    def pdf(self, t: float | np.ndarray) -> float | np.ndarray:
        if self.is_point_mass:
            raise ValueError("a point mass has no density")
        return lamperti_pdf(self.alpha, self.p, t)

    def cdf(self, t: float | np.ndarray) -> float | np.ndarray:
        if self.is_point_mass:
            value = (np.asarray(t, dtype=float) >= self.p).astype(float)
            return float(value) if np.ndim(t) == 0 else value
        return lamperti_cdf_closed(self.alpha, self.p, t)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StableSpec:
    """Positive stable law with ``E exp(-t zeta) = exp(-weight * t**alpha)``."""

    alpha: float
    weight: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.weight < 0.0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> float | np.ndarray:
        return sample_stable(self.alpha, self.weight, rng, size)


def _kanter(alpha: float, uniform: np.ndarray, exponential: np.ndarray) -> np.ndarray:
    """Standard positive alpha-stable variates from ``U ~ Unif(0, pi)`` and ``E ~ Exp(1)``."""
    a = (np.sin(alpha * uniform) / np.sin(uniform)) ** (1.0 / (1.0 - alpha)) \
        * np.sin((1.0 - alpha) * uniform) / np.sin(alpha * uniform)
    return (a / exponential) ** ((1.0 - alpha) / alpha)


def sample_stable(alpha: float, weight: float, rng: np.random.Generator, size: int | None = None) -> float | np.ndarray:
    """Kanter's construction scaled by ``weight**(1/alpha)``.

    Args:
        alpha: Stability index in (0, 1).
        weight: Laplace-scale parameter ``p_k >= 0``; ``0`` gives exact zeros.
        rng: Source of randomness (one uniform and one exponential per draw).
        size: Number of draws, or ``None`` for a scalar.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if weight < 0.0:
        raise ValueError(f"weight must be nonnegative, got {weight}")
    n = 1 if size is None else size
    uniform = rng.uniform(0.0, math.pi, size=n)
    exponential = rng.exponential(1.0, size=n)
    if weight == 0.0:
        draws = np.zeros(n)
    else:
        draws = weight ** (1.0 / alpha) * _kanter(alpha, uniform, exponential)
    return float(draws[0]) if size is None else draws


def sample_Z(alpha: float, p: SimplexPoint, rng: np.random.Generator, size: int | None = None) -> SimplexPoint | np.ndarray:
    """Draw ``Z = (zeta_1, ..., zeta_d) / sum(zeta)`` with independent ``zeta_k ~ stable(alpha, p_k)``.

    For ``alpha = 1`` the law is the point mass at ``p``.  With ``size`` the
    draws come back as a ``(size, d)`` array.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    n = 1 if size is None else size
    if alpha == 1.0:
        draws = np.tile(p.as_array(), (n, 1))
    else:
        zeta = np.column_stack([sample_stable(alpha, w, rng, n) for w in p.components])
        draws = zeta / zeta.sum(axis=1, keepdims=True)
    if size is None:
        return SimplexPoint.from_weights(draws[0]) if alpha < 1.0 else p
    return draws


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------

def ks_statistic(samples: Sequence[float] | np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("ks_statistic needs at least one sample")
    return float(stats.kstest(samples, cdf).statistic)


def two_sample_ks(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("two_sample_ks needs two nonempty samples")
    return float(stats.ks_2samp(a, b).statistic)


def ks_band(n: int, m: int | None = None) -> float:
    """Asymptotic 99% Kolmogorov band ``1.63 * sqrt(1/n + 1/m)`` (one-sample when ``m`` is None)."""
    return 1.63 * math.sqrt(1.0 / n + (0.0 if m is None else 1.0 / m))
