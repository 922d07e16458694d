"""
Slowly converging series and power-law fitting.

This module contains:
- Compensated block summation (``math.fsum`` per block, blocks in fixed order)
- The partial sums whose limits drive the mixing-rate arguments
- Log-log regression (``FitResult``) shared by the map, cell and decay checks
- The backward recursion ``x -> x + b x**(1+p)`` behind the cell asymptotics
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np

from .config import INVERSE_MAX_ITER, INVERSE_TOLERANCE, SERIES_BLOCK


# ---------------------------------------------------------------------------
# g-function library
# ---------------------------------------------------------------------------

G_LIBRARY: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda j: np.ones_like(j, dtype=float),
    "zero": lambda j: np.zeros_like(j, dtype=float),
    "inv_log": lambda j: 1.0 / np.log(j + 2.0),
    "inv_pow_0.1": lambda j: j ** -0.1,
    "inv_sqrt": lambda j: 1.0 / np.sqrt(j),
}


def _g(tag: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return G_LIBRARY[tag]
    except KeyError:
        raise ValueError(f"unknown g tag {tag!r}; expected one of {sorted(G_LIBRARY)}") from None


# ---------------------------------------------------------------------------
# Compensated summation
# ---------------------------------------------------------------------------

def _blocks(first: int, last: int, block: int = SERIES_BLOCK, reverse: bool = False) -> Iterator[np.ndarray]:
    """Float index arrays covering ``first..last`` inclusive, ascending or (``reverse``) descending."""
    if reverse:
        stop = last
        while stop >= first:
            start = max(stop - block + 1, first)
            yield np.arange(stop, start - 1, -1, dtype=float)
            stop = start - 1
        return
    start = first
    while start <= last:
        stop = min(start + block - 1, last)
        yield np.arange(start, stop + 1, dtype=float)
        start = stop + 1


def compensated_sum(terms: Callable[[np.ndarray], np.ndarray], first: int, last: int, *, reverse: bool = False) -> float:
    """Sum ``terms(j)`` over ``j = first..last`` with exactly rounded block sums.

    Each block is summed with :func:`math.fsum` and the block sums are
    combined with ``fsum`` again, so the result does not depend on the
    summation order up to the final rounding.  ``reverse`` walks the
    indices from ``last`` down to ``first``.
    """
    if last < first:
        return 0.0
    return math.fsum(math.fsum(terms(j)) for j in _blocks(first, last, reverse=reverse))


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

def series_one(alpha: float, n: int, *, reverse: bool = False) -> float:
    """``sum_{j=1}^{n-1} (n-j)**(alpha-1) * j**(-alpha)``; tends to ``pi/sin(alpha*pi)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    return compensated_sum(lambda j: (n - j) ** (alpha - 1.0) * j ** (-alpha), 1, n - 1, reverse=reverse)


def series_one_limit(alpha: float) -> float:
    return math.pi / math.sin(alpha * math.pi)


def series_two(alpha: float, g_tag: str, n: int) -> tuple[float, float]:
    """Both sums for a weight ``g`` decaying to 0.

    Returns:
        ``(sum_j j**-alpha g(j) (n-j)**(alpha-1),
        sum_j (n-j)**(alpha-1) g(n-j) j**-alpha)`` over ``j = 1..n-1``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    g = _g(g_tag)
    first = compensated_sum(lambda j: j ** (-alpha) * g(j) * (n - j) ** (alpha - 1.0), 1, n - 1)
    second = compensated_sum(lambda j: (n - j) ** (alpha - 1.0) * g(n - j) * j ** (-alpha), 1, n - 1)
    return first, second


def series_log_one(g_tag: str, n: int) -> float:
    """``sum_{j<=n} g(j)/j`` divided by ``log n``; tends to 0 when ``g -> 0``."""
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    g = _g(g_tag)
    return compensated_sum(lambda j: g(j) / j, 1, n) / math.log(n)


def series_log_two(g1_tag: str, g2_tag: str, n: int) -> float:
    """``sum_{j=1}^{n-2} (g1(j)/j) * (g2(n-j)/log(n-j))``; tends to 1 when ``g1, g2 -> 1``."""
    if n < 4:
        raise ValueError(f"n must be at least 4, got {n}")
    g1, g2 = _g(g1_tag), _g(g2_tag)
    return compensated_sum(lambda j: (g1(j) / j) * (g2(n - j) / np.log(n - j)), 1, n - 2)


# ---------------------------------------------------------------------------
# Power-law fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """Weighted log-log regression ``log y = intercept + slope * log x``."""

    slope: float
    intercept: float
    window: tuple[float, float]
    residual_rms: float
    points: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept)

    def predict(self, x: float | np.ndarray) -> float | np.ndarray:
        return self.prefactor * np.asarray(x, dtype=float) ** self.slope

    def to_dict(self) -> dict[str, float]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "prefactor": self.prefactor,
            "window": list(self.window),
            "residual_rms": self.residual_rms,
            "points": self.points,
        }


def fit_loglog(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> FitResult:
    """Least squares on ``(log x, log y)``.

    Args:
        x: Positive abscissae.
        y: Positive ordinates.
        weights: Optional weights on the squared residuals.

    Raises:
        ValueError: Fewer than two points or nonpositive entries.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("a power-law fit needs at least two points")
    if np.any(x <= 0.0) or np.any(y <= 0.0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fit window contains nonpositive or non-finite entries")
    lx, ly = np.log(x), np.log(y)
    w = np.ones_like(lx) if weights is None else np.asarray(weights, dtype=float)
    slope, intercept = np.polyfit(lx, ly, 1, w=np.sqrt(w))
    residual = ly - (intercept + slope * lx)
    rms = float(np.sqrt(np.sum(w * residual ** 2) / np.sum(w)))
    return FitResult(float(slope), float(intercept), (float(x[0]), float(x[-1])), rms, int(x.size))


def geometric_indices(first: int, last: int, points: int) -> np.ndarray:
    """Distinct integers spread geometrically over ``[first, last]``."""
    return np.unique(np.round(np.geomspace(first, last, points)).astype(np.int64))


def fit_power_law(
    sequence: np.ndarray,
    window: tuple[int, int],
    *,
    first_index: int = 1,
    points: int | None = None,
) -> FitResult:
    """Fit ``a_n ~ C n**slope`` over an index window.

    Args:
        sequence: Values ``a_n`` with ``sequence[0]`` holding ``a_{first_index}``.
        window: Inclusive index range ``(n_lo, n_hi)``.
        first_index: Index of the first entry of ``sequence``.
        points: If given, subsample the window geometrically to this many
            indices with equal weights; otherwise use every index weighted
            by ``1/n`` so each decade counts the same.

    Raises:
        ValueError: Window outside the sequence or nonpositive entries in it.
    """
    n_lo, n_hi = int(window[0]), int(window[1])
    last_index = first_index + len(sequence) - 1
    if not first_index <= n_lo < n_hi <= last_index:
        raise ValueError(f"window {window} not inside index range [{first_index}, {last_index}]")
    sequence = np.asarray(sequence, dtype=float)
    if points is None:
        n = np.arange(n_lo, n_hi + 1)
        weights = 1.0 / n
    else:
        n = geometric_indices(n_lo, n_hi, points)
        weights = None
    return fit_loglog(n.astype(float), sequence[n - first_index], weights)


# ---------------------------------------------------------------------------
# Cell recursion
# ---------------------------------------------------------------------------

def power_offset_root(target: float, coefficient: float, exponent: float) -> tuple[float, bool]:
    """Solve ``a + B a**q = target`` for ``a >= 0`` (``target >= 0``).

    Newton from above: the left side is convex and increasing in ``a`` and
    ``a = target`` is an upper bound, so the iterates decrease monotonically.

    Returns:
        ``(a, converged)``.
    """
    if target == 0.0:
        return 0.0, True
    a = target
    for _ in range(INVERSE_MAX_ITER):
        excess = a + coefficient * a ** exponent - target
        if excess <= 0.0:
            return a, True
        step = excess / (1.0 + exponent * coefficient * a ** (exponent - 1.0))
        a -= step
        if step <= INVERSE_TOLERANCE * a:
            return a, True
    return a, False


def recursion_sequence(b: float, p: float, z0: float, n: int) -> np.ndarray:
    """Backward orbit ``z_0, z_1, ..., z_n`` of ``x -> x + b x**(1+p)``.

    ``z_{k+1}`` is the positive root of ``x + b x**(1+p) = z_k``; the
    sequence decreases to 0 like ``(p b k)**(-1/p)``.
    """
    if b <= 0.0 or p <= 0.0 or z0 <= 0.0:
        raise ValueError(f"b, p and z0 must be positive, got b={b}, p={p}, z0={z0}")
    out = np.empty(n + 1)
    out[0] = z = float(z0)
    for k in range(1, n + 1):
        z, _ = power_offset_root(z, b, 1.0 + p)
        out[k] = z
    return out
