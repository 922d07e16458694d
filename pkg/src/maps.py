"""
Interval maps with neutral fixed points.

Two families are built here:

- Thaler maps on [0, 1] with ``d`` full increasing branches.  Branch ``k``
  carries the neutral fixed point ``xi_k`` and has the power form
  ``f(xi + t) = xi + t + sign(t) * B * |t|**q`` with ``q = 1 + 1/alpha``.
- CLM maps on [-1, 1] with neutral fixed points at -1 and 1 and a
  discontinuity at 0, optionally critical or singular there.

Every branch carries exactly one fixed point.  Orbits are therefore tracked
as a branch index plus the offset ``t = x - xi`` from that branch's fixed
point, which keeps full relative precision near every fixed point
(including ``xi = 1``, where absolute coordinates would lose all digits).
"""

from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .asymptotics import fit_loglog, power_offset_root
from .config import (
    ANCHOR_TOLERANCE,
    DERIVATIVE_MARGIN,
    EXPONENT_FIT_POINTS,
    EXPONENT_FIT_RANGE,
    EXPONENT_TOLERANCE,
    GLUE_END,
    GLUE_START,
    GLUING_TOLERANCE,
    INVERSE_MAX_ITER,
    INVERSE_TOLERANCE,
    NEUTRAL_NEIGHBOURHOOD,
    PREFACTOR_TOLERANCE,
    SINGULAR_FIT_RANGE,
    VALIDATION_GRID,
)
from .utils import Check, NumericError, stable_hash

log = logging.getLogger(__name__)


# --- Custom Exceptions ---

class GluingError(NumericError):
    """A branch could not be glued (interior fixed point or reparametrisation)."""

    def __init__(self, message: str, residual: float = math.nan) -> None:
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class InverseBranchError(NumericError):
    """Inverse-branch iteration did not converge within the iteration cap."""
    pass


# ---------------------------------------------------------------------------
# Power-form kernels
# ---------------------------------------------------------------------------

def _power_forward(t: float, coefficient: float, exponent: float) -> float:
    return t + math.copysign(coefficient * abs(t) ** exponent, t)


def _power_inverse(s: float, coefficient: float, exponent: float) -> float:
    """Solve ``a + B a**q = |s|`` for ``a >= 0`` and return ``sign(s) * a``."""
    if s == 0.0:
        return s
    a, converged = power_offset_root(abs(s), coefficient, exponent)
    if not converged:
        raise InverseBranchError(f"no convergence inverting offset {s!r}")
    return math.copysign(a, s)


def _power_forward_array(t: np.ndarray, coefficient, exponent) -> np.ndarray:
    return t + np.sign(t) * coefficient * np.abs(t) ** exponent


def _power_inverse_array(s: np.ndarray, coefficient: float, exponent: float) -> np.ndarray:
    target = np.abs(s)
    a = target.copy()
    active = np.flatnonzero(target > 0.0)
    for _ in range(INVERSE_MAX_ITER):
        if active.size == 0:
            break
        current = a[active]
        excess = current + coefficient * current ** exponent - target[active]
        step = np.where(
            excess > 0.0,
            excess / (1.0 + exponent * coefficient * current ** (exponent - 1.0)),
            0.0,
        )
        current = current - step
        a[active] = current
        active = active[step > INVERSE_TOLERANCE * current]
    if active.size:
        raise InverseBranchError(f"{active.size} offsets did not converge")
    return np.copysign(a, s)


# ---------------------------------------------------------------------------
# Reparametrisation for the critical/singular CLM family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Reparametrisation:
    """Increasing bijection ``s`` of [0, 1]: ``u**k``, a quintic, then the identity.

    ``u`` is the distance from the discontinuity at 0.  The identity collar
    on ``[end, 1]`` keeps the branch unchanged near its neutral fixed point.
    """

    k: float
    start: float
    end: float
    coefficients: tuple[float, ...]

    @classmethod
    def build(cls, k: float, start: float = GLUE_START, end: float = GLUE_END) -> Reparametrisation:
        if not 0.0 < start < end < 1.0:
            raise ValueError(f"glue interval must satisfy 0 < start < end < 1, got [{start}, {end}]")
        # value, first and second derivative of u**k at start and of u at end
        rows, rhs = [], []
        for point, values in (
            (start, (start ** k, k * start ** (k - 1.0), k * (k - 1.0) * start ** (k - 2.0))),
            (end, (end, 1.0, 0.0)),
        ):
            for order, value in enumerate(values):
                rows.append([
                    math.perm(power, order) * point ** (power - order) if power >= order else 0.0
                    for power in range(6)
                ])
                rhs.append(value)
        coefficients = tuple(float(c) for c in np.linalg.solve(np.array(rows), np.array(rhs)))
        reparam = cls(k=float(k), start=float(start), end=float(end), coefficients=coefficients)

        grid = np.linspace(start, end, VALIDATION_GRID)
        slope = np.polynomial.polynomial.polyval(grid, np.polynomial.polynomial.polyder(coefficients))
        if np.any(slope <= 0.0):
            raise GluingError(
                f"glue derivative changes sign on [{start}, {end}] for k={k}",
                residual=float(slope.min()),
            )
        return reparam

    def value(self, u: float) -> float:
        if u <= self.start:
            return u ** self.k
        if u >= self.end:
            return u
        return float(np.polynomial.polynomial.polyval(u, self.coefficients))

    def derivative(self, u: float) -> float:
        if u <= 0.0:
            return math.inf if self.k < 1.0 else 0.0
        if u <= self.start:
            return self.k * u ** (self.k - 1.0)
        if u >= self.end:
            return 1.0
        return float(np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coefficients)))

    def inverse(self, v: float) -> float:
        if v <= self.start ** self.k:
            return v ** (1.0 / self.k)
        if v >= self.end:
            return v
        return brentq(lambda u: self.value(u) - v, self.start, self.end, xtol=1e-16, rtol=4 * np.finfo(float).eps)

    def value_array(self, u: np.ndarray) -> np.ndarray:
        out = np.array(u, dtype=float, copy=True)
        low = u <= self.start
        mid = (~low) & (u < self.end)
        out[low] = u[low] ** self.k
        out[mid] = np.polynomial.polynomial.polyval(u[mid], self.coefficients)
        return out

    def derivative_array(self, u: np.ndarray) -> np.ndarray:
        out = np.ones_like(u, dtype=float)
        low = u <= self.start
        mid = (~low) & (u < self.end)
        with np.errstate(divide="ignore"):
            out[low] = self.k * u[low] ** (self.k - 1.0)
        out[mid] = np.polynomial.polynomial.polyval(u[mid], np.polynomial.polynomial.polyder(self.coefficients))
        return out

    def inverse_array(self, v: np.ndarray) -> np.ndarray:
        out = np.array(v, dtype=float, copy=True)
        low = v <= self.start ** self.k
        mid = (~low) & (v < self.end)
        out[low] = v[low] ** (1.0 / self.k)
        if mid.any():
            # bisection on the monotone quintic
            lo = np.full(mid.sum(), self.start)
            hi = np.full(mid.sum(), self.end)
            target = v[mid]
            for _ in range(64):
                centre = 0.5 * (lo + hi)
                above = np.polynomial.polynomial.polyval(centre, self.coefficients) > target
                hi = np.where(above, centre, hi)
                lo = np.where(above, lo, centre)
            out[mid] = 0.5 * (lo + hi)
        return out


# ---------------------------------------------------------------------------
# Branches and maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One full increasing branch carrying a single neutral fixed point.

    All evaluation methods work in offset coordinates ``t = x - fixed_point``
    and return offsets relative to the same fixed point.
    """

    index: int
    left: float
    right: float
    fixed_point: float
    coefficient: float  # B
    exponent: float  # q = 1 + 1/alpha_local
    reparam: Reparametrisation | None = None
    increasing: bool = True

    @property
    def eval_kind(self) -> str:
        return "power" if self.reparam is None else "power-reparametrised"

    @property
    def offset_low(self) -> float:
        return self.left - self.fixed_point

    @property
    def offset_high(self) -> float:
        return self.right - self.fixed_point

    @property
    def local_alpha(self) -> float:
        """Exponent of the cell recursion near the fixed point, ``1/(q - 1)``."""
        return 1.0 / (self.exponent - 1.0)

    def _collar(self) -> float:
        assert self.reparam is not None
        return 1.0 - self.reparam.end

    def _inner(self, t: float) -> float:
        if self.reparam is None or abs(t) <= self._collar():
            return t
        return math.copysign(1.0 - self.reparam.value(1.0 - abs(t)), t)

    def forward(self, t: float) -> float:
        return _power_forward(self._inner(t), self.coefficient, self.exponent)

    def derivative(self, t: float) -> float:
        inner = self._inner(t)
        slope = 1.0 + self.exponent * self.coefficient * abs(inner) ** (self.exponent - 1.0)
        if self.reparam is not None and abs(t) > self._collar():
            slope *= self.reparam.derivative(1.0 - abs(t))
        return slope

    def inverse(self, s: float) -> float:
        inner = _power_inverse(s, self.coefficient, self.exponent)
        if self.reparam is None or abs(inner) <= self._collar():
            return inner
        return math.copysign(1.0 - self.reparam.inverse(1.0 - abs(inner)), inner)

    def _inner_array(self, t: np.ndarray) -> np.ndarray:
        if self.reparam is None:
            return t
        inner = np.array(t, dtype=float, copy=True)
        outer = np.abs(t) > self._collar()
        inner[outer] = np.sign(t[outer]) * (1.0 - self.reparam.value_array(1.0 - np.abs(t[outer])))
        return inner

    def forward_array(self, t: np.ndarray) -> np.ndarray:
        return _power_forward_array(self._inner_array(t), self.coefficient, self.exponent)

    def derivative_array(self, t: np.ndarray) -> np.ndarray:
        inner = self._inner_array(t)
        slope = 1.0 + self.exponent * self.coefficient * np.abs(inner) ** (self.exponent - 1.0)
        if self.reparam is not None:
            outer = np.abs(t) > self._collar()
            slope[outer] *= self.reparam.derivative_array(1.0 - np.abs(t[outer]))
        return slope

    def inverse_array(self, s: np.ndarray) -> np.ndarray:
        inner = _power_inverse_array(np.asarray(s, dtype=float), self.coefficient, self.exponent)
        if self.reparam is None:
            return inner
        outer = np.abs(inner) > self._collar()
        if outer.any():
            inner[outer] = np.sign(inner[outer]) * (
                1.0 - self.reparam.inverse_array(1.0 - np.abs(inner[outer]))
            )
        return inner

    def displacement_array(self, t: np.ndarray) -> np.ndarray:
        """``f(x) - x`` in closed form (exact inside the neutral collar)."""
        if self.reparam is None or np.all(np.abs(t) <= self._collar()):
            return np.sign(t) * self.coefficient * np.abs(t) ** self.exponent
        return self.forward_array(t) - t


class IntervalMap:
    """A piecewise increasing map with one neutral fixed point per branch.

    Instances are immutable after construction; every evaluation method is
    pure and safe to share between threads and worker processes.
    """

    def __init__(
        self,
        family: str,
        lower: float,
        upper: float,
        branches: list[Branch],
        alpha: float,
        sidedness: tuple[int, ...],
        parameters: dict[str, float],
        spec: dict[str, Any],
        glue_residual: float = 0.0,
    ) -> None:
        self.family = family
        self.lower = lower
        self.upper = upper
        self.branches = tuple(branches)
        self.alpha = alpha
        self.sidedness = sidedness
        self.parameters = dict(parameters)
        self.spec = dict(spec)
        self.glue_residual = glue_residual

        self.cuts = tuple(b.left for b in self.branches[1:])
        self.fixed_points = tuple(b.fixed_point for b in self.branches)
        self.local_constants = tuple(b.coefficient for b in self.branches)

        # gathered per-branch arrays for the vectorised stepper
        self._cuts_array = np.array(self.cuts)
        self._xi = np.array(self.fixed_points)
        self._coef = np.array(self.local_constants)
        self._exp = np.array([b.exponent for b in self.branches])
        self._low = np.array([b.offset_low for b in self.branches])
        self._high = np.array([b.offset_high for b in self.branches])
        self._closed = np.zeros(len(self.branches), dtype=bool)
        self._closed[-1] = True
        self._plain = all(b.reparam is None for b in self.branches)

    def __repr__(self) -> str:
        return f"IntervalMap({self.family}, d={self.d}, alpha={self.alpha:g})"

    @property
    def d(self) -> int:
        return len(self.branches)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def hash(self) -> str:
        return map_hash(self)

    # --- absolute coordinates ---

    def _check_domain(self, x: float) -> None:
        if not self.lower <= x <= self.upper:
            raise ValueError(f"x={x!r} outside the phase interval [{self.lower}, {self.upper}]")

    def branch_index(self, x: float) -> int:
        """Branch containing ``x``; cut points belong to the branch on their right."""
        self._check_domain(x)
        return bisect.bisect_right(self.cuts, x)

    def locate(self, x: float) -> tuple[int, float]:
        """Orbit state ``(branch, offset)`` of the absolute position ``x``."""
        x = min(max(x, self.lower), self.upper)
        k = bisect.bisect_right(self.cuts, x)
        return k, x - self.fixed_points[k]

    def position(self, branch: int, offset: float) -> float:
        return self.fixed_points[branch] + offset

    def eval(self, x: float) -> float:
        k = self.branch_index(x)
        image = self.fixed_points[k] + self.branches[k].forward(x - self.fixed_points[k])
        return min(max(image, self.lower), self.upper)

    def deriv(self, x: float) -> float:
        k = self.branch_index(x)
        return self.branches[k].derivative(x - self.fixed_points[k])

    def inverse_branch(self, branch_id: int, y: float) -> float:
        """Unique preimage of ``y`` in the domain of branch ``branch_id``."""
        if not 0 <= branch_id < self.d:
            raise ValueError(f"branch_id {branch_id} out of range for d={self.d}")
        self._check_domain(y)
        branch = self.branches[branch_id]
        return branch.fixed_point + branch.inverse(y - branch.fixed_point)

    def inverse_branch_array(self, branch_id: int, y: np.ndarray) -> np.ndarray:
        branch = self.branches[branch_id]
        return branch.fixed_point + branch.inverse_array(np.asarray(y, dtype=float) - branch.fixed_point)

    # --- offset coordinates ---

    def step(self, branch: int, offset: float) -> tuple[int, float]:
        """Apply ``f`` once to the orbit state ``(branch, offset)``."""
        b = self.branches[branch]
        image = b.forward(offset)
        if b.offset_low <= image and (image < b.offset_high or (branch == self.d - 1 and image <= b.offset_high)):
            return branch, image
        return self.locate(b.fixed_point + image)

    def step_array(self, branch: np.ndarray, offset: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`step`; returns new ``(branch, offset)`` arrays."""
        if self._plain:
            image = _power_forward_array(offset, self._coef[branch], self._exp[branch])
        else:
            image = np.empty_like(offset)
            for j, b in enumerate(self.branches):
                mask = branch == j
                if mask.any():
                    image[mask] = b.forward_array(offset[mask])

        high = self._high[branch]
        stay = (image >= self._low[branch]) & ((image < high) | (self._closed[branch] & (image <= high)))
        if stay.all():
            return branch, image

        moved = ~stay
        absolute = np.clip(self._xi[branch[moved]] + image[moved], self.lower, self.upper)
        target = np.searchsorted(self._cuts_array, absolute, side="right")
        branch = branch.copy()
        branch[moved] = target
        image[moved] = absolute - self._xi[target]
        return branch, image

    def locate_array(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        k = np.searchsorted(self._cuts_array, x, side="right")
        return k, x - self._xi[k]

    def position_array(self, branch: np.ndarray, offset: np.ndarray) -> np.ndarray:
        return self._xi[branch] + offset


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _equalised_fixed_point(u: float, v: float, q: float) -> tuple[float, float, float]:
    """Interior fixed point on ``[u, v]`` giving one constant ``B`` on both sides.

    Anchoring ``f(u) = 0`` and ``f(v) = 1`` gives ``B = u/(xi-u)**q`` on the
    left and ``B = (1-v)/(v-xi)**q`` on the right; the difference of their
    logarithms is strictly decreasing in ``xi``.

    Returns:
        ``(xi, B, relative residual)``.
    """
    def mismatch(xi: float) -> float:
        return math.log(u) - q * math.log(xi - u) - math.log(1.0 - v) + q * math.log(v - xi)

    span = v - u
    lo, hi = u + 1e-12 * span, v - 1e-12 * span
    if mismatch(lo) <= 0.0 or mismatch(hi) >= 0.0:
        raise GluingError(
            f"no interior fixed point equalises the constants on [{u}, {v}]",
            residual=min(abs(mismatch(lo)), abs(mismatch(hi))),
        )
    xi = brentq(mismatch, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    left = u / (xi - u) ** q
    right = (1.0 - v) / (v - xi) ** q
    return xi, left, abs(left - right) / left


def build_thaler_map(
    alpha: float,
    cuts: list[float],
    interior_fixed_points: list[float] | None = None,
    *,
    allow_c1_interior: bool = False,
) -> IntervalMap:
    """Build a Thaler map with power-form branches anchored onto [0, 1].

    Args:
        alpha: Tail exponent in (0, 1].
        cuts: Strictly increasing branch boundaries inside (0, 1).
        interior_fixed_points: Optional positions of the ``d - 2`` interior
            fixed points.  They must agree with the equalised positions.
        allow_c1_interior: Accept ``alpha = 1`` with interior fixed points.
            The branches are then only C^1 there, so such maps are meant
            for exploration runs.

    Returns:
        The map, with ``b_k`` exposed as ``local_constants``.

    Raises:
        ValueError: Parameters out of range.
        GluingError: A supplied interior fixed point cannot be glued.
    """
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    cuts = [float(c) for c in cuts]
    if not cuts:
        raise ValueError("a Thaler map needs at least one cut")
    if any(not 0.0 < c < 1.0 for c in cuts) or any(a >= b for a, b in zip(cuts, cuts[1:])):
        raise ValueError(f"cuts must be strictly increasing inside (0, 1), got {cuts}")

    d = len(cuts) + 1
    if alpha == 1.0 and d >= 3 and not allow_c1_interior:
        raise ValueError("alpha = 1 with interior fixed points: the second derivative jumps at xi")
    if interior_fixed_points is not None and len(interior_fixed_points) != d - 2:
        raise ValueError(f"expected {d - 2} interior fixed points, got {len(interior_fixed_points)}")

    q = 1.0 + 1.0 / alpha
    edges = [0.0, *cuts, 1.0]
    branches: list[Branch] = []
    residual = 0.0
    for k in range(d):
        u, v = edges[k], edges[k + 1]
        if k == 0:
            xi, coefficient = 0.0, (1.0 - v) / v ** q
        elif k == d - 1:
            xi, coefficient = 1.0, u / (1.0 - u) ** q
        else:
            xi, coefficient, mismatch = _equalised_fixed_point(u, v, q)
            residual = max(residual, mismatch)
            if interior_fixed_points is not None:
                supplied = float(interior_fixed_points[k - 1])
                if not u < supplied < v:
                    raise ValueError(f"interior fixed point {supplied} not inside its branch [{u}, {v}]")
                if abs(supplied - xi) > GLUING_TOLERANCE:
                    raise GluingError(
                        f"interior fixed point {supplied} on [{u}, {v}] does not equalise the constants",
                        residual=abs(supplied - xi),
                    )
        branches.append(Branch(index=k, left=u, right=v, fixed_point=xi, coefficient=coefficient, exponent=q))

    sidedness = tuple(1 if k in (0, d - 1) else 2 for k in range(d))
    spec = {
        "family": "thaler",
        "alpha": alpha,
        "cuts": cuts,
        "interior_fixed_points": None if interior_fixed_points is None else [float(x) for x in interior_fixed_points],
        **({"allow_c1_interior": True} if allow_c1_interior else {}),
    }
    log.debug("Built Thaler map alpha=%s cuts=%s b=%s", alpha, cuts, [b.coefficient for b in branches])
    return IntervalMap(
        family="thaler",
        lower=0.0,
        upper=1.0,
        branches=branches,
        alpha=alpha,
        sidedness=sidedness,
        parameters={"alpha": alpha},
        spec=spec,
        glue_residual=residual,
    )


def _clm_parameters(ell: float, k_plus: float, k_minus: float) -> dict[str, float]:
    return {
        "ell_plus": ell,
        "ell_minus": ell,
        "k_plus": k_plus,
        "k_minus": k_minus,
        "a_plus": 2.0 + ell,
        "a_minus": 2.0 + ell,
        "b_plus": 1.0,
        "b_minus": 1.0,
        "alpha_plus": 1.0 / (ell * k_minus),
        "alpha_minus": 1.0 / (ell * k_plus),
    }


def _clm_branches(ell: float, reparams: tuple[Reparametrisation | None, Reparametrisation | None]) -> list[Branch]:
    q = 1.0 + ell
    left_reparam, right_reparam = reparams
    return [
        Branch(index=0, left=-1.0, right=0.0, fixed_point=-1.0, coefficient=1.0, exponent=q, reparam=left_reparam),
        Branch(index=1, left=0.0, right=1.0, fixed_point=1.0, coefficient=1.0, exponent=q, reparam=right_reparam),
    ]


def build_clm_map(ell: float) -> IntervalMap:
    """Smooth two-branch map ``x + (1+x)**(1+ell)`` / ``x - (1-x)**(1+ell)`` on [-1, 1]."""
    ell = float(ell)
    if ell <= 1.0:
        raise ValueError(f"ell must exceed 1 (alpha = 1/ell < 1), got {ell}")
    return IntervalMap(
        family="clm",
        lower=-1.0,
        upper=1.0,
        branches=_clm_branches(ell, (None, None)),
        alpha=1.0 / ell,
        sidedness=(1, 1),
        parameters=_clm_parameters(ell, 1.0, 1.0),
        spec={"family": "clm", "ell": ell},
    )


def build_clm_map_singular(
    ell: float,
    k_plus: float,
    k_minus: float,
    blend_point: float = GLUE_START,
) -> IntervalMap:
    """CLM map with a critical (``k > 1``) or singular (``k < 1``) point at 0.

    Each half-branch is ``g o s`` where ``g`` is the smooth branch of
    :func:`build_clm_map` and ``s`` a :class:`Reparametrisation` of the
    distance to 0.  ``k_plus = k_minus = 1`` returns the smooth map.

    Raises:
        ValueError: ``ell * min(k) <= 1`` or ``alpha_+ != alpha_-``.
        GluingError: The quintic glue is not monotone.
    """
    ell, k_plus, k_minus = float(ell), float(k_plus), float(k_minus)
    if k_plus <= 0.0 or k_minus <= 0.0:
        raise ValueError(f"orders must be positive, got k_plus={k_plus}, k_minus={k_minus}")
    if ell * min(k_plus, k_minus) <= 1.0:
        raise ValueError(f"ell * min(k) must exceed 1, got {ell * min(k_plus, k_minus)}")
    parameters = _clm_parameters(ell, k_plus, k_minus)
    if abs(parameters["alpha_plus"] - parameters["alpha_minus"]) > 1e-12:
        raise ValueError(
            f"alpha_+ = {parameters['alpha_plus']:g} differs from alpha_- = {parameters['alpha_minus']:g}"
        )
    if k_plus == 1.0 and k_minus == 1.0:
        return build_clm_map(ell)

    left = None if k_minus == 1.0 else Reparametrisation.build(k_minus, start=blend_point)
    right = None if k_plus == 1.0 else Reparametrisation.build(k_plus, start=blend_point)
    return IntervalMap(
        family="clm-singular",
        lower=-1.0,
        upper=1.0,
        branches=_clm_branches(ell, (left, right)),
        alpha=parameters["alpha_plus"],
        sidedness=(1, 1),
        parameters=parameters,
        spec={
            "family": "clm-singular",
            "ell": ell,
            "k_plus": k_plus,
            "k_minus": k_minus,
            "blend_point": float(blend_point),
        },
    )


# ---------------------------------------------------------------------------
# Map specifications
# ---------------------------------------------------------------------------

def map_from_dict(spec: dict[str, Any]) -> IntervalMap:
    """Build a map from its JSON specification (see README for the schema)."""
    family = spec.get("family")
    if family == "thaler":
        return build_thaler_map(spec["alpha"], spec["cuts"], spec.get("interior_fixed_points"),
                                allow_c1_interior=bool(spec.get("allow_c1_interior", False)))
    if family == "clm":
        return build_clm_map(spec["ell"])
    if family == "clm-singular":
        return build_clm_map_singular(
            spec["ell"], spec["k_plus"], spec["k_minus"], spec.get("blend_point", GLUE_START)
        )
    raise ValueError(f"unknown map family {family!r}")


def map_to_dict(fmap: IntervalMap) -> dict[str, Any]:
    return dict(fmap.spec)


def load_map(path: str) -> IntervalMap:
    with open(path) as f:
        return map_from_dict(json.load(f))


def save_map(fmap: IntervalMap, path: str) -> None:
    with open(path, "w") as f:
        json.dump(map_to_dict(fmap), f, indent=2, sort_keys=True)
        f.write("\n")


def map_hash(fmap: IntervalMap) -> str:
    """SHA-256 of the canonical JSON specification."""
    return stable_hash(fmap.spec)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    """Outcome of :func:`validate_map`; failures are recorded, never raised."""

    map_hash: str
    exponent_fits: list[dict[str, Any]] = field(default_factory=list)
    min_derivative: float = math.nan
    min_derivative_neutral: float = math.nan
    fixed_point_residuals: list[float] = field(default_factory=list)
    anchor_residuals: list[float] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "map_hash": self.map_hash,
            "exponent_fits": self.exponent_fits,
            "min_derivative": self.min_derivative,
            "min_derivative_neutral": self.min_derivative_neutral,
            "fixed_point_residuals": self.fixed_point_residuals,
            "anchor_residuals": self.anchor_residuals,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }


def _fit_local_form(
    report: ValidationReport,
    label: str,
    distances: np.ndarray,
    values: np.ndarray,
    expected_exponent: float,
    expected_prefactor: float,
) -> None:
    fit = fit_loglog(distances, np.abs(values))
    report.exponent_fits.append({
        "point": label,
        "exponent": fit.slope,
        "expected_exponent": expected_exponent,
        "prefactor": fit.prefactor,
        "expected_prefactor": expected_prefactor,
    })
    report.checks.append(Check.within(f"exponent[{label}]", fit.slope, expected_exponent, EXPONENT_TOLERANCE))
    report.checks.append(Check.relative(
        f"prefactor[{label}]", fit.prefactor, expected_prefactor, PREFACTOR_TOLERANCE,
    ))


def validate_map(fmap: IntervalMap) -> ValidationReport:
    """Check the defining asymptotics, expansion and anchoring of ``fmap``.

    Thaler maps are checked against T1-T4 (neutral exponents ``1 + 1/alpha``,
    ``f' > 1`` away from the fixed points, concave/convex sides, full
    branches).  CLM maps are checked against F1 (the four local forms) and
    the convexity part of F2; pointwise expansion is only required where the
    map is C^1 at 0, the eventual expansion of F2 being measured on the
    first-return map instead.
    """
    report = ValidationReport(map_hash=map_hash(fmap))
    distances = np.geomspace(*EXPONENT_FIT_RANGE, EXPONENT_FIT_POINTS)

    for k, branch in enumerate(fmap.branches):
        report.fixed_point_residuals.append(branch.forward(0.0))
        sides = [s for s in (-1.0, 1.0) if (branch.offset_low < 0.0 if s < 0 else branch.offset_high > 0.0)]
        for side in sides:
            label = f"xi{k + 1}{'+' if side > 0 else '-'}"
            _fit_local_form(
                report, label, distances, branch.displacement_array(side * distances),
                branch.exponent, branch.coefficient,
            )
            # concave on the left of xi, convex on the right: f' grows away from xi
            near = branch.derivative(side * NEUTRAL_NEIGHBOURHOOD * 0.5)
            far = branch.derivative(side * NEUTRAL_NEIGHBOURHOOD)
            report.checks.append(Check(f"convexity[{label}]", far - near, 0.0, far > near))
        report.checks.append(Check(f"fixed_point[xi{k + 1}]", report.fixed_point_residuals[-1], 0.0,
                                   report.fixed_point_residuals[-1] == 0.0))
        neutral_slope = branch.derivative(0.0)
        report.checks.append(Check.within(f"neutral_derivative[xi{k + 1}]", neutral_slope, 1.0, 1e-10))

        # full branch: the closure of the image is the phase interval
        image_low = branch.fixed_point + branch.forward(branch.offset_low)
        image_high = branch.fixed_point + branch.forward(branch.offset_high)
        for name, value, target in (("low", image_low, fmap.lower), ("high", image_high, fmap.upper)):
            report.anchor_residuals.append(abs(value - target))
            report.checks.append(Check(f"anchor[{k + 1},{name}]", abs(value - target), ANCHOR_TOLERANCE,
                                       abs(value - target) <= ANCHOR_TOLERANCE))

    if fmap.family in ("clm", "clm-singular"):
        singular_distances = np.geomspace(*SINGULAR_FIT_RANGE, EXPONENT_FIT_POINTS)
        p = fmap.parameters
        right, left = fmap.branches[1], fmap.branches[0]
        # f(0+) = -1: image offset relative to xi = 1 is -2
        _fit_local_form(report, "0+", singular_distances,
                        2.0 + right.forward_array(singular_distances - 1.0), p["k_plus"], p["a_plus"])
        # f(0-) = 1: image offset relative to xi = -1 is 2
        _fit_local_form(report, "0-", singular_distances,
                        2.0 - left.forward_array(1.0 - singular_distances), p["k_minus"], p["a_minus"])

    # derivative and monotonicity on a grid inside every branch
    min_outside, min_neutral, monotone = math.inf, math.inf, True
    for branch in fmap.branches:
        grid = np.linspace(branch.offset_low, branch.offset_high, VALIDATION_GRID + 2)[1:-1]
        slope = branch.derivative_array(grid)
        image = branch.forward_array(grid)
        monotone &= bool(np.all(np.diff(image) > 0.0) and np.all(slope > 0.0))
        neutral = np.abs(grid) < NEUTRAL_NEIGHBOURHOOD
        outside = ~neutral
        if branch.reparam is not None:
            outside &= np.abs(grid) <= 1.0 - GLUE_START
        if neutral.any():
            min_neutral = min(min_neutral, float(slope[neutral].min()))
        if outside.any():
            min_outside = min(min_outside, float(slope[outside].min()))
    report.min_derivative = min_outside
    report.min_derivative_neutral = min_neutral
    report.checks.append(Check("monotone", float(monotone), 1.0, monotone))
    report.checks.append(Check("neutral_derivative_margin", min_neutral, 1.0 - DERIVATIVE_MARGIN,
                               min_neutral >= 1.0 - DERIVATIVE_MARGIN))
    if fmap.family != "clm-singular":
        report.checks.append(Check("expansion", min_outside, 1.0, min_outside > 1.0))

    log.info("Validated %r: %d/%d checks passed", fmap, sum(c.passed for c in report.checks), len(report.checks))
    return report
