"""
Inducing set, Markov cells and the first-return map.

Cells are organised per *excursion family* ``(k, side)``: the orbit leaves
the inducing set ``Y``, spends ``m`` steps next to fixed point ``xi_k`` on one
side of it, and re-enters ``Y`` through the family's gateway.  In offset
coordinates the X-cells of a family are the gaps of a single decreasing
sequence ``z_0 > z_1 > ...`` (``X_m`` lies between ``z_m`` and ``z_{m-1}``),
obtained by applying the inverse branch ``g_k`` repeatedly.  The Y-cell with
return time ``m + 1`` entered through branch ``j`` is ``g_j`` of ``X_m``.

Forward excursions are iterated directly (the expanding direction), cells
are built backwards (the contracting direction).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy.optimize import brentq

from .asymptotics import FitResult, fit_loglog, geometric_indices
from .config import (
    MIN_FIT_DEPTH,
    ORBIT_ITERATION_CAP,
    PLATEAU_SLOPE_TOLERANCE,
    TAIL_WINDOW_DIVISOR,
    TAIL_WINDOW_POINTS,
    UNDERFLOW_LENGTH,
    VALIDATION_DEPTH,
)
from .maps import IntervalMap
from .rng import PURPOSE_DIAGNOSTIC, block_generator
from .utils import Check, NumericError

if TYPE_CHECKING:
    from .density import DensityGrid

log = logging.getLogger(__name__)


# --- Custom Exceptions ---

class PeriodTwoError(NumericError):
    """The period-two points of a CLM map could not be bracketed."""
    pass


class StagnationError(NumericError):
    """A float orbit stopped moving next to a neutral fixed point."""
    pass


class IterationCapError(NumericError):
    """A return orbit exceeded the iteration cap."""
    pass


class DepthError(NumericError):
    """The cell table is too shallow for the requested fit."""
    pass


# ---------------------------------------------------------------------------
# Inducing set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExcursionFamily:
    """Excursions next to fixed point ``fixed_point`` on side ``side``.

    ``seed`` is the offset of the boundary between ``X_k`` and ``Y`` on that
    side.  Orbits re-enter ``Y`` through ``gateway``; the F-inverse branches
    of the family are ``g_j o g_k**m`` on the gateway for ``j`` in
    ``entries`` and ``m >= first_depth``.
    """

    fixed_point: int
    side: int
    xi: float
    seed: float
    gateway: tuple[float, float]
    first_depth: int
    entries: tuple[int, ...]
    far: float | None = None  # gateway end offset away from xi (needed for m = 0)

    @property
    def label(self) -> str:
        return f"xi{self.fixed_point + 1}{'+' if self.side > 0 else '-'}"


@dataclass(frozen=True)
class InducingSet:
    """The inducing set ``Y``: a finite union of intervals separating the fixed points."""

    intervals: tuple[tuple[float, float], ...]
    families: tuple[ExcursionFamily, ...]
    period_two: tuple[float, float] | None = None

    @property
    def length(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def pieces(self) -> tuple[tuple[float, float], ...]:
        """Distinct gateways in increasing order; they partition ``Y``."""
        return tuple(sorted({fam.gateway for fam in self.families}))

    def family(self, fixed_point: int, side: int) -> ExcursionFamily:
        for fam in self.families:
            if fam.fixed_point == fixed_point and fam.side == side:
                return fam
        raise KeyError(f"no excursion family ({fixed_point}, {side})")

    def _thresholds(self, d: int) -> np.ndarray:
        thresholds = np.full((d, 2), np.inf)
        for fam in self.families:
            thresholds[fam.fixed_point, int(fam.side > 0)] = abs(fam.seed)
        return thresholds

    def contains_state(self, branch: int, offset: float) -> bool:
        """Membership of the orbit state ``(branch, offset)`` in ``Y``."""
        if offset == 0.0:
            return False
        for fam in self.families:
            if fam.fixed_point == branch and (fam.side > 0) == (offset > 0.0):
                return abs(offset) >= abs(fam.seed)
        return False

    def contains_array(self, fmap: IntervalMap, branch: np.ndarray, offset: np.ndarray) -> np.ndarray:
        thresholds = self._thresholds(fmap.d)
        return np.abs(offset) >= thresholds[branch, (offset > 0.0).astype(np.intp)]

    def contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)


def _period_two_points(fmap: IntervalMap) -> tuple[float, float]:
    """``gamma_-`` in the left branch with ``f(f(gamma_-)) = gamma_-`` and ``gamma_+ = f(gamma_-)``."""
    lo = fmap.inverse_branch(0, 0.0)

    def excess(x: float) -> float:
        return fmap.eval(fmap.eval(x)) - x

    hi = -1e-14
    if not excess(lo) < 0.0 < excess(hi):
        raise PeriodTwoError(f"period-two root not bracketed on [{lo}, {hi}]")
    gamma_minus = brentq(excess, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return gamma_minus, fmap.eval(gamma_minus)


def build_inducing_set(fmap: IntervalMap) -> InducingSet:
    """Thaler: ``Y = [0,1] minus the union of X_k = g_k(I_k)``.  CLM: ``Y = [gamma_-, gamma_+]``.

    Raises:
        PeriodTwoError: The CLM period-two points could not be found.
    """
    families: list[ExcursionFamily] = []
    if fmap.family == "thaler":
        d = fmap.d
        intervals = []
        for i, cut in enumerate(fmap.cuts):
            left = fmap.inverse_branch(i, cut)
            right = fmap.inverse_branch(i + 1, cut)
            intervals.append((left, right))
        for k, branch in enumerate(fmap.branches):
            others = tuple(j for j in range(d) if j != k)
            xi = branch.fixed_point
            if k < d - 1:
                cut = fmap.cuts[k]
                seed = branch.inverse(cut - xi)
                families.append(ExcursionFamily(k, +1, xi, seed, (xi + seed, cut), 0, others, far=cut - xi))
            if k > 0:
                cut = fmap.cuts[k - 1]
                seed = branch.inverse(cut - xi)
                families.append(ExcursionFamily(k, -1, xi, seed, (cut, xi + seed), 0, others, far=cut - xi))
        inducing = InducingSet(tuple(intervals), tuple(families))
    else:
        gamma_minus, gamma_plus = _period_two_points(fmap)
        gateway = (gamma_minus, gamma_plus)
        families = [
            ExcursionFamily(0, +1, -1.0, gamma_minus + 1.0, gateway, 1, (1,)),
            ExcursionFamily(1, -1, 1.0, gamma_plus - 1.0, gateway, 1, (0,)),
        ]
        inducing = InducingSet((gateway,), tuple(families), period_two=gateway)
    log.debug("Inducing set for %r: %s", fmap, inducing.intervals)
    return inducing


# ---------------------------------------------------------------------------
# Cell tables
# ---------------------------------------------------------------------------

@dataclass
class EntryCells:
    """Y-cells of one family entered through branch ``branch``.

    ``depths[i]`` is the excursion length ``m`` (return time ``m + 1``) of the
    cell ``[left[i], right[i]]``.
    """

    branch: int
    depths: np.ndarray
    left: np.ndarray
    right: np.ndarray
    length: np.ndarray
    accumulation: float  # g_j(xi_k)
    remainder: float  # length of the cells deeper than the table


@dataclass
class FamilyCells:
    family: ExcursionFamily
    z: np.ndarray  # offsets z_0..z_N
    entries: dict[int, EntryCells] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.z) - 1

    @property
    def x_lengths(self) -> np.ndarray:
        """``|X_m|`` for ``m = 1..N``."""
        return np.abs(self.z[:-1] - self.z[1:])

    def depth_of(self, offset: float | np.ndarray) -> int | np.ndarray:
        """Number of ``|z_i|`` exceeding ``|offset|``: 0 inside the gateway, ``m`` on ``X_m``."""
        return np.searchsorted(-np.abs(self.z), -np.abs(offset), side="left")


@dataclass
class CellTable:
    """Markov cells of a map up to depth ``n_max``; immutable once built."""

    fmap: IntervalMap
    inducing: InducingSet
    n_max: int
    families: list[FamilyCells]
    truncated_at: int | None = None

    def family_cells(self, fixed_point: int, side: int) -> FamilyCells:
        for cells in self.families:
            if cells.family.fixed_point == fixed_point and cells.family.side == side:
                return cells
        raise KeyError(f"no excursion family ({fixed_point}, {side})")

    def partition_defects(self) -> tuple[float, float]:
        """Closure defects of the two partitions.

        Returns:
            ``(|Y| + sum |X-cells| + analytic tails - width,
            sum |Y-cells| + remainders - |Y|)``.
        """
        total = [self.inducing.length]
        y_total = []
        for cells in self.families:
            total.extend(cells.x_lengths)
            total.append(abs(cells.z[-1]))
            for entry in cells.entries.values():
                y_total.extend(entry.length)
                y_total.append(entry.remainder)
        return (math.fsum(total) - self.fmap.width, math.fsum(y_total) - self.inducing.length)


def _cell_lengths(fmap: IntervalMap, j: int, xi: float, outer: np.ndarray, inner: np.ndarray,
                  left_end: np.ndarray, right_end: np.ndarray) -> np.ndarray:
    """``|g_j(xi + outer) - g_j(xi + inner)|``, by the midpoint derivative for tiny cells."""
    length = np.abs(right_end - left_end)
    x_length = np.abs(outer - inner)
    tiny = x_length < 1e-7
    if tiny.any():
        branch = fmap.branches[j]
        mid = fmap.inverse_branch_array(j, xi + 0.5 * (outer[tiny] + inner[tiny]))
        length[tiny] = x_length[tiny] / branch.derivative_array(mid - branch.fixed_point)
    return length


def build_cells(fmap: IntervalMap, inducing: InducingSet, n_max: int = VALIDATION_DEPTH) -> CellTable:
    """Build X- and Y-cells of every excursion family down to depth ``n_max``.

    The recursion ``z_m = g_k(z_{m-1})`` runs in offset coordinates, so cell
    lengths keep full relative precision however close they get to ``xi_k``.
    The table is truncated (and flagged) if a cell length underflows.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    families: list[FamilyCells] = []
    truncated_at: int | None = None
    for fam in inducing.families:
        branch = fmap.branches[fam.fixed_point]
        z = np.empty(n_max + 1)
        z[0] = current = fam.seed
        depth = n_max
        for m in range(1, n_max + 1):
            nxt = branch.inverse(current)
            if abs(current - nxt) < UNDERFLOW_LENGTH or nxt == current:
                depth = m - 1
                truncated_at = depth if truncated_at is None else min(truncated_at, depth)
                log.warning("Cell length underflow in family %s at depth %d", fam.label, m)
                break
            z[m] = current = nxt
        z = z[: depth + 1]
        cells = FamilyCells(fam, z)

        for j in fam.entries:
            ends = fmap.inverse_branch_array(j, fam.xi + z)
            accumulation = fmap.inverse_branch(j, fam.xi)
            depths = np.arange(max(fam.first_depth, 1), depth + 1)
            outer, inner = z[depths - 1], z[depths]
            a, b = ends[depths - 1], ends[depths]
            if fam.first_depth == 0:
                far_end = fmap.inverse_branch(j, fam.xi + fam.far)
                depths = np.concatenate(([0], depths))
                outer = np.concatenate(([fam.far], outer))
                inner = np.concatenate(([z[0]], inner))
                a = np.concatenate(([far_end], a))
                b = np.concatenate(([ends[0]], b))
            length = _cell_lengths(fmap, j, fam.xi, outer, inner, a, b)
            cells.entries[j] = EntryCells(
                branch=j,
                depths=depths,
                left=np.minimum(a, b),
                right=np.maximum(a, b),
                length=length,
                accumulation=accumulation,
                remainder=abs(ends[-1] - accumulation),
            )
        families.append(cells)
        log.info("Cells %s: depth %d, innermost offset %.3e", fam.label, depth, z[-1])

    return CellTable(fmap, inducing, min(len(c.z) - 1 for c in families), families, truncated_at)


def iterate_inverse_branches(
    cells: CellTable,
    family_cells: FamilyCells,
    j: int,
    targets: np.ndarray,
    depth: int | None = None,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Walk the F-inverse branches ``g_j o g_k**m`` of one family.

    Args:
        cells: Cell table of the map.
        family_cells: The excursion family.
        j: Entry branch.
        targets: Points of the family's gateway.
        depth: Deepest ``m`` to visit (default: the table depth).

    Yields:
        ``(m, preimages, inverse_derivative)`` with ``inverse_derivative`` the
        derivative of ``g_j o g_k**m`` at the targets, i.e. ``1/F'`` at the
        preimages.
    """
    fmap = cells.fmap
    fam = family_cells.family
    k_branch = fmap.branches[fam.fixed_point]
    j_branch = fmap.branches[j]
    depth = family_cells.depth if depth is None else depth
    v = np.asarray(targets, dtype=float) - fam.xi
    dv = np.ones_like(v)
    for m in range(depth + 1):
        if m > 0:
            v = k_branch.inverse_array(v)
            dv = dv / k_branch.derivative_array(v)
        if m < fam.first_depth:
            continue
        x = fmap.inverse_branch_array(j, fam.xi + v)
        yield m, x, dv / j_branch.derivative_array(x - j_branch.fixed_point)


def cell_rows(cells: CellTable, limit: int | None = None) -> Iterator[list[Any]]:
    """CSV rows ``(k, side, n, left, right, length, dist_to_fp)`` for X- and Y-cells.

    X-cells carry side ``+``/``-``; Y-cells carry ``Y<j><side>`` and their
    distance to the accumulation point ``g_j(xi_k)``.
    """
    for fc in cells.families:
        fam = fc.family
        sign = "+" if fam.side > 0 else "-"
        depth = fc.depth if limit is None else min(fc.depth, limit)
        for m in range(1, depth + 1):
            a, b = fam.xi + fc.z[m], fam.xi + fc.z[m - 1]
            yield [fam.fixed_point + 1, sign, m, min(a, b), max(a, b), abs(fc.z[m - 1] - fc.z[m]), abs(fc.z[m])]
        for j, entry in fc.entries.items():
            for i, m in enumerate(entry.depths):
                if m > depth:
                    break
                dist = min(abs(entry.left[i] - entry.accumulation), abs(entry.right[i] - entry.accumulation))
                yield [fam.fixed_point + 1, f"Y{j + 1}{sign}", int(m) + 1,
                       entry.left[i], entry.right[i], entry.length[i], dist]


# ---------------------------------------------------------------------------
# Return orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReturnMapSample:
    """One return to ``Y``: ``excursions[k]`` counts the steps spent in ``X_k``."""

    entry: float
    tau: int
    excursions: tuple[int, ...]
    exit: float
    skipped: bool = False


def return_orbit(
    fmap: IntervalMap,
    inducing: InducingSet,
    x: float,
    *,
    cells: CellTable | None = None,
    cell_skip: bool = False,
    cap: int = ORBIT_ITERATION_CAP,
) -> ReturnMapSample:
    """Iterate ``f`` from ``x`` in ``Y`` until the orbit re-enters ``Y``.

    Args:
        fmap: The map.
        inducing: Its inducing set.
        x: Entry point, which must lie in ``Y``.
        cells: Cell table, required for ``cell_skip``.
        cell_skip: Jump over deep excursions: locate the entry cell ``X_m``,
            count ``m - 1`` steps and place the orbit affinely in ``X_1``.
            Statistics-grade only.
        cap: Iteration cap.

    Raises:
        ValueError: ``x`` not in ``Y``, or ``cell_skip`` without cells.
        StagnationError: The float orbit stopped moving.
        IterationCapError: More than ``cap`` steps.
    """
    if not inducing.contains(x):
        raise ValueError(f"x={x!r} is not in the inducing set")
    if cell_skip and cells is None:
        raise ValueError("cell_skip needs a cell table")
    branch, offset = fmap.locate(x)
    counts = [0] * fmap.d
    tau = 0
    skipped = False
    entering = True
    while True:
        new_branch, new_offset = fmap.step(branch, offset)
        tau += 1
        if inducing.contains_state(new_branch, new_offset):
            break
        if new_branch == branch and new_offset == offset:
            raise StagnationError(f"orbit from {x!r} stagnated at offset {offset!r} after {tau} steps")
        if entering and cell_skip:
            fc = cells.family_cells(new_branch, 1 if new_offset > 0.0 else -1)
            m = int(fc.depth_of(new_offset))
            if 2 <= m <= fc.depth:
                inner, outer = abs(fc.z[m]), abs(fc.z[m - 1])
                r = (abs(new_offset) - inner) / (outer - inner)
                placed = abs(fc.z[1]) + r * (abs(fc.z[0]) - abs(fc.z[1]))
                new_offset = math.copysign(placed, new_offset)
                counts[new_branch] += m - 1
                tau += m - 1
                skipped = True
        entering = False
        counts[new_branch] += 1
        branch, offset = new_branch, new_offset
        if tau >= cap:
            raise IterationCapError(f"orbit from {x!r} did not return within {cap} steps")
    return ReturnMapSample(x, tau, tuple(counts), fmap.position(new_branch, new_offset), skipped)


def return_times(
    fmap: IntervalMap,
    inducing: InducingSet,
    ys: np.ndarray,
    max_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised step-by-step return times.

    Returns:
        ``(tau, stagnated)``; ``tau`` is 0 for points that did not return
        within ``max_steps``.
    """
    branch, offset = fmap.locate_array(ys)
    tau = np.zeros(len(branch), dtype=np.int64)
    stagnated = np.zeros(len(branch), dtype=bool)
    active = np.arange(len(branch))
    for step in range(1, max_steps + 1):
        if active.size == 0:
            break
        b, t = fmap.step_array(branch[active], offset[active])
        stagnated[active] |= (b == branch[active]) & (t == offset[active]) & (t != 0.0)
        back = inducing.contains_array(fmap, b, t)
        tau[active[back]] = step
        branch[active], offset[active] = b, t
        active = active[~back & ~stagnated[active]]
    return tau, stagnated


def locate_return_time(cells: CellTable, ys: np.ndarray) -> np.ndarray:
    """Return times read off the cell table (0 where the cell is deeper than the table)."""
    fmap = cells.fmap
    branch, offset = fmap.step_array(*fmap.locate_array(np.asarray(ys, dtype=float)))
    tau = np.ones(len(branch), dtype=np.int64)
    inside = cells.inducing.contains_array(fmap, branch, offset)
    for fc in cells.families:
        fam = fc.family
        mask = (~inside) & (branch == fam.fixed_point) & ((offset > 0.0) == (fam.side > 0))
        if mask.any():
            m = fc.depth_of(offset[mask])
            tau[mask] = np.where(m <= fc.depth, m + 1, 0)
    return tau


# ---------------------------------------------------------------------------
# Asymptotics of cells and tails
# ---------------------------------------------------------------------------

def _window(n_max: int) -> tuple[int, int]:
    return max(1, n_max // TAIL_WINDOW_DIVISOR), n_max


def _fit_window(values: np.ndarray, first_index: int, window: tuple[int, int]) -> FitResult:
    n = geometric_indices(window[0], window[1], TAIL_WINDOW_POINTS)
    return fit_loglog(n.astype(float), values[n - first_index])


def expected_y_prefactor(fmap: IntervalMap, fam: ExcursionFamily, j: int) -> tuple[float, float]:
    """Expected ``(slope, prefactor)`` of ``|Y-cell|`` against its return time."""
    if fmap.family == "thaler":
        alpha = fmap.alpha
        b = fmap.local_constants[fam.fixed_point]
        branch = fmap.branches[j]
        slope_at_xi = 1.0 / branch.derivative(fmap.inverse_branch(j, fam.xi) - branch.fixed_point)
        return -(1.0 + alpha), slope_at_xi * b ** -alpha * alpha ** (1.0 + alpha)
    p = fmap.parameters
    # Y-cells next to 0+ feed the excursions at -1 and vice versa
    if fam.fixed_point == 0:
        a, k, ell, b, alpha = p["a_plus"], p["k_plus"], p["ell_minus"], p["b_minus"], p["alpha_minus"]
    else:
        a, k, ell, b, alpha = p["a_minus"], p["k_minus"], p["ell_plus"], p["b_plus"], p["alpha_plus"]
    return -(1.0 + alpha), a ** (-1.0 / k) * (ell * b) ** (-alpha) * alpha


def cell_asymptotics(cells: CellTable) -> dict[str, Any]:
    """Log-log fits of X- and Y-cell lengths over ``[N_max/100, N_max]``.

    X-cells next to a fixed point with neutral exponent ``q`` shrink like
    ``b**-a * a**(1+a) * n**-(1+a)`` with ``a = 1/(q-1)``.

    Raises:
        DepthError: Table shallower than the minimum fit depth.
    """
    if cells.n_max < MIN_FIT_DEPTH:
        raise DepthError(f"cell asymptotics need N_max >= {MIN_FIT_DEPTH}, table has {cells.n_max}")
    fmap = cells.fmap
    window = _window(cells.n_max)
    report: dict[str, Any] = {"window": list(window), "families": [], "checks": []}
    checks: list[Check] = []
    for fc in cells.families:
        fam = fc.family
        branch = fmap.branches[fam.fixed_point]
        a = branch.local_alpha
        x_fit = _fit_window(fc.x_lengths, 1, window)
        expected_prefactor = branch.coefficient ** -a * a ** (1.0 + a)
        entry_fits = {}
        checks.append(Check.within(f"x_slope[{fam.label}]", x_fit.slope, -(1.0 + a), 0.05))
        checks.append(Check.relative(f"x_prefactor[{fam.label}]", x_fit.prefactor, expected_prefactor, 0.10))
        for j, entry in fc.entries.items():
            lengths = entry.length[entry.depths >= 1]
            first = int(entry.depths[entry.depths >= 1][0]) + 1  # indexed by return time
            y_window = (max(window[0], first), min(window[1], first + len(lengths) - 1))
            y_fit = _fit_window(lengths, first, y_window)
            slope, prefactor = expected_y_prefactor(fmap, fam, j)
            entry_fits[f"Y{j + 1}"] = {**y_fit.to_dict(), "expected_slope": slope, "expected_prefactor": prefactor}
            checks.append(Check.within(f"y_slope[{fam.label},Y{j + 1}]", y_fit.slope, slope, 0.05))
            checks.append(Check.relative(f"y_prefactor[{fam.label},Y{j + 1}]", y_fit.prefactor, prefactor, 0.10))
        report["families"].append({
            "family": fam.label,
            "x_cells": {**x_fit.to_dict(), "expected_slope": -(1.0 + a), "expected_prefactor": expected_prefactor},
            "y_cells": entry_fits,
        })
    report["checks"] = checks
    return report


@dataclass
class TailReport:
    """Tail sequences indexed by ``n = 1..N`` (entry ``i`` holds ``n = i + 1``)."""

    weighting: str
    alpha: float
    n_max: int
    equal: dict[int, np.ndarray]  # measure(tau^(k) = n)
    greater: dict[int, np.ndarray]  # measure(tau^(k) > n)
    tau_greater: np.ndarray  # measure(tau > n)
    tau_equal: np.ndarray  # measure(tau = n)
    fits: dict[str, FitResult]
    c_hat: dict[int, float]
    plateau_slopes: dict[int, float]
    h4_sup: float
    checks: list[Check]

    @property
    def c_tau(self) -> float:
        return math.fsum(self.c_hat.values())

    def rows(self) -> Iterator[list[Any]]:
        """CSV rows ``(series, n, value)``."""
        for k in sorted(self.equal):
            for label, seq in ((f"eq{k + 1}", self.equal[k]), (f"gt{k + 1}", self.greater[k])):
                for i, v in enumerate(seq):
                    yield [label, i + 1, v]
        for i, v in enumerate(self.tau_greater):
            yield ["tau_gt", i + 1, v]

    def to_dict(self) -> dict[str, Any]:
        return {
            "weighting": self.weighting,
            "alpha": self.alpha,
            "n_max": self.n_max,
            "fits": {name: fit.to_dict() for name, fit in self.fits.items()},
            "c_hat": {f"xi{k + 1}": v for k, v in self.c_hat.items()},
            "c_tau": self.c_tau,
            "plateau_slopes": {f"xi{k + 1}": v for k, v in self.plateau_slopes.items()},
            "h4_sup": self.h4_sup,
            "checks": [c.to_dict() for c in self.checks],
        }


def _entry_weights(entry: EntryCells, family: ExcursionFamily, density: DensityGrid | None) -> tuple[np.ndarray, float]:
    if density is None:
        return entry.length, entry.remainder
    return density.cell_mass(entry.left, entry.right), density.evaluate(entry.accumulation, side=family.side) * entry.remainder


def tail_statistics(cells: CellTable, density: DensityGrid | None = None) -> TailReport:
    """Excursion-length distributions from cell weights.

    With a density the weights are ``mu``-masses of the Y-cells, otherwise
    Lebesgue lengths.  ``c_hat[k]`` is the geometric mean of the plateau
    ``n**alpha * measure(tau^(k) > n)`` over the fit window.
    """
    fmap = cells.fmap
    n_max = cells.n_max
    alpha = fmap.alpha
    equal: dict[int, np.ndarray] = {}
    remainder: dict[int, float] = {}
    for fc in cells.families:
        k = fc.family.fixed_point
        eq = equal.setdefault(k, np.zeros(n_max + 1))  # index m = 0..N
        for entry in fc.entries.values():
            weights, rem = _entry_weights(entry, fc.family, density)
            keep = entry.depths <= n_max
            np.add.at(eq, entry.depths[keep], weights[keep])
            remainder[k] = remainder.get(k, 0.0) + rem + float(np.sum(weights[~keep]))

    greater = {}
    for k, eq in equal.items():
        # measure(tau^(k) > n) = sum_{m > n} eq[m] + remainder
        tail = np.cumsum(eq[::-1])[::-1]  # tail[n] = sum_{m >= n}
        greater[k] = np.append(tail[2:], 0.0)[: n_max] + remainder[k]
    tau_equal = np.zeros(n_max)
    tau_greater = np.zeros(n_max)
    for k, eq in equal.items():
        tau_equal += eq[:n_max]  # tau = n  <=>  m = n - 1
        tau_greater += eq[1:] + greater[k]  # tau > n  <=>  m >= n

    window = _window(n_max)
    fits: dict[str, FitResult] = {}
    c_hat: dict[int, float] = {}
    plateau_slopes: dict[int, float] = {}
    checks: list[Check] = []
    n_all = np.arange(1, n_max + 1, dtype=float)
    for k in sorted(equal):
        label = f"xi{k + 1}"
        fits[f"eq[{label}]"] = _fit_window(equal[k][1:], 1, window)
        fits[f"gt[{label}]"] = _fit_window(greater[k], 1, window)
        plateau = n_all ** alpha * greater[k]
        plateau_fit = _fit_window(plateau, 1, window)
        fits[f"plateau[{label}]"] = plateau_fit
        idx = geometric_indices(window[0], window[1], TAIL_WINDOW_POINTS)
        c_hat[k] = float(np.exp(np.mean(np.log(plateau[idx - 1]))))
        plateau_slopes[k] = plateau_fit.slope
        checks.append(Check.within(f"gt_slope[{label}]", fits[f"gt[{label}]"].slope, -alpha, 0.05))
        checks.append(Check.within(f"plateau_slope[{label}]", plateau_fit.slope, 0.0, PLATEAU_SLOPE_TOLERANCE))

    fits["tau_gt"] = _fit_window(tau_greater, 1, window)
    checks.append(Check.within("tau_gt_slope", fits["tau_gt"].slope, -alpha, 0.05))
    idx = geometric_indices(window[0], window[1], TAIL_WINDOW_POINTS)
    c_tau_plateau = float(np.exp(np.mean(np.log(n_all[idx - 1] ** alpha * tau_greater[idx - 1]))))
    checks.append(Check.relative("c_tau_consistency", c_tau_plateau, math.fsum(c_hat.values()), 0.10))

    # H4: n**(1+alpha) * measure(tau = n) stays bounded over the window
    h4 = n_all[idx - 1] ** (1.0 + alpha) * tau_equal[idx - 1]
    h4_sup = float(h4.max())
    checks.append(Check.at_most("h4_ratio", h4_sup / float(np.median(h4)), 2.0))

    return TailReport(
        weighting="lebesgue" if density is None else "mu",
        alpha=alpha,
        n_max=n_max,
        equal={k: v[1:] for k, v in equal.items()},
        greater=greater,
        tau_greater=tau_greater,
        tau_equal=tau_equal,
        fits=fits,
        c_hat=c_hat,
        plateau_slopes=plateau_slopes,
        h4_sup=h4_sup,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def _gateway_grid(fam: ExcursionFamily, points: int) -> np.ndarray:
    a, b = fam.gateway
    return np.linspace(a, b, points)


def return_map_expansion(fmap: IntervalMap, cells: CellTable, points: int = 33) -> float:
    """Minimum of ``F'`` sampled over every Y-cell of the table (``> 1`` expected)."""
    lowest = math.inf
    for fc in cells.families:
        targets = _gateway_grid(fc.family, points)
        for j in fc.family.entries:
            for _, _, inverse_slope in iterate_inverse_branches(cells, fc, j, targets):
                lowest = min(lowest, float(np.min(1.0 / inverse_slope)))
    log.info("Return-map expansion for %r: %.6f", fmap, lowest)
    return lowest


def distortion_diagnostic(
    fmap: IntervalMap,
    cells: CellTable,
    pairs: int,
    seed: int,
    max_depth: int = 1000,
) -> dict[str, Any]:
    """Bounded distortion ``log|F'x / F'y| <= C |Fx - Fy|`` on random same-cell pairs.

    ``C`` is fitted as the largest ratio over the first half of the pairs and
    checked (with a factor 2 allowance) on the second half.
    """
    rng = block_generator(seed, PURPOSE_DIAGNOSTIC, 0)
    depth = min(max_depth, cells.n_max)
    choices = [(fc, j) for fc in cells.families for j in fc.family.entries]
    which = rng.integers(len(choices), size=pairs)
    depths = np.unique(np.round(np.exp(rng.uniform(0.0, math.log(depth), size=pairs))).astype(int))
    m_of_pair = depths[rng.integers(len(depths), size=pairs)]
    ratios = np.zeros(pairs)
    for c, (fc, j) in enumerate(choices):
        chosen = np.flatnonzero(which == c)
        if chosen.size == 0:
            continue
        a, b = fc.family.gateway
        u = rng.uniform(a, b, size=chosen.size)
        v = rng.uniform(a, b, size=chosen.size)
        want = np.maximum(m_of_pair[chosen], fc.family.first_depth)
        for m, _, inverse_slope in iterate_inverse_branches(cells, fc, j, np.concatenate([u, v]), int(want.max())):
            hit = want == m
            if hit.any():
                du, dv = inverse_slope[: chosen.size][hit], inverse_slope[chosen.size:][hit]
                ratios[chosen[hit]] = np.abs(np.log(du / dv)) / np.abs(u[hit] - v[hit])
    half = pairs // 2
    fitted = float(ratios[:half].max())
    worst = float(ratios[half:].max())
    return {
        "pairs": pairs,
        "max_depth": depth,
        "fitted_constant": fitted,
        "worst_ratio": worst,
        "checks": [Check.at_most("distortion_bound", worst, 2.0 * fitted)],
    }


def hypothesis_diagnostics(
    cells: CellTable,
    density: DensityGrid,
    epsilon: float,
    samples: int = 200,
    seed: int = 0,
) -> dict[str, Any]:
    """Checkable forms of H1-H4 on a concrete map."""
    fmap = cells.fmap
    tails = tail_statistics(cells, density)
    checks: list[Check] = []

    # H1: mu of the cells outside the epsilon-balls plus mu(Y) is finite
    outside = [1.0]  # mu(Y) with the density normalised on Y
    for fc in cells.families:
        k = fc.family.fixed_point
        for n in range(1, fc.depth + 1):
            if abs(fc.z[n - 1]) <= epsilon:
                break
            outside.append(float(tails.greater[k][n - 2]) if n >= 2 else float(tails.equal[k].sum()))
    mass_outside = math.fsum(outside)
    checks.append(Check("H1_finite_mass", mass_outside, math.inf, bool(np.isfinite(mass_outside))))

    # H2(a): xi_k interior to X_k (both sides for interior fixed points)
    for k, branch in enumerate(fmap.branches):
        sides = [fc.family.seed for fc in cells.families if fc.family.fixed_point == k]
        expected_sides = fmap.sidedness[k]
        ok = len(sides) == expected_sides and all(s != 0.0 for s in sides)
        checks.append(Check(f"H2a[xi{k + 1}]", float(len(sides)), float(expected_sides), ok))

    # H2(b): sum of excursion counts equals tau - 1 on sampled returns
    rng = block_generator(seed, PURPOSE_DIAGNOSTIC, 1)
    intervals = cells.inducing.intervals
    lengths = np.array([b - a for a, b in intervals])
    violations, tested = 0, 0
    for _ in range(samples):
        i = rng.choice(len(intervals), p=lengths / lengths.sum())
        y = rng.uniform(*intervals[i])
        if locate_return_time(cells, np.array([y]))[0] == 0:
            continue
        sample = return_orbit(fmap, cells.inducing, y)
        tested += 1
        violations += sum(sample.excursions) != sample.tau - 1
    checks.append(Check("H2b_excursion_sum", float(violations), 0.0, violations == 0))

    # H2(c): plateau flatness
    for k, slope in tails.plateau_slopes.items():
        checks.append(Check.within(f"H2c_plateau[xi{k + 1}]", slope, 0.0, PLATEAU_SLOPE_TOLERANCE))

    # H4 is only needed for alpha <= 1/2
    h4 = next(c for c in tails.checks if c.name == "h4_ratio")
    required = fmap.alpha <= 0.5
    checks.append(Check("H4_smooth_tail", h4.value, h4.tolerance, h4.passed or not required))

    return {
        "H1_mass_outside_balls": mass_outside,
        "H2b_returns_tested": tested,
        "H3": "automatic: finitely many C2 branches",
        "H4_required": required,
        "h4_sup": tails.h4_sup,
        "checks": checks,
    }
