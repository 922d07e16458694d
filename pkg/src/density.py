"""
Invariant density of the first-return map and the natural weights.

The induced transfer operator ``L v(y) = sum v(psi(y)) |psi'(y)|`` runs over
the inverse branches ``psi = g_j o g_k**m`` of the first-return map, read
off the cell table.  It is assembled once as a sparse matrix acting on the
node values of a piecewise-linear density on ``Y``; the branches deeper
than the table are lumped into one analytic tail column per accumulation
point ``g_j(xi_k)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse

from .arcsine import SimplexPoint
from .asymptotics import fit_loglog
from .config import (
    DENSITY_GRID_SIZE,
    DENSITY_MAX_SWEEPS,
    DENSITY_TOLERANCE,
    MAX_RELATIVE_SE,
    MIN_FIT_DEPTH,
    PLATEAU_SLOPE_TOLERANCE,
    TRUNCATION_LIMIT,
)
from .induced import CellTable, DepthError, InducingSet, iterate_inverse_branches, tail_statistics
from .maps import IntervalMap
from .utils import Check, NumericError

log = logging.getLogger(__name__)

# Depths folded into one sparse chunk while assembling the operator.
_ASSEMBLY_CHUNK = 256


# --- Custom Exceptions ---

class ConvergenceError(NumericError):
    """Operator iteration did not reach the tolerance within the sweep cap."""
    pass


class TruncationError(NumericError):
    """Too much of ``Y`` lies in cells deeper than the table."""
    pass


class PlateauError(NumericError):
    """``n**alpha * mu(tau^(k) > n)`` is not flat over the fit window."""

    def __init__(self, message: str, slope: float) -> None:
        super().__init__(f"{message} (slope {slope:+.4f})")
        self.slope = slope


# ---------------------------------------------------------------------------
# Density grid
# ---------------------------------------------------------------------------

@dataclass
class DensityGrid:
    """Piecewise-linear density on ``Y`` with nodes per component of ``Y``.

    ``nodes`` are sorted; ``component[i]`` is the component of ``Y`` holding
    node ``i``.  Interpolation never crosses a gap between components.
    """

    nodes: np.ndarray
    values: np.ndarray
    component: np.ndarray
    residual: float = math.nan
    sweeps: int = 0
    truncated_mass: float = 0.0

    def __post_init__(self) -> None:
        # cumulative integral at each node, restarting per component
        steps = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.nodes)
        steps[self.component[1:] != self.component[:-1]] = 0.0
        self._cumulative = np.concatenate(([0.0], np.cumsum(steps)))

    @classmethod
    def uniform(cls, inducing: InducingSet, grid_size: int) -> DensityGrid:
        """Nodes spread over the gateways of ``Y`` in proportion to their length; ``h = 1/|Y|``.

        Adjacent gateways share an endpoint, which then appears as two nodes
        so the density may jump there.
        """
        total = inducing.length
        nodes, component = [], []
        for c, (a, b) in enumerate(inducing.pieces):
            count = max(2, int(round(grid_size * (b - a) / total)))
            nodes.append(np.linspace(a, b, count))
            component.append(np.full(count, c))
        nodes_arr = np.concatenate(nodes)
        return cls(nodes_arr, np.full(nodes_arr.size, 1.0 / total), np.concatenate(component))

    @property
    def size(self) -> int:
        return self.nodes.size

    def _bracket(self, x: np.ndarray, side: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Interpolation interval and weight; ``side=-1`` takes left limits at shared endpoints."""
        i = np.searchsorted(self.nodes, x, side="left" if side < 0 else "right") - 1
        i = np.clip(i, 0, self.size - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = (x - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i])
        gap = self.component[i] != self.component[i + 1]
        # a point on the edge of a component snaps to that edge node
        theta = np.where(gap, np.where(theta > 0.5, 1.0, 0.0), np.clip(theta, 0.0, 1.0))
        return i, theta

    def interpolation_weights(self, x: np.ndarray, side: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(left index, right index, left weight, right weight)`` of linear interpolation at ``x``."""
        i, theta = self._bracket(np.asarray(x, dtype=float), side)
        return i, i + 1, 1.0 - theta, theta

    def evaluate(self, x: float | np.ndarray, side: int = 0) -> float | np.ndarray:
        i, theta = self._bracket(np.atleast_1d(np.asarray(x, dtype=float)), side)
        value = (1.0 - theta) * self.values[i] + theta * self.values[i + 1]
        return float(value[0]) if np.ndim(x) == 0 else value

    def integral(self) -> float:
        return float(math.fsum(0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.nodes)
                               * (self.component[1:] == self.component[:-1])))

    def _antiderivative(self, x: np.ndarray) -> np.ndarray:
        i, theta = self._bracket(x)
        dx = theta * (self.nodes[i + 1] - self.nodes[i])
        value_at_x = (1.0 - theta) * self.values[i] + theta * self.values[i + 1]
        return self._cumulative[i] + 0.5 * dx * (self.values[i] + value_at_x)

    def cell_mass(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """``mu([left, right])`` for cells inside one component of ``Y``.

        Tiny cells use the midpoint rule so their masses keep relative precision.
        """
        left, right = np.asarray(left, dtype=float), np.asarray(right, dtype=float)
        width = right - left
        mass = self._antiderivative(right) - self._antiderivative(left)
        tiny = width < 1e-9
        if tiny.any():
            mass[tiny] = self.evaluate(0.5 * (left[tiny] + right[tiny])) * width[tiny]
        return mass

    def scaled(self, factor: float) -> DensityGrid:
        return DensityGrid(self.nodes, self.values * factor, self.component, self.residual, self.sweeps,
                           self.truncated_mass)

    def lipschitz_constant(self) -> float:
        """Largest ``|dh/dx|`` between adjacent nodes of one component."""
        same = self.component[1:] == self.component[:-1]
        return float((np.abs(np.diff(self.values))[same] / np.diff(self.nodes)[same]).max())

    def rows(self) -> list[list[float]]:
        """CSV rows ``(left, right, h)`` with ``h`` the mean density of each grid cell."""
        out = []
        for i in range(self.size - 1):
            if self.component[i] != self.component[i + 1]:
                continue
            out.append([self.nodes[i], self.nodes[i + 1], 0.5 * (self.values[i] + self.values[i + 1])])
        return out


# ---------------------------------------------------------------------------
# Induced transfer operator
# ---------------------------------------------------------------------------

def _interpolation_entries(grid: DensityGrid, rows: np.ndarray, x: np.ndarray, weight: np.ndarray, side: int = 0):
    left, right, wl, wr = grid.interpolation_weights(x, side)
    return (np.concatenate([rows, rows]), np.concatenate([left, right]),
            np.concatenate([weight * wl, weight * wr]))


def _sparse_chunk(entries: list[tuple[np.ndarray, np.ndarray, np.ndarray]], n: int) -> sparse.csr_matrix:
    rows, cols, vals = (np.concatenate(part) for part in zip(*entries))
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def build_operator(cells: CellTable, grid: DensityGrid) -> tuple[sparse.csr_matrix, float]:
    """Sparse matrix of the induced transfer operator on the node values of ``grid``.

    Returns:
        ``(operator, untracked)`` where ``untracked`` is the total length of
        the cells deeper than the table.
    """
    n = grid.size
    operator = sparse.csr_matrix((n, n))
    untracked = 0.0
    for fc in cells.families:
        piece = cells.inducing.pieces.index(fc.family.gateway)
        rows = np.flatnonzero(grid.component == piece)
        if rows.size == 0:
            continue
        targets = grid.nodes[rows]
        for j in fc.family.entries:
            entry = fc.entries[j]
            pending: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
            deepest_slope = np.ones(rows.size)
            for _, x, inverse_slope in iterate_inverse_branches(cells, fc, j, targets):
                pending.append(_interpolation_entries(grid, rows, x, inverse_slope, side=fc.family.side))
                deepest_slope = inverse_slope
                if len(pending) >= _ASSEMBLY_CHUNK:
                    operator = operator + _sparse_chunk(pending, n)
                    pending = []

            # deeper branches: their derivative profile follows the deepest tracked
            # branch, rescaled so the column integrates to the untracked length
            tail = deepest_slope / entry.length[-1] * entry.remainder
            pending.append(_interpolation_entries(grid, rows, np.full(rows.size, entry.accumulation), tail,
                                                  side=fc.family.side))
            operator = operator + _sparse_chunk(pending, n)
            untracked += entry.remainder
    return operator, untracked


def induced_density(
    fmap: IntervalMap,
    cells: CellTable,
    grid_size: int = DENSITY_GRID_SIZE,
    tol: float = DENSITY_TOLERANCE,
    max_sweeps: int = DENSITY_MAX_SWEEPS,
    truncation_limit: float = TRUNCATION_LIMIT,
) -> DensityGrid:
    """Fixed point of the induced transfer operator, normalised to ``integral_Y h = 1``.

    Args:
        fmap: The map.
        cells: Its cell table (depth at least ``MIN_FIT_DEPTH``).
        grid_size: Number of nodes (at least 256).
        tol: Stop when the invariance residual sup |Lh - h| drops below this.
        max_sweeps: Sweep cap.
        truncation_limit: Largest untracked length relative to ``|Y|``.

    Raises:
        ValueError: ``grid_size`` below 256.
        DepthError: Cell table too shallow.
        TruncationError: Untracked length above the limit.
        ConvergenceError: No convergence within ``max_sweeps``.
    """
    if grid_size < 256:
        raise ValueError(f"grid_size must be at least 256, got {grid_size}")
    if cells.n_max < MIN_FIT_DEPTH:
        raise DepthError(f"induced density needs N_max >= {MIN_FIT_DEPTH}, table has {cells.n_max}")
    grid = DensityGrid.uniform(cells.inducing, grid_size)
    operator, untracked = build_operator(cells, grid)
    relative = untracked / cells.inducing.length
    if relative > truncation_limit:
        raise TruncationError(
            f"cells deeper than N_max={cells.n_max} cover {relative:.2%} of Y (limit {truncation_limit:.0%}); "
            "increase N_max"
        )
    log.info("Induced operator for %r: %d nodes, %d nonzeros, untracked %.2e", fmap, grid.size, operator.nnz, relative)

    # Lazy sweeps h <- (h + Lh) / 2: gateways that swap mass between the
    # pieces of Y give L an eigenvalue -1, which plain iteration never damps.
    values = grid.values
    for sweep in range(1, max_sweeps + 1):
        image = operator @ values
        image /= DensityGrid(grid.nodes, image, grid.component).integral()
        residual = float(np.max(np.abs(image - values)))
        if residual < tol:
            log.info("Density converged after %d sweeps (residual %.2e)", sweep, residual)
            return DensityGrid(grid.nodes, values, grid.component, residual, sweep, untracked)
        values = 0.5 * (values + image)
    raise ConvergenceError(f"density iteration did not converge in {max_sweeps} sweeps (residual {residual:.2e})")


def invariance_residual(cells: CellTable, density: DensityGrid) -> tuple[float, float]:
    """Fixed-point residual of ``density`` under the discretised operator.

    Returns:
        ``(sup |L h / integral(L h) - h|, integral(L h) - 1)``; the second
        entry is the mass the discretisation fails to conserve.
    """
    operator, _ = build_operator(cells, density)
    image = operator @ density.values
    mass = DensityGrid(density.nodes, image, density.component).integral()
    return float(np.max(np.abs(image / mass - density.values))), mass - density.integral()


# ---------------------------------------------------------------------------
# Natural weights
# ---------------------------------------------------------------------------

@dataclass
class NaturalWeights:
    """``p_bar = (c_1, ..., c_d) / c_tau`` with the method that produced the constants."""

    p_bar: SimplexPoint
    constants: tuple[float, ...]
    method: str  # formula | tail-fit | occupation-mean
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def c_tau(self) -> float:
        return math.fsum(self.constants)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "p_bar": list(self.p_bar.components),
            "constants": list(self.constants),
            "c_tau": self.c_tau,
            "diagnostics": self.diagnostics,
        }


def _clm_readings(fmap: IntervalMap, h: DensityGrid) -> dict[str, tuple[float, float]]:
    """Constants ``(c at -1, c at +1)`` under each reading of the CLM formulas."""
    p = fmap.parameters
    h0_plus = h.evaluate(fmap.inverse_branch(1, -1.0))
    h0_minus = h.evaluate(fmap.inverse_branch(0, 1.0))
    # excursions at -1 are entered through 0+ (branch +) and vice versa
    tail_sum = (
        h0_plus * p["a_plus"] ** (-1.0 / p["k_plus"]) * (p["ell_minus"] * p["b_minus"]) ** (-p["alpha_minus"]),
        h0_minus * p["a_minus"] ** (-1.0 / p["k_minus"]) * (p["ell_plus"] * p["b_plus"]) ** (-p["alpha_plus"]),
    )
    literal_minus = h0_minus * p["a_minus"] ** (-1.0 / p["k_minus"]) \
        * (p["ell_plus"] * p["b_plus"]) ** (-1.0 / p["alpha_minus"]) * p["alpha_minus"] ** 2
    literal_plus = h0_plus * p["a_plus"] ** (-1.0 / p["k_plus"]) \
        * (p["ell_minus"] * p["b_minus"]) ** (-1.0 / p["alpha_plus"]) * p["alpha_plus"] ** 2
    return {
        "tail-sum": tail_sum,
        "literal": (literal_minus, literal_plus),
        "literal-swapped": (literal_plus, literal_minus),
    }


def natural_weights_formula(fmap: IntervalMap, h: DensityGrid, inducing: InducingSet | None = None) -> NaturalWeights:
    """``p_bar`` from the density at the accumulation points ``g_j(xi_k)``.

    Thaler maps use ``c_k = e_k b_k**-alpha alpha**alpha sum_{j != k} h(g_j xi_k) g_j'(xi_k)``
    with ``e_k`` the number of sides of ``xi_k``.  CLM maps report every
    reading of their constants; the ``tail-sum`` reading is the default until
    :func:`select_reading` compares them with the tail fit.

    Raises:
        ValueError: An accumulation point falls outside ``Y``.
    """
    alpha = fmap.alpha
    if fmap.family == "thaler":
        constants = []
        for k, branch in enumerate(fmap.branches):
            total = []
            # cells accumulate on g_j(xi_k) from the side of xi_k they came from
            side = 1 if k == 0 else (-1 if k == fmap.d - 1 else 0)
            for j, other in enumerate(fmap.branches):
                if j == k:
                    continue
                point = fmap.inverse_branch(j, branch.fixed_point)
                if inducing is not None and not inducing.contains(point):
                    raise ValueError(f"accumulation point g_{j + 1}(xi_{k + 1})={point!r} is not in Y")
                slope = 1.0 / other.derivative(point - other.fixed_point)
                total.append(h.evaluate(point, side=side) * slope)
            constants.append(fmap.sidedness[k] * branch.coefficient ** -alpha * alpha ** alpha * math.fsum(total))
        return NaturalWeights(SimplexPoint.from_weights(constants), tuple(constants), "formula")

    readings = _clm_readings(fmap, h)
    chosen = "tail-sum"
    return NaturalWeights(
        SimplexPoint.from_weights(readings[chosen]),
        readings[chosen],
        "formula",
        {"reading": chosen, "readings": {name: list(SimplexPoint.from_weights(c).components)
                                         for name, c in readings.items()}},
    )


def select_reading(formula: NaturalWeights, reference: NaturalWeights) -> NaturalWeights:
    """Pick the CLM reading whose ``p_bar`` is closest to ``reference`` (a tail fit)."""
    readings = formula.diagnostics.get("readings")
    if not readings:
        return formula
    distances = {name: reference.p_bar.distance(np.array(p)) for name, p in readings.items()}
    best = min(distances, key=distances.get)
    return NaturalWeights(
        SimplexPoint(tuple(readings[best])),
        formula.constants if best == formula.diagnostics["reading"] else tuple(readings[best]),
        "formula",
        {**formula.diagnostics, "reading": best, "reading_distances": distances},
    )


def natural_weights_tailfit(cells: CellTable, h: DensityGrid) -> NaturalWeights:
    """``p_bar`` from the plateaus of ``n**alpha * mu(tau^(k) > n)``.

    Raises:
        PlateauError: A plateau is not flat over the fit window.
    """
    tails = tail_statistics(cells, h)
    for k, slope in tails.plateau_slopes.items():
        if abs(slope) > PLATEAU_SLOPE_TOLERANCE:
            raise PlateauError(f"plateau for xi{k + 1} not reached by N_max={cells.n_max}", slope)
    constants = tuple(tails.c_hat[k] for k in sorted(tails.c_hat))
    return NaturalWeights(
        SimplexPoint.from_weights(constants),
        constants,
        "tail-fit",
        {"plateau_slopes": {f"xi{k + 1}": s for k, s in tails.plateau_slopes.items()}},
    )


def cell_masses(cells: CellTable, h: DensityGrid) -> dict[str, dict[str, np.ndarray]]:
    """``mu`` of every Y-cell and X-cell of the table.

    ``mu(X_{k,n})`` is the mass of the Y-cells whose excursion passes through
    it, i.e. those with ``tau^(k) >= n``, plus the untracked remainder.
    """
    out: dict[str, dict[str, np.ndarray]] = {}
    for fc in cells.families:
        fam = fc.family
        masses: dict[str, np.ndarray] = {}
        by_depth = np.zeros(fc.depth + 1)
        remainder = 0.0
        for j, entry in fc.entries.items():
            mass = h.cell_mass(entry.left, entry.right)
            masses[f"Y{j + 1}"] = mass
            np.add.at(by_depth, entry.depths, mass)
            remainder += h.evaluate(entry.accumulation, side=fam.side) * entry.remainder
        at_least = np.cumsum(by_depth[::-1])[::-1] + remainder
        masses["X"] = at_least[1:]  # n = 1..N
        out[fam.label] = masses
    return out


# ---------------------------------------------------------------------------
# Return-mass decay
# ---------------------------------------------------------------------------

def predicted_decay(alpha: float, c_tau: float, n: np.ndarray) -> np.ndarray:
    """Leading-order ``(f_*^n lambda)(Y)`` with ``mu(Y) = 1``."""
    n = np.asarray(n, dtype=float)
    if alpha == 1.0:
        return 1.0 / (c_tau * np.log(n))
    return math.sin(math.pi * alpha) / (math.pi * c_tau) * n ** (alpha - 1.0)


def return_mass_decay(
    fmap: IntervalMap,
    inducing: InducingSet,
    lam: str,
    n_list: list[int],
    *,
    ensemble_size: int,
    seed: int,
    workers: int = 1,
    c_tau: float | None = None,
) -> dict[str, Any]:
    """Estimate ``m_n = (f_*^n lambda)(Y)`` by ensemble counting and fit its decay.

    For ``alpha < 1`` the fitted exponent is compared with ``alpha - 1``; for
    ``alpha = 1`` the variation of ``m_n log n`` is reported.  With ``c_tau``
    the fitted prefactor is compared with the renewal prediction.

    Raises:
        EnsembleSizeError: Relative standard error above 20% at the largest n.
    """
    from .monte_carlo import EnsembleSizeError, mass_in_set

    n = np.array(sorted(n_list), dtype=np.int64)
    fractions = mass_in_set(fmap, inducing, lam, n, ensemble_size, seed, workers)
    se = np.sqrt(fractions * (1.0 - fractions) / ensemble_size)
    with np.errstate(divide="ignore", invalid="ignore"):
        relative_se = np.where(fractions > 0.0, se / fractions, np.inf)
    if relative_se[-1] > MAX_RELATIVE_SE:
        raise EnsembleSizeError(
            f"relative SE {relative_se[-1]:.2f} at n={n[-1]} exceeds {MAX_RELATIVE_SE:.0%}; increase the ensemble"
        )

    checks: list[Check] = []
    # monotone trend at 3 SE: no later value may exceed an earlier one by more than 3 combined SE
    rises = [fractions[i + 1] - fractions[i] - 3.0 * math.hypot(se[i], se[i + 1]) for i in range(len(n) - 1)]
    checks.append(Check.at_most("decreasing_trend", max(rises, default=0.0), 0.0))

    report: dict[str, Any] = {"n": n.tolist(), "mass": fractions.tolist(), "se": se.tolist()}
    alpha = fmap.alpha
    if alpha < 1.0:
        fit = fit_loglog(n.astype(float), fractions)
        report["fit"] = fit.to_dict()
        checks.append(Check.within("decay_exponent", fit.slope, alpha - 1.0, 0.07))
        if c_tau is not None:
            predicted = predicted_decay(alpha, c_tau, n)
            report["predicted"] = predicted.tolist()
            report["prefactor_ratio"] = fit.prefactor / float(predicted[0] / n[0] ** (alpha - 1.0))
    else:
        scaled = fractions * np.log(n)
        variation = float(scaled.max() / scaled.min() - 1.0)
        report["mass_times_log_n"] = scaled.tolist()
        checks.append(Check.at_most("log_rate_variation", variation, 0.25))
        if c_tau is not None:
            report["predicted"] = predicted_decay(alpha, c_tau, n).tolist()
    report["checks"] = checks
    return report
