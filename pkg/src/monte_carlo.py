"""
Orbit and ensemble experiments.

This module contains:
- Initial densities (uniform, beta-like, histogram) drawn by inverse CDF
- Occupation times of the fixed-point neighbourhoods along orbits and ensembles
- Histogram summaries of empirical measures with exact W1 distances to
  convex combinations of point masses at the fixed points
- Pushforward, Cesaro, correlation, simplex-coverage and return-mass runs

Ensembles are split into blocks of ``ENSEMBLE_BLOCK`` trajectories.  The
initial point of trajectory ``i`` depends only on ``(seed, i)`` and block
results are combined in block order, so the output is the same for any
number of worker processes.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, stats

from .arcsine import LampertiDist, SimplexPoint, ks_statistic
from .config import (
    DEFAULT_EPSILON,
    ENSEMBLE_BLOCK,
    GEOMETRIC_BINS,
    GEOMETRIC_RATIO,
    MAX_FLAGGED_FRACTION,
    ORBIT_CHUNK,
    SECONDARY_EPSILON,
    SIMPLEX_GRID_STEP,
    UNIFORM_BINS,
)
from .density import NaturalWeights
from .induced import CellTable, InducingSet
from .maps import IntervalMap
from .rng import trajectory_uniforms
from .utils import Check, NumericError

log = logging.getLogger(__name__)

COVERAGE_BURN_IN: int = 1000


# --- Custom Exceptions ---

class EnsembleSizeError(NumericError):
    """The ensemble is too small for the requested precision."""
    pass


class FlaggedOrbitsError(NumericError):
    """Too many orbits of an ensemble stagnated in floating point."""

    def __init__(self, flagged: int, total: int) -> None:
        super().__init__(f"{flagged} of {total} orbits flagged ({flagged / total:.2%} > {MAX_FLAGGED_FRACTION:.0%})")
        self.flagged = flagged
        self.total = total


# ---------------------------------------------------------------------------
# Initial densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialDensity:
    """Absolutely continuous initial law on the phase interval.

    ``histogram`` edges are absolute positions; the weights need not be
    normalised.
    """

    kind: str
    params: tuple[float, ...] = ()
    edges: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    @property
    def tag(self) -> str:
        if self.kind == "beta":
            return f"beta:{self.params[0]:g}:{self.params[1]:g}"
        if self.kind == "histogram":
            return f"histogram[{len(self.weights)}]"
        return self.kind

    def positions(self, fmap: IntervalMap, u: np.ndarray) -> np.ndarray:
        """Inverse CDF applied to uniforms ``u`` in ``[0, 1)``."""
        if self.kind == "uniform":
            return fmap.lower + u * fmap.width
        if self.kind == "beta":
            return fmap.lower + fmap.width * stats.beta.ppf(u, *self.params)
        edges = np.array(self.edges)
        weights = np.array(self.weights)
        cumulative = np.concatenate(([0.0], np.cumsum(weights)))
        target = u * cumulative[-1]
        i = np.clip(np.searchsorted(cumulative, target, side="right") - 1, 0, len(weights) - 1)
        return edges[i] + (target - cumulative[i]) / weights[i] * (edges[i + 1] - edges[i])


def parse_initial_density(spec: str | dict[str, Any] | InitialDensity, fmap: IntervalMap | None = None) -> InitialDensity:
    """Build an initial density from ``"uniform"``, ``"beta:a:b"`` or a histogram dict.

    Raises:
        ValueError: Unknown tag or malformed parameters.
    """
    if isinstance(spec, InitialDensity):
        return spec
    if isinstance(spec, dict):
        if spec.get("kind") != "histogram":
            raise ValueError(f"initial density dicts must have kind 'histogram', got {spec.get('kind')!r}")
        edges = tuple(float(e) for e in spec["edges"])
        weights = tuple(float(w) for w in spec["weights"])
        if len(edges) != len(weights) + 1 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("histogram needs strictly increasing edges and one weight per bin")
        if any(w < 0.0 for w in weights) or sum(weights) <= 0.0:
            raise ValueError("histogram weights must be nonnegative with a positive sum")
        if fmap is not None and (edges[0] < fmap.lower or edges[-1] > fmap.upper):
            raise ValueError(f"histogram edges leave the phase interval [{fmap.lower}, {fmap.upper}]")
        return InitialDensity("histogram", edges=edges, weights=weights)
    name, *args = spec.split(":")
    if name == "uniform" and not args:
        return InitialDensity("uniform")
    if name == "beta" and len(args) == 2:
        a, b = float(args[0]), float(args[1])
        if a <= 0.0 or b <= 0.0:
            raise ValueError(f"beta parameters must be positive, got {a}, {b}")
        return InitialDensity("beta", (a, b))
    raise ValueError(f"unknown initial density {spec!r}; expected 'uniform', 'beta:a:b' or a histogram")


# ---------------------------------------------------------------------------
# Neighbourhoods, histograms and W1
# ---------------------------------------------------------------------------

def check_neighbourhoods(fmap: IntervalMap, eps: float) -> None:
    """Each ``B_eps(xi_k)`` must sit inside the domain of branch ``k`` (hence they are disjoint).

    Raises:
        ValueError: A neighbourhood overlaps another branch.
    """
    if eps <= 0.0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    for k, branch in enumerate(fmap.branches):
        low = max(branch.fixed_point - eps, fmap.lower)
        high = min(branch.fixed_point + eps, fmap.upper)
        if low < branch.left or high > branch.right:
            raise ValueError(
                f"B_eps(xi_{k + 1}) = [{low}, {high}] leaves branch {k + 1} [{branch.left}, {branch.right}]; "
                "reduce epsilon"
            )


def _radii(fmap: IntervalMap, eps: float) -> tuple[float, float]:
    """The requested radius and the secondary one reported alongside it."""
    check_neighbourhoods(fmap, eps)
    check_neighbourhoods(fmap, SECONDARY_EPSILON)
    return eps, SECONDARY_EPSILON


def histogram_edges(fmap: IntervalMap, eps: float) -> np.ndarray:
    """Geometric bins (ratio 1.5) on each side of each fixed point, uniform bins elsewhere.

    Every fixed point and every ``xi_k +/- eps`` inside the phase interval is an edge.
    """
    edges = {fmap.lower, fmap.upper}
    ratios = eps * GEOMETRIC_RATIO ** -np.arange(GEOMETRIC_BINS)
    outside = []
    for xi in fmap.fixed_points:
        edges.add(xi)
        for side in (-1.0, 1.0):
            if fmap.lower < xi + side * eps * 0.5 < fmap.upper:
                edges.update((xi + side * ratios).tolist())
    balls = sorted((max(xi - eps, fmap.lower), min(xi + eps, fmap.upper)) for xi in fmap.fixed_points)
    cursor = fmap.lower
    for low, high in balls:
        if low > cursor:
            outside.append((cursor, low))
        cursor = max(cursor, high)
    if cursor < fmap.upper:
        outside.append((cursor, fmap.upper))
    total = sum(b - a for a, b in outside)
    for a, b in outside:
        count = max(1, int(round(UNIFORM_BINS * (b - a) / total)))
        edges.update(np.linspace(a, b, count + 1).tolist())
    return np.array(sorted(e for e in edges if fmap.lower <= e <= fmap.upper))


def simplex_grid(d: int, step: float) -> np.ndarray:
    """All points of ``S_0`` with coordinates on the lattice ``step * Z``."""
    m = int(round(1.0 / step))
    points = [c for c in itertools.product(range(m + 1), repeat=d - 1) if sum(c) <= m]
    grid = np.array([[*c, m - sum(c)] for c in points], dtype=float) / m
    return grid


def w1_to_atoms(
    edges: np.ndarray,
    masses: np.ndarray,
    atoms: np.ndarray,
    xi: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Exact W1 between a histogram plus atoms at ``xi`` and ``sum_k weights[k] delta_{xi_k}``.

    The histogram spreads each bin's mass uniformly; every ``xi_k`` must be an
    edge.  ``weights`` may be a ``(P, d)`` stack, giving ``P`` distances.
    """
    weights = np.atleast_2d(weights)
    widths = np.diff(edges)
    left = edges[:-1]
    atoms_left = (xi[None, :] <= left[:, None]) @ atoms  # atoms at or left of each bin start
    start = np.concatenate(([0.0], np.cumsum(masses)[:-1])) + atoms_left
    end = start + masses
    target = weights @ (xi[:, None] <= left[None, :])  # (P, bins)
    u = start[None, :] - target
    v = end[None, :] - target
    same_sign = u * v >= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = (u * u + v * v) / (2.0 * np.abs(v - u))
    per_bin = np.where(same_sign, 0.5 * np.abs(u + v), crossing) * widths[None, :]
    return per_bin.sum(axis=1)


@dataclass
class MeasureSummary:
    """Histogram of an empirical law on the phase interval.

    ``masses`` are bin masses excluding points sitting exactly on a fixed
    point, which are kept as ``atoms``.
    """

    edges: np.ndarray
    masses: np.ndarray
    atoms: np.ndarray
    fixed_points: tuple[float, ...]
    neighbourhood_masses: np.ndarray
    epsilon: float
    n: int
    points: int
    secondary_masses: np.ndarray | None = None
    secondary_epsilon: float | None = None
    flagged: int = 0
    w1_min: float = math.nan
    w1_argmin: tuple[float, ...] = ()
    w1_reference: float | None = None

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses) + math.fsum(self.atoms)

    def w1(self, p: SimplexPoint | np.ndarray) -> float:
        weights = p.as_array() if isinstance(p, SimplexPoint) else np.asarray(p, dtype=float)
        return float(w1_to_atoms(self.edges, self.masses, self.atoms, np.array(self.fixed_points), weights)[0])

    def rows(self) -> list[list[float]]:
        rows = [[a, b, m] for a, b, m in zip(self.edges[:-1], self.edges[1:], self.masses)]
        rows.extend([xi, xi, atom] for xi, atom in zip(self.fixed_points, self.atoms) if atom > 0.0)
        return rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "points": self.points,
            "epsilon": self.epsilon,
            "neighbourhood_masses": self.neighbourhood_masses.tolist(),
            "secondary_epsilon": self.secondary_epsilon,
            "secondary_masses": None if self.secondary_masses is None else self.secondary_masses.tolist(),
            "total_mass": self.total_mass,
            "w1_min": self.w1_min,
            "w1_argmin": list(self.w1_argmin),
            "w1_reference": self.w1_reference,
            "flagged": self.flagged,
        }


@dataclass
class _Tally:
    """Integer counts of visited states, combinable across blocks and chunks."""

    bins: np.ndarray
    atoms: np.ndarray
    balls: np.ndarray
    points: int = 0
    flagged: int = 0

    @classmethod
    def empty(cls, n_bins: int, d: int) -> _Tally:
        return cls(np.zeros(n_bins, dtype=np.int64), np.zeros(d, dtype=np.int64), np.zeros((2, d), dtype=np.int64))

    def add(self, other: _Tally) -> None:
        self.bins += other.bins
        self.atoms += other.atoms
        self.balls += other.balls
        self.points += other.points
        self.flagged += other.flagged


def _tally_states(fmap: IntervalMap, edges: np.ndarray, radii: tuple[float, float], branch: np.ndarray,
                  offset: np.ndarray) -> _Tally:
    tally = _Tally.empty(len(edges) - 1, fmap.d)
    exact = offset == 0.0
    tally.atoms += np.bincount(branch[exact], minlength=fmap.d)
    for row, radius in enumerate(radii):
        tally.balls[row] += np.bincount(branch[np.abs(offset) < radius], minlength=fmap.d)
    pos = fmap.position_array(branch[~exact], offset[~exact])
    idx = np.clip(np.searchsorted(edges, pos, side="right") - 1, 0, len(edges) - 2)
    tally.bins += np.bincount(idx, minlength=len(edges) - 1)
    tally.points += branch.size
    return tally


def _summarise(fmap: IntervalMap, edges: np.ndarray, tally: _Tally, radii: tuple[float, float], n: int,
               p_bar: SimplexPoint | None) -> MeasureSummary:
    total = tally.points
    summary = MeasureSummary(
        edges=edges,
        masses=tally.bins / total,
        atoms=tally.atoms / total,
        fixed_points=fmap.fixed_points,
        neighbourhood_masses=tally.balls[0] / total,
        secondary_masses=tally.balls[1] / total,
        epsilon=radii[0],
        secondary_epsilon=radii[1],
        n=n,
        points=total,
        flagged=tally.flagged,
    )
    grid = simplex_grid(fmap.d, SIMPLEX_GRID_STEP.get(fmap.d, 0.05))
    distances = w1_to_atoms(edges, summary.masses, summary.atoms, np.array(fmap.fixed_points), grid)
    best = int(np.argmin(distances))
    summary.w1_min = float(distances[best])
    summary.w1_argmin = tuple(grid[best].tolist())
    if p_bar is not None:
        summary.w1_reference = summary.w1(p_bar)
    return summary


# ---------------------------------------------------------------------------
# Single orbits
# ---------------------------------------------------------------------------

def _orbit_chunks(fmap: IntervalMap, x0: float, n: int, stops: list[int] | None = None) -> Iterator[tuple[np.ndarray, np.ndarray, int]]:
    """States ``f^j x0`` for ``j = 0..n-1`` in chunks, with a count of stagnated steps.

    Chunks never straddle an index listed in ``stops``.
    """
    fmap.branch_index(x0)
    branch, offset = fmap.locate(x0)
    boundaries = sorted({s for s in (stops or []) if 0 < s < n} | {n})
    done = 0
    for boundary in boundaries:
        while done < boundary:
            size = min(ORBIT_CHUNK, boundary - done)
            b_arr = np.empty(size, dtype=np.intp)
            t_arr = np.empty(size)
            stuck = 0
            for i in range(size):
                b_arr[i], t_arr[i] = branch, offset
                new_branch, new_offset = fmap.step(branch, offset)
                if new_offset == offset and new_branch == branch and offset != 0.0:
                    stuck += 1
                branch, offset = new_branch, new_offset
            done += size
            yield b_arr, t_arr, stuck


@dataclass
class OccupationFractions:
    """``S_n^k / n`` per fixed point, the leftover fraction, and orbit flags."""

    fractions: np.ndarray
    leftover: float
    flagged: bool = False
    skipped_steps: int = 0


def occupation_fractions(
    fmap: IntervalMap,
    x0: float,
    n: int,
    eps: float = DEFAULT_EPSILON,
    *,
    cells: CellTable | None = None,
    cell_skip: bool = False,
) -> OccupationFractions:
    """Exact visit counts of ``B_eps(xi_k)`` along ``x0, f x0, ..., f^{n-1} x0``.

    With ``cell_skip`` deep excursions are jumped over using the cell table
    (their ball visits counted from the cell depths); the result is then
    statistics-grade and reports the skipped steps.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    check_neighbourhoods(fmap, eps)
    if not cell_skip:
        counts = np.zeros(fmap.d, dtype=np.int64)
        stuck = 0
        for branch, offset, flagged in _orbit_chunks(fmap, x0, n):
            counts += np.bincount(branch[np.abs(offset) < eps], minlength=fmap.d)
            stuck += flagged
        fractions = counts / n
        return OccupationFractions(fractions, 1.0 - float(fractions.sum()), stuck > 0)

    if cells is None:
        raise ValueError("cell_skip needs a cell table")
    inducing = cells.inducing
    fmap.branch_index(x0)
    branch, offset = fmap.locate(x0)
    counts = [0] * fmap.d
    flagged = False
    skipped = 0
    in_y = inducing.contains_state(branch, offset)
    j = 0
    while j < n:
        if abs(offset) < eps:
            counts[branch] += 1
        new_branch, new_offset = fmap.step(branch, offset)
        j += 1
        if new_branch == branch and new_offset == offset and offset != 0.0:
            flagged = True
        entering = in_y and not inducing.contains_state(new_branch, new_offset)
        in_y = inducing.contains_state(new_branch, new_offset)
        if entering and j < n:
            fc = cells.family_cells(new_branch, 1 if new_offset > 0.0 else -1) if new_offset != 0.0 else None
            m = int(fc.depth_of(new_offset)) if fc is not None else 0
            if 2 <= m <= fc.depth:
                s = min(m - 1, n - j)
                # X_i lies inside the ball once its outer end z_{i-1} does
                first_inside = int(fc.depth_of(eps)) + 1
                counts[new_branch] += max(0, m - max(first_inside, m - s + 1) + 1)
                inner, outer = abs(fc.z[m]), abs(fc.z[m - 1])
                r = (abs(new_offset) - inner) / (outer - inner)
                lo, hi = abs(fc.z[m - s]), abs(fc.z[m - s - 1])
                new_offset = math.copysign(lo + r * (hi - lo), new_offset)
                j += s
                skipped += s
        branch, offset = new_branch, new_offset
    fractions = np.array(counts, dtype=float) / n
    return OccupationFractions(fractions, 1.0 - float(fractions.sum()), flagged, skipped)


def empirical_measure(
    fmap: IntervalMap,
    x0: float,
    n: int,
    eps: float = DEFAULT_EPSILON,
    p_bar: SimplexPoint | None = None,
) -> MeasureSummary:
    """Histogram of ``x0, ..., f^{n-1} x0`` with ball masses and W1 to the simplex of point masses."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    radii = _radii(fmap, eps)
    edges = histogram_edges(fmap, eps)
    tally = _Tally.empty(len(edges) - 1, fmap.d)
    for branch, offset, stuck in _orbit_chunks(fmap, x0, n):
        tally.add(_tally_states(fmap, edges, radii, branch, offset))
        tally.flagged += stuck
    return _summarise(fmap, edges, tally, radii, n, p_bar)


def simplex_coverage(
    fmap: IntervalMap,
    x0: float,
    n_max: int,
    delta: float,
    eps: float = DEFAULT_EPSILON,
    *,
    checkpoints: list[int] | None = None,
    burn_in: int = COVERAGE_BURN_IN,
    exploration: bool = False,
) -> dict[str, Any]:
    """How densely ``p_n = S_n / n`` sweeps the simplex along one orbit.

    Visited points are flagged on a lattice of spacing ``delta / 4``; the
    covering radius is the largest sup-distance from a ``delta``-net point
    to a flagged point.  ``p_n`` sums to at most 1 (time outside the balls
    is not counted), and distances to the vertices use exact ``p_n``.

    Raises:
        ValueError: ``alpha = 1`` (unless ``exploration``) or ``n_max < 10**6``.
    """
    if fmap.alpha >= 1.0 and not exploration:
        raise ValueError("simplex coverage needs alpha < 1; run alpha = 1 as an exploration")
    if n_max < 10**6 and not exploration:
        raise ValueError(f"simplex coverage needs n_max >= 10**6, got {n_max}")
    check_neighbourhoods(fmap, eps)
    d = fmap.d
    fine = delta / 4.0
    scale = int(round(1.0 / fine))
    net = simplex_grid(d, delta)
    stops = sorted(set(checkpoints or []) | {n_max})
    visited: set[tuple[int, ...]] = set()
    closest = np.ones(d)
    counts = np.zeros(d, dtype=np.int64)
    done = 0
    flagged = 0
    history = []

    def covering_radius() -> float:
        if not visited:
            return 1.0
        points = np.array(sorted(visited), dtype=float) / scale
        gaps = np.abs(net[:, None, :] - points[None, :, :]).max(axis=2)
        return float(gaps.min(axis=1).max())

    for branch, offset, stuck in _orbit_chunks(fmap, x0, n_max, stops):
        flagged += stuck
        inside = np.abs(offset) < eps
        steps = np.zeros((branch.size, d), dtype=np.int64)
        steps[np.flatnonzero(inside), branch[inside]] = 1
        running = counts[None, :] + np.cumsum(steps, axis=0)
        counts = running[-1].copy()
        index = done + np.arange(1, branch.size + 1)
        done += branch.size
        keep = index > burn_in
        if keep.any():
            p = running[keep] / index[keep, None]
            closest = np.minimum(closest, 1.0 - p.max(axis=0))
            lattice = np.rint(p * scale).astype(np.int64)
            visited.update(map(tuple, np.unique(lattice, axis=0).tolist()))
        if done in stops:
            history.append({"n": done, "covering_radius": covering_radius()})

    radius = history[-1]["covering_radius"]
    report: dict[str, Any] = {
        "n_max": n_max,
        "delta": delta,
        "epsilon": eps,
        "covering_radius": radius,
        "closest_approach": closest.tolist(),
        "history": history,
        "flagged_steps": flagged,
        "exploration": exploration,
    }
    trace = [h["covering_radius"] for h in history]
    checks = [Check.at_most("covering_radius_monotone",
                            max((b - a for a, b in zip(trace, trace[1:])), default=0.0), 0.0)]
    if not exploration:
        checks.append(Check.at_most("covering_radius", radius, 0.25 if d >= 3 else 0.1))
        checks.extend(Check.at_most(f"closest_approach[xi{k + 1}]", c, 0.1) for k, c in enumerate(closest))
    report["checks"] = checks
    return report


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

def _block_ranges(size: int) -> list[tuple[int, int]]:
    return [(start, min(start + ENSEMBLE_BLOCK, size)) for start in range(0, size, ENSEMBLE_BLOCK)]


def _run_blocks(worker: Callable[[tuple], Any], tasks: list[tuple], workers: int) -> list[Any]:
    """Results of ``worker`` over ``tasks`` in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with Pool(processes=workers) as pool:
        return pool.map(worker, tasks)


def _initial_states(fmap: IntervalMap, lam: InitialDensity, seed: int, start: int, stop: int):
    u = trajectory_uniforms(seed, start, stop)
    return fmap.locate_array(lam.positions(fmap, u))


def _occupation_block(task: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    fmap, lam, seed, start, stop, n, radii = task
    branch, offset = _initial_states(fmap, lam, seed, start, stop)
    rows = np.arange(stop - start)
    counts = np.zeros((2, stop - start, fmap.d), dtype=np.int64)
    flagged = np.zeros(stop - start, dtype=bool)
    for _ in range(n):
        for layer, radius in zip(counts, radii):
            inside = np.abs(offset) < radius
            layer[rows[inside], branch[inside]] += 1
        new_branch, new_offset = fmap.step_array(branch, offset)
        flagged |= (new_offset == offset) & (new_branch == branch) & (offset != 0.0)
        branch, offset = new_branch, new_offset
    return counts[0], counts[1], flagged


@dataclass
class OccupationEnsemble:
    """Occupation counts ``S_n^k`` of ``N`` independent orbits started from ``lam``."""

    map_hash: str
    n: int
    epsilon: float
    lam: str
    seed: int
    counts: np.ndarray  # (N, d)
    flagged: np.ndarray  # (N,)
    secondary_epsilon: float | None = None
    secondary_counts: np.ndarray | None = None
    ks: float | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def samples(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def leftover(self) -> np.ndarray:
        return 1.0 - self.samples.sum(axis=1)

    @property
    def shares(self) -> np.ndarray:
        """``S_n^k / sum_j S_n^j``, falling back to ``S_n^k / n`` when no ball was visited."""
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.where(totals > 0, self.counts / np.maximum(totals, 1), self.samples)

    def rows(self) -> Iterator[list[Any]]:
        samples, leftover = self.samples, self.leftover
        for i in range(self.size):
            yield [self.seed, i, *samples[i].tolist(), leftover[i], int(self.flagged[i])]


def occupation_ensemble(
    fmap: IntervalMap,
    lam: str | dict[str, Any] | InitialDensity,
    size: int,
    n: int,
    eps: float = DEFAULT_EPSILON,
    seed: int = 0,
    *,
    workers: int = 1,
    p_bar: SimplexPoint | None = None,
) -> OccupationEnsemble:
    """Occupation fractions of ``size`` orbits of length ``n`` started from ``lam``.

    For ``d = 2`` and ``alpha < 1`` with ``p_bar`` given, the first fraction
    ``S_n^1 / n`` is compared with the Lamperti law by a KS statistic.

    Raises:
        FlaggedOrbitsError: More than 1% of the orbits stagnated.
    """
    if size < 1 or n < 1:
        raise ValueError(f"ensemble size and orbit length must be positive, got {size}, {n}")
    radii = _radii(fmap, eps)
    density = parse_initial_density(lam, fmap)
    tasks = [(fmap, density, seed, start, stop, n, radii) for start, stop in _block_ranges(size)]
    results = _run_blocks(_occupation_block, tasks, workers)
    counts = np.concatenate([r[0] for r in results])
    secondary = np.concatenate([r[1] for r in results])
    flagged = np.concatenate([r[2] for r in results])
    n_flagged = int(flagged.sum())
    if n_flagged > MAX_FLAGGED_FRACTION * size:
        raise FlaggedOrbitsError(n_flagged, size)
    ensemble = OccupationEnsemble(fmap.hash, n, eps, density.tag, seed, counts, flagged, radii[1], secondary)
    if fmap.d == 2 and fmap.alpha < 1.0 and p_bar is not None:
        law = LampertiDist(fmap.alpha, p_bar.components[0])
        ensemble.ks = ks_statistic(ensemble.samples[:, 0], law.cdf)
    log.info("Occupation ensemble: N=%d n=%d lam=%s flagged=%d", size, n, density.tag, n_flagged)
    return ensemble


def occupation_mean_weights(ensemble: OccupationEnsemble) -> NaturalWeights:
    """``p_bar`` estimated by the ensemble mean of ``S_n / n``, normalised onto the simplex."""
    samples = ensemble.samples
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(ensemble.size) if ensemble.size > 1 else np.zeros_like(mean)
    return NaturalWeights(
        SimplexPoint.from_weights(mean),
        tuple(mean.tolist()),
        "occupation-mean",
        {"standard_errors": se.tolist(), "mean_leftover": float(ensemble.leftover.mean()),
         "mean_share": ensemble.shares.mean(axis=0).tolist(), "n": ensemble.n, "size": ensemble.size},
    )


def _pushforward_block(task: tuple) -> list[_Tally]:
    fmap, lam, seed, start, stop, checkpoints, radii, edges, cesaro, keep_steps = task
    branch, offset = _initial_states(fmap, lam, seed, start, stop)
    out: list[_Tally] = []
    running = _Tally.empty(len(edges) - 1, fmap.d)
    flagged = np.zeros(stop - start, dtype=bool)
    step = 0
    for target in checkpoints:
        while step < target:
            if cesaro:
                per_step = _tally_states(fmap, edges, radii, branch, offset)
                running.add(per_step)
                if keep_steps:
                    out.append(per_step)
            new_branch, new_offset = fmap.step_array(branch, offset)
            flagged |= (new_offset == offset) & (new_branch == branch) & (offset != 0.0)
            branch, offset = new_branch, new_offset
            step += 1
        if not cesaro:
            tally = _tally_states(fmap, edges, radii, branch, offset)
            tally.flagged = int(flagged.sum())
            out.append(tally)
    if cesaro:
        running.flagged = int(flagged.sum())
        out.insert(0, running)
    return out


def pushforward(
    fmap: IntervalMap,
    lam: str | dict[str, Any] | InitialDensity,
    n_list: list[int],
    eps: float = DEFAULT_EPSILON,
    size: int = 10_000,
    seed: int = 0,
    *,
    workers: int = 1,
    p_bar: SimplexPoint | None = None,
) -> list[MeasureSummary]:
    """Empirical laws of ``f^n`` applied to ``size`` draws from ``lam``, one per ``n`` in ``n_list``."""
    radii = _radii(fmap, eps)
    density = parse_initial_density(lam, fmap)
    edges = histogram_edges(fmap, eps)
    checkpoints = sorted(set(int(n) for n in n_list))
    tasks = [(fmap, density, seed, a, b, checkpoints, radii, edges, False, False) for a, b in _block_ranges(size)]
    results = _run_blocks(_pushforward_block, tasks, workers)
    summaries = []
    for i, n in enumerate(checkpoints):
        tally = _Tally.empty(len(edges) - 1, fmap.d)
        for block in results:
            tally.add(block[i])
        if tally.flagged > MAX_FLAGGED_FRACTION * size:
            raise FlaggedOrbitsError(tally.flagged, size)
        summaries.append(_summarise(fmap, edges, tally, radii, n, p_bar))
    return summaries


def cesaro_pushforward(
    fmap: IntervalMap,
    lam: str | dict[str, Any] | InitialDensity,
    n: int,
    eps: float = DEFAULT_EPSILON,
    size: int = 10_000,
    seed: int = 0,
    *,
    workers: int = 1,
    p_bar: SimplexPoint | None = None,
    per_step: bool = False,
) -> MeasureSummary | tuple[MeasureSummary, list[MeasureSummary]]:
    """Time-averaged law ``(1/n) sum_{j<n} f^j_* lam`` of the pushed ensemble.

    With ``per_step`` the per-``j`` summaries are returned as well.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    radii = _radii(fmap, eps)
    density = parse_initial_density(lam, fmap)
    edges = histogram_edges(fmap, eps)
    tasks = [(fmap, density, seed, a, b, [n], radii, edges, True, per_step) for a, b in _block_ranges(size)]
    results = _run_blocks(_pushforward_block, tasks, workers)
    total = _Tally.empty(len(edges) - 1, fmap.d)
    for block in results:
        total.add(block[0])
    if total.flagged > MAX_FLAGGED_FRACTION * size:
        raise FlaggedOrbitsError(total.flagged, size)
    summary = _summarise(fmap, edges, total, radii, n, p_bar)
    if not per_step:
        return summary
    steps = []
    for j in range(n):
        tally = _Tally.empty(len(edges) - 1, fmap.d)
        for block in results:
            tally.add(block[j + 1])
        steps.append(_summarise(fmap, edges, tally, radii, j, p_bar))
    return summary, steps


# ---------------------------------------------------------------------------
# Correlations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Observable:
    """Observable from the library: ``indicator:a:b`` or ``poly:c0,c1,...`` (ascending powers)."""

    tag: str
    kind: str
    params: tuple[float, ...]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator":
            a, b = self.params
            return ((x >= a) & (x <= b)).astype(float)
        return Polynomial(self.params)(x)

    def lebesgue_integral(self, lower: float, upper: float) -> float:
        if self.kind == "indicator":
            a, b = self.params
            return max(0.0, min(b, upper) - max(a, lower))
        antiderivative = Polynomial(self.params).integ()
        return float(antiderivative(upper) - antiderivative(lower))


def parse_test_function(tag: str) -> Observable:
    """Parse a library observable tag.

    Raises:
        ValueError: Unknown tag or malformed parameters.
    """
    name, _, args = tag.partition(":")
    try:
        values = tuple(float(v) for v in args.replace(":", ",").split(",") if v != "")
    except ValueError:
        raise ValueError(f"malformed observable tag {tag!r}") from None
    if name == "indicator" and len(values) == 2 and values[0] < values[1]:
        return Observable(tag, "indicator", values)
    if name == "poly" and values:
        return Observable(tag, "poly", values)
    raise ValueError(f"unknown observable {tag!r}; expected 'indicator:a:b' or 'poly:c0,c1,...'")


def _correlation_block(task: tuple) -> list[tuple[float, float]]:
    fmap, seed, start, stop, checkpoints, psi, phi = task
    u = trajectory_uniforms(seed, start, stop)
    x = fmap.lower + u * fmap.width
    weight = psi(x)
    branch, offset = fmap.locate_array(x)
    out = []
    step = 0
    for target in checkpoints:
        while step < target:
            branch, offset = fmap.step_array(branch, offset)
            step += 1
        values = weight * phi(fmap.position_array(branch, offset))
        out.append((math.fsum(values), math.fsum(values * values)))
    return out


def correlation(
    fmap: IntervalMap,
    psi_tag: str,
    phi_tag: str,
    n_list: list[int],
    size: int,
    seed: int = 0,
    *,
    p_bar: SimplexPoint,
    workers: int = 1,
) -> dict[str, Any]:
    """Monte Carlo ``integral psi * phi o f^n dLeb`` against ``integral psi dLeb * sum_k p_k phi(xi_k)``.

    Raises:
        ValueError: ``phi`` is not continuous at the fixed points (indicators are rejected).
    """
    psi = parse_test_function(psi_tag)
    phi = parse_test_function(phi_tag)
    if phi.kind != "poly":
        raise ValueError(f"phi={phi_tag!r} must be continuous at every fixed point; use a polynomial")
    checkpoints = sorted(set(int(n) for n in n_list))
    tasks = [(fmap, seed, a, b, checkpoints, psi, phi) for a, b in _block_ranges(size)]
    results = _run_blocks(_correlation_block, tasks, workers)

    psi_mass = psi.lebesgue_integral(fmap.lower, fmap.upper)
    limit = psi_mass * math.fsum(p * float(phi(np.array(xi))) for p, xi in zip(p_bar.components, fmap.fixed_points))
    rows, checks = [], []
    for i, n in enumerate(checkpoints):
        total = math.fsum(block[i][0] for block in results)
        squares = math.fsum(block[i][1] for block in results)
        mean = total / size
        variance = max(squares / size - mean * mean, 0.0)
        estimate = fmap.width * mean
        se = fmap.width * math.sqrt(variance / size)
        rows.append({"n": n, "estimate": estimate, "se": se})
    report: dict[str, Any] = {"psi": psi_tag, "phi": phi_tag, "limit": limit, "psi_integral": psi_mass, "rows": rows}
    if checkpoints and checkpoints[0] == 0:
        direct, _ = integrate.quad(lambda x: float(psi(np.array(x)) * phi(np.array(x))), fmap.lower, fmap.upper,
                                   points=[v for v in psi.params if psi.kind == "indicator" and fmap.lower < v < fmap.upper] or None,
                                   limit=200)
        report["quadrature_n0"] = direct
        checks.append(Check.within("n0_quadrature", rows[0]["estimate"], direct, 3.0 * rows[0]["se"] + 1e-12))
    last = rows[-1]
    checks.append(Check.within("limit", last["estimate"], limit, max(0.05, 3.0 * last["se"])))
    report["checks"] = checks
    return report


# ---------------------------------------------------------------------------
# Mass on the inducing set
# ---------------------------------------------------------------------------

def _mass_block(task: tuple) -> np.ndarray:
    fmap, inducing, lam, seed, start, stop, checkpoints = task
    branch, offset = _initial_states(fmap, lam, seed, start, stop)
    hits = np.zeros(len(checkpoints), dtype=np.int64)
    step = 0
    for i, target in enumerate(checkpoints):
        while step < target:
            branch, offset = fmap.step_array(branch, offset)
            step += 1
        hits[i] = int(inducing.contains_array(fmap, branch, offset).sum())
    return hits


def mass_in_set(
    fmap: IntervalMap,
    inducing: InducingSet,
    lam: str | dict[str, Any] | InitialDensity,
    n_list: np.ndarray | list[int],
    size: int,
    seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Fraction of ``size`` orbits from ``lam`` lying in ``Y`` at each time in ``n_list``."""
    density = parse_initial_density(lam, fmap)
    checkpoints = sorted(set(int(n) for n in n_list))
    tasks = [(fmap, inducing, density, seed, a, b, checkpoints) for a, b in _block_ranges(size)]
    hits = np.sum(_run_blocks(_mass_block, tasks, workers), axis=0)
    by_n = dict(zip(checkpoints, hits / size))
    return np.array([by_n[int(n)] for n in n_list])
