"""
Experiment pipelines.

Each experiment tag maps to one pipeline function.  A pipeline reads its
parameters from the run context, calls the library modules, writes CSV
artifacts through the context's :class:`OutputWriter`, and returns a dict
with ``statistics`` and ``checks`` for the JSON report.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .arcsine import (
    LampertiDist,
    SimplexPoint,
    ks_band,
    ks_statistic,
    lamperti_cdf,
    lamperti_pdf,
    sample_stable,
    sample_Z,
    two_sample_ks,
)
from .asymptotics import (
    fit_power_law,
    recursion_sequence,
    series_log_one,
    series_log_two,
    series_one,
    series_one_limit,
    series_two,
)
from .config import (
    DEFAULT_EPSILON,
    DENSITY_DEPTH,
    DENSITY_GRID_SIZE,
    TAIL_DEPTH,
    TAIL_WINDOW_DIVISOR,
    VALIDATION_DEPTH,
)
from .density import (
    NaturalWeights,
    cell_masses,
    induced_density,
    invariance_residual,
    natural_weights_formula,
    natural_weights_tailfit,
    return_mass_decay,
    select_reading,
)
from .induced import (
    build_cells,
    build_inducing_set,
    cell_asymptotics,
    cell_rows,
    distortion_diagnostic,
    hypothesis_diagnostics,
    return_map_expansion,
    tail_statistics,
)
from .maps import IntervalMap, validate_map
from .monte_carlo import (
    MeasureSummary,
    OccupationEnsemble,
    cesaro_pushforward,
    correlation,
    empirical_measure,
    occupation_ensemble,
    occupation_mean_weights,
    pushforward,
    simplex_coverage,
)
from .output_writer import OutputWriter
from .rng import PURPOSE_STABLE, block_generator, trajectory_uniform
from .utils import Check

log = logging.getLogger(__name__)

SAMPLER_BLOCK: int = 100_000


@dataclass
class RunContext:
    """Everything a pipeline needs: parameters, map, seed, worker count and writer."""

    params: dict[str, Any]
    writer: OutputWriter
    fmap: IntervalMap | None = None
    seed: int | None = None
    workers: int = 1
    cache: dict[str, Any] = field(default_factory=dict)

    def get(self, name: str, default: Any = None) -> Any:
        return self.params.get(name, default)


@dataclass(frozen=True)
class Experiment:
    """A pipeline with the config fields it cannot run without."""

    run: Callable[[RunContext], dict[str, Any]]
    required: tuple[str, ...] = ()
    needs_map: bool = True
    stochastic: bool = False
    # (trigger, needed): when any trigger field is present, every needed field must be too
    conditional: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()
    # at least one field of each group
    any_of: tuple[tuple[str, ...], ...] = ()


def as_checks(items: list[Check | dict[str, Any]]) -> list[Check]:
    """Normalise checks that arrive either as records or as their dict form."""
    out = []
    for item in items:
        if isinstance(item, Check):
            out.append(item)
        else:
            out.append(Check(item["name"], item["value"], item["tolerance"], item["passed"], item.get("expected")))
    return out


def _strip_checks(report: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in report.items() if k != "checks"}


# ---------------------------------------------------------------------------
# Shared steps
# ---------------------------------------------------------------------------

def _cells(ctx: RunContext, default_depth: int = VALIDATION_DEPTH):
    key = f"cells:{ctx.get('n_max', default_depth)}"
    if key not in ctx.cache:
        inducing = build_inducing_set(ctx.fmap)
        ctx.cache[key] = build_cells(ctx.fmap, inducing, int(ctx.get("n_max", default_depth)))
    return ctx.cache[key]


def _density(ctx: RunContext):
    if "density" not in ctx.cache:
        cells = _cells(ctx, DENSITY_DEPTH)
        kwargs = {}
        if "truncation_limit" in ctx.params:
            kwargs["truncation_limit"] = float(ctx.params["truncation_limit"])
        ctx.cache["density"] = induced_density(ctx.fmap, cells, int(ctx.get("grid_size", DENSITY_GRID_SIZE)), **kwargs)
    return ctx.cache["density"]


def _natural_weights(ctx: RunContext) -> NaturalWeights:
    """``p_bar`` from the config if pinned, otherwise from the density formula."""
    if "weights" in ctx.cache:
        return ctx.cache["weights"]
    if "p_bar" in ctx.params:
        weights = NaturalWeights(SimplexPoint.from_weights(ctx.params["p_bar"]), tuple(ctx.params["p_bar"]), "pinned")
    else:
        cells = _cells(ctx, DENSITY_DEPTH)
        h = _density(ctx)
        weights = natural_weights_formula(ctx.fmap, h, cells.inducing)
        if ctx.fmap.family != "thaler":
            weights = select_reading(weights, natural_weights_tailfit(cells, h))
    ctx.cache["weights"] = weights
    return weights


def _occupation_csv(ctx: RunContext, ensemble: OccupationEnsemble, p_bar: SimplexPoint, filename: str) -> str:
    d = ensemble.counts.shape[1]
    columns = ["seed", "index", *[f"S{k + 1}" for k in range(d)], "leftover", "flagged"]
    return ctx.writer.write_csv(
        "occupation", ensemble.rows(), columns, filename=filename,
        map=ensemble.map_hash[:16], lam=ensemble.lam, n=ensemble.n, eps=ensemble.epsilon,
        d=d, alpha=ctx.fmap.alpha, p1=p_bar.components[0],
    )


def _measure_csv(ctx: RunContext, summary: MeasureSummary, filename: str) -> str:
    return ctx.writer.write_csv("measure", summary.rows(), filename=filename, n=summary.n, eps=summary.epsilon)


# ---------------------------------------------------------------------------
# Map, cells and density
# ---------------------------------------------------------------------------

def run_validate(ctx: RunContext) -> dict[str, Any]:
    report = validate_map(ctx.fmap)
    return {"statistics": _strip_checks(report.to_dict()), "checks": report.checks}


def run_cells(ctx: RunContext) -> dict[str, Any]:
    cells = _cells(ctx, TAIL_DEPTH)
    asymptotics = cell_asymptotics(cells)
    tails = tail_statistics(cells)
    x_defect, y_defect = cells.partition_defects()
    ctx.writer.write_csv("cells", cell_rows(cells, ctx.get("cell_rows")), n_max=cells.n_max)
    ctx.writer.write_csv("tails", tails.rows(), weighting="lebesgue",
                         fit_min=max(1, cells.n_max // TAIL_WINDOW_DIVISOR), fit_max=cells.n_max)
    checks = [
        *as_checks(asymptotics["checks"]),
        *tails.checks,
        Check.at_most("x_partition_defect", abs(x_defect), 1e-9),
        Check.at_most("y_partition_defect", abs(y_defect), 1e-9),
    ]
    return {
        "statistics": {
            "n_max": cells.n_max,
            "truncated_at": cells.truncated_at,
            "partition_defects": [x_defect, y_defect],
            "asymptotics": _strip_checks(asymptotics),
            "tails": _strip_checks(tails.to_dict()),
        },
        "checks": checks,
    }


def run_density(ctx: RunContext) -> dict[str, Any]:
    cells = _cells(ctx, DENSITY_DEPTH)
    h = _density(ctx)
    residual, mass_defect = invariance_residual(cells, h)
    ctx.writer.write_csv("density", h.rows(), grid=h.size, sweeps=h.sweeps)
    eps = float(ctx.get("eps", DEFAULT_EPSILON))
    hypotheses = hypothesis_diagnostics(cells, h, eps, seed=ctx.seed)
    expansion = return_map_expansion(ctx.fmap, cells)
    distortion = distortion_diagnostic(ctx.fmap, cells, int(ctx.get("pairs", 200)), ctx.seed)
    masses = cell_masses(cells, h)
    mass_outside = {label: float(m["X"][0]) for label, m in masses.items()}
    checks = [
        Check.at_most("invariance_residual", residual, float(ctx.get("residual_tolerance", 1e-8))),
        Check.at_most("truncated_mass", h.truncated_mass, float(ctx.get("truncation_limit", 0.01))),
        Check.at_least("return_map_expansion", expansion, 1.0),
        *as_checks(hypotheses["checks"]),
        *as_checks(distortion["checks"]),
    ]
    return {
        "statistics": {
            "grid_size": h.size,
            "sweeps": h.sweeps,
            "residual": residual,
            "mass_defect": mass_defect,
            "truncated_mass": h.truncated_mass,
            "integral": h.integral(),
            "lipschitz_constant": h.lipschitz_constant(),
            "return_map_expansion": expansion,
            "distortion": _strip_checks(distortion),
            "hypotheses": _strip_checks(hypotheses),
            "excursion_mass": mass_outside,
        },
        "checks": checks,
    }


def run_weights(ctx: RunContext) -> dict[str, Any]:
    """Natural weights by formula, tail fit and (optionally) ensemble occupation mean."""
    cells = _cells(ctx, DENSITY_DEPTH)
    h = _density(ctx)
    tailfit = natural_weights_tailfit(cells, h)
    formula = natural_weights_formula(ctx.fmap, h, cells.inducing)
    if ctx.fmap.family != "thaler":
        formula = select_reading(formula, tailfit)
    estimates = {"formula": formula, "tail-fit": tailfit}
    if "N" in ctx.params:
        ensemble = occupation_ensemble(
            ctx.fmap, ctx.get("lam", "uniform"), int(ctx.params["N"]), int(ctx.params["n"]),
            float(ctx.get("eps", DEFAULT_EPSILON)), ctx.seed, workers=ctx.workers,
        )
        estimates["occupation-mean"] = occupation_mean_weights(ensemble)

    tolerance = float(ctx.get("concordance_tolerance", 0.10))
    checks: list[Check] = []
    names = list(estimates)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pa, pb = estimates[a].p_bar.as_array(), estimates[b].p_bar.as_array()
            gap = float(np.max(np.abs(pa / pb - 1.0))) if np.all(pb > 0) else math.inf
            checks.append(Check.at_most(f"concordance[{a},{b}]", gap, tolerance))
    if "expected_p_bar" in ctx.params:
        expected = np.array(ctx.params["expected_p_bar"], dtype=float)
        for name, est in estimates.items():
            checks.append(Check.at_most(f"expected[{name}]", est.p_bar.distance(expected),
                                        float(ctx.get("expected_tolerance", 0.02))))
    return {"statistics": {name: est.to_dict() for name, est in estimates.items()}, "checks": checks}


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

def run_occupation(ctx: RunContext) -> dict[str, Any]:
    fmap = ctx.fmap
    p_bar = _natural_weights(ctx).p_bar
    eps = float(ctx.get("eps", DEFAULT_EPSILON))
    size, n = int(ctx.params["N"]), int(ctx.params["n"])
    lam = ctx.get("lam", "uniform")
    ensemble = occupation_ensemble(fmap, lam, size, n, eps, ctx.seed, workers=ctx.workers, p_bar=p_bar)
    _occupation_csv(ctx, ensemble, p_bar, "occupation.csv")

    fractions = ensemble.samples
    mean = fractions.mean(axis=0)
    se = fractions.std(axis=0, ddof=1) / math.sqrt(size) if size > 1 else np.zeros_like(mean)
    stats: dict[str, Any] = {
        "p_bar": list(p_bar.components),
        "mean_fraction": mean.tolist(),
        "se": se.tolist(),
        "mean_share": ensemble.shares.mean(axis=0).tolist(),
        "mean_leftover": float(ensemble.leftover.mean()),
        "flagged": int(ensemble.flagged.sum()),
        "ks": ensemble.ks,
    }
    if ensemble.secondary_counts is not None:
        stats["secondary_epsilon"] = ensemble.secondary_epsilon
        stats["secondary_mean_fraction"] = (ensemble.secondary_counts / n).mean(axis=0).tolist()

    checks = [Check.within(f"mean_fraction[xi{k + 1}]", mean[k], p_bar.components[k], 3.0 * se[k] + 0.02)
              for k in range(fmap.d)]
    if fmap.alpha < 1.0 and ensemble.ks is not None:
        checks.append(Check.at_most("ks_lamperti", ensemble.ks, float(ctx.get("ks_tolerance", 0.05))))
    if fmap.alpha >= 1.0:
        near = float(np.mean(np.max(np.abs(fractions - p_bar.as_array()), axis=1) <= 0.1))
        stats["fraction_near_p_bar"] = near
        checks.append(Check.at_least("concentration_near_p_bar", near, 0.9))

    if "compare_lam" in ctx.params:
        other = occupation_ensemble(fmap, ctx.params["compare_lam"], size, n, eps, ctx.seed,
                                    workers=ctx.workers, p_bar=p_bar)
        _occupation_csv(ctx, other, p_bar, "occupation_compare.csv")
        statistic = two_sample_ks(fractions[:, 0], other.samples[:, 0])
        stats["two_sample_ks"] = statistic
        stats["ks_band_99"] = ks_band(size, size)
        checks.append(Check.at_most("two_sample_ks", statistic, float(ctx.get("two_sample_tolerance", 0.03))))
    return {"statistics": stats, "checks": checks}


def _mass_checks(summaries: list[MeasureSummary], p_bar: SimplexPoint, tolerance: float, size: int) -> list[Check]:
    last = summaries[-1]
    checks = [Check.within(f"ball_mass[xi{k + 1}]", m, p_bar.components[k], tolerance)
              for k, m in enumerate(last.neighbourhood_masses)]
    totals = [float(s.neighbourhood_masses.sum()) for s in summaries]
    se = [math.sqrt(max(t * (1.0 - t), 0.0) / size) for t in totals]
    drops = [totals[i] - totals[i + 1] - 3.0 * math.hypot(se[i], se[i + 1]) for i in range(len(totals) - 1)]
    if drops:
        checks.append(Check.at_most("ball_mass_increasing", max(drops), 0.0))
    return checks


def run_pushforward(ctx: RunContext) -> dict[str, Any]:
    p_bar = _natural_weights(ctx).p_bar
    eps = float(ctx.get("eps", DEFAULT_EPSILON))
    size = int(ctx.params["N"])
    n_list = [int(n) for n in ctx.params["n_list"]]
    tolerance = float(ctx.get("mass_tolerance", 0.05))
    summaries = pushforward(ctx.fmap, ctx.get("lam", "uniform"), n_list, eps, size, ctx.seed,
                            workers=ctx.workers, p_bar=p_bar)
    _measure_csv(ctx, summaries[-1], "measure.csv")
    checks = _mass_checks(summaries, p_bar, tolerance, size)
    stats: dict[str, Any] = {"p_bar": list(p_bar.components), "summaries": [s.to_dict() for s in summaries]}
    if "compare_lam" in ctx.params:
        other = pushforward(ctx.fmap, ctx.params["compare_lam"], [n_list[-1]], eps, size, ctx.seed,
                            workers=ctx.workers, p_bar=p_bar)[0]
        _measure_csv(ctx, other, "measure_compare.csv")
        gap = float(np.max(np.abs(other.neighbourhood_masses - summaries[-1].neighbourhood_masses)))
        stats["compare"] = other.to_dict()
        checks.append(Check.at_most("lam_independence", gap, tolerance))
    return {"statistics": stats, "checks": checks}


def run_cesaro(ctx: RunContext) -> dict[str, Any]:
    p_bar = _natural_weights(ctx).p_bar
    eps = float(ctx.get("eps", DEFAULT_EPSILON))
    size, n = int(ctx.params["N"]), int(ctx.params["n"])
    per_step = bool(ctx.get("per_step", False))
    result = cesaro_pushforward(ctx.fmap, ctx.get("lam", "uniform"), n, eps, size, ctx.seed,
                                workers=ctx.workers, p_bar=p_bar, per_step=per_step)
    summary, steps = result if per_step else (result, None)
    _measure_csv(ctx, summary, "measure.csv")
    tolerance = float(ctx.get("mass_tolerance", 0.05))
    checks = [Check.within(f"cesaro_mass[xi{k + 1}]", m, p_bar.components[k], tolerance)
              for k, m in enumerate(summary.neighbourhood_masses)]
    if steps is not None:
        row_mean = np.mean([s.masses for s in steps], axis=0)
        checks.append(Check.at_most("row_mean_identity", float(np.max(np.abs(row_mean - summary.masses))), 1e-12))
    return {"statistics": {"p_bar": list(p_bar.components), "summary": summary.to_dict()}, "checks": checks}


def run_correlation(ctx: RunContext) -> dict[str, Any]:
    p_bar = _natural_weights(ctx).p_bar
    report = correlation(ctx.fmap, ctx.params["psi"], ctx.params["phi"], [int(n) for n in ctx.params["n_list"]],
                         int(ctx.params["N"]), ctx.seed, p_bar=p_bar, workers=ctx.workers)
    ctx.writer.write_csv("decay", ([r["n"], r["estimate"]] for r in report["rows"]), filename="correlation.csv",
                         psi=report["psi"], phi=report["phi"])
    return {"statistics": _strip_checks(report), "checks": report["checks"]}


def run_coverage(ctx: RunContext) -> dict[str, Any]:
    x0 = ctx.get("x0")
    if x0 is None:
        x0 = ctx.fmap.lower + trajectory_uniform(ctx.seed, 0) * ctx.fmap.width
    n_max = int(ctx.params["n_max"])
    checkpoints = ctx.get("checkpoints") or [int(n_max / 10 ** i) for i in range(3, -1, -1) if n_max / 10 ** i >= 1]
    report = simplex_coverage(ctx.fmap, float(x0), n_max, float(ctx.params["delta"]),
                              float(ctx.get("eps", DEFAULT_EPSILON)), checkpoints=checkpoints,
                              exploration=bool(ctx.get("exploration", False)))
    ctx.writer.write_csv("decay", ([h["n"], h["covering_radius"]] for h in report["history"]),
                         filename="coverage.csv", delta=report["delta"])
    return {"statistics": {**_strip_checks(report), "x0": x0}, "checks": report["checks"]}


def run_empirical(ctx: RunContext) -> dict[str, Any]:
    """Minimal W1 to the point-mass simplex along several orbits; a majority must decrease."""
    n_list = sorted(int(n) for n in ctx.params["n_list"])
    orbits = int(ctx.get("orbits", 10))
    eps = float(ctx.get("eps", DEFAULT_EPSILON))
    traces = []
    for i in range(orbits):
        x0 = ctx.fmap.lower + trajectory_uniform(ctx.seed, i) * ctx.fmap.width
        traces.append([empirical_measure(ctx.fmap, x0, n, eps).w1_min for n in n_list])
    decreasing = sum(all(b <= a for a, b in zip(t, t[1:])) for t in traces)
    return {
        "statistics": {"n_list": n_list, "w1_min": traces, "decreasing_orbits": decreasing},
        "checks": [Check.at_least("majority_decreasing", decreasing, orbits / 2.0 + 0.5)],
    }


def run_decay(ctx: RunContext) -> dict[str, Any]:
    cells = _cells(ctx, DENSITY_DEPTH)
    c_tau = None
    if ctx.get("predict", False):
        c_tau = natural_weights_tailfit(cells, _density(ctx)).c_tau
    report = return_mass_decay(ctx.fmap, cells.inducing, ctx.get("lam", "uniform"),
                               [int(n) for n in ctx.params["n_list"]], ensemble_size=int(ctx.params["N"]),
                               seed=ctx.seed, workers=ctx.workers, c_tau=c_tau)
    ctx.writer.write_csv("decay", zip(report["n"], report["mass"]), fit_min=report["n"][0], fit_max=report["n"][-1])
    return {"statistics": _strip_checks(report), "checks": report["checks"]}


# ---------------------------------------------------------------------------
# Laws and series
# ---------------------------------------------------------------------------

def run_arcsine(ctx: RunContext) -> dict[str, Any]:
    """Lamperti closed forms, stable Laplace transforms and simplex-mean identities."""
    checks: list[Check] = []
    stats: dict[str, Any] = {}
    t = np.linspace(0.1, 0.9, 9)
    pdf_gap = float(np.max(np.abs(lamperti_pdf(0.5, 0.5, t) - 1.0 / (math.pi * np.sqrt(t * (1.0 - t))))))
    cdf_gap = max(abs(lamperti_cdf(0.5, 0.5, float(s)) - 2.0 / math.pi * math.asin(math.sqrt(s))) for s in t)
    checks.append(Check.at_most("lamperti_pdf_arcsine", pdf_gap, 1e-12))
    checks.append(Check.at_most("lamperti_cdf_arcsine", cdf_gap, 1e-8))
    stats["lamperti"] = {"pdf_gap": pdf_gap, "cdf_gap": cdf_gap}

    size = int(ctx.get("N", 0))
    if size:
        laplace = []
        for case, (alpha, weight) in enumerate(ctx.get("stable_cases", [])):
            rng = block_generator(ctx.seed, PURPOSE_STABLE, case)
            zeta = np.concatenate([sample_stable(alpha, weight, rng, min(SAMPLER_BLOCK, size - start))
                                   for start in range(0, size, SAMPLER_BLOCK)])
            for s in ctx.get("laplace_points", [0.1, 1.0, 10.0]):
                values = np.exp(-s * zeta)
                mean, se = float(values.mean()), float(values.std(ddof=1) / math.sqrt(size))
                expected = math.exp(-(s ** alpha) * weight)
                laplace.append({"alpha": alpha, "weight": weight, "t": s, "mean": mean, "expected": expected, "se": se})
                checks.append(Check.within(f"laplace[{alpha:g},{weight:g},{s:g}]", mean, expected, 4.0 * se))
        stats["laplace"] = laplace

        means = []
        for case, weights in enumerate(ctx.get("simplex_cases", [])):
            p = SimplexPoint.from_weights(weights)
            alpha = float(ctx.get("alpha", 0.5))
            rng = block_generator(ctx.seed, PURPOSE_STABLE, 1000 + case)
            z = np.asarray(sample_Z(alpha, p, rng, size))
            mean = z.mean(axis=0)
            se = z.std(axis=0, ddof=1) / math.sqrt(size)
            means.append({"p": list(p.components), "mean": mean.tolist(), "se": se.tolist()})
            for k in range(p.d):
                checks.append(Check.within(f"simplex_mean[{case},{k + 1}]", mean[k], p.components[k], 3.0 * se[k]))
            if case == 0:
                ctx.writer.write_csv("samples", z[: int(ctx.get("sample_rows", 10_000))],
                                     [f"Z{k + 1}" for k in range(p.d)], alpha=alpha, d=p.d, p1=p.components[0])
                if p.d == 2 and alpha < 1.0:
                    stats["sample_ks"] = ks_statistic(z[:, 0], LampertiDist(alpha, p.components[0]).cdf)
        stats["simplex_means"] = means
    return {"statistics": stats, "checks": checks}


def run_series(ctx: RunContext) -> dict[str, Any]:
    checks: list[Check] = []
    stats: dict[str, Any] = {}
    n = int(ctx.get("n", 10**6))
    for alpha in ctx.get("alphas", [0.5]):
        value, limit = series_one(alpha, n), series_one_limit(alpha)
        stats[f"series_one[{alpha:g}]"] = {"value": value, "limit": limit}
        checks.append(Check.relative(f"series_one[{alpha:g}]", value, limit, float(ctx.get("series_tolerance", 0.015))))
        checks.append(Check.relative(f"series_one_reversed[{alpha:g}]", series_one(alpha, n, reverse=True), value, 1e-10))
    for tag in ctx.get("g_tags", []):
        pairs = [series_two(0.5, tag, m) for m in (n // 100, n // 10, n)]
        stats[f"series_two[{tag}]"] = [list(p) for p in pairs]
        checks.append(Check.at_most(f"series_two_bound[{tag}]", max(pairs[-1]), 0.5))
        checks.append(Check.at_most(f"series_two_decreasing[{tag}]",
                                    max(b - a for first, second in zip(pairs, pairs[1:])
                                        for a, b in zip(first, second)), 0.0))
    if "n_log" in ctx.params:
        n_log = int(ctx.params["n_log"])
        one = series_log_one("inv_log", n_log)
        two = series_log_two("one", "one", n_log)
        stats["series_log_one"] = one
        stats["series_log_two"] = two
        checks.append(Check.at_most("series_log_one", one, 0.25))
        checks.append(Check.within("series_log_two", two, 1.0, 0.05))
    if "recursion" in ctx.params:
        b, p, z0 = ctx.params["recursion"]
        z = recursion_sequence(b, p, z0, 10**5)
        fit = fit_power_law(z, (10**3, 10**5), first_index=0)
        gaps = fit_power_law(z[:-1] - z[1:], (10**3, 10**5 - 1), first_index=0)
        stats["recursion"] = {"z": fit.to_dict(), "gaps": gaps.to_dict()}
        checks.append(Check.within("recursion_slope", fit.slope, -1.0 / p, 0.02))
        checks.append(Check.relative("recursion_prefactor", fit.prefactor, (p * b) ** (-1.0 / p), 0.05))
        checks.append(Check.within("recursion_gap_slope", gaps.slope, -(1.0 + 1.0 / p), 0.02))
    return {"statistics": stats, "checks": checks}


EXPERIMENTS: dict[str, Experiment] = {
    "validate": Experiment(run_validate),
    "cells": Experiment(run_cells),
    "density": Experiment(run_density, ("seed",), stochastic=True),
    "weights": Experiment(run_weights, conditional=((("N",), ("n", "seed")),)),
    "occupation": Experiment(run_occupation, ("N", "n", "seed"), stochastic=True),
    "pushforward": Experiment(run_pushforward, ("N", "n_list", "seed"), stochastic=True),
    "cesaro": Experiment(run_cesaro, ("N", "n", "seed"), stochastic=True),
    "correlation": Experiment(run_correlation, ("psi", "phi", "N", "n_list", "seed"), stochastic=True),
    "coverage": Experiment(run_coverage, ("n_max", "delta"), any_of=(("x0", "seed"),)),
    "empirical": Experiment(run_empirical, ("n_list", "seed"), stochastic=True),
    "arcsine": Experiment(run_arcsine, needs_map=False, conditional=((("N",), ("seed",)),)),
    "series": Experiment(run_series, needs_map=False),
    "decay": Experiment(run_decay, ("N", "n_list", "seed"), stochastic=True),
}
