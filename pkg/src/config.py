"""
Numerical configuration constants for neutral-orbits.

This module contains all tunable constants including:
- Map validation tolerances (exponent fits, anchoring, derivative margins)
- Cell-table depths and tail-fit windows
- Induced transfer-operator settings
- Monte Carlo ensemble layout (neighbourhood radius, histogram bins, blocks)
- Artifact schema versions
"""

from __future__ import annotations

# ---------------------------------------------------------------------------
# Map construction and validation
# ---------------------------------------------------------------------------
# Local exponent fits regress log|f(x) - x| on log|x - xi| over a geometric
# grid of distances.  Closed-form branches make these fits essentially exact,
# so the tolerances are far tighter than anything statistical downstream.
EXPONENT_FIT_RANGE: tuple[float, float] = (1e-6, 1e-2)
EXPONENT_FIT_POINTS: int = 64
EXPONENT_TOLERANCE: float = 0.02
PREFACTOR_TOLERANCE: float = 0.02  # relative
DERIVATIVE_MARGIN: float = 1e-12  # f' >= 1 - margin inside neutral neighbourhoods
ANCHOR_TOLERANCE: float = 1e-12  # branch image endpoints vs phase endpoints
NEUTRAL_NEIGHBOURHOOD: float = 1e-3  # excluded from the strict f' > 1 check
VALIDATION_GRID: int = 10_000

# Singular/critical CLM reparametrisation: s(x) = x**k on [0, GLUE_START],
# quintic on [GLUE_START, GLUE_END], identity on [GLUE_END, 1].
GLUE_START: float = 0.1
GLUE_END: float = 0.9
SINGULAR_FIT_RANGE: tuple[float, float] = (1e-6, 1e-3)

# Interior fixed points supplied by the caller must agree with the equalised
# position to this absolute tolerance.
GLUING_TOLERANCE: float = 1e-12

# Inverse branches: Newton from above on a convex increasing function, with a
# bisection fallback for the glue region.
INVERSE_TOLERANCE: float = 1e-14
INVERSE_MAX_ITER: int = 200

# ---------------------------------------------------------------------------
# Induced map, cells and tails
# ---------------------------------------------------------------------------
VALIDATION_DEPTH: int = 10_000
TAIL_DEPTH: int = 1_000_000
MIN_FIT_DEPTH: int = 1_000
UNDERFLOW_LENGTH: float = 1e-300

# Tail fits use the window [N_max / TAIL_WINDOW_DIVISOR, N_max], geometrically
# subsampled to TAIL_WINDOW_POINTS indices.
TAIL_WINDOW_DIVISOR: int = 100
TAIL_WINDOW_POINTS: int = 200
PLATEAU_SLOPE_TOLERANCE: float = 0.05

# return_orbit gives up after this many steps (float stagnation near a
# neutral fixed point is reported long before this in practice).
ORBIT_ITERATION_CAP: int = 10**9

# ---------------------------------------------------------------------------
# Induced transfer operator
# ---------------------------------------------------------------------------
DENSITY_GRID_SIZE: int = 1024
DENSITY_DEPTH: int = 10_000
DENSITY_TOLERANCE: float = 1e-8
DENSITY_MAX_SWEEPS: int = 500
TRUNCATION_LIMIT: float = 0.01  # untracked tail mass relative to |Y|

# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------
# Neighbourhood radius of the fixed points.  Results are always reported for
# a second radius as well to expose the sensitivity to this choice.
DEFAULT_EPSILON: float = 0.05
SECONDARY_EPSILON: float = 0.02

# Histogram layout: geometric bins hugging each fixed point, uniform elsewhere.
GEOMETRIC_BINS: int = 64
GEOMETRIC_RATIO: float = 1.5
UNIFORM_BINS: int = 128

# Ensembles are processed in blocks of this many trajectories.  The block
# size never depends on the worker count, so results are bit-identical for
# any pool size.
ENSEMBLE_BLOCK: int = 1024

# A run fails when more than this fraction of its orbits raise a numeric flag.
MAX_FLAGGED_FRACTION: float = 0.01

# Relative standard error allowed at the largest n of a decay fit.
MAX_RELATIVE_SE: float = 0.20

# Simplex grid used to minimise W1(e_n, nu_p) over p.
SIMPLEX_GRID_STEP: dict[int, float] = {1: 1.0, 2: 0.005, 3: 0.02}

# Single-orbit experiments are iterated in chunks of this many steps.
ORBIT_CHUNK: int = 65_536

# ---------------------------------------------------------------------------
# Asymptotics
# ---------------------------------------------------------------------------
SERIES_BLOCK: int = 1_000_000

# Absolute error target for the adaptive quadrature of the Lamperti CDF.
CDF_ABS_TOLERANCE: float = 1e-8

# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------
CSV_SCHEMA_VERSION: int = 1
CSV_SCHEMAS: dict[str, list[str]] = {
    "occupation": ["seed", "index"],  # + S_1/n..S_d/n, leftover, flagged
    "cells": ["k", "side", "n", "left", "right", "length", "dist_to_fp"],
    "density": ["left", "right", "h"],
    "measure": ["bin_left", "bin_right", "mass"],
    "tails": ["series", "n", "value"],
    "decay": ["n", "value"],
    "samples": [],  # one column per simplex component
}
REPORT_FILE: str = "report.json"

# SVG canvas
SVG_WIDTH: int = 640
SVG_HEIGHT: int = 420
SVG_MARGIN: int = 56
SVG_HISTOGRAM_BINS: int = 50
