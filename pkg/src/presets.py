"""
Shipped experiment presets.

Each preset pins a complete configuration and names the acceptance criterion
it reproduces (``None`` for exploration and convenience presets).  Presets are
plain config dicts; ``neutral-orbits preset <name> --output cfg.json`` writes
one to disk for ``neutral-orbits run``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any

import numpy as np

SYMMETRIC_HALF: dict[str, Any] = {"family": "thaler", "alpha": 0.5, "cuts": [0.5]}
ASYMMETRIC_HALF: dict[str, Any] = {"family": "thaler", "alpha": 0.5, "cuts": [0.4]}
SYMMETRIC_ONE: dict[str, Any] = {"family": "thaler", "alpha": 1.0, "cuts": [0.5]}
THREE_RAYS_HALF: dict[str, Any] = {"family": "thaler", "alpha": 0.5, "cuts": [1.0 / 3.0, 2.0 / 3.0]}
THREE_RAYS_ONE: dict[str, Any] = {
    "family": "thaler", "alpha": 1.0, "cuts": [1.0 / 3.0, 2.0 / 3.0], "allow_c1_interior": True,
}


def _geometric(first: int, last: int, points: int) -> list[int]:
    return sorted({int(round(v)) for v in np.geomspace(first, last, points)})


@dataclass(frozen=True)
class Preset:
    """A pinned configuration and the acceptance criterion it reproduces."""

    name: str
    criterion: int | None
    description: str
    config: dict[str, Any]
    long_running: bool = False

    def to_config(self) -> dict[str, Any]:
        """A fresh copy of the config, tagged with the preset name."""
        config = copy.deepcopy(self.config)
        config["preset"] = self.name
        return config


_PRESET_LIST: list[Preset] = [
    Preset(
        "lamperti-reduction", 1,
        "Lamperti density and CDF reduce to the arcsine law at alpha = p = 1/2",
        {"experiment": "arcsine"},
    ),
    Preset(
        "stable-laplace", 2,
        "Laplace transform of the one-sided stable sampler at N = 10^6",
        {
            "experiment": "arcsine",
            "seed": 11,
            "N": 1_000_000,
            "stable_cases": [[1.0 / 3.0, 1.0], [0.5, 1.0], [0.7, 0.5]],
            "laplace_points": [0.1, 1.0, 10.0],
        },
    ),
    Preset(
        "simplex-mean", 3,
        "Component means of the multiray arcsine law equal p",
        {
            "experiment": "arcsine",
            "seed": 13,
            "N": 1_000_000,
            "alpha": 0.5,
            "simplex_cases": [[0.3, 0.7], [0.2, 0.3, 0.5]],
        },
    ),
    Preset(
        "thmB-d2-alpha-half", 4,
        "Occupation fractions on the symmetric alpha = 1/2 map follow Lamperti(1/2, 1/2) for any initial density",
        {
            "experiment": "occupation",
            "map": SYMMETRIC_HALF,
            "seed": 7,
            "N": 10_000,
            "n": 1_000_000,
            "eps": 0.05,
            "lam": "uniform",
            "compare_lam": "beta:2:5",
            "p_bar": [0.5, 0.5],
            "ks_tolerance": 0.05,
            "two_sample_tolerance": 0.03,
            "workers": 4,
        },
    ),
    Preset(
        "weights-asymmetric", 5,
        "Formula, tail-fit and occupation-mean natural weights agree on the cuts = [0.4] map",
        {
            "experiment": "weights",
            "map": ASYMMETRIC_HALF,
            "seed": 17,
            "N": 10_000,
            "n": 1_000_000,
            "concordance_tolerance": 0.10,
            "workers": 4,
        },
    ),
    Preset(
        "weights-symmetric", 5,
        "All three natural-weight estimators give (1/2, 1/2) on the symmetric map",
        {
            "experiment": "weights",
            "map": SYMMETRIC_HALF,
            "seed": 19,
            "N": 10_000,
            "n": 1_000_000,
            "expected_p_bar": [0.5, 0.5],
            "expected_tolerance": 0.02,
            "workers": 4,
        },
    ),
    Preset(
        "thmC-symmetric", 6,
        "Pushforward masses of the fixed-point balls approach (1/2, 1/2) independently of the initial density",
        {
            "experiment": "pushforward",
            "map": SYMMETRIC_HALF,
            "seed": 23,
            "N": 1_000_000,
            "n_list": [100, 1_000, 10_000],
            "eps": 0.05,
            "lam": "uniform",
            "compare_lam": "beta:2:5",
            "p_bar": [0.5, 0.5],
            "mass_tolerance": 0.05,
            "workers": 4,
        },
    ),
    Preset(
        "cell-tails", 7,
        "Cell-length and return-time tail exponents on the symmetric alpha = 1/2 map",
        {"experiment": "cells", "map": SYMMETRIC_HALF, "n_max": 10_000},
    ),
    Preset(
        "operator-decay", 8,
        "Return mass to the inducing set decays like n^(alpha - 1)",
        {
            "experiment": "decay",
            "map": SYMMETRIC_HALF,
            "seed": 29,
            "N": 100_000,
            "n_list": _geometric(100, 10_000, 9),
            "predict": True,
            "workers": 4,
        },
    ),
    Preset(
        "operator-decay-alpha-one", 8,
        "m_n log n is roughly flat on the alpha = 1 map (trend level only)",
        {
            "experiment": "decay",
            "map": SYMMETRIC_ONE,
            "seed": 31,
            "N": 20_000,
            "n_list": _geometric(1_000, 100_000, 5),
            "workers": 4,
        },
    ),
    Preset(
        "thmA-d2", 9,
        "A single orbit of the symmetric alpha = 1/2 map sweeps the whole simplex",
        {
            "experiment": "coverage",
            "map": SYMMETRIC_HALF,
            "seed": 37,
            "n_max": 10_000_000,
            "delta": 0.1,
            "eps": 0.05,
        },
    ),
    Preset(
        "thmA-d3", 9,
        "Three-ray coverage of the 2-simplex along one orbit of length 10^8",
        {
            "experiment": "coverage",
            "map": THREE_RAYS_HALF,
            "seed": 41,
            "n_max": 100_000_000,
            "delta": 0.1,
            "eps": 0.05,
        },
        long_running=True,
    ),
    Preset(
        "thmA-d3-alpha-one-exploration", None,
        "Coverage along one orbit of the alpha = 1 three-ray map; reported without a pass/fail contract",
        {
            "experiment": "coverage",
            "map": THREE_RAYS_ONE,
            "seed": 43,
            "n_max": 10_000_000,
            "delta": 0.1,
            "eps": 0.05,
            "exploration": True,
        },
        long_running=True,
    ),
    Preset(
        "series-limits", 10,
        "Series limits and the backward recursion asymptotics",
        {
            "experiment": "series",
            "alphas": [0.3, 0.5, 0.7],
            "n": 1_000_000,
            "g_tags": ["inv_log"],
            "n_log": 100_000_000,
            "recursion": [4.0, 2.0, 0.3],
        },
    ),
    Preset(
        "determinism", 11,
        "Small occupation run repeated with another worker count; CSV bytes must match",
        {
            "experiment": "occupation",
            "map": SYMMETRIC_HALF,
            "seed": 3,
            "N": 2_048,
            "n": 10_000,
            "p_bar": [0.5, 0.5],
            "ks_tolerance": 0.1,
            "workers": 2,
            "verify_determinism": True,
        },
    ),
    Preset(
        "cesaro-symmetric", None,
        "Cesaro averages of pushforwards on the symmetric map",
        {
            "experiment": "cesaro",
            "map": SYMMETRIC_HALF,
            "seed": 47,
            "N": 100_000,
            "n": 10_000,
            "p_bar": [0.5, 0.5],
            "per_step": True,
            "workers": 4,
        },
    ),
    Preset(
        "correlation-symmetric", None,
        "Decay of correlations between an L1 observable and a polynomial",
        {
            "experiment": "correlation",
            "map": SYMMETRIC_HALF,
            "seed": 53,
            "N": 1_000_000,
            "psi": "indicator:0.2:0.3",
            "phi": "poly:0,1",
            "n_list": [0, 100, 1_000, 10_000],
            "p_bar": [0.5, 0.5],
            "workers": 4,
        },
    ),
    Preset(
        "empirical-symmetric", None,
        "Distance of empirical measures to the point-mass simplex along ten orbits",
        {
            "experiment": "empirical",
            "map": SYMMETRIC_HALF,
            "seed": 59,
            "n_list": [10_000, 100_000, 1_000_000],
            "orbits": 10,
        },
    ),
    Preset(
        "density-symmetric", None,
        "Induced invariant density, its diagnostics and the hypothesis checks",
        {"experiment": "density", "map": SYMMETRIC_HALF, "seed": 61},
    ),
    Preset(
        "validate-clm", None,
        "Structural validation of the CLM map with ell = 2",
        {"experiment": "validate", "map": {"family": "clm", "ell": 2.0}},
    ),
]

PRESETS: dict[str, Preset] = {p.name: p for p in _PRESET_LIST}


def preset(name: str) -> dict[str, Any]:
    """Config dict of the shipped preset ``name``.

    Raises:
        KeyError: Unknown preset.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return PRESETS[name].to_config()


def covered_criteria() -> set[int]:
    return {p.criterion for p in PRESETS.values() if p.criterion is not None}
