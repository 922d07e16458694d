"""
neutral-orbits - Numerical experiments on interval maps with several neutral fixed points

Builds Thaler and CLM-type maps, their first-return maps and induced invariant
densities, and runs deterministic Monte Carlo experiments on occupation times,
pushforwards and empirical measures, with CSV/JSON/SVG artifacts.

Public API (imported lazily to avoid loading scipy at import time)::

    from src.maps import build_thaler_map, build_clm_map, validate_map
    from src.monte_carlo import occupation_ensemble, pushforward
    from src.cli import main
"""

__version__ = "1.0.0"
