#!/usr/bin/env python3
"""
neutral-orbits - Numerical experiments on maps with several neutral fixed points

Run as: python main.py run config.json
        python main.py plot runs/occupation/occupation.csv histogram
        python main.py preset thmB-d2-alpha-half
"""

from __future__ import annotations

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
