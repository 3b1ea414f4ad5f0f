#!/usr/bin/env python3
"""Sweep the sampling regimes and watch the surrogate error collapse.

Trains one local surrogate per (box half-width, ball radius) pair on a
shrinking sequence and prints the achieved relative errors: wide boxes are
capacity-limited while tight regimes reach many orders better, mirroring the
behaviour of the accuracy tables produced by the study command.

Full-effort runs take a couple of minutes per row; pass --quick to reduce.
"""

import sys
import time

from nncoarse import (
    COEFFICIENTS,
    FineOperator,
    RefineConfig,
    TrainingConfig,
    build_hierarchy,
    build_transfer,
    surrogate_error_study,
)

quick = "--quick" in sys.argv
pairs = [(1.0, 0.1), (0.1, 0.01), (0.05, 0.005), (0.01, 0.005)]
hierarchy, subdomains = build_hierarchy(2, 2)
transfer = build_transfer(hierarchy)
op = FineOperator(hierarchy, COEFFICIENTS["one_plus_u_squared"])

refine = (RefineConfig.light() if quick
          else RefineConfig(restarts=1, max_iterations=100))
t0 = time.time()
rows = surrogate_error_study(op, transfer, subdomains[0], pairs,
                             TrainingConfig(), seed=0,
                             box_draws=10 if quick else 30, ball_draws=50,
                             refine=refine)
print(f"({time.time() - t0:.0f}s)")
print(f"{'box':>6} {'ball':>7} {'rel_l2':>12} {'rel_linf':>12}")
for row in rows:
    print(f"{row.box_half_width:6g} {row.ball_radius:7g} "
          f"{row.rel_l2:12.3e} {row.rel_linf:12.3e}")
print("\nerror drop over the sweep: "
      f"{rows[0].rel_l2 / rows[-1].rel_l2:.0f}x")
