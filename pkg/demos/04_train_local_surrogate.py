#!/usr/bin/env python3
"""Train one local network to approximate a subdomain's coarse increments.

Builds the Sobol training set for the tight sampling regime, fits the
surrogate (linear base + antisymmetrized tanh correction), and reports the
relative errors on fresh pseudo-random pairs plus the two exact structural
identities the model satisfies by construction.

Takes a couple of minutes at full effort; pass --quick for a fast, less
accurate run.
"""

import sys
import time

import numpy as np

from nncoarse import (
    COEFFICIENTS,
    FineOperator,
    RefineConfig,
    SampleSpec,
    TrainingConfig,
    build_hierarchy,
    build_transfer,
    evaluate_local,
    fit_local_surrogate,
)

quick = "--quick" in sys.argv
hierarchy, subdomains = build_hierarchy(2, 2)
transfer = build_transfer(hierarchy)
op = FineOperator(hierarchy, COEFFICIENTS["one_plus_u_squared"])

spec = SampleSpec(0.05, 0.005, 10 if quick else 50, 50)
refine = RefineConfig.light() if quick else RefineConfig()
print(f"training on {spec.box_draws} box draws x {spec.ball_draws} ball draws "
      f"({'quick' if quick else 'full'} effort)")

t0 = time.time()
local = fit_local_surrogate(op, transfer, subdomains[0], spec,
                            TrainingConfig(), seed=0, refine=refine)
print(f"trained in {time.time() - t0:.0f}s")

summary = evaluate_local(op, transfer, subdomains[0], local, seed=99)
print(f"fresh-sample relative errors: l2 {summary.rel_l2:.3e}, "
      f"linf {summary.rel_linf:.3e}")

rng = np.random.default_rng(5)
u = rng.uniform(-0.05, 0.05, 4)
g = 0.004 * rng.uniform(-1, 1, 4)
print("zero-correction output (exact):", local.predict(u, np.zeros(4)))
print("antisymmetry residual (exact):",
      np.max(np.abs(local.predict(u, g) + local.predict(u + g, -g))))
