#!/usr/bin/env python3
"""Sobol sequences and the box/ball draws used for training data.

Prints the first points of the sequence, demonstrates determinism, and
checks the empirical radius law of the ball sampler against the uniform
in-ball distribution.
"""

import numpy as np

from nncoarse import sample_ball, sample_box, sobol_points

print("first 1-d points:", sobol_points(1, 6).ravel())
print("first 4-d point:", sobol_points(4, 1)[0])
print("deterministic:",
      np.array_equal(sobol_points(4, 100), sobol_points(4, 100)))

draws = sample_box(np.zeros(4), 0.05, 8)
print("\nbox draws (half-width 0.05), first is the center:")
print(draws[:3])

g = sample_ball(4, 0.005, 4096)
norms = np.linalg.norm(g, axis=1)
print("\nball draws (radius 0.005):")
print("  max norm:", norms.max(), "<= 0.005")
print("  mean norm:", norms.mean(), "~ expected", 0.005 * 4 / 5)

pts = sobol_points(2, 63)
counts, _ = np.histogram(pts[:, 0], bins=8, range=(0, 1))
print("\nlow-discrepancy spot check, 63 points over 8 dyadic bins:", counts)
