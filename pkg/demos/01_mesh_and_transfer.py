#!/usr/bin/env python3
"""Walk through the two-level mesh machinery.

Builds the reference 4-subdomain hierarchy, shows the vertex/triangle
bookkeeping, and verifies the exact identities of the transfer operators:
projection inverts prolongation, rows of P form a partition of unity, and
piecewise-linear interpolation reproduces affine functions exactly.
"""

import numpy as np

from nncoarse import build_hierarchy, build_transfer, extend_local

hierarchy, subdomains = build_hierarchy(2, 2)
print("coarse grid:", hierarchy.coarse.n_vertices, "vertices,",
      hierarchy.coarse.n_triangles, "triangles (H = %.3f)" % hierarchy.coarse.h)
print("fine grid:  ", hierarchy.fine.n_vertices, "vertices,",
      hierarchy.fine.n_triangles, "triangles (h = %.3f)" % hierarchy.fine.h)
print("subdomains: ", len(subdomains), "- each owns",
      len(subdomains[0].fine_dofs), "fine dofs and",
      len(subdomains[0].fine_triangles), "fine triangles")

transfer = build_transfer(hierarchy)
rng = np.random.default_rng(0)
u_c = rng.normal(size=hierarchy.coarse.n_vertices)

roundtrip = transfer.project(transfer.prolong(u_c))
print("\nprojection(prolongation(u)) == u exactly:", np.array_equal(roundtrip, u_c))

ones = np.ones(hierarchy.coarse.n_vertices)
print("prolongation preserves constants:",
      np.array_equal(transfer.prolong(ones), np.ones(hierarchy.fine.n_vertices)))

a, b, c = 0.3, -1.1, 0.7
vc, vf = hierarchy.coarse.vertices, hierarchy.fine.vertices
affine_err = np.max(np.abs(
    transfer.prolong(a + b * vc[:, 0] + c * vc[:, 1])
    - (a + b * vf[:, 0] + c * vf[:, 1])))
print("affine reproduction error:", affine_err)

membership = sum(extend_local(s, np.ones(4), 9) for s in subdomains)
print("\ncells touching each coarse vertex (row-major):")
print(membership.reshape(3, 3))
