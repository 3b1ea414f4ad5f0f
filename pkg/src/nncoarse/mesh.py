"""Two-level structured triangulations of the unit square.

The coarse grid has one square cell per subdomain; refining every cell by an
integer ratio gives the fine grid.  Both grids split each square cell into two
triangles along the lower-left to upper-right diagonal, so every coarse edge
is resolved exactly by fine edges and the coarse P1 space is a subspace of
the fine one.  Vertices are numbered row-major by (y, x), which keeps all dof
maps deterministic.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "StructuredGrid",
    "MeshHierarchy",
    "Subdomain",
    "TransferOperators",
    "build_hierarchy",
    "build_transfer",
    "extend_local",
    "restrict_local",
]


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform triangulation of [0,1]^2 with 2*cells_per_side^2 triangles."""

    cells_per_side: int
    vertices: np.ndarray      # (n_vertices, 2)
    triangles: np.ndarray     # (n_triangles, 3) vertex indices, ccw
    h: float

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def vertex_index(self, i: int, j: int) -> int:
        """Global index of the vertex at (i*h, j*h)."""
        return j * (self.cells_per_side + 1) + i


@dataclass(frozen=True)
class MeshHierarchy:
    coarse: StructuredGrid
    fine: StructuredGrid
    ratio: int
    coarse_to_fine_vertex: np.ndarray  # (N_H,) fine index of each coarse vertex


@dataclass(frozen=True)
class Subdomain:
    """One coarse square cell together with its fine submesh.

    coarse_dofs are the four cell corners in row-major (y, x) order; fine_dofs
    are the (ratio+1)^2 fine vertices of the closed cell, also row-major.
    Vertices on shared cell boundaries appear in every adjacent subdomain.
    """

    id: int
    coarse_dofs: np.ndarray    # (4,)
    fine_dofs: np.ndarray      # ((ratio+1)^2,)
    fine_triangles: np.ndarray # (2*ratio^2,)


@dataclass(frozen=True)
class TransferOperators:
    """Prolongation P (fine x coarse, CSR) and the coarse-point selector.

    pi_select lists, for each coarse vertex, the coinciding fine vertex, so
    projection is u_c = u[pi_select].  Rows of P at those fine vertices are
    exact unit rows, hence pi(P u_c) = u_c holds in floating point.
    """

    P: sp.csr_matrix
    pi_select: np.ndarray

    def prolong(self, u_c: np.ndarray) -> np.ndarray:
        return self.P @ u_c

    def project(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[..., self.pi_select]

    def restrict(self, r: np.ndarray) -> np.ndarray:
        """Transpose action P^T r (restriction of residuals)."""
        return self.P.T @ r


def _build_grid(cells_per_side: int) -> StructuredGrid:
    n = cells_per_side
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side)           # row-major by (y, x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    t = 0
    for cy in range(n):
        for cx in range(n):
            v00 = cy * (n + 1) + cx
            v10 = v00 + 1
            v01 = v00 + (n + 1)
            v11 = v01 + 1
            # diagonal v00 -> v11, both triangles ccw
            triangles[t] = (v00, v10, v11)
            triangles[t + 1] = (v00, v11, v01)
            t += 2
    return StructuredGrid(n, vertices, triangles, 1.0 / n)


def build_hierarchy(subdomains_per_side: int, ratio: int):
    """Coarse/fine grid pair plus the subdomain decomposition.

    Each coarse cell is one subdomain with 4 corner coarse dofs.  Returns
    (MeshHierarchy, [Subdomain]) with subdomains listed row-major by cell.
    """
    if subdomains_per_side < 1:
        raise ValueError("subdomains_per_side must be >= 1")
    if ratio < 2:
        raise ValueError("refinement ratio must be >= 2")

    n_c = subdomains_per_side
    coarse = _build_grid(n_c)
    fine = _build_grid(n_c * ratio)

    nf = fine.cells_per_side
    c2f = np.empty(coarse.n_vertices, dtype=np.int64)
    for j in range(n_c + 1):
        for i in range(n_c + 1):
            c2f[j * (n_c + 1) + i] = (j * ratio) * (nf + 1) + i * ratio

    hierarchy = MeshHierarchy(coarse, fine, ratio, c2f)

    subdomains = []
    for cy in range(n_c):
        for cx in range(n_c):
            corners = np.array(
                [coarse.vertex_index(cx, cy),
                 coarse.vertex_index(cx + 1, cy),
                 coarse.vertex_index(cx, cy + 1),
                 coarse.vertex_index(cx + 1, cy + 1)],
                dtype=np.int64,
            )
            fdofs = np.array(
                [fine.vertex_index(cx * ratio + ii, cy * ratio + jj)
                 for jj in range(ratio + 1)
                 for ii in range(ratio + 1)],
                dtype=np.int64,
            )
            ftris = []
            for jj in range(ratio):
                for ii in range(ratio):
                    cell = (cy * ratio + jj) * nf + (cx * ratio + ii)
                    ftris.extend((2 * cell, 2 * cell + 1))
            subdomains.append(
                Subdomain(cy * n_c + cx, corners, fdofs,
                          np.array(ftris, dtype=np.int64))
            )
    return hierarchy, subdomains


def build_transfer(hierarchy: MeshHierarchy) -> TransferOperators:
    """Piecewise-linear interpolation P from coarse to fine vertices."""
    n_c = hierarchy.coarse.cells_per_side
    r = hierarchy.ratio
    nf = hierarchy.fine.cells_per_side
    ncp = n_c + 1

    rows, cols, vals = [], [], []
    for j in range(nf + 1):
        for i in range(nf + 1):
            frow = j * (nf + 1) + i
            cx = min(i // r, n_c - 1)
            cy = min(j // r, n_c - 1)
            # local cell coordinates in [0,1], exact dyadic/rational values
            a = (i - cx * r) / r
            b = (j - cy * r) / r
            v00 = cy * ncp + cx
            v10 = v00 + 1
            v01 = v00 + ncp
            v11 = v01 + 1
            if b <= a:  # triangle (v00, v10, v11)
                support = ((v00, 1.0 - a), (v10, a - b), (v11, b))
            else:       # triangle (v00, v11, v01)
                support = ((v00, 1.0 - b), (v11, a), (v01, b - a))
            for col, w in support:
                if w != 0.0:
                    rows.append(frow)
                    cols.append(col)
                    vals.append(w)

    P = sp.csr_matrix(
        (vals, (rows, cols)),
        shape=(hierarchy.fine.n_vertices, hierarchy.coarse.n_vertices),
    )
    P.sort_indices()
    return TransferOperators(P, hierarchy.coarse_to_fine_vertex.copy())


def extend_local(subdomain: Subdomain, v_local: np.ndarray, n_coarse: int) -> np.ndarray:
    """Extend a 4-vector on the subdomain corners to a global coarse vector by zeros."""
    v_local = np.asarray(v_local, dtype=float)
    if v_local.shape != (4,):
        raise ValueError(f"expected a local vector of length 4, got shape {v_local.shape}")
    out = np.zeros(n_coarse)
    out[subdomain.coarse_dofs] = v_local
    return out


def restrict_local(subdomain: Subdomain, v_coarse: np.ndarray) -> np.ndarray:
    """Values of a global coarse vector at the subdomain's four corners."""
    v_coarse = np.asarray(v_coarse, dtype=float)
    return v_coarse[subdomain.coarse_dofs]
