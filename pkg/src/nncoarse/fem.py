"""P1 finite element discretization of  -div(k(u) grad u) + u = f  on [0,1]^2.

Pure Neumann boundary conditions, so no dofs are eliminated.  The nonlinear
operator F, its Jacobian, the Galerkin coarse operator P^T F(P .), and the
per-subdomain coarse maps are all assembled triangle by triangle from the
same quadrature data, which keeps them mutually consistent.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import MeshHierarchy, StructuredGrid, Subdomain, TransferOperators

__all__ = [
    "CoefficientModel",
    "COEFFICIENTS",
    "QuadratureRule",
    "triangle_quadrature",
    "FineOperator",
    "ExactSolution",
    "EXACT_SOLUTIONS",
]


@dataclass(frozen=True)
class CoefficientModel:
    """Diffusion coefficient k(x, y, u) > 0 and its u-derivative."""

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


COEFFICIENTS = {
    "one_plus_u_squared": CoefficientModel(
        "one_plus_u_squared",
        lambda x, y, u: 1.0 + u * u,
        lambda x, y, u: 2.0 * u,
    ),
    "one_plus_exp_neg_u": CoefficientModel(
        "one_plus_exp_neg_u",
        lambda x, y, u: 1.0 + np.exp(-u),
        lambda x, y, u: -np.exp(-u),
    ),
    "one_plus_exp_neg_u_plus_xy": CoefficientModel(
        "one_plus_exp_neg_u_plus_xy",
        lambda x, y, u: 1.0 + np.exp(-u) + x * x + y * y,
        lambda x, y, u: -np.exp(-u),
    ),
}


@dataclass(frozen=True)
class ExactSolution:
    """Analytic solution with zero normal derivative on the boundary."""

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]


EXACT_SOLUTIONS = {
    "biquartic": ExactSolution(
        "biquartic",
        lambda x, y: x**2 * (1 - x) ** 2 + y**2 * (1 - y) ** 2,
    ),
    "cospi": ExactSolution(
        "cospi",
        lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y),
    ),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights on the reference triangle.

    Weights sum to the reference area 1/2; a physical integral is
    2*area * sum_q w_q f(x_q).
    """

    degree: int
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)


def triangle_quadrature(degree: int) -> QuadratureRule:
    if degree <= 2:
        # midpoint rule, exact for quadratics
        pts = np.array([
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ])
        w = np.full(3, 1.0 / 6.0)
        return QuadratureRule(2, pts, w)
    if degree <= 4:
        # 6-point rule, exact for quartics
        a1, b1 = 0.816847572980459, 0.091576213509771
        a2, b2 = 0.108103018168070, 0.445948490915965
        pts = np.array([
            [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
            [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
        ])
        w = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3) / 2.0
        return QuadratureRule(4, pts, w)
    raise ValueError(f"no quadrature rule of degree {degree}")


class _TriangleData:
    """Per-triangle geometry of a grid, precomputed for vectorized assembly."""

    def __init__(self, grid: StructuredGrid, quad: QuadratureRule):
        tri = grid.triangles
        p0 = grid.vertices[tri[:, 0]]
        p1 = grid.vertices[tri[:, 1]]
        p2 = grid.vertices[tri[:, 2]]
        d1 = p1 - p0
        d2 = p2 - p0
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.tri = tri
        self.area = 0.5 * det                      # positive by construction
        # gradients of the three barycentric basis functions, (nt, 3, 2)
        g = np.empty((tri.shape[0], 3, 2))
        g[:, 1, 0] = d2[:, 1] / det
        g[:, 1, 1] = -d2[:, 0] / det
        g[:, 2, 0] = -d1[:, 1] / det
        g[:, 2, 1] = d1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.grad = g
        # quadrature point coordinates, (nt, nq, 2)
        lam = quad.points                          # (nq, 3)
        self.qx = (lam[:, 0] * p0[:, 0, None] + lam[:, 1] * p1[:, 0, None]
                   + lam[:, 2] * p2[:, 0, None])
        self.qy = (lam[:, 0] * p0[:, 1, None] + lam[:, 1] * p1[:, 1, None]
                   + lam[:, 2] * p2[:, 1, None])
        self.lam = lam
        self.wq = quad.weights


class FineOperator:
    """Nonlinear FE operator F on the fine grid of a mesh hierarchy.

    F(u)_i = int_Omega k(u_h) grad u_h . grad phi_i + u_h phi_i dx with all
    integrals evaluated by the rule `quadrature_degree` (k at quadrature
    points, u_h interpolated there).
    """

    def __init__(self, hierarchy: MeshHierarchy, coefficient: CoefficientModel,
                 quadrature_degree: int = 2):
        self.hierarchy = hierarchy
        self.coefficient = coefficient
        self.quadrature = triangle_quadrature(quadrature_degree)
        self._fine = _TriangleData(hierarchy.fine, self.quadrature)
        self._local_cache: dict[int, tuple] = {}

    @property
    def n_fine(self) -> int:
        return self.hierarchy.fine.n_vertices

    @property
    def n_coarse(self) -> int:
        return self.hierarchy.coarse.n_vertices

    # ------------------------------------------------------------------
    # fine-level operator and Jacobian

    def apply(self, u: np.ndarray) -> np.ndarray:
        """F(u), assembled triangle by triangle in index order."""
        u = self._check_fine(u)
        td = self._fine
        ut = u[td.tri]                              # (nt, 3)
        grad_u = np.einsum("tm,tmd->td", ut, td.grad)
        uq = ut @ td.lam.T                          # (nt, nq)
        kq = self.coefficient.evaluate(td.qx, td.qy, uq)
        two_area = 2.0 * td.area
        k_int = two_area * (kq @ td.wq)             # int_tau k dx
        # diffusion: (int k) * grad u . grad phi_i ; reaction: int u phi_i
        diff = k_int[:, None] * np.einsum("td,tmd->tm", grad_u, td.grad)
        reac = two_area[:, None] * np.einsum("tq,q,qm->tm", uq, td.wq, td.lam)
        out = np.zeros(self.n_fine)
        np.add.at(out, td.tri, diff + reac)
        return out

    def jacobian(self, u: np.ndarray) -> sp.csr_matrix:
        """J(u)_{ij} = dF_i/du_j as CSR with the P1 stiffness sparsity."""
        u = self._check_fine(u)
        td = self._fine
        ut = u[td.tri]
        grad_u = np.einsum("tm,tmd->td", ut, td.grad)
        uq = ut @ td.lam.T
        kq = self.coefficient.evaluate(td.qx, td.qy, uq)
        dkq = self.coefficient.derivative(td.qx, td.qy, uq)
        two_area = 2.0 * td.area

        k_int = two_area * (kq @ td.wq)
        # int_tau k' phi_j dx for each local j
        dk_int = two_area[:, None] * np.einsum("tq,q,qj->tj", dkq, td.wq, td.lam)
        gu_gi = np.einsum("td,tmd->tm", grad_u, td.grad)   # grad u . grad phi_i
        gi_gj = np.einsum("tid,tjd->tij", td.grad, td.grad)

        elem = (
            k_int[:, None, None] * gi_gj
            + gu_gi[:, :, None] * dk_int[:, None, :]
            + two_area[:, None, None]
            * np.einsum("q,qi,qj->ij", td.wq, td.lam, td.lam)[None, :, :]
        )
        nt = td.tri.shape[0]
        rows = np.repeat(td.tri, 3, axis=1).ravel()
        cols = np.tile(td.tri, (1, 3)).ravel()
        J = sp.csr_matrix(
            (elem.reshape(nt * 9), (rows, cols)),
            shape=(self.n_fine, self.n_fine),
        )
        J.sum_duplicates()
        J.sort_indices()
        return J

    def manufactured_rhs(self, exact: ExactSolution) -> np.ndarray:
        """f = F(I_h u*): the discrete system F(u)=f then has solution I_h u*."""
        return self.apply(self.interpolate(exact))

    def interpolate(self, exact: ExactSolution) -> np.ndarray:
        """Nodal interpolant of an analytic function on the fine grid."""
        v = self.hierarchy.fine.vertices
        return exact.evaluate(v[:, 0], v[:, 1])

    # ------------------------------------------------------------------
    # Galerkin coarse operator and its subdomain-local pieces

    def galerkin_coarse_apply(self, transfer: TransferOperators,
                              v_c: np.ndarray) -> np.ndarray:
        """P^T F(P v_c)."""
        v_c = np.asarray(v_c, dtype=float)
        if v_c.shape != (self.n_coarse,):
            raise ValueError(
                f"expected coarse vector of length {self.n_coarse}, got {v_c.shape}")
        return transfer.restrict(self.apply(transfer.prolong(v_c)))

    def _local_data(self, subdomain: Subdomain):
        """Cached (P_T, triangle data, local index map) for one subdomain."""
        cached = self._local_cache.get(subdomain.id)
        if cached is not None:
            return cached
        fdofs = subdomain.fine_dofs
        glob_to_loc = {int(g): i for i, g in enumerate(fdofs)}
        grid = self.hierarchy.fine
        tri_local = np.array(
            [[glob_to_loc[int(v)] for v in grid.triangles[t]]
             for t in subdomain.fine_triangles],
            dtype=np.int64,
        )
        local_grid = StructuredGrid(
            self.hierarchy.ratio, grid.vertices[fdofs], tri_local, grid.h)
        cached = (_TriangleData(local_grid, self.quadrature), fdofs)
        self._local_cache[subdomain.id] = cached
        return cached

    def local_prolong(self, transfer: TransferOperators,
                      subdomain: Subdomain) -> np.ndarray:
        """Dense local interpolation P_T ((ratio+1)^2 x 4), a slice of P."""
        block = transfer.P[subdomain.fine_dofs, :][:, subdomain.coarse_dofs]
        return block.toarray()

    def local_fine_apply_batch(self, subdomain: Subdomain,
                               V: np.ndarray) -> np.ndarray:
        """Local fine operator on the subdomain submesh for a batch of vectors.

        V has shape (m, (ratio+1)^2) of fine nodal values local to the
        subdomain; returns (m, (ratio+1)^2).  Integrals run over the
        subdomain's fine triangles only.
        """
        td, _ = self._local_data(subdomain)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        vt = V[:, td.tri]                            # (m, nt, 3)
        grad_v = np.einsum("btm,tmd->btd", vt, td.grad)
        vq = np.einsum("btm,qm->btq", vt, td.lam)
        kq = self.coefficient.evaluate(td.qx[None], td.qy[None], vq)
        two_area = 2.0 * td.area
        k_int = two_area * np.einsum("btq,q->bt", kq, td.wq)
        diff = k_int[:, :, None] * np.einsum("btd,tmd->btm", grad_v, td.grad)
        reac = two_area[None, :, None] * np.einsum(
            "btq,q,qm->btm", vq, td.wq, td.lam)
        out = np.zeros((V.shape[0], V.shape[1]))
        contrib = diff + reac
        for m in range(3):
            np.add.at(out, (slice(None), td.tri[:, m]), contrib[:, :, m])
        return out

    def local_coarse_apply_batch(self, transfer: TransferOperators,
                                 subdomain: Subdomain,
                                 V_c: np.ndarray) -> np.ndarray:
        """Local Galerkin coarse map P_T^T F_T(P_T v) for a batch of 4-vectors."""
        V_c = np.atleast_2d(np.asarray(V_c, dtype=float))
        if V_c.shape[1] != 4:
            raise ValueError(f"expected local coarse vectors of length 4, got {V_c.shape}")
        P_T = self.local_prolong(transfer, subdomain)
        return self.local_fine_apply_batch(subdomain, V_c @ P_T.T) @ P_T

    def local_coarse_delta(self, transfer: TransferOperators,
                           subdomain: Subdomain,
                           u_cT: np.ndarray, g_cT: np.ndarray) -> np.ndarray:
        """Local coarse increment F_T(u+g) - F_T(u) on one subdomain."""
        u_cT = np.asarray(u_cT, dtype=float)
        g_cT = np.asarray(g_cT, dtype=float)
        if u_cT.shape != (4,) or g_cT.shape != (4,):
            raise ValueError("local coarse vectors must have length 4")
        pair = self.local_coarse_apply_batch(
            transfer, subdomain, np.vstack([u_cT + g_cT, u_cT]))
        return pair[0] - pair[1]

    # ------------------------------------------------------------------

    def _check_fine(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_fine,):
            raise ValueError(
                f"expected fine vector of length {self.n_fine}, got {u.shape}")
        return u
