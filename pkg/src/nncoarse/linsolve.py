"""Full (unrestarted) GMRES with modified Gram-Schmidt and Givens rotations.

Both Jacobian levels of the two-level solver are driven through this one
routine; coarse systems are small and fine solves are capped at a handful of
iterations, so no restart or preconditioning is needed.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["GmresOutcome", "gmres"]

_BREAKDOWN = 1e-14


@dataclass
class GmresOutcome:
    x: np.ndarray
    relative_residual: float   # ||b - A x|| / ||b||, recomputed explicitly
    iterations: int
    converged: bool
    residual_history: list[float] = field(default_factory=list)


def _as_action(A):
    if callable(A):
        return A
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda v: A @ v
    raise TypeError(f"cannot interpret {type(A)!r} as a linear action")


def gmres(A, b, x0=None, tol=1e-8, max_iter=None) -> GmresOutcome:
    """Solve A x = b to ||b - A x|| <= tol*||b|| or at most max_iter iterations.

    A may be a matrix (dense or sparse) or a callable returning the action
    A @ v.  The Krylov basis is never restarted; a zero Arnoldi norm (happy
    breakdown) stops the iteration with the current least-squares solution.
    """
    apply_A = _as_action(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains NaN or Inf")
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial guess contains NaN or Inf")
    if max_iter is None:
        max_iter = n

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return GmresOutcome(np.zeros(n), 0.0, 0, True, [0.0])

    r0 = b - apply_A(x0)
    beta = np.linalg.norm(r0)
    if beta <= tol * norm_b:
        return GmresOutcome(x0.copy(), beta / norm_b, 0, True, [beta / norm_b])

    V = np.zeros((max_iter + 1, n))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    V[0] = r0 / beta

    history = [beta / norm_b]
    k = 0
    for j in range(max_iter):
        w = apply_A(V[j])
        norm_w0 = np.linalg.norm(w)
        for i in range(j + 1):              # modified Gram-Schmidt
            H[i, j] = V[i] @ w
            w = w - H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)

        breakdown = H[j + 1, j] <= _BREAKDOWN * max(norm_w0, 1e-300)
        if not breakdown:
            V[j + 1] = w / H[j + 1, j]

        # apply accumulated rotations, then eliminate H[j+1, j]
        for i in range(j):
            hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = hi
        rho = np.hypot(H[j, j], H[j + 1, j])
        if rho == 0.0:
            break   # degenerate column: keep the previous iterate
        cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
        H[j, j] = rho
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]

        k = j + 1
        history.append(abs(g[k]) / norm_b)
        if abs(g[k]) <= tol * norm_b or breakdown:
            break

    y = np.linalg.solve(H[:k, :k], g[:k]) if k > 0 else np.zeros(0)
    x = x0 + V[:k].T @ y
    relres = np.linalg.norm(b - apply_A(x)) / norm_b
    return GmresOutcome(x, relres, k, relres <= tol, history)
