"""Two-level full approximation scheme with interchangeable coarse operators.

Each cycle smooths with a few inexact Newton steps (GMRES-truncated Jacobian
solves), then solves a coarse problem for the correction g_c with a frozen
coarse Jacobian P^T J(u) P, and prolongs the correction back.  The coarse
increment operator G(u_c, g_c) is either the true Galerkin map, a pretrained
surrogate, or a surrogate trained on the first cycle around the current
coarse iterate.
"""

from dataclasses import dataclass, field

import numpy as np

from .fem import FineOperator
from .linsolve import gmres
from .mesh import Subdomain, TransferOperators, restrict_local
from .neural import TrainingConfig
from .sampling import SampleSpec
from .surrogate import GlobalSurrogate, RefineConfig, train_all

__all__ = [
    "FasConfig",
    "TrueCoarse",
    "PretrainedCoarse",
    "TrainInsideCoarse",
    "FasReport",
    "newton_smooth",
    "coarse_solve",
    "tl_fas",
    "train_inside_hook",
    "perturbed_initial_guess",
]


@dataclass(frozen=True)
class TrueCoarse:
    """Coarse increments evaluated exactly as P^T F(P(u+g)) - P^T F(P u)."""


@dataclass(frozen=True)
class PretrainedCoarse:
    surrogate: GlobalSurrogate


@dataclass(frozen=True)
class TrainInsideCoarse:
    """Train local surrogates on the first cycle, boxes centered at pi(u)."""

    spec: SampleSpec
    training: TrainingConfig
    seed: int = 0


@dataclass(frozen=True)
class FasConfig:
    """All knobs of the two-level cycle; defaults match the reference setup."""

    tau: float = 2.0              # initial-guess perturbation scale
    delta: float = 1e-6           # fine GMRES tolerance
    n_max: int = 2                # fine Newton steps per cycle
    newton_tol: float = 0.01      # fine Newton early stop (relative)
    i_max: int = 4                # fine GMRES iteration cap
    delta_c: float = 1e-8         # coarse GMRES tolerance
    tau_c: float = 0.1            # coarse Newton step length
    i_c_max: int = 10             # coarse GMRES iteration cap
    n_c_max: int = 5              # coarse Newton iteration cap
    coarse_newton_tol: float = 1e-4
    n_fas: int = 10               # cycle cap
    epsilon: float = 1e-6         # FAS relative-residual tolerance
    coarse_op: TrueCoarse | PretrainedCoarse | TrainInsideCoarse = TrueCoarse()

    def __post_init__(self):
        for name in ("delta", "delta_c", "epsilon", "newton_tol", "coarse_newton_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("n_max", "i_max", "i_c_max", "n_c_max", "n_fas"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 < self.tau_c <= 1.0:
            raise ValueError("tau_c must lie in (0, 1]")


@dataclass
class FasReport:
    coarse_iterations: list[int] = field(default_factory=list)
    relative_residuals: list[float] = field(default_factory=list)
    converged: bool = False
    cycles: int = 0
    initial_residual_norm: float = 0.0
    seed: int | None = None


def perturbed_initial_guess(u_exact: np.ndarray, tau: float, seed: int) -> np.ndarray:
    """u* plus tau times a seeded uniform(-1, 1) perturbation per component."""
    rng = np.random.default_rng(seed)
    return u_exact + tau * rng.uniform(-1.0, 1.0, size=u_exact.shape)


def newton_smooth(op: FineOperator, u: np.ndarray, f: np.ndarray,
                  cfg: FasConfig) -> np.ndarray:
    """A few inexact Newton steps on F(u) = f.

    Stops early once the residual drops below newton_tol relative to the
    residual at entry.  A GMRES solve that misses its tolerance still
    contributes its partial update.
    """
    u = np.asarray(u, dtype=float).copy()
    r = f - op.apply(u)
    r0 = np.linalg.norm(r)
    if r0 == 0.0:
        return u
    # the Krylov budget must let the smoother reach the delta tolerance on
    # these small fine problems; i_max alone would cap the solve far above it
    krylov_cap = max(cfg.i_max, r.shape[0])
    for _ in range(cfg.n_max):
        J = op.jacobian(u)
        step = gmres(J, r, tol=cfg.delta, max_iter=krylov_cap)
        u += step.x
        r = f - op.apply(u)
        if np.linalg.norm(r) <= cfg.newton_tol * r0:
            break
    return u


def coarse_solve(G_c, J_c, rhs_c: np.ndarray, cfg: FasConfig) -> tuple[np.ndarray, int]:
    """Damped Newton iteration for G_c(g_c) = rhs_c with frozen Jacobian.

    G_c maps a coarse correction to a coarse increment; J_c stays fixed for
    every GMRES solve.  Returns (g_c, iterations used).
    """
    n = rhs_c.shape[0]
    g_c = np.zeros(n)
    rhs_norm = np.linalg.norm(rhs_c)
    if rhs_norm == 0.0:
        return g_c, 0
    iterations = 0
    for _ in range(cfg.n_c_max):
        r_c = rhs_c - G_c(g_c)
        if np.linalg.norm(r_c) <= cfg.coarse_newton_tol * rhs_norm:
            break
        step = gmres(J_c, r_c, tol=cfg.delta_c, max_iter=cfg.i_c_max)
        g_c = g_c + cfg.tau_c * step.x
        iterations += 1
    return g_c, iterations


def train_inside_hook(op: FineOperator, transfer: TransferOperators,
                      subdomains: list[Subdomain], u_c0: np.ndarray,
                      spec: SampleSpec, cfg: TrainingConfig,
                      seed: int = 0,
                      refine: RefineConfig | None = None) -> GlobalSurrogate:
    """Train local surrogates with boxes shifted to the current coarse iterate."""
    centers = {sub.id: restrict_local(sub, u_c0) for sub in subdomains}
    if refine is None:
        refine = RefineConfig.light()
    return train_all(op, transfer, subdomains, spec, cfg, seed=seed,
                     box_centers=centers, refine=refine)


def tl_fas(op: FineOperator, transfer: TransferOperators,
           subdomains: list[Subdomain], f: np.ndarray, u0: np.ndarray,
           cfg: FasConfig, seed: int | None = None) -> tuple[np.ndarray, FasReport]:
    """Run the two-level cycle until the relative residual drops below epsilon.

    The relative residual is ||F(u) - f|| / ||F(u0) - f||.  Non-convergence
    within n_fas cycles is reported, not raised.
    """
    u = np.asarray(u0, dtype=float).copy()
    f = np.asarray(f, dtype=float)
    report = FasReport(seed=seed)
    r0_norm = np.linalg.norm(op.apply(u) - f)
    report.initial_residual_norm = r0_norm
    if r0_norm == 0.0:
        report.converged = True
        return u, report

    coarse_op = cfg.coarse_op
    surrogate: GlobalSurrogate | None = (
        coarse_op.surrogate if isinstance(coarse_op, PretrainedCoarse) else None)
    if surrogate is not None:
        missing = {s.id for s in subdomains} - set(surrogate.locals)
        if missing:
            raise ValueError(f"pretrained surrogate misses subdomains {sorted(missing)}")

    for cycle in range(1, cfg.n_fas + 1):
        u = newton_smooth(op, u, f, cfg)

        J = op.jacobian(u)
        J_c = (transfer.P.T @ J @ transfer.P).tocsr()
        u_c0 = transfer.project(u)

        if isinstance(coarse_op, TrainInsideCoarse) and surrogate is None:
            surrogate = train_inside_hook(
                op, transfer, subdomains, u_c0,
                coarse_op.spec, coarse_op.training, seed=coarse_op.seed)

        if isinstance(coarse_op, TrueCoarse):
            base_c = op.galerkin_coarse_apply(transfer, u_c0)

            def G_c(g_c):
                return op.galerkin_coarse_apply(transfer, u_c0 + g_c) - base_c
        else:
            def G_c(g_c, _s=surrogate, _u=u_c0):
                return _s.apply_global(subdomains, _u, g_c)

        rhs_c = transfer.restrict(f - op.apply(u))
        g_c, n_coarse_iters = coarse_solve(G_c, J_c, rhs_c, cfg)
        u = u + transfer.prolong(g_c)

        rel = np.linalg.norm(op.apply(u) - f) / r0_norm
        report.coarse_iterations.append(n_coarse_iters)
        report.relative_residuals.append(rel)
        report.cycles = cycle
        if rel <= cfg.epsilon:
            report.converged = True
            break
    return u, report
