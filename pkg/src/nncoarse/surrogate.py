"""Per-subdomain surrogate networks for the coarse increment operator.

Each subdomain T gets a model of the local map (u, g) -> F_T(u+g) - F_T(u):
a least-squares linear term in g plus a tanh network correction, evaluated in
antisymmetrized form net(u, g) - net(u+g, -g) so that the two exact algebraic
identities of the true increment, G(u, 0) = 0 and G(u, g) = -G(u+g, -g), hold
by construction.  Training runs the mini-batch Adam recipe first and then a
damped Gauss-Newton refinement; model selection holds out whole box draws and
ball draws, since the tensor-product training set would otherwise leak both
axes into the validation rows.

The global approximate coarse operator is the standard assembly of the local
outputs.  Training sets reuse the same Sobol draws for every subdomain, and
each subdomain trains from a seed derived from (global seed, subdomain id),
so results do not depend on subdomain ordering.
"""

from dataclasses import dataclass, replace

import numpy as np

from .fem import FineOperator
from .mesh import Subdomain, TransferOperators, extend_local, restrict_local
from .neural import (
    Dataset,
    ErrorSummary,
    Mlp,
    TrainingConfig,
    flatten_params,
    forward,
    model_jacobian,
    relative_errors,
    set_params,
    train,
)
from .sampling import SampleSpec, sample_ball, sample_box

__all__ = [
    "LocalSurrogate",
    "GlobalSurrogate",
    "RefineConfig",
    "build_local_dataset",
    "fit_local_surrogate",
    "train_all",
    "evaluate_local",
    "evaluate_global",
    "surrogate_error_study",
    "StudyRow",
]

N_LOCAL = 4  # coarse dofs per subdomain (cell corners)


@dataclass(frozen=True)
class RefineConfig:
    """Effort knobs of the Gauss-Newton refinement stage."""

    max_iterations: int = 120
    restarts: int = 2
    derived_rows: int = 500
    stall_tolerance: float = 1e-6
    stall_patience: int = 5

    @classmethod
    def light(cls) -> "RefineConfig":
        """Cheaper profile for surrogates embedded in the nonlinear solver."""
        return cls(max_iterations=45, restarts=1, derived_rows=250)


@dataclass
class LocalSurrogate:
    """One subdomain's increment model: linear base plus tanh correction.

    predict(u, g) = g @ base + y_scale * (net(z) - net(z')) / 2 where z is the
    standardized (u, g) input and z' its antisymmetric mirror (u+g, -g).
    """

    subdomain_id: int
    net: Mlp
    base: np.ndarray       # (4, 4) linear-in-g term
    x_shift: np.ndarray    # (8,)
    x_scale: np.ndarray    # (8,)
    y_scale: np.ndarray    # (4,) residual scale
    spec: SampleSpec
    box_center: np.ndarray

    def predict(self, u_T: np.ndarray, g_T: np.ndarray) -> np.ndarray:
        u_T = np.atleast_2d(np.asarray(u_T, dtype=float))
        g_T = np.atleast_2d(np.asarray(g_T, dtype=float))
        x = np.hstack([u_T, g_T])
        x_m = np.hstack([u_T + g_T, -g_T])
        correction = 0.5 * (
            forward(self.net, (x - self.x_shift) / self.x_scale)
            - forward(self.net, (x_m - self.x_shift) / self.x_scale)
        )
        out = g_T @ self.base + correction * self.y_scale
        return out[0] if out.shape[0] == 1 and u_T.shape[0] == 1 else out


@dataclass
class GlobalSurrogate:
    """Assembled coarse increment operator backed by one model per subdomain."""

    locals: dict[int, LocalSurrogate]
    n_coarse: int

    def local_net(self, subdomain_id: int) -> Mlp:
        return self.locals[subdomain_id].net

    def apply_global(self, subdomains: list[Subdomain], u_c: np.ndarray,
                     g_c: np.ndarray) -> np.ndarray:
        """sum_T I_T model_T(u_c|_T, g_c|_T)."""
        u_c = np.asarray(u_c, dtype=float)
        g_c = np.asarray(g_c, dtype=float)
        if u_c.shape != (self.n_coarse,) or g_c.shape != (self.n_coarse,):
            raise ValueError(
                f"expected coarse vectors of length {self.n_coarse}, "
                f"got {u_c.shape} and {g_c.shape}")
        out = np.zeros(self.n_coarse)
        for sub in subdomains:
            local = self.locals[sub.id]
            pred = local.predict(restrict_local(sub, u_c), restrict_local(sub, g_c))
            out += extend_local(sub, np.asarray(pred).ravel(), self.n_coarse)
        return out


def build_local_dataset(op: FineOperator, transfer: TransferOperators,
                        subdomain: Subdomain, spec: SampleSpec,
                        box_center: np.ndarray | None = None) -> Dataset:
    """All (u, g) pairs from the spec's Sobol draws with exact local targets.

    Rows are ordered box-draw major: rows i*ball_draws .. share the i-th box
    draw.  The same draws are reused across subdomains.
    """
    center = np.zeros(N_LOCAL) if box_center is None else np.asarray(box_center, dtype=float)
    u_draws = sample_box(center, spec.box_half_width, spec.box_draws)
    g_draws = sample_ball(N_LOCAL, spec.ball_radius, spec.ball_draws)
    u_rep = np.repeat(u_draws, spec.ball_draws, axis=0)
    g_rep = np.tile(g_draws, (spec.box_draws, 1))
    inputs = np.hstack([u_rep, g_rep])
    shifted = op.local_coarse_apply_batch(transfer, subdomain, u_rep + g_rep)
    base = op.local_coarse_apply_batch(transfer, subdomain, u_draws)
    targets = shifted - np.repeat(base, spec.ball_draws, axis=0)
    return Dataset(inputs, targets)


def _axis_split(m_box: int, m_ball: int, train_fraction: float,
                rng: np.random.Generator):
    """Hold out whole box draws and ball draws, ~train_fraction per axis."""
    axis_frac = np.sqrt(train_fraction)
    n_u = max(1, min(m_box - 1, int(round(axis_frac * m_box)))) if m_box > 1 else m_box
    n_g = max(1, min(m_ball - 1, int(round(axis_frac * m_ball)))) if m_ball > 1 else m_ball
    u_order = rng.permutation(m_box)
    g_order = rng.permutation(m_ball)
    return u_order[:n_u], u_order[n_u:], g_order[:n_g], g_order[n_g:]


def _tensor_rows(U, G, Yt, uu, gg):
    if len(uu) == 0 or len(gg) == 0:
        return np.empty((0, 2 * N_LOCAL)), np.empty((0, N_LOCAL))
    x = np.concatenate(
        [np.repeat(U[uu], len(gg), axis=0), np.tile(G[gg], (len(uu), 1))], axis=1)
    y = Yt[np.ix_(uu, gg)].reshape(-1, N_LOCAL)
    return x, y


def _derived_rows(U, G, Yt, u_idx, g_idx, count, rng):
    """Exact extra rows from the increment identity
    G(u, g1) - G(u, g2) = G(u + g2, g1 - g2); no operator calls needed."""
    if count <= 0 or len(g_idx) < 2:
        return np.empty((0, 2 * N_LOCAL)), np.empty((0, N_LOCAL))
    ii = rng.integers(0, len(u_idx), count)
    jj = rng.integers(0, len(g_idx), count)
    kk = rng.integers(0, len(g_idx) - 1, count)
    kk = np.where(kk >= jj, kk + 1, kk)      # j != k without rejection
    ui = u_idx[ii]
    gj = g_idx[jj]
    gk = g_idx[kk]
    x = np.hstack([U[ui] + G[gk], G[gj] - G[gk]])
    y = Yt[ui, gj] - Yt[ui, gk]
    return x, y


def _mirror(x):
    return np.hstack([x[:, :N_LOCAL] + x[:, N_LOCAL:], -x[:, N_LOCAL:]])


def _gauss_newton_refine(net: Mlp, xi, xi_m, yi, xv, xv_m, yv,
                         refine: RefineConfig) -> float:
    """Damped Gauss-Newton on the antisymmetrized residual, in place.

    Keeps the parameter vector with the best validation loss seen along the
    iteration; returns that loss.
    """
    def sym(a, am):
        return 0.5 * (forward(net, a) - forward(net, am))

    theta = flatten_params(net)
    n_par = theta.size
    m_res = xi.shape[0] * net.n_out
    lam = 1e-3
    obj = float(np.mean((sym(xi, xi_m) - yi) ** 2))
    best_val = float(np.mean((sym(xv, xv_m) - yv) ** 2)) if len(xv) else obj
    best_theta = theta.copy()
    stall = 0
    for _ in range(refine.max_iterations):
        set_params(net, theta)
        pred, J1 = model_jacobian(net, xi)
        pred_m, J0 = model_jacobian(net, xi_m)
        r = (0.5 * (pred - pred_m) - yi).reshape(-1) / np.sqrt(m_res)
        J = 0.5 * (J1 - J0) / np.sqrt(m_res)
        grad = J.T @ r
        JtJ = J.T @ J
        damp = np.diag(JtJ).copy()
        floor = 1e-12 * damp.max() if damp.max() > 0 else 1.0
        damp[damp < floor] = floor
        improved = False
        rel_impr = 0.0
        for _retry in range(30):
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(damp), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            set_params(net, theta + step)
            new = float(np.mean((sym(xi, xi_m) - yi) ** 2))
            if new < obj:
                rel_impr = (obj - new) / max(obj, 1e-300)
                theta = theta + step
                obj = new
                improved = True
                lam = max(lam / 3.0, 1e-14)
                break
            lam *= 4.0
        set_params(net, theta)
        if not improved:
            break
        if len(xv):
            val = float(np.mean((sym(xv, xv_m) - yv) ** 2))
            if val < best_val:
                best_val = val
                best_theta = theta.copy()
        else:
            best_val = obj
            best_theta = theta.copy()
        if rel_impr < refine.stall_tolerance:
            stall += 1
            if stall >= refine.stall_patience:
                break
        else:
            stall = 0
    set_params(net, best_theta)
    return best_val


def fit_local_surrogate(op: FineOperator, transfer: TransferOperators,
                        subdomain: Subdomain, spec: SampleSpec,
                        cfg: TrainingConfig,
                        seed: int | np.random.SeedSequence = 0,
                        box_center: np.ndarray | None = None,
                        refine: RefineConfig | None = None) -> LocalSurrogate:
    """Train one subdomain model: linear base, Adam phase, Gauss-Newton polish."""
    refine = RefineConfig() if refine is None else refine
    center = np.zeros(N_LOCAL) if box_center is None else np.asarray(box_center, dtype=float)
    data = build_local_dataset(op, transfer, subdomain, spec, box_center=center)
    m_a, m_d = spec.box_draws, spec.ball_draws
    U = data.inputs[:, :N_LOCAL].reshape(m_a, m_d, N_LOCAL)[:, 0, :]
    G = data.inputs[:, N_LOCAL:].reshape(m_a, m_d, N_LOCAL)[0, :, :]
    Yt = data.targets.reshape(m_a, m_d, N_LOCAL)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(4)
    rng_split = np.random.default_rng(children[0])
    rng_derived = np.random.default_rng(children[1])

    u_tr, u_va, g_tr, g_va = _axis_split(m_a, m_d, cfg.train_fraction, rng_split)
    x_tr, y_tr = _tensor_rows(U, G, Yt, u_tr, g_tr)
    x_d, y_d = _derived_rows(U, G, Yt, u_tr, g_tr, refine.derived_rows, rng_derived)
    x_train = np.vstack([x_tr, x_d])
    y_train = np.vstack([y_tr, y_d])
    val_parts = [_tensor_rows(U, G, Yt, uu, gg)
                 for uu, gg in ((u_va, g_tr), (u_tr, g_va), (u_va, g_va))]
    x_val = np.vstack([p[0] for p in val_parts])
    y_val = np.vstack([p[1] for p in val_parts])

    # linear-in-g base; the antisymmetry identity rules out u and constant terms
    base, *_ = np.linalg.lstsq(x_train[:, N_LOCAL:], y_train, rcond=None)
    res_train = y_train - x_train[:, N_LOCAL:] @ base
    res_val = y_val - x_val[:, N_LOCAL:] @ base if len(x_val) else y_val

    x_shift = x_train.mean(axis=0)
    x_scale = x_train.std(axis=0)
    x_scale[x_scale == 0.0] = 1.0
    y_scale = res_train.std(axis=0)
    y_scale[y_scale == 0.0] = 1.0

    def enc(x):
        return (x - x_shift) / x_scale

    xi, xi_m = enc(x_train), enc(_mirror(x_train))
    yi = res_train / y_scale
    xv, xv_m = enc(x_val), enc(_mirror(x_val))
    yv = res_val / y_scale

    best_net, best_val = None, np.inf
    for restart in range(max(1, refine.restarts)):
        net_seed = np.random.SeedSequence(
            entropy=children[2].entropy, spawn_key=children[2].spawn_key + (restart,))
        net = Mlp.initialize(layers=(2 * N_LOCAL, 16, 16, 16, N_LOCAL), seed=net_seed)
        if restart == 0:
            # stochastic phase: the standard mini-batch recipe on the residuals;
            # later restarts explore other basins directly from their init
            adam_cfg = replace(cfg, seed=children[3])
            train(net, Dataset(xi, yi), adam_cfg)
        val = _gauss_newton_refine(net, xi, xi_m, yi, xv, xv_m, yv, refine)
        if val < best_val:
            best_val, best_net = val, net
    return LocalSurrogate(subdomain.id, best_net, base, x_shift, x_scale,
                          y_scale, spec, center)


def _subdomain_seed(seed: int, subdomain_id: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(subdomain_id,))


def train_all(op: FineOperator, transfer: TransferOperators,
              subdomains: list[Subdomain], spec: SampleSpec,
              cfg: TrainingConfig, seed: int = 0,
              box_centers: dict[int, np.ndarray] | None = None,
              refine: RefineConfig | None = None) -> GlobalSurrogate:
    """Train one local surrogate per subdomain, independently seeded.

    box_centers optionally shifts the sampling box per subdomain (used when
    training around a current coarse iterate).
    """
    locals_: dict[int, LocalSurrogate] = {}
    for sub in subdomains:
        center = None
        if box_centers is not None:
            center = np.asarray(box_centers[sub.id], dtype=float)
        try:
            locals_[sub.id] = fit_local_surrogate(
                op, transfer, sub, spec, cfg,
                seed=_subdomain_seed(seed, sub.id),
                box_center=center, refine=refine)
        except Exception as exc:
            raise RuntimeError(
                f"training failed for subdomain {sub.id}: {exc}") from exc
    return GlobalSurrogate(locals_, op.n_coarse)


def _fresh_draws(spec: SampleSpec, n_box: int, n_ball: int,
                 rng: np.random.Generator, center: np.ndarray):
    """Pseudo-random evaluation draws: uniform box points, uniform ball points."""
    u = center + spec.box_half_width * rng.uniform(-1.0, 1.0, size=(n_box, N_LOCAL))
    direction = rng.normal(size=(n_ball, N_LOCAL))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    radii = spec.ball_radius * rng.uniform(size=n_ball) ** (1.0 / N_LOCAL)
    return u, radii[:, None] * direction


def evaluate_local(op: FineOperator, transfer: TransferOperators,
                   subdomain: Subdomain, local: LocalSurrogate,
                   n_box: int = 10, n_ball: int = 10,
                   seed: int = 12345) -> ErrorSummary:
    """Mean relative errors of one local model on fresh pseudo-random pairs."""
    rng = np.random.default_rng(seed)
    u_draws, g_draws = _fresh_draws(local.spec, n_box, n_ball, rng, local.box_center)
    u_rep = np.repeat(u_draws, n_ball, axis=0)
    g_rep = np.tile(g_draws, (n_box, 1))
    truth = (op.local_coarse_apply_batch(transfer, subdomain, u_rep + g_rep)
             - np.repeat(op.local_coarse_apply_batch(transfer, subdomain, u_draws),
                         n_ball, axis=0))
    pred = local.predict(u_rep, g_rep)
    diff = pred - truth
    l2 = np.linalg.norm(truth, axis=1)
    linf = np.max(np.abs(truth), axis=1)
    keep = l2 > 0.0
    if not np.any(keep):
        raise ValueError("every evaluation increment has zero norm")
    rel_l2 = float(np.mean(np.linalg.norm(diff[keep], axis=1) / l2[keep]))
    rel_linf = float(np.mean(np.max(np.abs(diff[keep]), axis=1) / linf[keep]))
    return ErrorSummary(rel_l2, rel_linf, int(np.sum(~keep)))


def evaluate_global(op: FineOperator, transfer: TransferOperators,
                    subdomains: list[Subdomain], gs: GlobalSurrogate,
                    spec: SampleSpec, n_box: int = 10, n_ball: int = 10,
                    seed: int = 12345) -> ErrorSummary:
    """Relative errors of the assembled operator against exact Galerkin increments."""
    rng = np.random.default_rng(seed)
    n_c = op.n_coarse
    u_draws = spec.box_half_width * rng.uniform(-1.0, 1.0, size=(n_box, n_c))
    direction = rng.normal(size=(n_ball, n_c))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    radii = spec.ball_radius * rng.uniform(size=n_ball) ** (1.0 / n_c)
    g_draws = radii[:, None] * direction

    errs_l2, errs_linf = [], []
    skipped = 0
    for u_c in u_draws:
        base = op.galerkin_coarse_apply(transfer, u_c)
        for g_c in g_draws:
            truth = op.galerkin_coarse_apply(transfer, u_c + g_c) - base
            approx = gs.apply_global(subdomains, u_c, g_c)
            nrm2 = np.linalg.norm(truth)
            if nrm2 == 0.0:
                skipped += 1
                continue
            errs_l2.append(np.linalg.norm(approx - truth) / nrm2)
            errs_linf.append(np.max(np.abs(approx - truth)) / np.max(np.abs(truth)))
    if not errs_l2:
        raise ValueError("every evaluation increment has zero norm")
    return ErrorSummary(float(np.mean(errs_l2)), float(np.mean(errs_linf)), skipped)


@dataclass(frozen=True)
class StudyRow:
    box_half_width: float
    ball_radius: float
    rel_l2: float
    rel_linf: float


def surrogate_error_study(op: FineOperator, transfer: TransferOperators,
                          subdomain: Subdomain,
                          pairs: list[tuple[float, float]],
                          cfg: TrainingConfig, seed: int = 0,
                          box_draws: int = 30, ball_draws: int = 50,
                          refine: RefineConfig | None = None,
                          eval_seed: int = 12345) -> list[StudyRow]:
    """Train and evaluate one local surrogate per (half-width, radius) pair."""
    rows = []
    for half_width, radius in pairs:
        spec = SampleSpec(half_width, radius, box_draws, ball_draws)
        local = fit_local_surrogate(
            op, transfer, subdomain, spec, cfg,
            seed=_subdomain_seed(seed, subdomain.id), refine=refine)
        summary = evaluate_local(op, transfer, subdomain, local, seed=eval_seed)
        rows.append(StudyRow(half_width, radius, summary.rel_l2, summary.rel_linf))
    return rows
