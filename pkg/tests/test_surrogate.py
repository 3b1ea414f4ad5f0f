import numpy as np
import pytest

from nncoarse import (
    COEFFICIENTS,
    FineOperator,
    GlobalSurrogate,
    RefineConfig,
    SampleSpec,
    TrainingConfig,
    build_hierarchy,
    build_local_dataset,
    build_transfer,
    evaluate_global,
    evaluate_local,
    fit_local_surrogate,
    train_all,
)
from nncoarse.surrogate import LocalSurrogate
from nncoarse.neural import Mlp

FAST = TrainingConfig(epochs=30)
LIGHT = RefineConfig(max_iterations=15, restarts=1, derived_rows=100)


class ExactLocal(LocalSurrogate):
    """Stand-in local model that evaluates the true increment operator."""

    def __init__(self, op, transfer, subdomain):
        super().__init__(subdomain.id, Mlp.initialize(seed=0),
                         np.zeros((4, 4)), np.zeros(8), np.ones(8),
                         np.ones(4), SampleSpec(1.0, 1.0, 1, 1), np.zeros(4))
        self._op, self._transfer, self._sub = op, transfer, subdomain

    def predict(self, u_T, g_T):
        u_T = np.atleast_2d(u_T)
        g_T = np.atleast_2d(g_T)
        out = np.array([
            self._op.local_coarse_delta(self._transfer, self._sub, u, g)
            for u, g in zip(u_T, g_T)
        ])
        return out[0] if out.shape[0] == 1 else out


def test_dataset_shape_and_single_row(grid22, op22):
    _, subdomains, transfer = grid22
    spec = SampleSpec(0.05, 0.005, 10, 50)
    data = build_local_dataset(op22, transfer, subdomains[0], spec)
    assert data.inputs.shape == (500, 8)
    assert data.targets.shape == (500, 4)
    one = build_local_dataset(op22, transfer, subdomains[0], SampleSpec(0.1, 0.01, 1, 1))
    assert len(one) == 1
    u, g = one.inputs[0, :4], one.inputs[0, 4:]
    expected = op22.local_coarse_delta(transfer, subdomains[0], u, g)
    assert np.max(np.abs(one.targets[0] - expected)) < 1e-15


def test_dataset_rows_match_direct_evaluation(grid22, op22):
    _, subdomains, transfer = grid22
    data = build_local_dataset(op22, transfer, subdomains[2], SampleSpec(0.1, 0.01, 4, 6))
    rng = np.random.default_rng(0)
    for i in rng.integers(0, len(data), 5):
        u, g = data.inputs[i, :4], data.inputs[i, 4:]
        expected = op22.local_coarse_delta(transfer, subdomains[2], u, g)
        assert np.max(np.abs(data.targets[i] - expected)) < 1e-14


def test_small_corrections_give_small_targets(grid22, op22):
    _, subdomains, transfer = grid22
    spec = SampleSpec(0.05, 1e-8, 5, 10)
    data = build_local_dataset(op22, transfer, subdomains[0], spec)
    norms = np.linalg.norm(data.targets, axis=1)
    g_norms = np.linalg.norm(data.inputs[:, 4:], axis=1)
    # Lipschitz bound estimated from the local Jacobian scale
    assert np.all(norms <= 100.0 * g_norms)


def test_assembly_identity_with_exact_locals(grid22, op22):
    _, subdomains, transfer = grid22
    gs = GlobalSurrogate({s.id: ExactLocal(op22, transfer, s) for s in subdomains}, 9)
    rng = np.random.default_rng(1)
    for _ in range(5):
        u_c = rng.uniform(-1, 1, 9)
        g_c = 0.1 * rng.uniform(-1, 1, 9)
        truth = (op22.galerkin_coarse_apply(transfer, u_c + g_c)
                 - op22.galerkin_coarse_apply(transfer, u_c))
        approx = gs.apply_global(subdomains, u_c, g_c)
        assert np.linalg.norm(approx - truth) <= 1e-13 * max(np.linalg.norm(truth), 1.0)


def test_apply_global_zero_models(grid22, op22):
    _, subdomains, transfer = grid22
    locals_ = {}
    for s in subdomains:
        net = Mlp.initialize(seed=0)
        for W in net.weights:
            W[:] = 0.0
        locals_[s.id] = LocalSurrogate(s.id, net, np.zeros((4, 4)), np.zeros(8),
                                       np.ones(8), np.ones(4),
                                       SampleSpec(1, 1, 1, 1), np.zeros(4))
    gs = GlobalSurrogate(locals_, 9)
    out = gs.apply_global(subdomains, np.ones(9), np.ones(9))
    assert np.array_equal(out, np.zeros(9))
    with pytest.raises(ValueError):
        gs.apply_global(subdomains, np.ones(8), np.ones(9))


def test_local_model_respects_exact_identities(grid22, op22):
    _, subdomains, transfer = grid22
    local = fit_local_surrogate(op22, transfer, subdomains[0],
                                SampleSpec(0.05, 0.005, 6, 10), FAST,
                                seed=0, refine=LIGHT)
    rng = np.random.default_rng(2)
    u = rng.uniform(-0.05, 0.05, 4)
    g = 0.004 * rng.uniform(-1, 1, 4)
    assert np.array_equal(local.predict(u, np.zeros(4)), np.zeros(4))
    assert np.max(np.abs(local.predict(u, g) + local.predict(u + g, -g))) < 1e-16


def test_locality_of_global_application(grid22, op22):
    _, subdomains, transfer = grid22
    spec = SampleSpec(0.05, 0.005, 5, 8)
    gs = train_all(op22, transfer, subdomains, spec, FAST, seed=0, refine=LIGHT)
    rng = np.random.default_rng(3)
    u_c = rng.uniform(-0.05, 0.05, 9)
    g_c = 0.004 * rng.uniform(-1, 1, 9)
    sub = subdomains[0]
    pred_before = gs.locals[sub.id].predict(u_c[sub.coarse_dofs], g_c[sub.coarse_dofs])
    # vertex 8 (top-right corner) does not belong to subdomain 0
    u_mod = u_c.copy()
    u_mod[8] += 0.5
    pred_after = gs.locals[sub.id].predict(u_mod[sub.coarse_dofs], g_c[sub.coarse_dofs])
    assert np.array_equal(pred_before, pred_after)


def test_train_all_is_order_independent(grid22, op22):
    _, subdomains, transfer = grid22
    spec = SampleSpec(0.05, 0.005, 5, 8)
    fwd = train_all(op22, transfer, subdomains, spec, FAST, seed=7, refine=LIGHT)
    rev = train_all(op22, transfer, list(reversed(subdomains)), spec, FAST,
                    seed=7, refine=LIGHT)
    for sid in fwd.locals:
        a, b = fwd.locals[sid], rev.locals[sid]
        assert all(np.array_equal(x, y) for x, y in zip(a.net.weights, b.net.weights))
        assert np.array_equal(a.base, b.base)


def test_training_failure_reports_subdomain(grid22, op22):
    _, subdomains, transfer = grid22
    bad_cfg = TrainingConfig(epochs=1, batch_size=10**6)
    with pytest.raises(RuntimeError, match="subdomain 0"):
        train_all(op22, transfer, subdomains, SampleSpec(0.05, 0.005, 2, 3),
                  bad_cfg, seed=0, refine=LIGHT)


def test_evaluate_local_and_global_run(grid22, op22):
    _, subdomains, transfer = grid22
    spec = SampleSpec(0.05, 0.005, 6, 10)
    local = fit_local_surrogate(op22, transfer, subdomains[0], spec, FAST,
                                seed=0, refine=LIGHT)
    summary = evaluate_local(op22, transfer, subdomains[0], local, seed=5)
    assert 0.0 <= summary.rel_l2 < 1.0
    gs = GlobalSurrogate({s.id: ExactLocal(op22, transfer, s) for s in subdomains}, 9)
    gsum = evaluate_global(op22, transfer, subdomains, gs, spec, n_box=3, n_ball=3)
    assert gsum.rel_l2 < 1e-12  # exact locals reproduce the operator
