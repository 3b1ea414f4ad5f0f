"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`.  The surrogate-training
criteria take minutes per cell; everything is seeded and deterministic.
"""

import numpy as np
import pytest

from nncoarse import (
    COEFFICIENTS,
    EXACT_SOLUTIONS,
    FineOperator,
    GlobalSurrogate,
    RefineConfig,
    SampleSpec,
    TrainingConfig,
    build_hierarchy,
    build_transfer,
    evaluate_global,
    fit_local_surrogate,
    evaluate_local,
    surrogate_error_study,
    train_all,
)
from nncoarse.cli import STUDY_PAIRS, main
from nncoarse.fas import (
    FasConfig,
    PretrainedCoarse,
    TrainInsideCoarse,
    TrueCoarse,
    perturbed_initial_guess,
    tl_fas,
)
from nncoarse.surrogate import LocalSurrogate
from nncoarse.neural import Mlp
from oracles import fine_apply_oracle

SEED = 20240801
TRAIN_CFG = TrainingConfig()
INSIDE_SPEC = SampleSpec(0.05, 0.005, 20, 50)   # algorithm ranges: 10-20 and 30-50


class ExactLocal(LocalSurrogate):
    def __init__(self, op, transfer, subdomain):
        super().__init__(subdomain.id, Mlp.initialize(seed=0), np.zeros((4, 4)),
                         np.zeros(8), np.ones(8), np.ones(4),
                         SampleSpec(1, 1, 1, 1), np.zeros(4))
        self._op, self._transfer, self._sub = op, transfer, subdomain

    def predict(self, u_T, g_T):
        u_T, g_T = np.atleast_2d(u_T), np.atleast_2d(g_T)
        out = np.array([self._op.local_coarse_delta(self._transfer, self._sub, u, g)
                        for u, g in zip(u_T, g_T)])
        return out[0] if out.shape[0] == 1 else out


@pytest.fixture(scope="module")
def reference_problem():
    hierarchy, subdomains = build_hierarchy(2, 2)
    transfer = build_transfer(hierarchy)
    op = FineOperator(hierarchy, COEFFICIENTS["one_plus_u_squared"])
    exact = EXACT_SOLUTIONS["biquartic"]
    f = op.manufactured_rhs(exact)
    u_star = op.interpolate(exact)
    return hierarchy, subdomains, transfer, op, f, u_star


@pytest.fixture(scope="module")
def true_fas_report(reference_problem):
    _, subdomains, transfer, op, f, u_star = reference_problem
    u0 = perturbed_initial_guess(u_star, 2.0, SEED)
    _, report = tl_fas(op, transfer, subdomains, f, u0, FasConfig(), seed=SEED)
    return report


def test_c01_transfer_exactness():
    worst = 0
    for n_side in (1, 2, 4, 8):
        for ratio in (2, 4, 8):
            hierarchy, _ = build_hierarchy(n_side, ratio)
            transfer = build_transfer(hierarchy)
            rng = np.random.default_rng(SEED + n_side + ratio)
            u_c = rng.normal(size=hierarchy.coarse.n_vertices)
            roundtrip = transfer.project(transfer.prolong(u_c))
            assert np.array_equal(roundtrip, u_c), (n_side, ratio)
    print("[C01] projection(prolongation) identity exact to 0 ulp "
          "for all 12 hierarchies: PASS")


def test_c02_operator_matches_quadrature_oracle():
    hierarchy, _ = build_hierarchy(2, 2)
    op = FineOperator(hierarchy, COEFFICIENTS["one_plus_u_squared"])
    k = COEFFICIENTS["one_plus_u_squared"]
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        u = rng.uniform(-1, 1, op.n_fine)
        mine = op.apply(u)
        ref = fine_apply_oracle(hierarchy.fine.vertices, hierarchy.fine.triangles,
                                k.evaluate, u)
        rel = np.max(np.abs(mine - ref)) / max(np.max(np.abs(ref)), 1e-300)
        worst = max(worst, rel)
    assert worst <= 1e-12
    print(f"[C02] operator vs degree-4 brute-force oracle: worst rel {worst:.2e} "
          "<= 1e-12: PASS")


def test_c03_jacobian_finite_difference_consistency():
    worst = 0.0
    eps = 1e-5
    for name, model in COEFFICIENTS.items():
        hierarchy, _ = build_hierarchy(1, 2)
        op = FineOperator(hierarchy, model)
        rng = np.random.default_rng(SEED + 1)
        u = rng.uniform(-1, 1, op.n_fine)
        J = op.jacobian(u).toarray()
        for j in range(op.n_fine):
            e = np.zeros(op.n_fine)
            e[j] = 1.0
            fd = (op.apply(u + eps * e) - op.apply(u - eps * e)) / (2 * eps)
            rel = np.max(np.abs(fd - J[:, j])) / max(1.0, np.max(np.abs(J[:, j])))
            worst = max(worst, rel)
    assert worst <= 1e-6
    print(f"[C03] Jacobian central differences, 3 coefficients: worst rel "
          f"{worst:.2e} <= 1e-6: PASS")


def test_c04_assembly_identity(reference_problem):
    _, subdomains, transfer, op, _, _ = reference_problem
    gs = GlobalSurrogate({s.id: ExactLocal(op, transfer, s) for s in subdomains}, 9)
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(50):
        u_c = rng.uniform(-1, 1, 9)
        g_c = 0.1 * rng.uniform(-1, 1, 9)
        truth = (op.galerkin_coarse_apply(transfer, u_c + g_c)
                 - op.galerkin_coarse_apply(transfer, u_c))
        approx = gs.apply_global(subdomains, u_c, g_c)
        rel = np.linalg.norm(approx - truth) / max(np.linalg.norm(truth), 1e-300)
        worst = max(worst, rel)
    assert worst <= 1e-13
    print(f"[C04] subdomain assembly vs direct Galerkin increments: worst rel "
          f"{worst:.2e} <= 1e-13: PASS")


@pytest.fixture(scope="module")
def local_accuracy_cells(reference_problem):
    """The two headline local-accuracy cells, trained at full effort."""
    _, subdomains, transfer, op, _, _ = reference_problem
    effort = RefineConfig(max_iterations=120, restarts=3, derived_rows=800)
    results = {}
    for half_width, radius in ((1.0, 0.1), (0.05, 0.005)):
        spec = SampleSpec(half_width, radius, 100, 50)
        local = fit_local_surrogate(op, transfer, subdomains[0], spec, TRAIN_CFG,
                                    seed=SEED, refine=effort)
        summary = evaluate_local(op, transfer, subdomains[0], local, seed=SEED + 9)
        results[(half_width, radius)] = summary
    return results


def test_c05_local_surrogate_accuracy(local_accuracy_cells):
    wide = local_accuracy_cells[(1.0, 0.1)]
    tight = local_accuracy_cells[(0.05, 0.005)]
    assert wide.rel_l2 <= 5e-2
    assert tight.rel_l2 <= 1e-5
    print(f"[C05] local accuracy: box 1.0/ball 0.1 rel_l2 {wide.rel_l2:.3e} <= 5e-2; "
          f"box 0.05/ball 0.005 rel_l2 {tight.rel_l2:.3e} <= 1e-5: PASS")


@pytest.fixture(scope="module")
def study_table(reference_problem):
    _, subdomains, transfer, op, _, _ = reference_problem
    return surrogate_error_study(
        op, transfer, subdomains[0], STUDY_PAIRS, TRAIN_CFG, seed=SEED,
        box_draws=30, ball_draws=50,
        refine=RefineConfig(restarts=1, max_iterations=100))


def test_c06_error_trend_down_the_table(study_table):
    first = study_table[0].rel_l2
    last = study_table[-1].rel_l2
    assert first / last >= 100.0
    rows = "; ".join(f"({r.box_half_width:g},{r.ball_radius:g})={r.rel_l2:.2e}"
                     for r in study_table)
    print(f"[C06] error trend over the table: first/last = {first / last:.1f}x "
          f">= 100x: PASS\n       {rows}")


def test_c07_global_surrogate_accuracy(reference_problem):
    _, subdomains, transfer, op, _, _ = reference_problem
    spec = SampleSpec(0.05, 0.005, 30, 50)
    gs = train_all(op, transfer, subdomains, spec, TRAIN_CFG, seed=SEED,
                   refine=RefineConfig(restarts=1, max_iterations=100))
    summary = evaluate_global(op, transfer, subdomains, gs, spec, seed=SEED + 10)
    assert summary.rel_l2 <= 1e-4
    print(f"[C07] assembled global operator rel_l2 {summary.rel_l2:.3e} <= 1e-4: PASS")


def test_c08_fas_true_coarse_operator(true_fas_report):
    report = true_fas_report
    assert report.converged
    assert report.cycles <= 4
    assert report.relative_residuals[-1] <= 1e-6
    assert report.coarse_iterations[0] == 5
    assert all(c <= 5 for c in report.coarse_iterations)
    resid = " ".join(f"{r:.2e}" for r in report.relative_residuals)
    print(f"[C08] FAS/true: {report.cycles} cycles, coarse iters "
          f"{report.coarse_iterations}, residuals {resid}: PASS")


def test_c09_fas_inside_training(reference_problem, true_fas_report):
    _, subdomains, transfer, op, f, u_star = reference_problem
    u0 = perturbed_initial_guess(u_star, 2.0, SEED)
    cfg = FasConfig(coarse_op=TrainInsideCoarse(INSIDE_SPEC, TRAIN_CFG, seed=SEED))
    _, report = tl_fas(op, transfer, subdomains, f, u0, cfg, seed=SEED)
    assert report.converged
    assert report.cycles <= 4
    assert report.relative_residuals[-1] <= 1e-6
    shared = min(report.cycles, true_fas_report.cycles)
    for mine, true in zip(report.relative_residuals[:shared],
                          true_fas_report.relative_residuals[:shared]):
        assert mine / true <= 10.0 and true / mine <= 10.0
    resid = " ".join(f"{r:.2e}" for r in report.relative_residuals)
    print(f"[C09] FAS/train-inside: {report.cycles} cycles, residuals {resid}, "
          f"within 10x of the true-operator run cycle-by-cycle: PASS")


def test_c10_fas_outside_training(reference_problem):
    _, subdomains, transfer, op, f, u_star = reference_problem
    gs = train_all(op, transfer, subdomains, INSIDE_SPEC, TRAIN_CFG, seed=SEED,
                   refine=RefineConfig.light())
    u0 = perturbed_initial_guess(u_star, 2.0, SEED)
    cfg = FasConfig(tau_c=0.0001, coarse_op=PretrainedCoarse(gs))
    _, report = tl_fas(op, transfer, subdomains, f, u0, cfg, seed=SEED)
    assert report.converged
    assert report.cycles <= 5
    assert report.relative_residuals[-1] <= 1e-6
    resid = " ".join(f"{r:.2e}" for r in report.relative_residuals)
    print(f"[C10] FAS/train-outside (tau_c=1e-4): {report.cycles} cycles, "
          f"residuals {resid}: PASS")


@pytest.mark.parametrize("coefficient", ["one_plus_exp_neg_u",
                                         "one_plus_exp_neg_u_plus_xy"])
def test_c11_coefficient_robustness(coefficient):
    hierarchy, subdomains = build_hierarchy(2, 2)
    transfer = build_transfer(hierarchy)
    op = FineOperator(hierarchy, COEFFICIENTS[coefficient])
    exact = EXACT_SOLUTIONS["biquartic"]
    f = op.manufactured_rhs(exact)
    u0 = perturbed_initial_guess(op.interpolate(exact), 2.0, SEED)

    outcomes = {}
    _, outcomes["true"] = tl_fas(op, transfer, subdomains, f, u0,
                                 FasConfig(), seed=SEED)
    cfg_in = FasConfig(coarse_op=TrainInsideCoarse(INSIDE_SPEC, TRAIN_CFG, seed=SEED))
    _, outcomes["inside"] = tl_fas(op, transfer, subdomains, f, u0, cfg_in, seed=SEED)
    gs = train_all(op, transfer, subdomains, INSIDE_SPEC, TRAIN_CFG, seed=SEED,
                   refine=RefineConfig.light())
    cfg_out = FasConfig(tau_c=0.0001, coarse_op=PretrainedCoarse(gs))
    _, outcomes["outside"] = tl_fas(op, transfer, subdomains, f, u0, cfg_out, seed=SEED)

    for kind, report in outcomes.items():
        assert report.converged, (coefficient, kind)
        assert report.cycles <= 4, (coefficient, kind)
        assert report.relative_residuals[-1] <= 1e-6, (coefficient, kind)
    summary = ", ".join(f"{kind}: {r.cycles} cycles -> "
                        f"{r.relative_residuals[-1]:.2e}"
                        for kind, r in outcomes.items())
    print(f"[C11] {coefficient}: {summary}: PASS")


def test_c12_byte_identical_reruns(tmp_path):
    solve_cfg = tmp_path / "solve.cfg"
    solve_cfg.write_text(
        "subdomains_per_side = 2\nratio = 2\n"
        "coefficient = one_plus_u_squared\nexact_solution = biquartic\n")
    study_cfg = tmp_path / "study.cfg"
    study_cfg.write_text(
        "subdomains_per_side = 1\nratio = 2\nepochs = 3\n"
        "box_draws = 4\nball_draws = 5\nrefine_effort = light\n"
        "study_ratios = 2\nstudy_subdomain_counts = 1\n")
    blobs = {"solve": [], "study": [], "train": []}
    for run in ("a", "b"):
        out = tmp_path / f"solve_{run}"
        assert main(["solve", "--config", str(solve_cfg), "--out", str(out),
                     "--seed", str(SEED)]) == 0
        blobs["solve"].append((out / "fas_report.csv").read_bytes())
        out = tmp_path / f"study_{run}"
        assert main(["study", "--config", str(study_cfg), "--out", str(out),
                     "--seed", "4"]) == 0
        blobs["study"].append(
            (out / "local_study_ratio2.csv").read_bytes()
            + (out / "global_study.csv").read_bytes())
        out = tmp_path / f"train_{run}"
        assert main(["train", "--config", str(study_cfg), "--out", str(out),
                     "--seed", "4"]) == 0
        blobs["train"].append(
            (out / "manifest.txt").read_bytes() + (out / "model_0000.txt").read_bytes())
    for kind, (a, b) in blobs.items():
        assert a == b, kind
    print("[C12] solve/study/train reruns byte-identical: PASS")
