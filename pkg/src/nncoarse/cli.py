"""Experiment driver: config parsing, the study/train/solve commands, CSV output.

Configs are flat key=value text files (one key per line, # comments allowed);
unknown keys are rejected so typos fail loudly.  All commands are
deterministic for a fixed config and seed, down to the output bytes.
"""

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

from .fas import (
    FasConfig,
    PretrainedCoarse,
    TrainInsideCoarse,
    TrueCoarse,
    perturbed_initial_guess,
    tl_fas,
)
from .fem import COEFFICIENTS, EXACT_SOLUTIONS, FineOperator
from .mesh import build_hierarchy, build_transfer
from .modelio import ManifestError, load_surrogate, save_surrogate
from .neural import TrainingConfig
from .sampling import SampleSpec
from .surrogate import (
    RefineConfig,
    evaluate_global,
    surrogate_error_study,
    train_all,
)

__all__ = ["ExperimentConfig", "load_config", "cmd_study", "cmd_train",
           "cmd_solve", "main", "ConfigError"]

# (box half-width, ball radius) grid of the local accuracy study
STUDY_PAIRS = [
    (1.0, 0.1), (1.0, 0.05), (1.0, 0.01), (1.0, 0.005),
    (0.1, 0.05), (0.1, 0.01), (0.1, 0.005),
    (0.05, 0.01), (0.05, 0.005),
    (0.01, 0.005),
]
# settings of the global (assembled-operator) study
GLOBAL_PAIRS = [(1.0, 0.1), (0.1, 0.01), (0.05, 0.005)]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # problem
    subdomains_per_side: int = 2
    ratio: int = 2
    coefficient: str = "one_plus_u_squared"
    exact_solution: str = "biquartic"
    # two-level cycle
    tau: float = 2.0
    delta: float = 1e-6
    n_max: int = 2
    newton_tol: float = 0.01
    i_max: int = 4
    delta_c: float = 1e-8
    tau_c: float = 0.1
    i_c_max: int = 10
    n_c_max: int = 5
    coarse_newton_tol: float = 1e-4
    n_fas: int = 10
    epsilon: float = 1e-6
    coarse_op: str = "true"
    # sampling
    box_half_width: float = 0.05
    ball_radius: float = 0.005
    box_draws: int = 30
    ball_draws: int = 50
    # training
    epochs: int = 500
    batch_size: int = 10
    train_fraction: float = 0.8
    refine_effort: str = "full"
    # study grids (per-side subdomain counts for the global table)
    study_ratios: tuple[int, ...] = (2, 4, 8)
    study_subdomain_counts: tuple[int, ...] = (2, 4, 8)
    # bookkeeping
    seed: int = 0
    out_dir: str = "out"
    model_dir: str = ""

    def fas_config(self, coarse_op) -> FasConfig:
        return FasConfig(
            tau=self.tau, delta=self.delta, n_max=self.n_max,
            newton_tol=self.newton_tol, i_max=self.i_max,
            delta_c=self.delta_c, tau_c=self.tau_c, i_c_max=self.i_c_max,
            n_c_max=self.n_c_max, coarse_newton_tol=self.coarse_newton_tol,
            n_fas=self.n_fas, epsilon=self.epsilon, coarse_op=coarse_op)

    def sample_spec(self) -> SampleSpec:
        return SampleSpec(self.box_half_width, self.ball_radius,
                          self.box_draws, self.ball_draws)

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(epochs=self.epochs, batch_size=self.batch_size,
                              train_fraction=self.train_fraction)

    def refine_config(self) -> RefineConfig:
        return RefineConfig.light() if self.refine_effort == "light" else RefineConfig()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is str:
        return raw
    if getattr(kind, "__origin__", None) is tuple:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    raise ConfigError(f"unhandled config field type for {key}")


def load_config(path: str) -> ExperimentConfig:
    """Parse a flat key=value file; unknown keys raise ConfigError."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not eq or not key:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    cfg = ExperimentConfig(**values)
    if cfg.coefficient not in COEFFICIENTS:
        raise ConfigError(f"unknown coefficient {cfg.coefficient!r}")
    if cfg.exact_solution not in EXACT_SOLUTIONS:
        raise ConfigError(f"unknown exact solution {cfg.exact_solution!r}")
    if cfg.coarse_op not in ("true", "outside", "inside"):
        raise ConfigError(f"unknown coarse operator kind {cfg.coarse_op!r}")
    if cfg.refine_effort not in ("full", "light"):
        raise ConfigError(f"unknown refine effort {cfg.refine_effort!r}")
    return cfg


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _grid_params(cfg: ExperimentConfig) -> dict:
    return {
        "subdomains_per_side": cfg.subdomains_per_side,
        "ratio": cfg.ratio,
        "coefficient": cfg.coefficient,
    }


def cmd_study(cfg: ExperimentConfig) -> list[str]:
    """Local accuracy table per ratio plus the assembled-operator table.

    Returns the list of files written.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    training = cfg.training_config()
    written = []

    for ratio in cfg.study_ratios:
        hierarchy, subdomains = build_hierarchy(cfg.subdomains_per_side, ratio)
        transfer = build_transfer(hierarchy)
        op = FineOperator(hierarchy, COEFFICIENTS[cfg.coefficient])
        rows = surrogate_error_study(
            op, transfer, subdomains[0], STUDY_PAIRS, training,
            seed=cfg.seed, box_draws=cfg.box_draws, ball_draws=cfg.ball_draws,
            refine=cfg.refine_config())
        path = os.path.join(cfg.out_dir, f"local_study_ratio{ratio}.csv")
        _write_csv(path,
                   ["box_half_width", "ball_radius", "rel_l2", "rel_linf"],
                   [(r.box_half_width, r.ball_radius, r.rel_l2, r.rel_linf)
                    for r in rows])
        written.append(path)

    global_rows = []
    for n_side in cfg.study_subdomain_counts:
        hierarchy, subdomains = build_hierarchy(n_side, cfg.ratio)
        transfer = build_transfer(hierarchy)
        op = FineOperator(hierarchy, COEFFICIENTS[cfg.coefficient])
        for half_width, radius in GLOBAL_PAIRS:
            spec = SampleSpec(half_width, radius, cfg.box_draws, cfg.ball_draws)
            gs = train_all(op, transfer, subdomains, spec, training,
                           seed=cfg.seed, refine=cfg.refine_config())
            summary = evaluate_global(op, transfer, subdomains, gs, spec)
            global_rows.append((n_side * n_side, half_width, radius,
                                summary.rel_l2, summary.rel_linf))
    path = os.path.join(cfg.out_dir, "global_study.csv")
    _write_csv(path,
               ["subdomains", "box_half_width", "ball_radius", "rel_l2", "rel_linf"],
               global_rows)
    written.append(path)
    return written


def cmd_train(cfg: ExperimentConfig) -> str:
    """Train all subdomain surrogates around zero and persist them."""
    hierarchy, subdomains = build_hierarchy(cfg.subdomains_per_side, cfg.ratio)
    transfer = build_transfer(hierarchy)
    op = FineOperator(hierarchy, COEFFICIENTS[cfg.coefficient])
    gs = train_all(op, transfer, subdomains, cfg.sample_spec(),
                   cfg.training_config(), seed=cfg.seed,
                   refine=cfg.refine_config())
    save_surrogate(gs, cfg.out_dir, _grid_params(cfg), cfg.sample_spec(),
                   {"epochs": cfg.epochs, "batch_size": cfg.batch_size,
                    "seed": cfg.seed})
    return cfg.out_dir


def cmd_solve(cfg: ExperimentConfig) -> tuple[str, bool]:
    """One two-level solve; writes the per-cycle report CSV.

    Returns (report path, converged).
    """
    hierarchy, subdomains = build_hierarchy(cfg.subdomains_per_side, cfg.ratio)
    transfer = build_transfer(hierarchy)
    op = FineOperator(hierarchy, COEFFICIENTS[cfg.coefficient])
    exact = EXACT_SOLUTIONS[cfg.exact_solution]
    f = op.manufactured_rhs(exact)
    u0 = perturbed_initial_guess(op.interpolate(exact), cfg.tau, cfg.seed)

    if cfg.coarse_op == "true":
        coarse_op = TrueCoarse()
    elif cfg.coarse_op == "inside":
        coarse_op = TrainInsideCoarse(cfg.sample_spec(), cfg.training_config(),
                                      seed=cfg.seed)
    else:
        model_dir = cfg.model_dir or cfg.out_dir
        gs, _ = load_surrogate(model_dir, expected_grid=_grid_params(cfg))
        coarse_op = PretrainedCoarse(gs)

    _, report = tl_fas(op, transfer, subdomains, f, u0,
                       cfg.fas_config(coarse_op), seed=cfg.seed)

    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "fas_report.csv")
    _write_csv(path,
               ["fas_iteration", "coarse_iterations", "relative_residual"],
               [(i + 1, report.coarse_iterations[i], report.relative_residuals[i])
                for i in range(report.cycles)])
    return path, report.converged


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="nncoarse",
        description="Two-level nonlinear solver with learned coarse operators")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("study", "surrogate accuracy tables (local per ratio, plus global)"),
        ("train", "train and persist subdomain surrogates"),
        ("solve", "run the two-level solver and write the cycle report"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
        if name == "solve":
            p.add_argument("--coarse-op", choices=("true", "outside", "inside"),
                           help="coarse operator kind (overrides config)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if getattr(args, "coarse_op", None) is not None:
            cfg = replace(cfg, coarse_op=args.coarse_op)

        if args.command == "study":
            for path in cmd_study(cfg):
                print(path)
            return 0
        if args.command == "train":
            out = cmd_train(cfg)
            print(out)
            return 0
        path, converged = cmd_solve(cfg)
        print(path)
        if not converged:
            print("did not converge within the cycle budget", file=sys.stderr)
            return 2
        return 0
    except (ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
