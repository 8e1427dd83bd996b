"""Command-line entry point: ``sisvax <command> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .graph import Graph, load_edge_list, save_edge_list
from .learn import LearnConfig, LearnTrace, TransitionDataset, f1_score, sis_learn
from .sis import ABSORBING, RESTART, SisParams, simulate, write_trajectory_csv, write_vaccination_csv
from .srm import DP_MODES

SOLVER_CHOICES = ("dp", "tree", "greedy", "random", "ld", "gw", "exhaustive")


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _common(default) -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default, help="master seed")
    p.add_argument("--config", type=Path, default=default, help="INI experiment config")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--workers", type=int, default=default, help="parallel replicate workers")
    return p


def _sis_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p-init", type=float, default=0.3)
    p.add_argument("--p-inf", type=float, default=0.3)
    p.add_argument("--p-rec", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sisvax", parents=[_common(None)],
                                     description="Learn an SIS contact graph and vaccinate it.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(argparse.SUPPRESS)

    p = sub.add_parser("simulate", parents=[common], help="simulate one SIS trajectory")
    p.add_argument("graph", type=Path)
    _sis_args(p)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--mode", choices=(ABSORBING, RESTART), default=ABSORBING)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--vaccinate", type=_ints, default=[], help="vertex ids, comma separated")
    p.add_argument("--vaccinate-at", type=int, default=0, help="round of the vaccination batch")
    p.add_argument("--save-states", action="store_true", help="also write states.csv")

    p = sub.add_parser("learn", parents=[common], help="learn a graph from infection states")
    p.add_argument("graph", type=Path, nargs="?", help="true graph to simulate (restart mode)")
    p.add_argument("--states", type=Path, help="0/1 state matrix, one round per line")
    _sis_args(p)
    p.add_argument("--rounds", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=250)
    p.add_argument("--kappa-mu", type=float, default=0.01)
    p.add_argument("--kappa-nu", type=float, default=0.01)
    p.add_argument("--delta-max", type=int, default=None)
    p.add_argument("--edge-rule", choices=("and", "or"), default="and")
    p.add_argument("--order", choices=("weakest_first", "index"), default="weakest_first")
    p.add_argument("--min-config-samples", type=int, default=10)
    p.add_argument("--exclusion-z", type=float, default=1.0)

    p = sub.add_parser("vaccinate", parents=[common], help="choose vertices to vaccinate")
    p.add_argument("graph", type=Path)
    p.add_argument("--solver", choices=SOLVER_CHOICES, default="dp")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--walk-len", type=int, default=6)
    p.add_argument("--td-method", choices=("min_fill", "min_degree"), default="min_fill")
    p.add_argument("--dp-mode", choices=DP_MODES, default="full")
    p.add_argument("--representative", action="store_true", help="same as --dp-mode representative")
    p.add_argument("--beam", type=int, default=None, help="pareto entries kept per cost")

    p = sub.add_parser("pipeline", parents=[common], help="learn, vaccinate, watch the decay")
    p.add_argument("--replicates", type=int, default=None)

    p = sub.add_parser("learning-curve", parents=[common], help="F1 against learning rounds")
    p.add_argument("--grid", type=_ints, default=[100, 200, 400, 800, 1000, 2000])
    p.add_argument("--replicates", type=int, default=None)

    p = sub.add_parser("metastability", parents=[common], help="meta-stability heatmap table")
    p.add_argument("--p-inf-grid", type=_floats, default=[0.1, 0.3, 0.5, 0.7, 0.9])
    p.add_argument("--p-rec-grid", type=_floats, default=[0.1, 0.3, 0.5, 0.7, 0.9])
    p.add_argument("--replicates", type=int, default=None)

    p = sub.add_parser("bench", parents=[common], help="solver runtime benchmark")
    p.add_argument("--n-grid", type=_ints, default=[10, 14, 18, 22, 26])
    p.add_argument("--budget", type=int, default=None, help="fixed budget (default 0.2 n)")
    p.add_argument("--replicates", type=int, default=None)
    return parser


def _out_dir(args, cfg: ex.ExperimentConfig | None = None) -> Path:
    out = args.out or Path(cfg.out if cfg else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _experiment_config(args, **defaults) -> ex.ExperimentConfig:
    overrides = dict(master_seed=args.seed, workers=args.workers,
                     replicates=getattr(args, "replicates", None))
    if args.config is not None:
        return ex.load_config(args.config, **overrides)
    values = {**defaults, **{k: v for k, v in overrides.items() if v is not None}}
    return ex.ExperimentConfig(**values)


def _read_states(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([int(x) for x in line.replace(",", " ").split()])
    states = np.array(rows, dtype=np.uint8)
    if states.ndim != 2 or not np.isin(states, (0, 1)).all():
        raise ValueError(f"{path}: expected a 0/1 matrix")
    return states


def cmd_simulate(args) -> int:
    g = load_edge_list(args.graph)
    params = SisParams(args.p_init, args.p_inf, args.p_rec, args.alpha)
    schedule = {args.vaccinate_at: args.vaccinate} if args.vaccinate else None
    traj = simulate(g, params, args.rounds, args.mode, schedule,
                    rng=np.random.default_rng(args.seed), thin=args.thin)
    out = _out_dir(args)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_vaccination_csv(traj, out / "vaccinations.csv")
    if args.save_states:
        np.savetxt(out / "states.csv", traj.states, fmt="%d", delimiter=",")
    print(f"rounds={args.rounds} final_infected={int(traj.infected_counts[-1])} "
          f"restarts={len(traj.restart_rounds)}")
    return 0


def cmd_learn(args) -> int:
    truth = None
    if args.states is not None:
        data = TransitionDataset.from_states(_read_states(args.states))
    elif args.graph is not None:
        truth = load_edge_list(args.graph)
        traj = simulate(truth, SisParams(args.p_init, args.p_inf, args.p_rec), args.rounds,
                        RESTART, rng=np.random.default_rng(args.seed))
        data = TransitionDataset.from_trajectory(traj, burn_in=args.burn_in)
    else:
        raise SystemExit("learn needs a graph to simulate or --states")
    delta = args.delta_max
    if delta is None:
        if truth is None:
            raise SystemExit("--delta-max is required with --states")
        delta = max(int(truth.degrees.max()), 1)
    cfg = LearnConfig(args.p_inf, delta, args.kappa_mu, args.kappa_nu,
                      min_config_samples=args.min_config_samples, order=args.order,
                      edge_rule=args.edge_rule, exclusion_z=args.exclusion_z)
    trace = LearnTrace()
    edges = sis_learn(data, cfg, trace)
    out = _out_dir(args)
    save_edge_list(Graph(data.n, edges), out / "learned.edges")
    trace.write_inclusion_csv(out / "inclusion.csv")
    trace.write_exclusion_csv(out / "exclusion.csv")
    line = f"n={data.n} pairs={len(data)} learned_edges={len(edges)}"
    if truth is not None:
        line += f" f1={f1_score(edges, truth.edges):.4f}"
    print(line)
    return 0


def cmd_vaccinate(args) -> int:
    g = load_edge_list(args.graph)
    mode = "representative" if args.representative else args.dp_mode
    cfg = ex.ExperimentConfig(epsilon=args.epsilon, walk_len=args.walk_len,
                              td_method=args.td_method, dp_mode=mode, beam=args.beam)
    result = ex.run_solver(args.solver, g, args.budget, cfg, np.random.default_rng(args.seed))
    for v in sorted(result.removal):
        print(v)
    print(result.summary())
    if args.out is not None:
        out = _out_dir(args)
        (out / "removal.txt").write_text("".join(f"{v}\n" for v in sorted(result.removal)))
    return 0


def cmd_pipeline(args) -> int:
    cfg = _experiment_config(args, solvers=("dp", "greedy", "random", "ld", "gw"))
    report = ex.run_pipeline(cfg)
    out = _out_dir(args, cfg)
    report.write_csv(out / "pipeline.csv")
    report.write_replicates_csv(out / "pipeline_replicates.csv")
    ex.write_extinction_csv(report, out / "pipeline_extinction.csv")
    f1 = np.mean([r.f1 for r in report.replicates])
    print(f"replicates={cfg.replicates} mean_f1={f1:.4f} out={out / 'pipeline.csv'}")
    return 0


def cmd_learning_curve(args) -> int:
    cfg = _experiment_config(args)
    curve = ex.run_learning_curve(cfg, args.grid)
    out = _out_dir(args, cfg)
    curve.write_csv(out / "learning_curve.csv")
    means = curve.f1.mean(axis=0)
    print(" ".join(f"{r}:{m:.3f}" for r, m in zip(curve.grid, means)))
    return 0


def cmd_metastability(args) -> int:
    cfg = _experiment_config(args, replicates=10, T=1000)
    scan = ex.run_metastability_scan(cfg, args.p_inf_grid, args.p_rec_grid)
    out = _out_dir(args, cfg)
    scan.write_csv(out / "metastability.csv")
    print(f"cells={len(scan.cells)} mean_rho={scan.mean_rho:.4f} out={out / 'metastability.csv'}")
    return 0


def cmd_bench(args) -> int:
    cfg = _experiment_config(args, source="partial_ktree", k=3, replicates=1,
                             solvers=("dp", "greedy", "exhaustive"), dp_mode="full",
                             beam=None, epsilon=1e-6)
    bench = ex.run_solver_benchmark(cfg, args.n_grid, args.budget)
    out = _out_dir(args, cfg)
    bench.write_csv(out / "bench.csv")
    broken = [(n, r) for n, r, ok in bench.dominance if not ok]
    print(f"rows={len(bench.rows)} dominance_violations={len(broken)} out={out / 'bench.csv'}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "learn": cmd_learn,
    "vaccinate": cmd_vaccinate,
    "pipeline": cmd_pipeline,
    "learning-curve": cmd_learning_curve,
    "metastability": cmd_metastability,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"sisvax: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
