"""Seeded experiment runners: learn-then-vaccinate pipeline, learning curves,
meta-stability scans and solver benchmarks, each writing a CSV."""

from __future__ import annotations

import configparser
import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from math import comb
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .graph import (
    Graph, augment_graph, complete_graph, cycle_graph, generate_er, generate_partial_ktree,
    is_tree, load_edge_list, path_graph, random_tree, star_graph,
)
from .learn import LearnConfig, TransitionDataset, f1_score, sis_learn
from .sis import ABSORBING, RESTART, SisParams, detect_metastability, extinction_time, simulate
from .spectral import spectral_radius
from .srm import (
    EXHAUSTIVE_CAP, VaccinationResult, baseline_largest_degree, baseline_random, baseline_walk,
    dp_vaccinate, exhaustive_srm, greedy_vaccinate, tree_vaccinate,
)

GRAPH_SOURCES = ("augmented_tree", "partial_ktree", "tree", "er", "path", "star", "cycle",
                 "complete", "file")
SOLVERS = ("dp", "tree", "greedy", "random", "ld", "gw", "exhaustive", "none")
CONFIDENCE = 0.99


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    # [graph]
    source: str = "augmented_tree"
    n: int = 40
    add_prob: float = 0.05
    k: int = 3
    keep_prob: float = 0.8
    edge_prob: float = 0.1
    path: str = ""
    # [sis]
    p_init: float = 0.3
    p_inf: float = 0.3
    p_rec: float = 0.5
    alpha: float = 0.2
    # [run]
    T: int = 2000
    learn_rounds: int | None = None
    replicates: int = 20
    master_seed: int = 0
    burn_in: int = 250
    fresh_start: bool = False
    workers: int = 1
    out: str = "results"
    # [learn]
    kappa_mu: float = 0.01
    kappa_nu: float = 0.01
    delta_max: int | None = None
    min_samples: int = 20
    # [vaccinate]
    budget: int = 7
    solvers: tuple[str, ...] = ("dp",)
    oracle: bool = False
    epsilon: float = 1e-4
    walk_len: int = 6
    td_method: str = "min_fill"
    dp_mode: str = "pareto"
    beam: int | None = 2
    # [metastability]
    window: int = 50
    tol: float = 0.01
    # [bench]
    budget_fraction: float = 0.2
    exhaustive_cap: int = EXHAUSTIVE_CAP

    def __post_init__(self):
        if self.learn_rounds is None:
            object.__setattr__(self, "learn_rounds", self.T // 2)
        if self.source not in GRAPH_SOURCES:
            raise ValueError(f"unknown graph source {self.source!r}")
        if self.source == "file" and not self.path:
            raise ValueError("graph source 'file' needs a path")
        if self.T < 1 or not 0 <= self.learn_rounds <= self.T:
            raise ValueError("need T >= 1 and 0 <= learn_rounds <= T")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad or not self.solvers:
            raise ValueError(f"unknown solvers {bad}; choose from {SOLVERS}")
        SisParams(self.p_init, self.p_inf, self.p_rec, self.alpha)

    @property
    def params(self) -> SisParams:
        return SisParams(self.p_init, self.p_inf, self.p_rec, self.alpha)

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


CONFIG_SECTIONS = {
    "graph": ("source", "n", "add_prob", "k", "keep_prob", "edge_prob", "path"),
    "sis": ("p_init", "p_inf", "p_rec", "alpha"),
    "run": ("T", "learn_rounds", "replicates", "master_seed", "burn_in", "fresh_start",
            "workers", "out"),
    "learn": ("kappa_mu", "kappa_nu", "delta_max", "min_samples"),
    "vaccinate": ("budget", "solvers", "oracle", "epsilon", "walk_len", "td_method", "dp_mode",
                  "beam"),
    "metastability": ("window", "tol"),
    "bench": ("budget_fraction", "exhaustive_cap"),
}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(name: str, raw: str):
    kind = _TYPES[name]
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind.startswith("tuple"):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    return raw


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read an INI-style config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    values = {}
    for section in parser.sections():
        if section not in CONFIG_SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in CONFIG_SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**values)
    if cfg.source == "file" and not Path(cfg.path).exists():
        raise FileNotFoundError(cfg.path)
    return cfg


# ---------------------------------------------------------------- seeding


def derive_replicate_seed(master_seed: int, replicate: int) -> int:
    """64-bit seed hashed from ``(master_seed, replicate)`` by ``SeedSequence``."""
    if master_seed < 0 or replicate < 0:
        raise ValueError("seeds and replicate indices must be nonnegative")
    state = np.random.SeedSequence([master_seed, replicate]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _streams(cfg: ExperimentConfig, rep: int) -> dict[str, np.random.Generator]:
    names = ("graph", "sim", "post", "solver")
    children = np.random.SeedSequence(derive_replicate_seed(cfg.master_seed, rep)).spawn(len(names))
    return {name: np.random.default_rng(s) for name, s in zip(names, children)}


def build_graph(cfg: ExperimentConfig, rng: np.random.Generator) -> Graph:
    src = cfg.source
    if src == "file":
        return load_edge_list(cfg.path)
    if src == "augmented_tree":
        return augment_graph(random_tree(cfg.n, rng), cfg.add_prob, rng)
    if src == "partial_ktree":
        return generate_partial_ktree(cfg.n, cfg.k, cfg.keep_prob, rng)
    if src == "tree":
        return random_tree(cfg.n, rng)
    if src == "er":
        return generate_er(cfg.n, cfg.edge_prob, rng)
    return {"path": path_graph, "star": lambda n: star_graph(n - 1), "cycle": cycle_graph,
            "complete": complete_graph}[src](cfg.n)


def replicate_graph(cfg: ExperimentConfig, rep: int) -> Graph:
    """The graph replicate ``rep`` of ``cfg`` works on."""
    return build_graph(cfg, _streams(cfg, rep)["graph"])


def run_solver(
    name: str, g: Graph, K: int, cfg: ExperimentConfig, rng: np.random.Generator | None = None
) -> VaccinationResult:
    K = min(K, g.n)
    if name == "dp":
        return dp_vaccinate(g, K, cfg.epsilon, mode=cfg.dp_mode, td_method=cfg.td_method,
                            beam=cfg.beam)
    if name == "tree":
        return tree_vaccinate(g, K, cfg.epsilon)
    if name == "greedy":
        return greedy_vaccinate(g, K)
    if name == "random":
        return baseline_random(g, K, rng if rng is not None else np.random.default_rng())
    if name == "ld":
        return baseline_largest_degree(g, K)
    if name == "gw":
        return baseline_walk(g, K, cfg.walk_len)
    if name == "exhaustive":
        return exhaustive_srm(g, K, cfg.exhaustive_cap)
    if name == "none":
        return baseline_largest_degree(g, 0)
    raise ValueError(f"unknown solver {name!r}")


# ---------------------------------------------------------------- aggregation


def t_band(values: np.ndarray, axis: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and Student-t confidence band along ``axis``."""
    values = np.asarray(values, dtype=float)
    m = values.shape[axis]
    mean = values.mean(axis=axis)
    if m < 2:
        return mean, mean.copy(), mean.copy()
    half = stats.t.ppf(0.5 + CONFIDENCE / 2, m - 1) * values.std(axis=axis, ddof=1) / np.sqrt(m)
    return mean, mean - half, mean + half


def _fmt(x: float) -> str:
    return "" if x is None or not np.isfinite(x) else f"{x:.6f}"


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _learn_config(cfg: ExperimentConfig, truth: Graph) -> LearnConfig:
    delta = cfg.delta_max if cfg.delta_max is not None else max(int(truth.degrees.max()), 1)
    return LearnConfig(cfg.p_inf, delta, cfg.kappa_mu, cfg.kappa_nu, cfg.min_samples)


# ---------------------------------------------------------------- pipeline


@dataclass
class ReplicateOutcome:
    replicate: int
    f1: float
    learned_edges: int
    arms: dict[str, tuple[tuple[int, ...], float, np.ndarray]] = field(default_factory=dict)


@dataclass
class PipelineReport:
    config: ExperimentConfig
    replicates: list[ReplicateOutcome]
    curves: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]
    extinction: dict[str, float]

    def arm_names(self) -> list[str]:
        return list(self.curves)

    def proportions(self, arm: str) -> np.ndarray:
        """Replicates by post-vaccination rounds."""
        return np.stack([r.arms[arm][2] for r in self.replicates])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "mean_proportion", "ci_low", "ci_high", "solver"])
            for arm, (mean, lo, hi) in self.curves.items():
                for r in range(mean.size):
                    w.writerow([r, _fmt(mean[r]), _fmt(lo[r]), _fmt(hi[r]), arm])

    def write_replicates_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "solver", "f1", "learned_edges", "rho_true_after", "removal"])
            for rep in self.replicates:
                for arm, (removal, rho_after, _) in rep.arms.items():
                    w.writerow([rep.replicate, arm, _fmt(rep.f1), rep.learned_edges,
                                _fmt(rho_after), " ".join(map(str, removal))])


def _pipeline_replicate(args: tuple[ExperimentConfig, int]) -> ReplicateOutcome:
    cfg, rep = args
    rngs = _streams(cfg, rep)
    truth = build_graph(cfg, rngs["graph"])
    learn_params = SisParams(cfg.p_init, cfg.p_inf, cfg.p_rec)
    first = simulate(truth, learn_params, cfg.learn_rounds, RESTART, rng=rngs["sim"])
    data = TransitionDataset.from_trajectory(first, burn_in=cfg.burn_in)
    learned = Graph(truth.n, sis_learn(data, _learn_config(cfg, truth)))
    outcome = ReplicateOutcome(rep, f1_score(learned.edges, truth.edges), learned.m)

    post_seed = rngs["post"].integers(2**63)
    start = None if cfg.fresh_start else first.states[-1]
    arms = [(name, learned) for name in cfg.solvers]
    if cfg.oracle:
        arms += [(f"{name}_oracle", truth) for name in cfg.solvers if name != "none"]
    for arm, graph in arms:
        name = arm.removesuffix("_oracle")
        solver_rng = np.random.default_rng([rep, len(arm)] + [ord(c) for c in arm])
        try:
            result = run_solver(name, graph, cfg.budget, cfg, solver_rng)
        except ValueError as exc:
            raise RuntimeError(f"replicate {rep}, solver {arm}: {exc}") from exc
        removal = result.removal
        # common random numbers: every arm replays the same post-phase stream
        post = simulate(truth, cfg.params, cfg.T - cfg.learn_rounds, ABSORBING,
                        schedule={0: removal} if removal else None,
                        rng=np.random.default_rng(post_seed), initial=start)
        keep = np.ones(truth.n, dtype=bool)
        keep[list(removal)] = False
        outcome.arms[arm] = (removal, spectral_radius(truth, keep).value, post.proportions)
    return outcome


def run_pipeline(cfg: ExperimentConfig) -> PipelineReport:
    """Learn the graph on restart-mode data, vaccinate, then watch the decay.

    Vaccination happens once at round ``learn_rounds``; the post phase runs in
    absorbing mode from the same state (or a fresh seed with ``fresh_start``).
    """
    outcomes = _map(_pipeline_replicate, [(cfg, r) for r in range(cfg.replicates)], cfg.workers)
    curves, extinction = {}, {}
    for arm in outcomes[0].arms:
        props = np.stack([o.arms[arm][2] for o in outcomes])
        curves[arm] = t_band(props)
        times = [np.flatnonzero(p == 0) for p in props]
        hit = [int(z[0]) for z in times if z.size]
        extinction[arm] = float(np.mean(hit)) if len(hit) == len(times) else float("nan")
    return PipelineReport(cfg, outcomes, curves, extinction)


# ---------------------------------------------------------------- learning curve


@dataclass
class LearningCurve:
    grid: list[int]
    f1: np.ndarray  # replicates x grid

    def write_csv(self, path: str | Path) -> None:
        mean, lo, hi = t_band(self.f1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["learn_rounds", "mean_f1", "ci_low", "ci_high"])
            for k, rounds in enumerate(self.grid):
                w.writerow([rounds, _fmt(mean[k]), _fmt(lo[k]), _fmt(hi[k])])


def _curve_replicate(args: tuple[ExperimentConfig, list[int], int]) -> list[float]:
    cfg, grid, rep = args
    rngs = _streams(cfg, rep)
    truth = build_graph(cfg, rngs["graph"])
    traj = simulate(truth, SisParams(cfg.p_init, cfg.p_inf, cfg.p_rec), grid[-1], RESTART,
                    rng=rngs["sim"])
    lcfg = _learn_config(cfg, truth)
    out = []
    for rounds in grid:
        data = TransitionDataset.from_trajectory(traj, rounds=rounds, burn_in=cfg.burn_in)
        out.append(f1_score(sis_learn(data, lcfg), truth.edges))
    return out


def run_learning_curve(cfg: ExperimentConfig, round_grid: Sequence[int]) -> LearningCurve:
    grid = [int(r) for r in round_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
        raise ValueError("round grid must be positive and strictly ascending")
    rows = _map(_curve_replicate, [(cfg, grid, r) for r in range(cfg.replicates)], cfg.workers)
    return LearningCurve(grid, np.array(rows, dtype=float))


# ---------------------------------------------------------------- meta-stability


@dataclass
class MetastabilityCell:
    p_inf: float
    p_rec: float
    rounds: list[int | None]
    theory_extinct: bool

    @property
    def frac_never(self) -> float:
        return sum(r is None for r in self.rounds) / len(self.rounds)

    @property
    def mean_rounds(self) -> float:
        hit = [r for r in self.rounds if r is not None]
        return float(np.mean(hit)) if hit else float("nan")


@dataclass
class MetastabilityScan:
    cells: list[MetastabilityCell]
    mean_rho: float

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p_inf", "p_rec", "mean_rounds", "frac_never", "theory_extinct_flag"])
            for c in self.cells:
                w.writerow([f"{c.p_inf:g}", f"{c.p_rec:g}", _fmt(c.mean_rounds),
                            f"{c.frac_never:.6f}", int(c.theory_extinct)])


def _scan_replicate(args) -> list[int | None]:
    cfg, cells, rep = args
    rngs = _streams(cfg, rep)
    g = build_graph(cfg, rngs["graph"])
    out = []
    for p_inf, p_rec in cells:
        traj = simulate(g, SisParams(cfg.p_init, p_inf, p_rec), cfg.T, ABSORBING, rng=rngs["sim"])
        out.append(detect_metastability(traj, cfg.window, cfg.tol))
    return out


def run_metastability_scan(
    cfg: ExperimentConfig, p_inf_grid: Sequence[float], p_rec_grid: Sequence[float]
) -> MetastabilityScan:
    """Detection round per grid cell; replicate ``r`` uses the same graph in every cell."""
    for p in list(p_inf_grid) + list(p_rec_grid):
        if not 0 <= p <= 1:
            raise ValueError("grid probabilities must lie in [0, 1]")
    cells = [(float(a), float(b)) for a in p_inf_grid for b in p_rec_grid]
    rows = _map(_scan_replicate, [(cfg, cells, r) for r in range(cfg.replicates)], cfg.workers)
    rhos = [spectral_radius(build_graph(cfg, _streams(cfg, r)["graph"])).value
            for r in range(cfg.replicates)]
    mean_rho = float(np.mean(rhos))
    out = []
    for k, (p_inf, p_rec) in enumerate(cells):
        flag = p_inf == 0 or mean_rho < p_rec / p_inf
        out.append(MetastabilityCell(p_inf, p_rec, [row[k] for row in rows], flag))
    return MetastabilityScan(out, mean_rho)


# ---------------------------------------------------------------- benchmark


@dataclass
class BenchRow:
    solver: str
    n: int
    k: int
    seconds: float
    rho_before: float
    rho_after: float
    width: int | None
    replicate: int = 0


@dataclass
class Benchmark:
    rows: list[BenchRow]
    dominance: list[tuple[int, int, bool]]  # (n, replicate, chain holds)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["solver", "n", "k", "seconds", "rho_after", "width"])
            for r in self.rows:
                w.writerow([r.solver, r.n, r.k, f"{r.seconds:.6f}", f"{r.rho_after:.10f}",
                            "" if r.width is None else r.width])

    def median_seconds(self, solver: str) -> dict[int, float]:
        by_n: dict[int, list[float]] = {}
        for r in self.rows:
            if r.solver == solver:
                by_n.setdefault(r.n, []).append(r.seconds)
        return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def dominance_holds(rhos: dict[str, float], tol: float = 1e-8) -> bool:
    """exhaustive <= dp <= greedy wherever those solvers ran."""
    chain = [rhos[s] for s in ("exhaustive", "dp", "greedy") if s in rhos]
    slack = tol
    return all(a <= b + slack for a, b in zip(chain, chain[1:]))


def run_solver_benchmark(
    cfg: ExperimentConfig,
    n_grid: Sequence[int],
    budget: int | None = None,
    timer: Callable[[], float] = time.perf_counter,
) -> Benchmark:
    """Time every configured solver on fresh graphs of each size.

    The budget is ``budget`` when given, else ``round(budget_fraction * n)``.
    Exhaustive search is skipped where it would exceed its cap; each solver
    is run once on a tiny graph first so compilation is not timed.
    """
    warm = path_graph(4)
    for name in cfg.solvers:
        if name != "tree" or is_tree(warm):
            run_solver(name, warm, 1, cfg, np.random.default_rng(0))
    rows, dom = [], []
    for n in n_grid:
        for rep in range(cfg.replicates):
            cell = cfg.with_(n=int(n))
            rngs = _streams(cell, rep)
            g = build_graph(cell, rngs["graph"])
            K = budget if budget is not None else int(round(cfg.budget_fraction * g.n))
            rhos = {}
            for name in cfg.solvers:
                if name == "exhaustive" and _subset_count(g.n, K) > cfg.exhaustive_cap:
                    continue
                if name == "tree" and not is_tree(g):
                    continue
                t0 = timer()
                res = run_solver(name, g, K, cfg, rngs["solver"])
                dt = timer() - t0
                rhos[name] = res.achieved_rho
                rows.append(BenchRow(name, g.n, K, dt, res.rho_before, res.achieved_rho,
                                     res.width, rep))
            dom.append((g.n, rep, dominance_holds(rhos)))
    return Benchmark(rows, dom)


def _subset_count(n: int, K: int) -> int:
    return sum(comb(n, c) for c in range(min(K, n) + 1))


def loglog_slope(ns: Sequence[float], seconds: Sequence[float]) -> float:
    """Least-squares slope of log(seconds) against log(n)."""
    return float(np.polyfit(np.log(ns), np.log(np.maximum(seconds, 1e-9)), 1)[0])


def loglinear_slope(ns: Sequence[float], seconds: Sequence[float]) -> float:
    """Least-squares slope of log(seconds) against n."""
    return float(np.polyfit(np.asarray(ns, float), np.log(np.maximum(seconds, 1e-9)), 1)[0])


def write_extinction_csv(report: PipelineReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["solver", "mean_extinction_round"])
        for arm, value in report.extinction.items():
            w.writerow([arm, _fmt(value)])


def extinction_times(g: Graph, params: SisParams, runs: int, T: int,
                     rng: np.random.Generator) -> list[int | None]:
    """Extinction round of ``runs`` independent absorbing runs (None if not within T)."""
    out = []
    for _ in range(runs):
        out.append(extinction_time(simulate(g, params, T, ABSORBING, rng=rng)))
    return out
