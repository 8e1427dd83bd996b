"""Discrete-time SIS dynamics with vaccination.

Every round consumes a block of ``2 n`` uniforms from the caller's
generator: the first ``n`` drive the per-vertex transition, the second ``n``
are only read when the restart chain reseeds. The draw for vertex ``v`` in
round ``t`` therefore sits at a fixed stream offset, so the update is
simultaneous and independent of processing order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numba
import numpy as np

from .graph import Graph

ABSORBING = "absorbing"
RESTART = "restart"
_NEVER = np.iinfo(np.int64).max
_CHUNK_VALUES = 1 << 20


@dataclass(frozen=True)
class SisParams:
    p_init: float
    p_inf: float
    p_rec: float
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("p_init", "p_inf", "p_rec", "alpha"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SisState:
    bits: np.ndarray
    round: int = 0

    @property
    def infected(self) -> int:
        return int(self.bits.sum())


@dataclass
class Trajectory:
    """State history of one simulated run.

    ``states[k]`` is the state at round ``rounds[k]``; without thinning the
    two coincide.
    """

    states: np.ndarray
    mode: str
    vaccination_log: dict[int, frozenset[int]] = field(default_factory=dict)
    restart_rounds: list[int] = field(default_factory=list)
    rounds: np.ndarray | None = None

    def __post_init__(self):
        if self.rounds is None:
            self.rounds = np.arange(len(self.states))

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def infected_counts(self) -> np.ndarray:
        return self.states.sum(axis=1, dtype=np.int64)

    @property
    def proportions(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(len(self.states))
        return self.infected_counts / self.n

    def state(self, k: int) -> SisState:
        return SisState(self.states[k], int(self.rounds[k]))

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return (self.state(k) for k in range(len(self.states)))


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _advance(indptr, indices, cur, out, u, p_inf, p_rec, alpha, vacc_from, t):
    n = cur.size
    for i in range(n):
        if cur[i]:
            out[i] = 0 if u[i] < p_rec else 1
        else:
            k = 0
            for p in range(indptr[i], indptr[i + 1]):
                k += cur[indices[p]]
            if k == 0:
                out[i] = 0
                continue
            q = p_inf * alpha if vacc_from[i] <= t else p_inf
            p_infect = 1.0 - (1.0 - q) ** k
            out[i] = 1 if u[i] < p_infect else 0


@numba.njit(cache=True)
def _run_chunk(indptr, indices, start, t0, draws, p_init, p_inf, p_rec, alpha,
               vacc_from, restart, states, restarted):
    """Fill ``states[1:]`` from ``start``; returns rounds actually run.

    Stops early (absorbing mode only) once the all-zero state is reached.
    """
    n = start.size
    steps = draws.shape[0]
    states[0, :] = start
    for s in range(steps):
        cur = states[s]
        nxt = states[s + 1]
        t = t0 + s
        alive = 0
        for i in range(n):
            alive += cur[i]
        if alive == 0:
            if restart:
                for i in range(n):
                    nxt[i] = 1 if draws[s, n + i] < p_init else 0
                restarted[s + 1] = True
                continue
            for i in range(n):
                nxt[i] = 0
            return s + 1
        _advance(indptr, indices, cur, nxt, draws[s, :n], p_inf, p_rec, alpha, vacc_from, t)
    return steps


# ---------------------------------------------------------------- operations


def seed_initial(params: SisParams, n: int, rng: np.random.Generator) -> SisState:
    return SisState((rng.random(n) < params.p_init).astype(np.uint8), 0)


def step(
    g: Graph,
    params: SisParams,
    state: SisState,
    vaccinated: Iterable[int] = (),
    rng: np.random.Generator | None = None,
) -> SisState:
    """One simultaneous SIS transition; ``vaccinated`` vertices are already protected."""
    if state.bits.shape != (g.n,):
        raise ValueError(f"state has length {state.bits.size}, graph has n={g.n}")
    rng = np.random.default_rng() if rng is None else rng
    vacc_from = np.full(g.n, _NEVER, dtype=np.int64)
    vacc_from[list(vaccinated)] = -1
    u = rng.random(g.n)
    out = np.empty(g.n, dtype=np.uint8)
    indptr, indices = g.csr
    _advance(indptr, indices, state.bits.astype(np.uint8), out, u,
             params.p_inf, params.p_rec, params.alpha, vacc_from, state.round)
    return SisState(out, state.round + 1)


def _validate_schedule(schedule: Mapping[int, Iterable[int]], n: int, T: int):
    seen: set[int] = set()
    log = {}
    for r in sorted(schedule):
        if not 0 <= r <= T:
            raise ValueError(f"vaccination round {r} outside [0, {T}]")
        verts = frozenset(int(v) for v in schedule[r])
        for v in verts:
            if not 0 <= v < n:
                raise ValueError(f"vaccinated vertex {v} out of range")
        if seen & verts:
            raise ValueError(f"vertices {sorted(seen & verts)} vaccinated twice")
        seen |= verts
        log[r] = verts
    if len(seen) > n:
        raise ValueError("more vaccinations scheduled than vertices")
    return log


def simulate(
    g: Graph,
    params: SisParams,
    T: int,
    mode: str = ABSORBING,
    schedule: Mapping[int, Iterable[int]] | None = None,
    rng: np.random.Generator | None = None,
    initial: SisState | np.ndarray | None = None,
    thin: int = 1,
) -> Trajectory:
    """Run ``T`` rounds from a fresh seed (or from ``initial``).

    In restart mode an all-zero round is followed by a fresh product-Bernoulli
    draw; in absorbing mode the all-zero state persists.
    """
    if mode not in (ABSORBING, RESTART):
        raise ValueError(f"unknown mode {mode!r}")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    n = g.n
    log = _validate_schedule(schedule or {}, n, T)
    vacc_from = np.full(n, _NEVER, dtype=np.int64)
    for r, verts in log.items():
        vacc_from[list(verts)] = r

    if initial is None:
        start = seed_initial(params, n, rng).bits
    else:
        start = np.asarray(getattr(initial, "bits", initial), dtype=np.uint8).copy()
        if start.shape != (n,):
            raise ValueError("initial state length does not match graph")

    states = np.zeros((T + 1, n), dtype=np.uint8)
    restarted = np.zeros(T + 1, dtype=np.bool_)
    states[0] = start
    indptr, indices = g.csr
    restart = mode == RESTART
    chunk = max(1, _CHUNK_VALUES // max(2 * n, 1))
    t = 0
    while t < T:
        steps = min(chunk, T - t)
        draws = rng.random((steps, 2 * n))
        ran = _run_chunk(indptr, indices, states[t].copy(), t, draws, params.p_init,
                         params.p_inf, params.p_rec, params.alpha, vacc_from, restart,
                         states[t:t + steps + 1], restarted[t:t + steps + 1])
        if ran < steps:
            # absorbed: remaining rows are already zero
            break
        t += steps

    keep = np.arange(0, T + 1, thin)
    return Trajectory(
        states=states[keep],
        mode=mode,
        vaccination_log=log,
        restart_rounds=np.flatnonzero(restarted).tolist(),
        rounds=keep,
    )


def extinction_time(traj: Trajectory) -> int | None:
    if traj.mode != ABSORBING:
        raise ValueError("extinction time is only defined for absorbing trajectories")
    zero = np.flatnonzero(traj.infected_counts == 0)
    return int(traj.rounds[zero[0]]) if zero.size else None


def detect_metastability(
    traj: Trajectory | np.ndarray,
    window: int = 50,
    tol: float = 0.01,
) -> int | None:
    """Earliest round ``r >= window`` at which the infected proportion has settled.

    The trailing window ``(r - window, r]`` counts as settled when the means
    of its two halves differ by less than ``tol`` and the infection is
    present in every round of the window. Accepts a trajectory or a raw
    proportion series indexed by round.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    series = traj.proportions if isinstance(traj, Trajectory) else np.asarray(traj, float)
    if series.size <= window:
        return None
    view = np.lib.stride_tricks.sliding_window_view(series[1:], window)
    half = window // 2
    drift = np.abs(view[:, :half].mean(axis=1) - view[:, half:].mean(axis=1))
    ok = np.flatnonzero((drift < tol) & (view.min(axis=1) > 0))
    return int(ok[0] + window) if ok.size else None


def theoretical_infection_bound(params: SisParams, rho: float, n: int, t: int) -> float:
    """Upper bound on the expected infected count after ``t`` rounds."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return params.p_init * (1.0 - params.p_rec + params.p_inf * rho) ** t * n


# ---------------------------------------------------------------- export


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    restarts = set(traj.restart_rounds)
    counts = traj.infected_counts
    props = traj.proportions
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "infected_count", "proportion", "restart_flag"])
        for k, r in enumerate(traj.rounds):
            w.writerow([int(r), int(counts[k]), f"{props[k]:.6f}", int(r in restarts)])


def write_vaccination_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "vertex"])
        for r in sorted(traj.vaccination_log):
            for v in sorted(traj.vaccination_log[r]):
                w.writerow([r, v])
