"""Graph structure learning from SIS infection states.

Neighbors of each vertex ``j`` are found in two passes over the observed
transitions: inclusion keeps every ``i`` whose direct influence on ``j``
reaches ``p_inf - kappa_mu``; exclusion then drops candidates whose
conditional influence, given the remaining candidates, falls below
``p_inf (1 - p_inf)^(delta - 1) - kappa_nu``.

Four knobs control behaviour on short data. Exclusion visits candidates
weakest first (ascending direct influence) so that early tests, which
condition on many vertices and see little data, fall mostly on
non-neighbors. A test whose best configuration has fewer than
``min_config_samples`` rounds on either side counts as failed. A candidate
is dropped only if its conditional influence stays below the cutoff after
adding ``exclusion_z`` standard errors (0 gives the plain comparison). An
edge is kept when both endpoints select each other (``edge_rule="and"``) or
when either does (``"or"``).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .sis import Trajectory

Edge = tuple[int, int]


class UndefinedEstimate(ValueError):
    """A conditional frequency was requested on an event never observed."""


@dataclass(frozen=True)
class InfluenceEstimate:
    value: float
    m_plus: int
    m_minus: int = 0


@dataclass(frozen=True)
class LearnConfig:
    p_inf: float
    delta_max: int
    kappa_mu: float = 0.01
    kappa_nu: float = 0.01
    min_samples: int = 20
    min_config_samples: int = 10
    order: str = "weakest_first"
    edge_rule: str = "and"
    exclusion_z: float = 1.0

    def __post_init__(self):
        if not 0 < self.p_inf <= 1:
            raise ValueError(f"p_inf must lie in (0, 1], got {self.p_inf}")
        if self.delta_max < 1:
            raise ValueError("delta_max must be >= 1")
        if self.kappa_mu <= 0 or self.kappa_nu <= 0:
            raise ValueError("thresholds must be positive")
        if self.min_samples < 1 or self.min_config_samples < 1:
            raise ValueError("sample minimums must be >= 1")
        if self.order not in ("weakest_first", "index"):
            raise ValueError(f"unknown exclusion order {self.order!r}")
        if self.edge_rule not in ("and", "or"):
            raise ValueError(f"unknown edge rule {self.edge_rule!r}")
        if self.exclusion_z < 0:
            raise ValueError("exclusion_z must be >= 0")
        if self.kappa_nu >= self.neighbor_floor / 2:
            warnings.warn(
                f"kappa_nu={self.kappa_nu} is not below half of "
                f"p_inf(1-p_inf)^(delta-1)={self.neighbor_floor:.4g}; "
                "neighbors and non-neighbors may not separate",
                stacklevel=2,
            )

    @property
    def neighbor_floor(self) -> float:
        """Smallest conditional influence a true neighbor can have."""
        return self.p_inf * (1.0 - self.p_inf) ** (self.delta_max - 1)


class TransitionDataset:
    """Consecutive state pairs ``(Y^t, Y^{t+1})`` of one trajectory."""

    def __init__(self, prev: np.ndarray, nxt: np.ndarray):
        prev = np.asarray(prev, dtype=np.uint8)
        nxt = np.asarray(nxt, dtype=np.uint8)
        if prev.shape != nxt.shape or prev.ndim != 2:
            raise ValueError("prev and next must be equally shaped 2-d arrays")
        self.prev = prev
        self.next = nxt
        self._susceptible: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_states(cls, states: np.ndarray) -> "TransitionDataset":
        states = np.asarray(states, dtype=np.uint8)
        return cls(states[:-1], states[1:])

    @classmethod
    def from_trajectory(
        cls,
        traj: Trajectory,
        rounds: int | None = None,
        burn_in: int = 250,
        include_restarts: bool = False,
    ) -> "TransitionDataset":
        """Pairs from the first ``rounds`` rounds, skipping a burn-in prefix.

        The burn-in is capped at half the available rounds so that short
        learning windows keep data. Pairs whose successor is a restart reseed
        are dropped unless ``include_restarts``: they follow the seeding law,
        not the infection dynamics, and bias conditional influences.
        """
        if len(traj.rounds) > 1 and traj.rounds[1] - traj.rounds[0] != 1:
            raise ValueError("learning needs an unthinned trajectory")
        last = len(traj.states) - 1 if rounds is None else min(rounds, len(traj.states) - 1)
        skip = min(burn_in, last // 2)
        states = np.asarray(traj.states[skip:last + 1], dtype=np.uint8)
        keep = np.ones(max(len(states) - 1, 0), dtype=bool)
        if not include_restarts:
            for r in traj.restart_rounds:
                if skip < r <= last:
                    keep[r - skip - 1] = False
        return cls(states[:-1][keep], states[1:][keep])

    @property
    def n(self) -> int:
        return self.prev.shape[1]

    def __len__(self) -> int:
        return self.prev.shape[0]

    def susceptible_view(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """States at rounds where ``j`` is susceptible, and ``j``'s next state."""
        if j not in self._susceptible:
            rows = self.prev[:, j] == 0
            self._susceptible[j] = (self.prev[rows], self.next[rows, j])
        return self._susceptible[j]


# ---------------------------------------------------------------- estimators


def estimate_direct_influence(d: TransitionDataset, j: int, i: int) -> InfluenceEstimate:
    if i == j:
        raise ValueError("direct influence needs i != j")
    x, y = d.susceptible_view(j)
    on = x[:, i] == 1
    m_plus = int(on.sum())
    if m_plus == 0:
        raise UndefinedEstimate(f"no round with {j} susceptible and {i} infected")
    return InfluenceEstimate(float(y[on].sum()) / m_plus, m_plus)


def _config_codes(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lexicographically sorted distinct rows of ``block`` and row -> config index."""
    if block.shape[1] == 0:
        return np.zeros((1, 0), dtype=np.uint8), np.zeros(block.shape[0], dtype=np.int64)
    if block.shape[1] <= 62:
        weights = np.left_shift(1, np.arange(block.shape[1] - 1, -1, -1, dtype=np.int64))
        codes = block.astype(np.int64) @ weights
        uniq, inverse = np.unique(codes, return_inverse=True)
        configs = ((uniq[:, None] & weights[None, :]) > 0).astype(np.uint8)
        return configs, inverse
    configs, inverse = np.unique(block, axis=0, return_inverse=True)
    return configs, inverse.ravel()


def best_configuration(
    d: TransitionDataset, j: int, i: int, S: Iterable[int]
) -> tuple[dict[int, int], int, int]:
    """Most data-rich assignment of ``S - {i}`` for contrasting ``i`` on ``j``.

    Maximizes ``min(#(j=0, i=1, psi), #(j=0, i=0, psi))`` over observed
    assignments; ties go to the lexicographically smallest bit string over
    ascending vertex ids.
    """
    S = set(S)
    if i not in S or j in S:
        raise ValueError("need i in S and j not in S")
    rest = sorted(S - {i})
    x, _ = d.susceptible_view(j)
    configs, inverse = _config_codes(x[:, rest])
    xi = x[:, i].astype(bool)
    plus = np.bincount(inverse[xi], minlength=len(configs))
    minus = np.bincount(inverse[~xi], minlength=len(configs))
    score = np.minimum(plus, minus)
    best = int(np.argmax(score))
    if score[best] == 0:
        raise UndefinedEstimate(f"no usable configuration for ({j}, {i})")
    psi = {v: int(b) for v, b in zip(rest, configs[best])}
    return psi, int(plus[best]), int(minus[best])


def estimate_conditional_influence(
    d: TransitionDataset, j: int, i: int, S: Iterable[int], psi: dict[int, int]
) -> InfluenceEstimate:
    S = set(S)
    if i not in S or j in S:
        raise ValueError("need i in S and j not in S")
    rest = sorted(S - {i})
    if set(psi) != set(rest):
        raise ValueError("psi must assign exactly the vertices of S - {i}")
    x, y = d.susceptible_view(j)
    match = np.ones(len(x), dtype=bool)
    for v in rest:
        match &= x[:, v] == psi[v]
    on = match & (x[:, i] == 1)
    off = match & (x[:, i] == 0)
    m_plus, m_minus = int(on.sum()), int(off.sum())
    if m_plus == 0 or m_minus == 0:
        raise UndefinedEstimate(f"conditional influence of {i} on {j} not estimable")
    value = y[on].sum() / m_plus - y[off].sum() / m_minus
    return InfluenceEstimate(float(value), m_plus, m_minus)


def estimate_recovery_probability(d: TransitionDataset) -> float:
    infected = d.prev == 1
    total = int(infected.sum())
    if total == 0:
        raise UndefinedEstimate("no infected vertex-rounds")
    return float((infected & (d.next == 0)).sum()) / total


# ---------------------------------------------------------------- learner


@dataclass
class LearnTrace:
    """Per-candidate diagnostics collected by :func:`sis_learn`."""

    inclusion: list[tuple[int, int, float, int, bool]] = field(default_factory=list)
    exclusion: list[tuple[int, int, float, int, int, bool, str]] = field(default_factory=list)

    def write_inclusion_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "i", "mu_hat", "m_plus", "included"])
            for j, i, mu, m, inc in self.inclusion:
                w.writerow([j, i, f"{mu:.6f}", m, int(inc)])

    def write_exclusion_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "i", "nu_hat", "m_plus", "m_minus", "excluded", "note"])
            for j, i, nu, mp, mm, exc, note in self.exclusion:
                w.writerow([j, i, "" if np.isnan(nu) else f"{nu:.6f}", mp, mm, int(exc), note])


def learn_neighbors(
    d: TransitionDataset, j: int, cfg: LearnConfig, trace: LearnTrace | None = None
) -> list[int]:
    x, y = d.susceptible_view(j)
    m_plus = x.sum(axis=0, dtype=np.int64)
    hits = (x.astype(np.int64) * y[:, None]).sum(axis=0)
    mu = np.full(d.n, np.nan)
    np.divide(hits, m_plus, out=mu, where=m_plus > 0)
    candidates = []
    for i in range(d.n):
        if i == j:
            continue
        included = bool(m_plus[i] >= cfg.min_samples and mu[i] >= cfg.p_inf - cfg.kappa_mu)
        if trace is not None:
            trace.inclusion.append((j, i, float(mu[i]), int(m_plus[i]), included))
        if included:
            candidates.append(i)
    if cfg.order == "weakest_first":
        candidates.sort(key=lambda i: (mu[i], i))

    S = set(candidates)
    cutoff = cfg.neighbor_floor - cfg.kappa_nu
    for i in candidates:
        try:
            psi, mp, mm = best_configuration(d, j, i, S)
        except UndefinedEstimate:
            S.discard(i)
            if trace is not None:
                trace.exclusion.append((j, i, float("nan"), 0, 0, True, "no usable configuration"))
            continue
        nu = estimate_conditional_influence(d, j, i, S, psi).value
        sparse = min(mp, mm) < cfg.min_config_samples
        # worst-case Bernoulli standard error of a difference of two means
        se = 0.5 * np.sqrt(1.0 / mp + 1.0 / mm)
        excluded = sparse or nu + cfg.exclusion_z * se < cutoff
        if excluded:
            S.discard(i)
        if trace is not None:
            trace.exclusion.append((j, i, nu, mp, mm, excluded, "too few samples" if sparse else ""))
    return sorted(S)


def sis_learn(
    d: TransitionDataset, cfg: LearnConfig, trace: LearnTrace | None = None
) -> set[Edge]:
    """Learned undirected edge set, symmetrized by ``cfg.edge_rule``."""
    chosen = {j: set(learn_neighbors(d, j, cfg, trace)) for j in range(d.n)}
    edges: set[Edge] = set()
    for j, nbrs in chosen.items():
        for i in nbrs:
            if cfg.edge_rule == "or" or j in chosen[i]:
                edges.add((min(i, j), max(i, j)))
    return edges


def f1_score(learned: Iterable[Edge], truth: Iterable[Edge]) -> float:
    learned = {(min(e), max(e)) for e in learned}
    truth = {(min(e), max(e)) for e in truth}
    if not learned and not truth:
        return 1.0
    if not learned or not truth:
        return 0.0
    hit = len(learned & truth)
    if hit == 0:
        return 0.0
    precision = hit / len(learned)
    recall = hit / len(truth)
    return 2 * precision * recall / (precision + recall)
