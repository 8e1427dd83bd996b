"""Spectral radius minimization: choose at most K vertices to remove.

Exact solvers (tree-decomposition DP, tree DFS, exhaustive search), the
greedy heuristic, and the random / largest-degree / closed-walk baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .graph import Graph, is_tree, max_degree
from .spectral import spectral_radius
from .treedec import (
    FORGET, INTRODUCE, JOIN, LEAF, NiceTreeDecomposition, nice_decomposition, validate_nice,
)

GUARD = 1e-9
ETA = 1e-12
EXHAUSTIVE_CAP = 1_000_000


@dataclass
class VaccinationResult:
    removal: tuple[int, ...]
    achieved_rho: float
    solver: str
    rho_before: float
    epsilon: float | None = None
    feasibility_evals: int = 0
    width: int | None = None
    low: float | None = None
    high: float | None = None
    trace: list[tuple[float, bool]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.removal)

    def summary(self) -> str:
        width = "" if self.width is None else self.width
        return (f"solver={self.solver} k={self.k} rho_before={self.rho_before:.10g} "
                f"rho_after={self.achieved_rho:.10g} width={width}")


def _kept_mask(n: int, removal: Iterable[int]) -> np.ndarray:
    mask = np.ones(n, dtype=np.bool_)
    mask[list(removal)] = False
    return mask


def _result(g: Graph, removal: Iterable[int], solver: str, **kw) -> VaccinationResult:
    removal = tuple(sorted(int(v) for v in removal))
    return VaccinationResult(
        removal=removal,
        achieved_rho=spectral_radius(g, _kept_mask(g.n, removal)).value,
        solver=solver,
        rho_before=spectral_radius(g).value,
        **kw,
    )


def _check_budget(g: Graph, K: int) -> None:
    if K < 0:
        raise ValueError("budget must be nonnegative")
    if K > g.n:
        raise ValueError(f"budget K={K} exceeds vertex count n={g.n}")


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


# ---------------------------------------------------------------- DP tables


class _RadiusCache:
    """Memoized radius of induced subgraphs keyed by vertex bitmask."""

    def __init__(self, g: Graph):
        self.g = g
        self.memo: dict[int, float] = {}

    def __call__(self, keep: int) -> float:
        val = self.memo.get(keep)
        if val is None:
            mask = np.zeros(self.g.n, dtype=np.bool_)
            mask[_bits(keep)] = True
            val = self.memo[keep] = spectral_radius(self.g, mask).value
        return val


def _full_tables(g, ntd, K, lam, radius, representative, audit=None):
    """Families of removal sets per (node, kept bag subset, cost).

    ``audit(t, table)`` is called on every finished node table when given.
    """
    limit = lam + GUARD
    vt = [sum(1 << v for v in s) for s in ntd.subtree_vertices]
    tables: dict[int, dict[int, dict[int, set[int]]]] = {}

    def put(table, S, c, R):
        fam = table.setdefault(S, {}).setdefault(c, set())
        if representative and fam:
            # keep the set leaving the smallest radius inside the subtree
            (old,) = fam
            if (radius(here & ~R), R) < (radius(here & ~old), old):
                fam.clear()
                fam.add(R)
            return
        fam.add(R)

    for t in ntd.postorder:
        here = vt[t]
        kind = ntd.node_type[t]
        kids = ntd.children[t]
        table: dict[int, dict[int, set[int]]] = {}
        if kind == LEAF:
            put(table, 0, 0, 0)
        elif kind == INTRODUCE:
            v = 1 << ntd.vertex[t]
            for S, by_cost in tables.pop(kids[0]).items():
                for c, fam in by_cost.items():
                    for R in fam:
                        if c + 1 <= K:
                            put(table, S, c + 1, R | v)
                        if radius(vt[t] & ~R) <= limit:
                            put(table, S | v, c, R)
        elif kind == FORGET:
            w = 1 << ntd.vertex[t]
            for S, by_cost in tables.pop(kids[0]).items():
                for c, fam in by_cost.items():
                    for R in fam:
                        put(table, S & ~w, c, R)
        elif kind == JOIN:
            left, right = tables.pop(kids[0]), tables.pop(kids[1])
            for S, by_cost in left.items():
                other = right.get(S)
                if not other:
                    continue
                for c1, fam1 in by_cost.items():
                    for c2, fam2 in other.items():
                        for R1 in fam1:
                            for R2 in fam2:
                                R = R1 | R2
                                c = R.bit_count()
                                if c > K:
                                    continue
                                if radius(vt[t] & ~R) <= limit:
                                    put(table, S, c, R)
        if audit is not None:
            audit(t, table)
        tables[t] = table
    return tables[ntd.root]


class _Entry:
    __slots__ = ("c", "M", "R")

    def __init__(self, c, M, R):
        self.c, self.M, self.R = c, M, R


def _is_pd(M: np.ndarray) -> bool:
    if M.shape[0] == 0:
        return True
    if M.shape[0] == 1:
        return M[0, 0] > 0
    try:
        np.linalg.cholesky(M)
        return True
    except np.linalg.LinAlgError:
        return False


def _dominates(a: _Entry, b: _Entry) -> bool:
    if a.c > b.c:
        return False
    d = a.M - b.M
    if d.shape[0] == 0:
        return True
    if d.shape[0] == 1:
        return d[0, 0] >= -ETA
    return np.linalg.eigvalsh(d)[0] >= -ETA


class _Front:
    """Undominated entries of one DP state.

    Identical Schur complements are always merged (cheapest wins); with
    ``loewner`` set, full Loewner dominance pruning is applied as well.
    """

    __slots__ = ("entries", "loewner")

    def __init__(self, loewner: bool):
        self.entries: dict[bytes, _Entry] = {}
        self.loewner = loewner

    def add(self, e: _Entry) -> None:
        key = np.round(e.M, 9).tobytes()
        old = self.entries.get(key)
        if old is not None:
            if (e.c, e.R) < (old.c, old.R):
                self.entries[key] = e
            return
        if self.loewner:
            for f in self.entries.values():
                if _dominates(f, e):
                    return
            for k in [k for k, f in self.entries.items() if _dominates(e, f)]:
                del self.entries[k]
        self.entries[key] = e

    def __iter__(self):
        return iter(list(self.entries.values()))

    def __len__(self):
        return len(self.entries)


def _slack(M: np.ndarray) -> float:
    return np.linalg.eigvalsh(M)[0] if M.shape[0] else math.inf


def _trim(front: list[_Entry], beam: int) -> list[_Entry]:
    """Keep the ``beam`` entries with the most spectral slack at each cost."""
    by_cost: dict[int, list[_Entry]] = {}
    for e in front:
        by_cost.setdefault(e.c, []).append(e)
    out = []
    for c in sorted(by_cost):
        group = by_cost[c]
        if len(group) > beam:
            group = sorted(group, key=lambda e: (-_slack(e.M), e.R))[:beam]
        out.extend(group)
    return out


def _pareto_tables(g, ntd, K, lam, beam=None, loewner=False):
    """Exact DP over Schur complements of ``lam I - A``.

    For a partial solution at node ``t`` with kept bag vertices ``S`` and kept
    forgotten vertices ``F``, the future only sees the Schur complement
    ``M = (lam I - A)[S,S] - A[S,F] (lam I - A)[F,F]^{-1} A[F,S]``. The whole
    kept graph has radius below ``lam`` iff every pivot stays positive, so a
    partial solution is useless exactly when ``M`` is not positive definite,
    and one dominates another when it costs no more and its ``M`` is larger
    in the Loewner order.
    """
    lam = lam + GUARD
    A = g.dense
    tables: dict[int, dict[tuple[int, ...], list[_Entry]]] = {}
    for t in ntd.postorder:
        kind = ntd.node_type[t]
        kids = ntd.children[t]
        table: dict[tuple[int, ...], _Front] = {}

        def put(S, e):
            front = table.get(S)
            if front is None:
                front = table[S] = _Front(loewner)
            front.add(e)

        if kind == LEAF:
            put((), _Entry(0, np.zeros((0, 0)), 0))
        elif kind == INTRODUCE:
            v = ntd.vertex[t]
            for S, front in tables.pop(kids[0]).items():
                pos = sum(1 for s in S if s < v)
                S_new = S[:pos] + (v,) + S[pos:]
                b = -A[v, list(S)] if S else np.zeros(0)
                for e in front:
                    if e.c + 1 <= K:
                        put(S, _Entry(e.c + 1, e.M, e.R | 1 << v))
                    k = len(S)
                    M = np.empty((k + 1, k + 1))
                    M[:pos, :pos] = e.M[:pos, :pos]
                    M[:pos, pos + 1:] = e.M[:pos, pos:]
                    M[pos + 1:, :pos] = e.M[pos:, :pos]
                    M[pos + 1:, pos + 1:] = e.M[pos:, pos:]
                    M[pos, :pos] = M[:pos, pos] = b[:pos]
                    M[pos, pos + 1:] = M[pos + 1:, pos] = b[pos:]
                    M[pos, pos] = lam
                    if _is_pd(M):
                        put(S_new, _Entry(e.c, M, e.R))
        elif kind == FORGET:
            w = ntd.vertex[t]
            for S, front in tables.pop(kids[0]).items():
                if w not in S:
                    for e in front:
                        put(S, e)
                    continue
                pos = S.index(w)
                S_new = S[:pos] + S[pos + 1:]
                idx = [a for a in range(len(S)) if a != pos]
                for e in front:
                    col = e.M[idx, pos]
                    M = e.M[np.ix_(idx, idx)] - np.outer(col, col) / e.M[pos, pos]
                    put(S_new, _Entry(e.c, M, e.R))
        elif kind == JOIN:
            left, right = tables.pop(kids[0]), tables.pop(kids[1])
            bag_size = len(ntd.bags[t])
            for S, front1 in left.items():
                front2 = right.get(S)
                if not front2:
                    continue
                shared = bag_size - len(S)
                idx = list(S)
                base = lam * np.eye(len(S)) - A[np.ix_(idx, idx)]
                for e1 in front1:
                    for e2 in front2:
                        c = e1.c + e2.c - shared
                        if c > K:
                            continue
                        M = e1.M + e2.M - base
                        if _is_pd(M):
                            put(S, _Entry(c, M, e1.R | e2.R))
        tables[t] = {
            S: _trim(list(front), beam) if beam is not None else list(front)
            for S, front in table.items()
        }
    return tables[ntd.root]


DP_MODES = ("full", "pareto", "representative")


def dp_feasibility(
    g: Graph,
    ntd: NiceTreeDecomposition,
    K: int,
    lam: float,
    mode: str = "full",
    beam: int | None = None,
    validate: bool = True,
    _radius: _RadiusCache | None = None,
) -> tuple[bool, frozenset[int]]:
    """Is there a removal set of size at most ``K`` leaving radius at most ``lam``?

    ``full`` keeps every distinct removal set per state; ``pareto`` keeps
    one entry per distinct Schur complement (exact, and smaller on wide bags);
    ``representative`` keeps one set per state and may miss solutions.
    A ``beam`` caps each pareto front at that many entries per cost level
    (those with the most spectral slack); this trades exactness for speed
    on wide decompositions.
    """
    if mode not in DP_MODES:
        raise ValueError(f"unknown DP mode {mode!r}")
    if K < 0 or lam < 0:
        raise ValueError("need K >= 0 and lambda >= 0")
    if validate:
        report = validate_nice(g, ntd)
        if not report.ok:
            raise ValueError("invalid nice decomposition: " + "; ".join(report.violations))
    if beam is not None and beam < 1:
        raise ValueError("beam must be a positive integer")
    if mode == "pareto":
        root = _pareto_tables(g, ntd, K, lam, beam).get((), [])
        if not root:
            return False, frozenset()
        best = min(root, key=lambda e: (e.c, sorted(_bits(e.R))))
        return True, frozenset(_bits(best.R))
    radius = _radius or _RadiusCache(g)
    root = _full_tables(g, ntd, K, lam, radius, mode == "representative").get(0, {})
    for c in sorted(root):
        if root[c]:
            best = min(root[c], key=lambda R: sorted(_bits(R)))
            return True, frozenset(_bits(best))
    return False, frozenset()


def _binary_search(
    g: Graph,
    feasible: Callable[[float], tuple[bool, frozenset[int]]],
    high: float,
    epsilon: float,
) -> tuple[frozenset[int], float, float, list[tuple[float, bool]]]:
    """Smallest feasible radius up to ``epsilon``.

    ``high`` is tightened to the radius actually achieved by each feasible
    removal set, which keeps it feasible and shortens the search.
    """
    trace = []
    ok, best = feasible(high)
    trace.append((high, ok))
    if not ok:
        raise RuntimeError(f"upper bound {high} reported infeasible")
    high = min(high, spectral_radius(g, _kept_mask(g.n, best)).value)
    low = 0.0
    if high > 0:
        ok0, R0 = feasible(0.0)
        trace.append((0.0, ok0))
        if ok0:
            best, high = R0, 0.0
    while high - low > epsilon:
        mid = 0.5 * (low + high)
        ok, R = feasible(mid)
        trace.append((mid, ok))
        if ok:
            best = R
            high = min(mid, spectral_radius(g, _kept_mask(g.n, R)).value)
        else:
            low = mid
    return best, low, high, trace


def dp_vaccinate(
    g: Graph,
    K: int,
    epsilon: float = 1e-6,
    ntd: NiceTreeDecomposition | None = None,
    mode: str = "full",
    td_method: str = "min_fill",
    beam: int | None = None,
) -> VaccinationResult:
    """Binary search over ``[0, max degree]`` driven by the tree-decomposition DP."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_budget(g, K)
    if ntd is None:
        ntd = nice_decomposition(g, td_method)
    report = validate_nice(g, ntd)
    if not report.ok:
        raise ValueError("invalid nice decomposition: " + "; ".join(report.violations))
    if K == 0 or g.m == 0:
        return _result(g, (), "dp", epsilon=epsilon, width=ntd.width)
    radius = _RadiusCache(g)
    R, low, high, trace = _binary_search(
        g,
        lambda lam: dp_feasibility(g, ntd, K, lam, mode, beam, validate=False, _radius=radius),
        float(max_degree(g)),
        epsilon,
    )
    return _result(g, R, "dp", epsilon=epsilon, feasibility_evals=len(trace),
                   width=ntd.width, low=low, high=high, trace=trace)


# ---------------------------------------------------------------- trees


def _require_tree(t: Graph) -> None:
    if not is_tree(t):
        raise ValueError("input graph is not a tree")


def tree_feasibility(t: Graph, K: int, lam: float) -> tuple[bool, frozenset[int]]:
    """Post-order DFS from vertex 0 cutting a vertex as soon as its merged
    component exceeds ``lam``."""
    _require_tree(t)
    parent = [-1] * t.n
    order = []
    stack = [0]
    seen = [False] * t.n
    seen[0] = True
    while stack:
        u = stack.pop()
        order.append(u)
        for w in t.adjacency[u]:
            if not seen[w]:
                seen[w] = True
                parent[w] = u
                stack.append(w)
    comp: list[list[int]] = [[] for _ in range(t.n)]
    removed = []
    limit = lam + GUARD
    for u in reversed(order):
        merged = [u]
        for w in t.adjacency[u]:
            if w != parent[u]:
                merged.extend(comp[w])
                comp[w] = []
        if spectral_radius(t, merged).value > limit:
            removed.append(u)
            if len(removed) > K:
                return False, frozenset()
        else:
            comp[u] = merged
    return True, frozenset(removed)


def tree_vaccinate(t: Graph, K: int, epsilon: float = 1e-6) -> VaccinationResult:
    """Binary search over ``[0, sqrt(n - 1)]`` driven by :func:`tree_feasibility`."""
    _require_tree(t)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_budget(t, K)
    if K == 0 or t.m == 0:
        return _result(t, (), "tree", epsilon=epsilon, width=1 if t.m else 0)
    R, low, high, trace = _binary_search(
        t, lambda lam: tree_feasibility(t, K, lam), math.sqrt(t.n - 1), epsilon
    )
    return _result(t, R, "tree", epsilon=epsilon, feasibility_evals=len(trace),
                   width=1, low=low, high=high, trace=trace)


# ---------------------------------------------------------------- heuristics


def greedy_vaccinate(g: Graph, K: int, tie_tol: float = 1e-10) -> VaccinationResult:
    """Repeatedly remove the vertex whose removal lowers the radius most."""
    _check_budget(g, K)
    keep = np.ones(g.n, dtype=np.bool_)
    removed = []
    evals = 0
    for _ in range(K):
        best_v, best_val = -1, math.inf
        for v in np.flatnonzero(keep):
            keep[v] = False
            val = spectral_radius(g, keep).value
            keep[v] = True
            evals += 1
            if val < best_val - tie_tol:
                best_v, best_val = int(v), val
        keep[best_v] = False
        removed.append(best_v)
    return _result(g, removed, "greedy", feasibility_evals=evals)


def exhaustive_srm(g: Graph, K: int, cap: int = EXHAUSTIVE_CAP) -> VaccinationResult:
    """Optimal removal by scanning all subsets of size at most ``K``.

    Sizes ascend and subsets within a size are lexicographic, so ties go to
    the smallest, then lexicographically first, subset.
    """
    _check_budget(g, K)
    total = sum(math.comb(g.n, c) for c in range(K + 1))
    if total > cap:
        raise ValueError(f"exhaustive search needs {total} evaluations, cap is {cap}")
    keep = np.ones(g.n, dtype=np.bool_)
    best, best_val = (), spectral_radius(g, keep).value
    for c in range(1, K + 1):
        if best_val == 0.0:
            break
        for combo in combinations(range(g.n), c):
            keep[list(combo)] = False
            val = spectral_radius(g, keep).value
            keep[list(combo)] = True
            if val < best_val - 1e-12:
                best, best_val = combo, val
    return _result(g, best, "exhaustive", feasibility_evals=total)


def baseline_random(g: Graph, K: int, rng: np.random.Generator) -> VaccinationResult:
    _check_budget(g, K)
    return _result(g, rng.choice(g.n, size=K, replace=False).tolist(), "random")


def _top_k(scores: np.ndarray, K: int) -> list[int]:
    order = np.lexsort((np.arange(scores.size), -scores))
    return order[:K].tolist()


def baseline_largest_degree(g: Graph, K: int) -> VaccinationResult:
    _check_budget(g, K)
    return _result(g, _top_k(g.degrees, K), "ld")


def closed_walk_counts(g: Graph, walk_len: int = 6) -> np.ndarray:
    """Diagonal of ``A^walk_len`` via sparse products (walk_len even)."""
    if walk_len < 2 or walk_len % 2:
        raise ValueError("walk length must be an even number >= 2")
    if g.m == 0:
        return np.zeros(g.n, dtype=np.int64)
    u, v = np.array(g.sorted_edges()).T
    A = sp.coo_matrix(
        (np.ones(2 * g.m, dtype=np.int64), (np.r_[u, v], np.r_[v, u])), shape=(g.n, g.n)
    ).tocsr()
    half = A
    for _ in range(walk_len // 2 - 1):
        half = half @ A
    # (A^L)_ii = |row i of A^(L/2)|^2 since A is symmetric
    return np.asarray(half.multiply(half).sum(axis=1)).ravel().astype(np.int64)


def baseline_walk(g: Graph, K: int, walk_len: int = 6) -> VaccinationResult:
    _check_budget(g, K)
    return _result(g, _top_k(closed_walk_counts(g, walk_len), K), "gw")
