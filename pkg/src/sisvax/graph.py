"""Undirected simple graphs, edge-list I/O and random generators."""

from __future__ import annotations

from collections import deque
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphFormatError(ValueError):
    """Raised when an edge-list file cannot be parsed."""


class Graph:
    """Immutable undirected simple graph on vertices ``0..n-1``."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise ValueError(f"vertex count must be nonnegative, got {n}")
        normalized = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            normalized.add((u, v) if u < v else (v, u))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in normalized:
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.n = n
        self.edges = frozenset(normalized)
        self.adjacency = tuple(tuple(sorted(a)) for a in nbrs)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={len(self.edges)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` of the symmetric adjacency structure."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degrees)
        indices = np.fromiter(
            (v for a in self.adjacency for v in a), dtype=np.int64, count=2 * self.m
        )
        return indptr, indices

    @cached_property
    def dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    @cached_property
    def neighbor_masks(self) -> tuple[int, ...]:
        """Per-vertex neighborhoods as integer bitmasks."""
        return tuple(sum(1 << v for v in a) for a in self.adjacency)

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def max_degree(g: Graph) -> int:
    return int(g.degrees.max()) if g.n else 0


def induced_subgraph(g: Graph, keep: Iterable[int]) -> tuple[Graph, dict[int, int]]:
    """Subgraph induced on ``keep`` with vertices relabeled ``0..|keep|-1``.

    Returns the subgraph and the old->new vertex mapping (ascending order of
    old ids is preserved).
    """
    keep = sorted(set(keep))
    for v in keep:
        if not 0 <= v < g.n:
            raise ValueError(f"vertex {v} out of range for n={g.n}")
    mapping = {old: new for new, old in enumerate(keep)}
    edges = [(mapping[u], mapping[v]) for u, v in g.edges if u in mapping and v in mapping]
    return Graph(len(keep), edges), mapping


def connected_components(g: Graph, keep: Iterable[int] | None = None) -> list[list[int]]:
    """Connected components (sorted vertex lists, ordered by smallest member)."""
    allowed = None if keep is None else set(keep)
    seen = set()
    comps = []
    order = range(g.n) if allowed is None else sorted(allowed)
    for s in order:
        if s in seen:
            continue
        seen.add(s)
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.adjacency[u]:
                if w not in seen and (allowed is None or w in allowed):
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return g.n <= 1 or len(connected_components(g)) == 1


def is_tree(g: Graph) -> bool:
    return g.n >= 1 and g.m == g.n - 1 and is_connected(g)


# ---------------------------------------------------------------- edge lists


def load_edge_list(path: str | Path) -> Graph:
    """Read the whitespace-separated edge-list format.

    An optional first line ``n <count>`` fixes the vertex count; otherwise it
    is one more than the largest id seen. ``#`` lines are comments.
    """
    text = Path(path).read_text()
    n_header = None
    edges = []
    max_id = -1
    seen_content = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if not seen_content and tokens[0] == "n":
            seen_content = True
            if len(tokens) != 2:
                raise GraphFormatError(f"line {lineno}: malformed header {line!r}")
            try:
                n_header = int(tokens[1])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad vertex count {tokens[1]!r}") from None
            if n_header < 0:
                raise GraphFormatError(f"line {lineno}: negative vertex count")
            continue
        seen_content = True
        if len(tokens) != 2:
            raise GraphFormatError(f"line {lineno}: expected two vertex ids, got {line!r}")
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer vertex id in {line!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"line {lineno}: negative vertex id")
        if u == v:
            raise GraphFormatError(f"line {lineno}: self-loop at vertex {u}")
        edges.append((u, v))
        max_id = max(max_id, u, v)
    n = max_id + 1 if n_header is None else n_header
    if max_id >= n:
        raise GraphFormatError(f"vertex id {max_id} exceeds header count n={n}")
    return Graph(n, edges)


def save_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"n {g.n}"] + [f"{u} {v}" for u, v in g.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- generators


def complete_graph(n: int) -> Graph:
    return Graph(n, ((u, v) for u in range(n) for v in range(u + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, ((i, i + 1) for i in range(n - 1)))


def star_graph(leaves: int) -> Graph:
    """Star with center 0 and ``leaves`` leaves."""
    return Graph(leaves + 1, ((0, i) for i in range(1, leaves + 1)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, ((i, (i + 1) % n) for i in range(n)))


def generate_er(n: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    pick = rng.random(iu.size) < p
    return Graph(n, zip(iu[pick].tolist(), ju[pick].tolist()))


def generate_er_connected(
    n: int, p: float, rng: np.random.Generator, max_attempts: int = 1000
) -> Graph:
    """Erdos-Renyi G(n, p) resampled until connected."""
    if not 0 < p <= 1:
        raise ValueError(f"edge probability must be in (0, 1], got {p}")
    for _ in range(max_attempts):
        g = generate_er(n, p, rng)
        if is_connected(g):
            return g
    raise RuntimeError(
        f"no connected G(n={n}, p={p}) sample within {max_attempts} attempts"
    )


def augment_graph(g: Graph, add_prob: float, rng: np.random.Generator) -> Graph:
    """Add every non-edge independently with probability ``add_prob``."""
    if not 0 <= add_prob <= 1:
        raise ValueError(f"add_prob must be in [0, 1], got {add_prob}")
    iu, ju = np.triu_indices(g.n, k=1)
    draws = rng.random(iu.size) < add_prob
    added = [
        (u, v) for u, v, d in zip(iu.tolist(), ju.tolist(), draws.tolist())
        if d and (u, v) not in g.edges
    ]
    return Graph(g.n, list(g.edges) + added)


def generate_partial_ktree(
    n: int, k: int, keep_prob: float, rng: np.random.Generator
) -> Graph:
    """Random k-tree on n vertices with each edge kept w.p. ``keep_prob``.

    Treewidth of the result is at most ``k``.
    """
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}, n={n}")
    edges = [(u, v) for u in range(k + 1) for v in range(u + 1, k + 1)]
    # k-cliques available for attachment
    cliques = [tuple(c for c in range(k + 1) if c != drop) for drop in range(k + 1)]
    for v in range(k + 1, n):
        base = cliques[int(rng.integers(len(cliques)))]
        edges.extend((u, v) for u in base)
        for drop in base:
            cliques.append(tuple(sorted(set(base) - {drop} | {v})))
    if keep_prob < 1:
        mask = rng.random(len(edges)) < keep_prob
        edges = [e for e, keep in zip(edges, mask) if keep]
    return Graph(n, edges)


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    """Random recursive tree (a partial 1-tree with all edges kept)."""
    return generate_partial_ktree(n, 1, 1.0, rng) if n > 1 else Graph(n)
