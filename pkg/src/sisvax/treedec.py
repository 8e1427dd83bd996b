"""Tree decompositions from elimination orderings and their nice form."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .graph import Graph

LEAF = "leaf"
INTRODUCE = "introduce"
FORGET = "forget"
JOIN = "join"


@dataclass(frozen=True)
class TreeDecomposition:
    """Rooted tree of bags; ``parent[root]`` is ``None``."""

    bags: tuple[frozenset[int], ...]
    parent: tuple[int | None, ...]

    @property
    def root(self) -> int:
        return next(i for i, p in enumerate(self.parent) if p is None)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.bags]
        for node, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(node)
        return tuple(tuple(k) for k in kids)

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def __len__(self) -> int:
        return len(self.bags)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class NiceTreeDecomposition(TreeDecomposition):
    """Nice decomposition; ``vertex[t]`` is the introduced/forgotten vertex."""

    node_type: tuple[str, ...] = ()
    vertex: tuple[int | None, ...] = ()

    @cached_property
    def postorder(self) -> tuple[int, ...]:
        order = []
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            stack.append((node, True))
            for c in reversed(self.children[node]):
                stack.append((c, False))
        return tuple(order)

    @cached_property
    def subtree_vertices(self) -> tuple[frozenset[int], ...]:
        vt: list[frozenset[int]] = [frozenset()] * len(self.bags)
        for t in self.postorder:
            acc = set(self.bags[t])
            for c in self.children[t]:
                acc |= vt[c]
            vt[t] = frozenset(acc)
        return tuple(vt)


# ---------------------------------------------------------------- construction


def elimination_ordering(g: Graph, method: str = "min_fill") -> list[int]:
    """Greedy elimination order; ties go to the smallest vertex id."""
    if method not in ("min_fill", "min_degree"):
        raise ValueError(f"unknown method {method!r}")
    nbrs = [set(a) for a in g.adjacency]
    alive = set(range(g.n))
    order = []
    while alive:
        best, best_score = -1, None
        for v in sorted(alive):
            if method == "min_degree":
                score = len(nbrs[v])
            else:
                nv = sorted(nbrs[v])
                score = sum(
                    1 for a in range(len(nv)) for b in range(a + 1, len(nv))
                    if nv[b] not in nbrs[nv[a]]
                )
            if best_score is None or score < best_score:
                best, best_score = v, score
                if score == 0:
                    break
        nv = nbrs[best]
        for a in nv:
            nbrs[a] |= nv - {a}
            nbrs[a].discard(best)
        order.append(best)
        alive.remove(best)
        nbrs[best] = set()
    return order


def decomposition_from_ordering(g: Graph, order: list[int]) -> TreeDecomposition:
    if sorted(order) != list(range(g.n)):
        raise ValueError("ordering must be a permutation of the vertices")
    if g.n == 0:
        return TreeDecomposition((frozenset(),), (None,))
    pos = {v: k for k, v in enumerate(order)}
    nbrs = [set(a) for a in g.adjacency]
    bags = []
    for v in order:
        later = {u for u in nbrs[v] if pos[u] > pos[v]}
        for a in later:
            nbrs[a] |= later - {a}
        bags.append(frozenset(later | {v}))
    parent: list[int | None] = []
    for k, v in enumerate(order):
        later = bags[k] - {v}
        if later:
            parent.append(min(pos[u] for u in later))
        elif k + 1 < len(order):
            # separate component: hang it under the next bag
            parent.append(k + 1)
        else:
            parent.append(None)
    return TreeDecomposition(tuple(bags), tuple(parent))


def tree_decomposition(g: Graph, method: str = "min_fill") -> TreeDecomposition:
    """Decomposition induced by a min-fill or min-degree elimination ordering."""
    return decomposition_from_ordering(g, elimination_ordering(g, method))


def validate_decomposition(g: Graph, td: TreeDecomposition) -> ValidationReport:
    report = ValidationReport()
    roots = [i for i, p in enumerate(td.parent) if p is None]
    if len(roots) != 1:
        report.violations.append(f"expected one root, found {len(roots)}")
        return report
    # every node must reach the root without cycling
    for node in range(len(td.bags)):
        seen = set()
        cur = node
        while cur is not None:
            if cur in seen:
                report.violations.append(f"cycle through node {node}")
                return report
            seen.add(cur)
            cur = td.parent[cur]

    covered = set().union(*td.bags) if td.bags else set()
    missing = set(range(g.n)) - covered
    if missing:
        report.violations.append(f"vertices not in any bag: {sorted(missing)}")
    extra = covered - set(range(g.n))
    if extra:
        report.violations.append(f"bags mention unknown vertices: {sorted(extra)}")
    for u, v in g.sorted_edges():
        if not any(u in b and v in b for b in td.bags):
            report.violations.append(f"edge ({u}, {v}) not contained in any bag")
    for v in sorted(covered):
        holders = {i for i, b in enumerate(td.bags) if v in b}
        # connected iff exactly one holder has its parent outside the set
        tops = [i for i in holders if td.parent[i] is None or td.parent[i] not in holders]
        if len(tops) != 1:
            report.violations.append(f"occurrences of vertex {v} are disconnected")
    return report


def validate_nice(g: Graph, ntd: NiceTreeDecomposition) -> ValidationReport:
    report = validate_decomposition(g, ntd)
    if not report.ok:
        return report
    if ntd.bags[ntd.root]:
        report.violations.append("root bag is not empty")
    for t, kind in enumerate(ntd.node_type):
        kids = ntd.children[t]
        bag = ntd.bags[t]
        if kind == LEAF:
            if kids or bag:
                report.violations.append(f"leaf {t} must be childless with an empty bag")
        elif kind in (INTRODUCE, FORGET):
            if len(kids) != 1:
                report.violations.append(f"{kind} node {t} needs exactly one child")
                continue
            child = ntd.bags[kids[0]]
            v = ntd.vertex[t]
            expect = child | {v} if kind == INTRODUCE else child - {v}
            present = v not in child if kind == INTRODUCE else v in child
            if not present or bag != expect:
                report.violations.append(f"{kind} node {t} does not change exactly vertex {v}")
        elif kind == JOIN:
            if len(kids) != 2 or any(ntd.bags[c] != bag for c in kids):
                report.violations.append(f"join node {t} needs two children with equal bags")
        else:
            report.violations.append(f"node {t} has unknown type {kind!r}")
    return report


class _Builder:
    def __init__(self):
        self.bags: list[frozenset[int]] = []
        self.parent: list[int | None] = []
        self.kind: list[str] = []
        self.vertex: list[int | None] = []

    def add(self, kind: str, bag: frozenset[int], children: Iterable[int], v=None) -> int:
        t = len(self.bags)
        self.bags.append(bag)
        self.parent.append(None)
        self.kind.append(kind)
        self.vertex.append(v)
        for c in children:
            self.parent[c] = t
        return t

    def morph(self, node: int, target: frozenset[int]) -> int:
        """Chain forgets then introduces from ``node``'s bag to ``target``."""
        bag = self.bags[node]
        for w in sorted(bag - target):
            bag = bag - {w}
            node = self.add(FORGET, bag, [node], w)
        for v in sorted(target - bag):
            bag = bag | {v}
            node = self.add(INTRODUCE, bag, [node], v)
        return node


def make_nice(td: TreeDecomposition) -> NiceTreeDecomposition:
    """Nice form of equal width with an empty root bag."""
    b = _Builder()
    top: dict[int, int] = {}
    order = []
    stack = [td.root]
    while stack:
        t = stack.pop()
        order.append(t)
        stack.extend(td.children[t])
    for t in reversed(order):
        bag = td.bags[t]
        branches = [b.morph(top[c], bag) for c in td.children[t]]
        if not branches:
            branches = [b.morph(b.add(LEAF, frozenset(), []), bag)]
        node = branches[0]
        for other in branches[1:]:
            node = b.add(JOIN, bag, [node, other])
        top[t] = node
    root = b.morph(top[td.root], frozenset())
    assert b.parent[root] is None
    return NiceTreeDecomposition(
        tuple(b.bags), tuple(b.parent), node_type=tuple(b.kind), vertex=tuple(b.vertex)
    )


def nice_decomposition(g: Graph, method: str = "min_fill") -> NiceTreeDecomposition:
    return make_nice(tree_decomposition(g, method))
