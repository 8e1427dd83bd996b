"""Dominant adjacency eigenvalue by shifted power iteration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

from .graph import Graph

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    iterations: int
    converged: bool
    tolerance: float


@numba.njit(cache=True)
def _component_radius(indptr, indices, keep, comp, local, tol, max_iter, perturb):
    size = comp.size
    x = np.ones(size)
    if perturb:
        x[0] += 1e-6
    x /= np.sqrt(np.dot(x, x))
    y = np.empty(size)
    rq_prev = -1.0
    delta_prev = -1.0
    for it in range(1, max_iter + 1):
        # y = (A + I) x restricted to the component
        for a in range(size):
            u = comp[a]
            acc = x[a]
            for p in range(indptr[u], indptr[u + 1]):
                w = indices[p]
                if keep[w]:
                    acc += x[local[w]]
            y[a] = acc
        rq = np.dot(x, y)
        norm = np.sqrt(np.dot(y, y))
        for a in range(size):
            x[a] = y[a] / norm
        if rq_prev >= 0.0:
            delta = abs(rq - rq_prev)
            # a-posteriori guard: with geometric contraction q the remaining
            # error is about delta / (1 - q)
            q = 0.0
            if delta_prev > 0.0:
                q = min(delta / delta_prev, 0.999999)
            if delta == 0.0 or delta < tol * (1.0 - q):
                return rq, it, True
            delta_prev = delta
        rq_prev = rq
    return rq_prev, max_iter, False


@numba.njit(cache=True)
def _masked_radius(indptr, indices, keep, tol, max_iter):
    n = keep.size
    comp_id = -np.ones(n, dtype=np.int64)
    local = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    best = 0.0
    total_iter = 0
    all_converged = True
    for s in range(n):
        if not keep[s] or comp_id[s] >= 0:
            continue
        head = 0
        tail = 1
        queue[0] = s
        comp_id[s] = s
        while head < tail:
            u = queue[head]
            head += 1
            for p in range(indptr[u], indptr[u + 1]):
                w = indices[p]
                if keep[w] and comp_id[w] < 0:
                    comp_id[w] = s
                    queue[tail] = w
                    tail += 1
        if tail == 1:
            continue
        if tail == 2:
            best = max(best, 1.0)
            continue
        comp = queue[:tail].copy()
        for a in range(tail):
            local[comp[a]] = a
        rq, its, ok = _component_radius(indptr, indices, keep, comp, local, tol, max_iter, False)
        total_iter += its
        if not ok:
            # all-ones start orthogonal to the Perron vector: perturb and retry once
            rq, its, ok = _component_radius(indptr, indices, keep, comp, local, tol, max_iter, True)
            total_iter += its
        all_converged = all_converged and ok
        best = max(best, rq - 1.0)
    return best, total_iter, all_converged


def _keep_mask(n: int, keep) -> np.ndarray:
    mask = np.zeros(n, dtype=np.bool_)
    if keep is None:
        mask[:] = True
    elif isinstance(keep, int):
        for v in range(n):
            if keep >> v & 1:
                mask[v] = True
    else:
        idx = np.fromiter(keep, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError("keep contains out-of-range vertex")
        mask[idx] = True
    return mask


def spectral_radius(
    g: Graph,
    keep: Iterable[int] | int | np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SpectralEstimate:
    """Largest adjacency eigenvalue of ``g`` induced on ``keep``.

    ``keep`` may be an iterable of vertices, a boolean mask, or an integer
    bitmask; ``None`` means all vertices. Each connected component is
    iterated separately on ``A + I`` from the all-ones vector and the
    maximum over components is returned.
    """
    if isinstance(keep, np.ndarray) and keep.dtype == np.bool_:
        mask = keep
    else:
        mask = _keep_mask(g.n, keep)
    if g.n == 0 or g.m == 0:
        return SpectralEstimate(0.0, 0, True, tol)
    indptr, indices = g.csr
    value, its, ok = _masked_radius(indptr, indices, mask, tol, max_iter)
    return SpectralEstimate(max(float(value), 0.0), int(its), bool(ok), tol)


def rho(g: Graph, keep=None) -> float:
    """Shorthand for ``spectral_radius(g, keep).value``."""
    return spectral_radius(g, keep).value
