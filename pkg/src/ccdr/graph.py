"""Directed-graph machinery and permutation/Cholesky decompositions.

The solver relies on two cheap primitives: a reachability query used to
decide whether adding a single edge would close a directed cycle, and a
topological sort used to certify estimates.  The remaining functions
factor a precision matrix into the weighted DAG compatible with a given
node permutation, which makes the full equivalence class of observationally
indistinguishable DAGs enumerable at small dimension.
"""

import itertools
from dataclasses import dataclass

import numpy as np

# Entries of a Cholesky factor at or below this size are treated as
# structural zeros when reading off edge supports.
_SUPPORT_TOL = 1e-10

# Relative pivot floor below which a matrix is declared not positive definite.
_PIVOT_TOL = 1e-12


class CycleError(ValueError):
    """A graph that must be acyclic contains a directed cycle."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " -> ".join(str(v) for v in self.cycle + self.cycle[:1])
        super().__init__(f"directed cycle: {path}")


class DirectedGraph:
    """Directed graph on nodes 0..p-1 stored as out-neighbour sets."""

    def __init__(self, p: int, edges=()):
        if p < 0:
            raise ValueError("p must be nonnegative")
        self.p = p
        self.adj = [set() for _ in range(p)]
        for i, j in edges:
            self.add_edge(i, j)

    def add_edge(self, i: int, j: int) -> None:
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        if not (0 <= i < self.p and 0 <= j < self.p):
            raise ValueError(f"edge ({i}, {j}) out of range for p={self.p}")
        self.adj[i].add(j)

    def remove_edge(self, i: int, j: int) -> None:
        self.adj[i].discard(j)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adj[i]

    def edges(self):
        for i in range(self.p):
            for j in self.adj[i]:
                yield (i, j)

    def edge_count(self) -> int:
        return sum(len(s) for s in self.adj)

    def copy(self) -> "DirectedGraph":
        g = DirectedGraph(self.p)
        g.adj = [set(s) for s in self.adj]
        return g


def _reaches(adj, src: int, dst: int) -> bool:
    """Depth-first search: is there a directed path src -> ... -> dst?"""
    stack = [src]
    seen = {src}
    while stack:
        for v in adj[stack.pop()]:
            if v == dst:
                return True
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def induces_cycle(g: DirectedGraph, k: int, j: int) -> bool:
    """Would adding the edge k -> j close a directed cycle in g?

    True exactly when j already reaches k.  The check is a fresh
    depth-first search per query; g is not modified.
    """
    if k == j:
        raise ValueError("k and j must be distinct")
    return _reaches(g.adj, j, k)


def topological_sort(g: DirectedGraph):
    """Return a node ordering with every edge pointing forward.

    Raises CycleError naming one directed cycle if g is cyclic.
    """
    p = g.p
    indeg = [0] * p
    for i in range(p):
        for j in g.adj[i]:
            indeg[j] += 1
    ready = [u for u in range(p) if indeg[u] == 0]
    order = []
    while ready:
        u = ready.pop()
        order.append(u)
        for v in g.adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if len(order) == p:
        return order
    raise CycleError(_find_cycle(g, {u for u in range(p) if indeg[u] > 0}))


def _find_cycle(g, remaining):
    # Every remaining node has a predecessor among the remaining nodes, so
    # walking backwards must revisit a node; that closes a cycle.  The list
    # `path` is kept in edge direction: path[0] -> path[1] -> ...
    start = min(remaining)
    path = [start]
    seen = {start}
    cur = start
    while True:
        pred = next(u for u in remaining if cur in g.adj[u])
        if pred in seen:
            return [pred] + path[: path.index(pred)]
        path.insert(0, pred)
        seen.add(pred)
        cur = pred


@dataclass(frozen=True)
class Permutation:
    """Bijection pi of {0..p-1}; permutes matrix rows and columns jointly."""

    pi: tuple

    def __post_init__(self):
        pi = tuple(int(v) for v in self.pi)
        if sorted(pi) != list(range(len(pi))):
            raise ValueError("pi is not a bijection of 0..p-1")
        object.__setattr__(self, "pi", pi)

    @property
    def p(self) -> int:
        return len(self.pi)

    def inverse(self) -> "Permutation":
        inv = [0] * self.p
        for i, v in enumerate(self.pi):
            inv[v] = i
        return Permutation(tuple(inv))

    def permute(self, a: np.ndarray) -> np.ndarray:
        """(P a)[r, c] = a[pi[r], pi[c]] for matrices; a[pi[r]] for vectors."""
        idx = np.asarray(self.pi)
        a = np.asarray(a)
        if a.ndim == 1:
            return a[idx]
        return a[np.ix_(idx, idx)]


def _ldl(a: np.ndarray):
    """Factor a symmetric positive definite a as L diag(d) L^T.

    L is unit lower triangular and d is positive.  Fails when a is not
    positive definite or a pivot falls below _PIVOT_TOL times the largest
    diagonal entry.
    """
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    d = np.diagonal(c) ** 2
    if d.size and np.min(d) < _PIVOT_TOL * np.max(np.diagonal(a)):
        raise ValueError("matrix is numerically not positive definite (tiny pivot)")
    return c / np.diagonal(c)[np.newaxis, :], d


def decompose_for_permutation(theta, pi: Permutation):
    """Factor a precision matrix into the unique DAG compatible with pi.

    Writes P_pi theta = (I - L) D^{-1} (I - L)^T with L strictly lower
    triangular and D diagonal, then maps (L, D) back through the inverse
    permutation.  The returned weighted DAG reproduces theta exactly (up
    to roundoff) and P_pi B is strictly lower triangular.
    """
    from .model import WeightedDag

    m = pi.permute(theta.theta)
    unit_lower, d = _ldl(m)
    strict = np.eye(pi.p) - unit_lower  # the permuted coefficient matrix
    omega2_perm = 1.0 / d

    tol = _SUPPORT_TOL * max(1.0, float(np.max(np.abs(strict))) if pi.p else 1.0)
    edges = {}
    order = pi.pi
    for r in range(pi.p):
        for c in range(r):
            v = strict[r, c]
            if abs(v) > tol:
                edges[(order[r], order[c])] = float(v)
    omega2 = np.empty(pi.p)
    omega2[list(order)] = omega2_perm
    return WeightedDag(p=pi.p, edges=edges, omega2=omega2)


def enumerate_equivalence_class(theta, max_p: int = 8):
    """All weighted DAGs producing the given precision matrix.

    Decomposes theta under every permutation of the nodes and deduplicates
    the results (identical support, weights and variances within 1e-9).
    Guarded to p <= max_p because the sweep is over p! permutations.
    """
    p = theta.theta.shape[0]
    if p > max_p:
        raise ValueError(f"equivalence class enumeration is limited to p <= {max_p}")
    by_support = {}
    out = []
    for perm in itertools.permutations(range(p)):
        dag = decompose_for_permutation(theta, Permutation(perm))
        key = frozenset(dag.edges)
        dup = False
        for seen in by_support.get(key, ()):
            if all(abs(seen.edges[e] - dag.edges[e]) <= 1e-9 for e in key) and np.all(
                np.abs(seen.omega2 - dag.omega2) <= 1e-9
            ):
                dup = True
                break
        if not dup:
            by_support.setdefault(key, []).append(dag)
            out.append(dag)
    return out


def permuted_cholesky_identity_check(theta, pi: Permutation) -> bool:
    """Verify P_pi A = (P_pi L)(P_pi D)(P_pi L)^T for A = L D L^T.

    Testing utility: the identity is what makes the per-permutation
    decomposition above well defined.  True when the two sides agree to
    1e-9 * max(1, ||P_pi A||_F) in Frobenius norm.
    """
    a = theta.theta
    unit_lower, d = _ldl(a)
    lhs = pi.permute(a)
    lp = pi.permute(unit_lower)
    rhs = (lp * pi.permute(d)[np.newaxis, :]) @ lp.T
    return float(np.linalg.norm(lhs - rhs)) <= 1e-9 * max(1.0, float(np.linalg.norm(lhs)))
