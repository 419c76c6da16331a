"""Cyclic block coordinate descent for sparse Gaussian DAG estimation.

At a fixed regularization level lam the solver minimizes

    Q(Phi, R) = sum_j [ -n log rho_j + 0.5 ||rho_j x_j - X phi_j||^2 ]
                + sum_{i != j} penalty(|phi_ij|)

over states whose support is acyclic.  Each rho_j has the closed-form
minimizer (c + sqrt(c**2 + 4n)) / 2 with c = sum_i phi_ij <x_i, x_j>, and
each phi_kj is a thresholded univariate least-squares solution.  The two
coefficients {phi_kj, phi_jk} of a node pair are updated as a block: at
most one may be nonzero, a direction that would close a directed cycle is
forced to zero, and when both directions are admissible the one with the
smaller objective wins.

``fit_path`` repeats this over a decreasing grid of lambdas, warm-starting
each fit from the previous solution, starting from lam_0 = sqrt(n) (where
the empty graph is a stationary point) and halting once an estimate has
more than alpha * p edges.

All per-coordinate quantities are read from the cached p x p Gram matrix,
so a no-op block costs O(1) and an accepted update costs O(p).
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .model import Dataset, ReparamState, WeightedDag, to_dag
from .penalty import MCP, PenaltyConfig, penalty_value, threshold

logger = logging.getLogger("ccdr.solver")

# Absolute tolerance under which the two block candidates are considered
# tied; ties keep the direction already present, else point low -> high.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings shared across a regularization path.

    ``penalty`` is a template whose lam is replaced at every path point.
    ``max_iters`` bounds both the inner active-set sweeps and the outer
    active-set stabilization rounds; None resolves to max(ceil(sqrt(p)), 10)
    at fit time.  The path is n_lambda points linearly spaced from
    sqrt(n) down to sqrt(n) * lambda_min_ratio, and fitting halts once an
    estimate has more than alpha_threshold * p edges.
    """

    penalty: PenaltyConfig
    epsilon: float = 1e-4
    max_iters: int = None
    alpha_threshold: float = 3.0
    n_lambda: int = 20
    lambda_min_ratio: float = 0.05

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.alpha_threshold > 0:
            raise ValueError("alpha_threshold must be positive")
        if self.n_lambda < 1:
            raise ValueError("n_lambda must be at least 1")
        if not 0.0 < self.lambda_min_ratio < 1.0:
            raise ValueError("lambda_min_ratio must be in (0, 1)")

    def resolve_max_iters(self, p: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return max(math.ceil(math.sqrt(p)), 10)


@dataclass(frozen=True)
class PathPoint:
    """One estimate along the regularization path, with diagnostics."""

    lam: float
    estimate: WeightedDag
    reparam: ReparamState
    edge_count: int
    sweeps_used: int
    converged: bool
    objective: float
    seconds: float = 0.0

    def __post_init__(self):
        if self.edge_count != self.estimate.edge_count:
            raise ValueError("edge_count does not match the estimate support")


@dataclass(frozen=True)
class SolutionPath:
    """Ordered per-lambda estimates; lambdas strictly decreasing."""

    points: tuple
    halted_early: bool

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        lams = [pt.lam for pt in self.points]
        if any(later >= earlier for earlier, later in zip(lams, lams[1:])):
            raise ValueError("path lambdas must be strictly decreasing")


def _pair(k: int, j: int):
    return (k, j) if k < j else (j, k)


class _Workspace:
    """Mutable coordinate-descent state bound to one dataset.

    Maintains the sparse coefficient columns, the child adjacency used for
    cycle checks, and the running cache t[j, k] = sum_i phi_ij <x_i, x_k>,
    from which every single-parameter update is O(1).
    """

    def __init__(self, data: Dataset, state: ReparamState):
        if state.p != data.p:
            raise ValueError(f"state has p={state.p} but data has p={data.p}")
        p = data.p
        self.p = p
        self.n = data.n
        self.gram = data.gram
        self.gram_list = data.gram.tolist()
        self.rho = list(map(float, state.rho))
        self.parents = [{} for _ in range(p)]
        self.children = [set() for _ in range(p)]
        self.tcache = np.zeros((p, p))
        for (i, j), v in state.phi.items():
            self.parents[j][i] = v
            self.children[i].add(j)
            self.tcache[j] += v * self.gram[i]

    def to_state(self) -> ReparamState:
        phi = {}
        for j, col in enumerate(self.parents):
            for i, v in col.items():
                phi[(i, j)] = v
        return ReparamState(p=self.p, phi=phi, rho=np.array(self.rho))

    def active_pairs(self):
        return frozenset(
            _pair(i, j) for j, col in enumerate(self.parents) for i in col
        )

    def _set_phi(self, k: int, j: int, value: float) -> None:
        col = self.parents[j]
        old = col.get(k, 0.0)
        if value == old:
            return
        self.tcache[j] += (value - old) * self.gram[k]
        if value == 0.0:
            del col[k]
            self.children[k].discard(j)
        else:
            if old == 0.0:
                self.children[k].add(j)
            col[k] = value

    def _reaches(self, src: int, dst: int) -> bool:
        children = self.children
        stack = [src]
        seen = bytearray(self.p)
        seen[src] = 1
        while stack:
            for v in children[stack.pop()]:
                if v == dst:
                    return True
                if not seen[v]:
                    seen[v] = 1
                    stack.append(v)
        return False

    def _update_block(self, k: int, j: int, lam, lamgam, gam, shrink, is_mcp):
        """Jointly update {phi_kj, phi_jk}; returns the two coefficient changes."""
        col_j = self.parents[j]
        col_k = self.parents[k]
        old_kj = col_j.get(k, 0.0)
        old_jk = col_k.get(j, 0.0)
        g_jk = self.gram_list[j][k]
        bt1 = self.rho[j] * g_jk - self.tcache[j, k] + old_kj
        bt2 = self.rho[k] * g_jk - self.tcache[k, j] + old_jk

        a1 = -bt1 if bt1 < 0.0 else bt1
        if a1 <= lam:
            v1 = 0.0
        elif is_mcp:
            if a1 <= lamgam:
                v1 = (a1 - lam) / shrink
                if bt1 < 0.0:
                    v1 = -v1
            else:
                v1 = bt1
        else:
            v1 = a1 - lam if bt1 >= 0.0 else lam - a1

        a2 = -bt2 if bt2 < 0.0 else bt2
        if a2 <= lam:
            v2 = 0.0
        elif is_mcp:
            if a2 <= lamgam:
                v2 = (a2 - lam) / shrink
                if bt2 < 0.0:
                    v2 = -v2
            else:
                v2 = bt2
        else:
            v2 = a2 - lam if bt2 >= 0.0 else lam - a2

        if v1 == 0.0 and v2 == 0.0:
            # Both candidates vanish: the block empties in every case and
            # no acyclicity check is needed.
            new_kj = 0.0
            new_jk = 0.0
        else:
            # Decide the objective comparison first, then verify acyclicity
            # for the winner only.  At most one direction can ever be
            # cycle-inducing (both blocked would mean the current graph has
            # a cycle), so if the winner is blocked the loser stands, and a
            # direction whose edge already exists is never blocked.
            kj_present = old_kj != 0.0
            jk_present = old_jk != 0.0
            qa = 0.0 if v1 == 0.0 else v1 * (0.5 * v1 - bt1) + _penval(abs(v1), lam, lamgam, gam, is_mcp)
            qb = 0.0 if v2 == 0.0 else v2 * (0.5 * v2 - bt2) + _penval(abs(v2), lam, lamgam, gam, is_mcp)
            diff = qa - qb
            if diff < -_TIE_TOL:
                keep_kj = True
            elif diff > _TIE_TOL:
                keep_kj = False
            elif kj_present:
                keep_kj = True
            elif jk_present:
                keep_kj = False
            else:
                keep_kj = k < j
            if keep_kj:
                if v1 != 0.0 and not kj_present:
                    # searching j -> ... -> k must ignore a present j -> k edge
                    if jk_present:
                        self.children[j].discard(k)
                    if self._reaches(j, k):
                        keep_kj = False  # k -> j would close a cycle
                    if jk_present:
                        self.children[j].add(k)
            elif v2 != 0.0 and not jk_present:
                if kj_present:
                    self.children[k].discard(j)
                if self._reaches(k, j):
                    keep_kj = True  # j -> k would close a cycle
                if kj_present:
                    self.children[k].add(j)
            new_kj, new_jk = (v1, 0.0) if keep_kj else (0.0, v2)

        if new_kj != old_kj:
            self._set_phi(k, j, new_kj)
        if new_jk != old_jk:
            self._set_phi(j, k, new_jk)
        return abs(new_kj - old_kj), abs(new_jk - old_jk)

    def sweep(self, pen: PenaltyConfig, pairs=None, on_update=None) -> float:
        """One sweep: every rho_j, then every block; returns max |phi| change.

        ``pairs`` restricts the block stage to the given (k, j) pairs in
        sorted order; None sweeps all p(p-1)/2 blocks in lexicographic
        order.  ``on_update`` is called with a state snapshot after every
        single-parameter update (testing hook; disables the no-op screen
        so that every block position is visited explicitly).
        """
        tc = self.tcache
        rho = self.rho
        n4 = 4.0 * self.n
        for j in range(self.p):
            c = float(tc[j, j])
            rho[j] = 0.5 * (c + math.sqrt(c * c + n4))
            if on_update is not None:
                on_update(self.to_state())

        lam = pen.lam
        is_mcp = pen.family == MCP
        gam = pen.gamma if is_mcp else 0.0
        lamgam = lam * gam
        shrink = 1.0 - 1.0 / gam if is_mcp else 1.0
        if pairs is None and on_update is None:
            return self._sweep_blocks_screened(lam, lamgam, gam, shrink, is_mcp)
        if pairs is None:
            pairs = ((k, j) for k in range(self.p - 1) for j in range(k + 1, self.p))
        else:
            pairs = sorted(pairs)
        max_change = 0.0
        for k, j in pairs:
            d1, d2 = self._update_block(k, j, lam, lamgam, gam, shrink, is_mcp)
            if d1 > max_change:
                max_change = d1
            if d2 > max_change:
                max_change = d2
            if on_update is not None:
                on_update(self.to_state())
        return max_change

    def _sweep_blocks_screened(self, lam, lamgam, gam, shrink, is_mcp) -> float:
        """Full block stage with a vectorized no-op screen.

        A pair carrying no edge is a guaranteed no-op whenever both of its
        least-squares targets are at most lam, so whole rows of such blocks
        are skipped after two vector comparisons.  Processed blocks
        recompute their targets exactly, and the row screen for fixed k is
        refreshed whenever an edge into k changes (the only event that can
        move the remaining targets), so the result is identical to the
        unscreened lexicographic sweep.
        """
        p = self.p
        gram = self.gram
        tc = self.tcache
        rho_arr = np.asarray(self.rho)
        max_change = 0.0
        for k in range(p - 1):
            gcol = gram[k]
            cand = np.abs(rho_arr * gcol - tc[:, k]) > lam  # phi_kj targets
            cand |= np.abs(rho_arr[k] * gcol - tc[k]) > lam  # phi_jk targets
            js = set((np.nonzero(cand[k + 1 :])[0] + (k + 1)).tolist())
            js.update(j for j in self.children[k] if j > k)
            js.update(j for j in self.parents[k] if j > k)
            js = sorted(js)
            pos = 0
            while pos < len(js):
                j = js[pos]
                pos += 1
                d1, d2 = self._update_block(k, j, lam, lamgam, gam, shrink, is_mcp)
                if d1 > max_change:
                    max_change = d1
                if d2 > max_change:
                    max_change = d2
                if d2 != 0.0:
                    # an edge into k changed, which shifts the phi_jk
                    # targets of every later block in this row; rescreen
                    fresh = np.abs(rho_arr[k] * gcol - tc[k]) > lam
                    rest = set(js[pos:])
                    rest.update((np.nonzero(fresh[j + 1 :])[0] + (j + 1)).tolist())
                    js = js[:pos] + sorted(rest)
        return max_change

    def objective(self, pen: PenaltyConfig) -> float:
        """Penalized negative log-likelihood Q at the current state."""
        tc = self.tcache
        n = self.n
        total = 0.0
        pen_total = 0.0
        for j in range(self.p):
            r = self.rho[j]
            quad = r * r - 2.0 * r * tc[j, j]
            row = tc[j]
            for i, v in self.parents[j].items():
                quad += v * row[i]
                pen_total += penalty_value(abs(v), pen)
            total += -n * math.log(r) + 0.5 * quad
        return float(total + pen_total)

    def edge_count(self) -> int:
        return sum(len(col) for col in self.parents)


def _penval(a, lam, lamgam, gam, is_mcp):
    # Penalty at a = |v| >= 0 with the same branch layout as the threshold.
    if is_mcp:
        if a < lamgam:
            return lam * (a - a * a / (2.0 * lam * gam))
        return 0.5 * lam * lamgam
    return lam * a


def null_state(p: int, n: int) -> ReparamState:
    """Empty-graph state with every rho_j at its closed-form optimum sqrt(n)."""
    return ReparamState(p=p, phi={}, rho=np.full(p, math.sqrt(n)))


def phi_tilde(state: ReparamState, data: Dataset, k: int, j: int) -> float:
    """Univariate least-squares target for phi_kj at the current state.

    rho_j <x_j, x_k> - sum_{i != k} phi_ij <x_i, x_k>, read entirely from
    the cached Gram matrix; equals the O(n p) residual inner product
    sum_h x_hk r_kj^h.
    """
    if k == j:
        raise ValueError("k and j must be distinct")
    gram = data.gram
    acc = state.rho[j] * gram[j, k]
    for (i, jj), v in state.phi.items():
        if jj == j and i != k:
            acc -= v * gram[i, k]
    return float(acc)


def update_phi(state: ReparamState, data: Dataset, k: int, j: int, cfg: PenaltyConfig) -> float:
    """Minimizer of Q in phi_kj alone (acyclicity checked by the caller)."""
    return threshold(phi_tilde(state, data, k, j), cfg)


def update_rho(state: ReparamState, data: Dataset, j: int) -> float:
    """Closed-form minimizer of Q in rho_j: (c + sqrt(c**2 + 4n)) / 2."""
    gram = data.gram
    c = 0.0
    for (i, jj), v in state.phi.items():
        if jj == j:
            c += v * gram[i, j]
    return 0.5 * (c + math.sqrt(c * c + 4.0 * data.n))


def block_update(state: ReparamState, data: Dataset, k: int, j: int, cfg: PenaltyConfig) -> ReparamState:
    """Update the block {phi_kj, phi_jk}, preserving acyclicity and descent.

    A direction whose addition would close a directed cycle is forced to
    zero; otherwise the candidate with the smaller objective is kept, so
    at most one of the two coefficients is nonzero afterwards.
    """
    if k == j:
        raise ValueError("k and j must be distinct")
    ws = _Workspace(data, state)
    lam = cfg.lam
    is_mcp = cfg.family == MCP
    gam = cfg.gamma if is_mcp else 0.0
    ws._update_block(k, j, lam, lam * gam, gam, 1.0 - 1.0 / gam if is_mcp else 1.0, is_mcp)
    return ws.to_state()


def sweep(state: ReparamState, data: Dataset, cfg: PenaltyConfig, active=None, on_update=None):
    """One full or active-set sweep from ``state``.

    Updates every rho_j in index order, then the blocks (all p(p-1)/2 in
    lexicographic order, or the pairs in ``active``).  Returns the new
    state and the largest absolute phi change.
    """
    ws = _Workspace(data, state)
    pairs = None if active is None else [_pair(k, j) for k, j in active]
    max_change = ws.sweep(cfg, pairs, on_update)
    return ws.to_state(), max_change


def _fit_on_workspace(ws: _Workspace, pen: PenaltyConfig, epsilon: float, max_iters: int):
    """Algorithm core at one lambda: full sweep, active-set sweeps, repeat.

    Each round performs one full sweep to (re)identify the active set and
    then up to ``max_iters`` sweeps restricted to it.  Rounds stop when
    the active set no longer changes and the full sweep moved nothing by
    epsilon or more, or after ``max_iters`` rounds.
    """
    sweeps = 0
    converged = False
    previous_active = None
    for _ in range(max_iters):
        delta = ws.sweep(pen)
        sweeps += 1
        active = ws.active_pairs()
        if active == previous_active and delta < epsilon:
            converged = True
            break
        previous_active = active
        pairs = sorted(active)
        for _ in range(max_iters):
            sweeps += 1
            if ws.sweep(pen, pairs) < epsilon:
                break
    return sweeps, converged


def fit_single_lambda(init: ReparamState, data: Dataset, cfg: SolverConfig, lam: float) -> PathPoint:
    """Fit the penalized model at one regularization level.

    Parameters
    ----------
    init : ReparamState
        Starting point (warm start along a path, or ``null_state``).
    data : Dataset
        Normalized data with cached Gram matrix.
    cfg : SolverConfig
        Tolerances and penalty template; ``cfg.penalty`` supplies the
        family and gamma while ``lam`` is used as the level.
    lam : float
        Regularization level.

    Returns
    -------
    PathPoint with the estimate in both parametrizations, the edge count,
    sweep count, convergence flag, final objective and wall-clock seconds.
    """
    pen = cfg.penalty.with_lambda(lam)
    started = time.perf_counter()
    ws = _Workspace(data, init)
    sweeps, converged = _fit_on_workspace(ws, pen, cfg.epsilon, cfg.resolve_max_iters(data.p))
    state = ws.to_state()
    dag = to_dag(state)
    return PathPoint(
        lam=float(lam),
        estimate=dag,
        reparam=state,
        edge_count=dag.edge_count,
        sweeps_used=sweeps,
        converged=converged,
        objective=ws.objective(pen),
        seconds=time.perf_counter() - started,
    )


def lambda_grid(n: int, cfg: SolverConfig) -> np.ndarray:
    """Linear grid of n_lambda values from sqrt(n) down to sqrt(n) * ratio."""
    lam0 = math.sqrt(n)
    return np.linspace(lam0, lam0 * cfg.lambda_min_ratio, cfg.n_lambda)


def fit_path(data: Dataset, cfg: SolverConfig) -> SolutionPath:
    """Estimate the full regularization path on ``data``.

    Starts from the empty graph at lam_0 = sqrt(n), where the null model
    is stationary, and decreases lam on a linear grid, warm-starting every
    fit from the previous estimate.  Stops early once an estimate exceeds
    alpha_threshold * p edges (that estimate is kept and the path is
    flagged).  Every returned estimate is certified acyclic.
    """
    max_iters = cfg.resolve_max_iters(data.p)
    ws = _Workspace(data, null_state(data.p, data.n))
    points = []
    halted = False
    for lam in lambda_grid(data.n, cfg):
        pen = cfg.penalty.with_lambda(float(lam))
        started = time.perf_counter()
        sweeps, converged = _fit_on_workspace(ws, pen, cfg.epsilon, max_iters)
        seconds = time.perf_counter() - started
        state = ws.to_state()
        dag = to_dag(state)  # validates acyclicity of the returned support
        points.append(
            PathPoint(
                lam=float(lam),
                estimate=dag,
                reparam=state,
                edge_count=dag.edge_count,
                sweeps_used=sweeps,
                converged=converged,
                objective=ws.objective(pen),
                seconds=seconds,
            )
        )
        logger.debug(
            "lam=%.6g edges=%d sweeps=%d converged=%s %.3fs",
            lam, dag.edge_count, sweeps, converged, seconds,
        )
        if dag.edge_count > cfg.alpha_threshold * data.p:
            halted = True
            break
    return SolutionPath(points=tuple(points), halted_early=halted)
