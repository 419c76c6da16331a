"""Gaussian DAG models and their likelihoods.

A model is a weighted directed acyclic graph: coefficients beta_ij on edges
i -> j together with per-node noise variances omega_j**2, describing the
linear structural equations

    X_j = sum_i beta_ij X_i + eps_j,    eps_j ~ N(0, omega_j**2).

Two parametrizations are carried side by side.  ``WeightedDag`` holds
(B, Omega) directly; ``ReparamState`` holds the rescaled variables
rho_j = 1/omega_j and phi_ij = beta_ij/omega_j, under which the negative
log-likelihood is jointly convex and coordinate descent has closed-form
updates.  Both map to the same precision matrix, so likelihoods agree
across parametrizations.

All likelihood values drop the additive (n*p/2)*log(2*pi) constant; only
differences of these values are ever meaningful.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import graph as graphlib


class DegenerateDataError(ValueError):
    """A data column is constant (zero norm after centering)."""


def _column_map(mapping, p):
    """Split a sparse (i, j) -> value map into per-child parent dicts."""
    cols = [{} for _ in range(p)]
    for (i, j), v in mapping.items():
        cols[j][i] = v
    return cols


def _validate_sparse(p, mapping, name):
    out = {}
    for key, v in mapping.items():
        i, j = key
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"{name} has a diagonal entry at ({i}, {j})")
        if not (0 <= i < p and 0 <= j < p):
            raise ValueError(f"{name} entry ({i}, {j}) out of range for p={p}")
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"{name} entry ({i}, {j}) is not finite")
        out[(i, j)] = v
    # acyclicity of the support; raises CycleError on violation
    graphlib.topological_sort(graphlib.DirectedGraph(p, out.keys()))
    return out


@dataclass(frozen=True, eq=False)
class WeightedDag:
    """Weighted acyclic graph (B, Omega).

    ``edges`` maps (i, j) to beta_ij for the edge i -> j; stored entries
    count as edges even when the weight is exactly zero (estimators never
    emit explicit zeros, but hand-built models may).  ``omega2`` is the
    length-p vector of positive noise variances.
    """

    p: int
    edges: dict
    omega2: np.ndarray

    def __post_init__(self):
        omega2 = np.asarray(self.omega2, dtype=float)
        if omega2.shape != (self.p,):
            raise ValueError(f"omega2 must have shape ({self.p},)")
        if not np.all(np.isfinite(omega2)) or not np.all(omega2 > 0):
            raise ValueError("all noise variances must be positive and finite")
        object.__setattr__(self, "omega2", omega2)
        object.__setattr__(self, "edges", _validate_sparse(self.p, self.edges, "edges"))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def support(self):
        return frozenset(self.edges)

    def parents(self, j: int) -> dict:
        return {i: v for (i, jj), v in self.edges.items() if jj == j}

    def to_graph(self) -> graphlib.DirectedGraph:
        return graphlib.DirectedGraph(self.p, self.edges.keys())

    def adjacency(self) -> np.ndarray:
        """Dense p x p coefficient matrix B."""
        b = np.zeros((self.p, self.p))
        for (i, j), v in self.edges.items():
            b[i, j] = v
        return b


@dataclass(frozen=True, eq=False)
class ReparamState:
    """Rescaled parametrization (Phi, R): rho_j = 1/omega_j, phi_ij = beta_ij/omega_j."""

    p: int
    phi: dict
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (self.p,):
            raise ValueError(f"rho must have shape ({self.p},)")
        if not np.all(np.isfinite(rho)) or not np.all(rho > 0):
            raise ValueError("all rho must be positive and finite")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", _validate_sparse(self.p, self.phi, "phi"))

    @property
    def edge_count(self) -> int:
        return len(self.phi)

    def support(self):
        return frozenset(self.phi)

    def parents(self, j: int) -> dict:
        return {i: v for (i, jj), v in self.phi.items() if jj == j}

    def to_graph(self) -> graphlib.DirectedGraph:
        return graphlib.DirectedGraph(self.p, self.phi.keys())


@dataclass(frozen=True, eq=False)
class PrecisionMatrix:
    """Symmetric positive definite inverse covariance matrix."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise ValueError("theta must be square")
        scale = max(1.0, float(np.max(np.abs(theta))) if theta.size else 1.0)
        if float(np.max(np.abs(theta - theta.T))) > 1e-8 * scale:
            raise ValueError("theta must be symmetric")
        theta = 0.5 * (theta + theta.T)
        try:
            np.linalg.cholesky(theta)
        except np.linalg.LinAlgError as exc:
            raise ValueError("theta must be positive definite") from exc
        object.__setattr__(self, "theta", theta)

    @property
    def p(self) -> int:
        return self.theta.shape[0]


class Dataset:
    """Column-normalized n x p data matrix with a cached Gram matrix.

    Columns of ``x`` have unit Euclidean norm; the original column means
    and centered norms are retained so estimates can optionally be mapped
    back to the input scale.  ``gram = x.T @ x`` is what every solver
    update reads, so it is computed once here.
    """

    def __init__(self, x, col_means=None, col_norms=None):
        x = np.ascontiguousarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d array")
        self.n, self.p = x.shape
        norms = np.sqrt(np.einsum("ij,ij->j", x, x))
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("columns of x must have unit norm (use Dataset.from_raw)")
        self.x = x
        self.col_means = np.zeros(self.p) if col_means is None else np.asarray(col_means, dtype=float)
        self.col_norms = np.ones(self.p) if col_norms is None else np.asarray(col_norms, dtype=float)
        if self.col_means.shape != (self.p,) or self.col_norms.shape != (self.p,):
            raise ValueError("col_means and col_norms must have length p")
        gram = x.T @ x
        gram = 0.5 * (gram + gram.T)
        np.fill_diagonal(gram, 1.0)
        self.gram = gram

    @classmethod
    def from_raw(cls, raw) -> "Dataset":
        """Center each column to mean zero and scale to unit norm."""
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 2:
            raise ValueError("data must be a 2-d array")
        if not np.all(np.isfinite(raw)):
            raise ValueError("data contains non-finite values")
        means = raw.mean(axis=0)
        centered = raw - means
        norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
        floor = 1e-12 * max(1.0, float(np.max(np.abs(raw))) if raw.size else 1.0)
        bad = np.nonzero(norms <= floor)[0]
        if bad.size:
            raise DegenerateDataError(f"constant column(s): {bad.tolist()}")
        return cls(centered / norms, means, norms)

    def original_x(self) -> np.ndarray:
        """Centered data restored to the original column scale."""
        return self.x * self.col_norms[np.newaxis, :]


def _check_dims(p_model, data, what):
    if p_model != data.p:
        raise ValueError(f"{what} has p={p_model} but data has p={data.p}")


def theta_from_dag(dag: WeightedDag) -> PrecisionMatrix:
    """Precision matrix (I - B) Omega^{-1} (I - B)^T of the model."""
    a = np.eye(dag.p) - dag.adjacency()
    theta = (a / dag.omega2[np.newaxis, :]) @ a.T
    return PrecisionMatrix(0.5 * (theta + theta.T))


def theta_from_reparam(state: ReparamState) -> PrecisionMatrix:
    """Precision matrix (R - Phi)(R - Phi)^T in the rescaled parametrization."""
    a = np.diag(state.rho)
    for (i, j), v in state.phi.items():
        a[i, j] = -v
    theta = a @ a.T
    return PrecisionMatrix(0.5 * (theta + theta.T))


def to_dag(state: ReparamState) -> WeightedDag:
    """Map (Phi, R) back to (B, Omega): beta_ij = phi_ij/rho_j, omega_j**2 = 1/rho_j**2."""
    rho = state.rho
    edges = {(i, j): v / rho[j] for (i, j), v in state.phi.items()}
    return WeightedDag(p=state.p, edges=edges, omega2=1.0 / rho**2)


def to_reparam(dag: WeightedDag) -> ReparamState:
    """Map (B, Omega) to (Phi, R): rho_j = 1/omega_j, phi_ij = beta_ij/omega_j."""
    rho = 1.0 / np.sqrt(dag.omega2)
    phi = {(i, j): v * rho[j] for (i, j), v in dag.edges.items()}
    return ReparamState(p=dag.p, phi=phi, rho=rho)


def _column_rss(gram, parents, j):
    """||x_j - X beta_j||^2 via the Gram matrix, for unit-norm columns."""
    if not parents:
        return 1.0
    idx = np.fromiter(parents.keys(), dtype=int)
    w = np.fromiter(parents.values(), dtype=float)
    gj = gram[idx, j]
    return 1.0 - 2.0 * float(w @ gj) + float(w @ gram[np.ix_(idx, idx)] @ w)


def loglik_dag(dag: WeightedDag, data: Dataset) -> float:
    """Negative log-likelihood of the data under (B, Omega).

    sum_j [ (n/2) log omega_j**2 + ||x_j - X beta_j||**2 / (2 omega_j**2) ],
    evaluated on the normalized columns, additive constant dropped.
    """
    _check_dims(dag.p, data, "model")
    cols = _column_map(dag.edges, dag.p)
    n = data.n
    total = 0.0
    for j in range(dag.p):
        o2 = dag.omega2[j]
        total += 0.5 * n * math.log(o2) + 0.5 * _column_rss(data.gram, cols[j], j) / o2
    return total


def loglik_reparam(state: ReparamState, data: Dataset) -> float:
    """Negative log-likelihood sum_j [ -n log rho_j + 0.5 ||rho_j x_j - X phi_j||**2 ].

    Equals ``loglik_dag`` at the corresponding (B, Omega); jointly convex
    in (Phi, R).
    """
    _check_dims(state.p, data, "state")
    cols = _column_map(state.phi, state.p)
    gram = data.gram
    n = data.n
    total = 0.0
    for j in range(state.p):
        r = state.rho[j]
        parents = cols[j]
        if parents:
            idx = np.fromiter(parents.keys(), dtype=int)
            w = np.fromiter(parents.values(), dtype=float)
            quad = r * r - 2.0 * r * float(w @ gram[idx, j]) + float(w @ gram[np.ix_(idx, idx)] @ w)
        else:
            quad = r * r
        total += -n * math.log(r) + 0.5 * quad
    return total


def loglik_theta(theta: PrecisionMatrix, data: Dataset) -> float:
    """Negative log-likelihood -(n/2) log det Theta + (1/2) tr(Theta X^T X)."""
    _check_dims(theta.p, data, "theta")
    chol = np.linalg.cholesky(theta.theta)
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    return -0.5 * data.n * logdet + 0.5 * float(np.sum(theta.theta * data.gram))


def bic_score(dag: WeightedDag, data: Dataset) -> float:
    """2 * loglik_dag + (edges + p) * log n; lower is better.

    The parameter count is the number of stored edges plus the p noise
    variances; the weights are evaluated as given (no refitting here).
    """
    _check_dims(dag.p, data, "model")
    return 2.0 * loglik_dag(dag, data) + (dag.edge_count + dag.p) * math.log(data.n)
