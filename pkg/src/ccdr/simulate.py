"""Random DAG generation and structural-equation sampling.

DAGs are drawn from the ordered Erdos-Renyi model: each forward pair
(i, j), i < j, becomes an edge independently with probability
s0 / C(p, 2), so the edge count is Binomial with mean s0.  A uniform
relabeling of the nodes is then applied so learners cannot exploit the
construction order.  Data are sampled ancestrally from the linear
Gaussian structural equations the DAG defines.
"""

from dataclasses import dataclass

import numpy as np

from . import graph as graphlib
from .model import Dataset, WeightedDag

RNG_ALGORITHM = "PCG64"  # numpy default_rng; recorded in run manifests


@dataclass(frozen=True)
class SimConfig:
    """Simulation protocol parameters.

    ``expected_edges`` is the mean edge count s0 of the random DAG;
    ``weight_range`` bounds the magnitude of the uniform coefficient draw
    (positive unless ``random_sign`` is set); ``noise_sd`` is the common
    noise standard deviation.
    """

    p: int
    expected_edges: float
    n: int
    weight_range: tuple = (0.5, 2.0)
    noise_sd: float = 1.0
    seed: int = None
    random_sign: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        max_edges = self.p * (self.p - 1) // 2
        if not 0 <= self.expected_edges <= max_edges:
            raise ValueError(f"expected_edges must be in [0, {max_edges}]")
        lo, hi = self.weight_range
        if not lo <= hi:
            raise ValueError("weight_range must satisfy low <= high")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def random_dag(cfg: SimConfig, rng: np.random.Generator) -> WeightedDag:
    """Draw a random weighted DAG under the ordered Erdos-Renyi protocol."""
    p = cfg.p
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    m = len(pairs)
    edges = {}
    if m:
        prob = cfg.expected_edges / m
        keep = rng.random(m) < prob
        lo, hi = cfg.weight_range
        weights = rng.uniform(lo, hi, size=int(keep.sum()))
        if cfg.random_sign:
            weights = weights * (2 * rng.integers(0, 2, size=weights.size) - 1)
        relabel = rng.permutation(p)
        w = iter(weights)
        for (i, j), k in zip(pairs, keep):
            if k:
                edges[(int(relabel[i]), int(relabel[j]))] = float(next(w))
    omega2 = np.full(p, cfg.noise_sd**2)
    return WeightedDag(p=p, edges=edges, omega2=omega2)


def sample_sem(dag: WeightedDag, n: int, rng: np.random.Generator):
    """Sample n rows from the structural equations of ``dag``.

    Nodes are filled in topological order: X_j = sum_i beta_ij X_i + eps_j
    with independent Gaussian noise.  Returns the normalized ``Dataset``
    together with the raw sample matrix.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p = dag.p
    noise = rng.standard_normal((n, p)) * np.sqrt(dag.omega2)[np.newaxis, :]
    x = np.zeros((n, p))
    order = graphlib.topological_sort(dag.to_graph())
    cols = [[] for _ in range(p)]
    for (i, j), v in dag.edges.items():
        cols[j].append((i, v))
    for j in order:
        acc = noise[:, j].copy()
        for i, v in cols[j]:
            acc += v * x[:, i]
        x[:, j] = acc
    return Dataset.from_raw(x), x
