"""Structure-recovery and predictive metrics against a gold-standard DAG.

Edge classification is on supports only.  For an estimated edge i -> j:
a true positive if the truth has i -> j, a reversal if the truth has
j -> i, and a false positive if neither orientation is in the truth.
The structural Hamming distances follow from the classification:

    shd_dag      = T - TP + FP        (reversals cost 1)
    shd_skeleton = T - TP - R + FP    (reversals are free)

where T is the number of true edges.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, WeightedDag


@dataclass(frozen=True)
class StructureMetrics:
    """Edge classification counts and their normalizations."""

    P: int
    TP: int
    R: int
    FP: int
    T: int
    shd_dag: int
    shd_skeleton: int
    tpr: float
    fdr: float
    fpr: float

    def as_dict(self) -> dict:
        return {
            "P": self.P,
            "TP": self.TP,
            "R": self.R,
            "FP": self.FP,
            "shd_dag": self.shd_dag,
            "shd_skeleton": self.shd_skeleton,
            "tpr": self.tpr,
            "fdr": self.fdr,
            "fpr": self.fpr,
        }


def compare(estimate: WeightedDag, truth: WeightedDag, undirected=(), weight_tol: float = 1e-8) -> StructureMetrics:
    """Classify the estimate's edges against the truth and score them.

    Weights are ignored except that entries with |beta| <= weight_tol are
    treated as absent, guarding against numerically-zero survivors.
    ``undirected`` is an optional list of unordered pairs (for scoring
    external partially-directed estimates); such a pair counts as a true
    positive whenever either orientation is in the truth, else as a false
    positive.  Ratios at empty denominators are defined as 0.
    """
    if estimate.p != truth.p:
        raise ValueError(f"estimate has p={estimate.p} but truth has p={truth.p}")
    est = {e for e, w in estimate.edges.items() if abs(w) > weight_tol}
    tru = {e for e, w in truth.edges.items() if abs(w) > weight_tol}

    tp = sum(1 for e in est if e in tru)
    rv = sum(1 for (i, j) in est if (j, i) in tru)

    pairs = {(min(i, j), max(i, j)) for i, j in undirected}
    tp += sum(1 for a, b in pairs if (a, b) in tru or (b, a) in tru)
    predicted = len(est) + len(pairs)
    fp = predicted - tp - rv

    t = len(tru)
    shd_dag = t - tp + fp
    shd_skeleton = t - tp - rv + fp
    absent = estimate.p * (estimate.p - 1) // 2 - t
    return StructureMetrics(
        P=predicted,
        TP=tp,
        R=rv,
        FP=fp,
        T=t,
        shd_dag=shd_dag,
        shd_skeleton=shd_skeleton,
        tpr=tp / t if t else 0.0,
        fdr=(rv + fp) / predicted if predicted else 0.0,
        fpr=(rv + fp) / absent if absent else 0.0,
    )


def _ols_by_column(support_cols, data: Dataset):
    """Least-squares coefficients and noise variances per child, normalized scale.

    Solves the normal equations on the cached Gram matrix, which is exact
    OLS because the columns are normalized.  Rejects children whose parent
    set is as large as the sample size.
    """
    gram = data.gram
    n = data.n
    coefs = []
    omega2 = np.empty(data.p)
    for j in range(data.p):
        idx = sorted(support_cols[j])
        if len(idx) >= n:
            raise ValueError(f"node {j} has {len(idx)} parents but only {n} training rows")
        if idx:
            sub = gram[np.ix_(idx, idx)]
            rhs = gram[idx, j]
            try:
                w = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                w = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            rss = 1.0 - float(w @ rhs)
        else:
            w = np.zeros(0)
            rss = 1.0
        if rss <= 0:
            raise ValueError(f"degenerate least-squares refit at node {j} (zero residual)")
        coefs.append((idx, w))
        omega2[j] = rss / n
    return coefs, omega2


def refit_ols(estimate: WeightedDag, data: Dataset, scale: str = "normalized") -> WeightedDag:
    """Refit the weights of an estimated structure by ordinary least squares.

    Keeps the support of ``estimate`` fixed, regresses each node onto its
    parents, and re-estimates each noise variance as the mean residual sum
    of squares.  ``scale`` selects whether the returned coefficients live
    on the normalized columns (coherent with ``loglik_dag``/``bic_score``
    on the same dataset) or on the original column scale.
    """
    if estimate.p != data.p:
        raise ValueError(f"estimate has p={estimate.p} but data has p={data.p}")
    if scale not in ("normalized", "original"):
        raise ValueError("scale must be 'normalized' or 'original'")
    cols = [[] for _ in range(estimate.p)]
    for i, j in estimate.edges:
        cols[j].append(i)
    coefs, omega2 = _ols_by_column(cols, data)
    edges = {}
    norms = data.col_norms
    for j, (idx, w) in enumerate(coefs):
        for i, v in zip(idx, w):
            if scale == "original":
                v = v * norms[j] / norms[i]
            edges[(i, j)] = float(v)
    if scale == "original":
        omega2 = omega2 * norms**2
    return WeightedDag(p=estimate.p, edges=edges, omega2=omega2)


def test_loglik(estimate: WeightedDag, train: Dataset, test: Dataset) -> float:
    """Held-out average log-likelihood of an estimated structure.

    Coefficients and noise variances are refit on the training data by
    least squares (structure fixed), then the Gaussian log-likelihood is
    evaluated on the test rows at the original column scale and averaged
    per observation.  Larger is better.  Unlike the model-module
    likelihoods this includes the -(p/2) log(2 pi) constant, so the value
    is comparable to the population entropy limit.
    """
    if estimate.p != train.p or estimate.p != test.p:
        raise ValueError("estimate, train and test must share p")
    cols = [[] for _ in range(estimate.p)]
    for i, j in estimate.edges:
        cols[j].append(i)
    coefs, omega2 = _ols_by_column(cols, train)
    # Back-transform the refit to the original scale before scoring.
    norms = train.col_norms
    omega2 = omega2 * norms**2

    xt = test.original_x()
    nt = test.n
    nll = 0.0
    for j, (idx, w) in enumerate(coefs):
        resid = xt[:, j].copy()
        for i, v in zip(idx, w):
            resid -= (v * norms[j] / norms[i]) * xt[:, i]
        nll += 0.5 * nt * math.log(omega2[j]) + 0.5 * float(resid @ resid) / omega2[j]
    return -nll / nt - 0.5 * estimate.p * math.log(2.0 * math.pi)
