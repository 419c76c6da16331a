import math

import numpy as np
import pytest

from ccdr.graph import CycleError
from ccdr.metrics import refit_ols
from ccdr.model import (
    Dataset,
    DegenerateDataError,
    PrecisionMatrix,
    ReparamState,
    WeightedDag,
    bic_score,
    loglik_dag,
    loglik_reparam,
    loglik_theta,
    theta_from_dag,
    theta_from_reparam,
    to_dag,
    to_reparam,
)
from ccdr.simulate import SimConfig, random_dag, sample_sem

from conftest import THETA_CHAIN, random_dataset, random_state


# ---------------------------------------------------------------- types

def test_weighted_dag_rejects_cycle():
    with pytest.raises(CycleError):
        WeightedDag(p=2, edges={(0, 1): 1.0, (1, 0): 1.0}, omega2=np.ones(2))


def test_weighted_dag_rejects_self_loop_and_bad_omega():
    with pytest.raises(ValueError):
        WeightedDag(p=2, edges={(1, 1): 1.0}, omega2=np.ones(2))
    with pytest.raises(ValueError):
        WeightedDag(p=2, edges={}, omega2=np.array([1.0, 0.0]))


def test_reparam_state_rejects_nonpositive_rho():
    with pytest.raises(ValueError):
        ReparamState(p=2, phi={}, rho=np.array([1.0, -2.0]))


def test_dataset_normalization(rng):
    raw = rng.standard_normal((40, 6)) * 3.0 + 1.5
    data = Dataset.from_raw(raw)
    norms = np.linalg.norm(data.x, axis=0)
    assert np.all(np.abs(norms - 1.0) <= 1e-12)
    assert np.allclose(data.gram, data.gram.T)
    assert np.all(np.diagonal(data.gram) == 1.0)
    np.testing.assert_allclose(data.col_means, raw.mean(axis=0))
    # original scale restores the centered input
    np.testing.assert_allclose(data.original_x(), raw - raw.mean(axis=0), atol=1e-12)


def test_dataset_rejects_constant_column(rng):
    raw = rng.standard_normal((30, 3))
    raw[:, 1] = 7.0
    with pytest.raises(DegenerateDataError):
        Dataset.from_raw(raw)


def test_dataset_rejects_non_finite():
    raw = np.ones((4, 2))
    raw[0, 0] = np.nan
    raw[1, 1] = 2.0
    raw[2, 0] = 3.0
    with pytest.raises(ValueError):
        Dataset.from_raw(raw)


def test_precision_matrix_requires_spd():
    with pytest.raises(ValueError):
        PrecisionMatrix(np.array([[1.0, 0.0], [0.5, 1.0]]))  # asymmetric
    with pytest.raises(ValueError):
        PrecisionMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))  # indefinite


# ---------------------------------------------------------------- theta maps

def test_theta_from_dag_chain(chain3):
    np.testing.assert_allclose(theta_from_dag(chain3).theta, THETA_CHAIN, atol=1e-14)


def test_theta_from_dag_empty_graph_identity():
    dag = WeightedDag(p=4, edges={}, omega2=np.ones(4))
    np.testing.assert_allclose(theta_from_dag(dag).theta, np.eye(4), atol=0)


def test_theta_from_dag_equivalent_representations(dense3):
    np.testing.assert_allclose(theta_from_dag(dense3).theta, THETA_CHAIN, atol=1e-14)


def test_theta_from_reparam_trivial():
    state = ReparamState(p=3, phi={}, rho=np.ones(3))
    np.testing.assert_allclose(theta_from_reparam(state).theta, np.eye(3), atol=0)


def test_theta_from_reparam_chain(chain3):
    state = to_reparam(chain3)  # unit variances: rho = 1, phi = beta
    np.testing.assert_allclose(state.rho, np.ones(3))
    np.testing.assert_allclose(theta_from_reparam(state).theta, THETA_CHAIN, atol=1e-14)


def test_theta_consistency_across_parametrizations(rng):
    for _ in range(10):
        state = random_state(5, rng)
        t1 = theta_from_reparam(state).theta
        t2 = theta_from_dag(to_dag(state)).theta
        assert np.linalg.norm(t1 - t2) <= 1e-10 * np.linalg.norm(t1)


def test_theta_from_dag_positive_definite(rng):
    for _ in range(10):
        state = random_state(6, rng)
        theta = theta_from_dag(to_dag(state)).theta
        np.linalg.cholesky(theta)  # raises if not PD


# ---------------------------------------------------------------- transforms

def test_to_dag_values():
    state = ReparamState(p=2, phi={(0, 1): 2.0}, rho=np.array([1.0, 2.0]))
    dag = to_dag(state)
    assert dag.edges[(0, 1)] == pytest.approx(1.0)
    assert dag.omega2[1] == pytest.approx(0.25)


def test_to_dag_unit_rho_is_identity_on_weights(rng):
    state = random_state(5, rng)
    state = ReparamState(p=5, phi=state.phi, rho=np.ones(5))
    dag = to_dag(state)
    assert dag.edges == state.phi
    np.testing.assert_allclose(dag.omega2, np.ones(5))


def test_to_dag_empty():
    state = ReparamState(p=3, phi={}, rho=np.array([0.5, 2.0, 1.0]))
    assert to_dag(state).edges == {}


def test_to_reparam_values():
    dag = WeightedDag(p=2, edges={(0, 1): 1.0}, omega2=np.array([1.0, 0.25]))
    state = to_reparam(dag)
    assert state.rho[1] == pytest.approx(2.0)
    assert state.phi[(0, 1)] == pytest.approx(2.0)


def test_round_trip(rng):
    for _ in range(10):
        state = random_state(6, rng)
        back = to_reparam(to_dag(state))
        assert back.support() == state.support()
        assert all(abs(back.phi[e] - state.phi[e]) <= 1e-12 * max(1.0, abs(state.phi[e])) for e in state.phi)
        assert np.all(np.abs(back.rho - state.rho) <= 1e-12 * np.maximum(1.0, state.rho))


# ---------------------------------------------------------------- likelihoods

def test_loglik_dag_empty_graph(rng):
    data = random_dataset(5, 30, rng)
    dag = WeightedDag(p=5, edges={}, omega2=np.ones(5))
    # unit-norm columns: sum_j 0.5 * ||x_j||^2 = p / 2
    assert loglik_dag(dag, data) == pytest.approx(2.5, abs=1e-12)


def test_loglik_reparam_null_model(rng):
    p, n = 4, 25
    data = random_dataset(p, n, rng)
    state = ReparamState(p=p, phi={}, rho=np.full(p, math.sqrt(n)))
    expected = p * n * (1.0 - math.log(n)) / 2.0
    assert loglik_reparam(state, data) == pytest.approx(expected, rel=1e-12)


def test_loglik_theta_identity(rng):
    data = random_dataset(6, 40, rng)
    assert loglik_theta(PrecisionMatrix(np.eye(6)), data) == pytest.approx(3.0, abs=1e-12)


def test_loglik_agreement_across_parametrizations(rng):
    for _ in range(8):
        p = int(rng.integers(2, 7))
        data = random_dataset(p, 35, rng)
        state = random_state(p, rng)
        v_rep = loglik_reparam(state, data)
        v_dag = loglik_dag(to_dag(state), data)
        v_theta = loglik_theta(theta_from_reparam(state), data)
        scale = 1.0 + abs(v_rep)
        assert abs(v_rep - v_dag) <= 1e-8 * scale
        assert abs(v_rep - v_theta) <= 1e-8 * scale


def test_loglik_theta_logdet_matches_direct_determinant(rng):
    data = random_dataset(3, 20, rng)
    theta = PrecisionMatrix(THETA_CHAIN)
    direct = -0.5 * data.n * math.log(np.linalg.det(THETA_CHAIN)) + 0.5 * np.sum(THETA_CHAIN * data.gram)
    assert loglik_theta(theta, data) == pytest.approx(direct, rel=1e-12)


def test_loglik_reparam_convex_in_rho(rng):
    # moving any rho_j away from its closed-form optimum never improves
    p, n = 4, 30
    data = random_dataset(p, n, rng)
    state = random_state(p, rng)
    gram = data.gram
    for j in range(p):
        c = sum(v * gram[i, j] for (i, jj), v in state.phi.items() if jj == j)
        opt = 0.5 * (c + math.sqrt(c * c + 4.0 * n))
        rho = state.rho.copy()
        rho[j] = opt
        best = loglik_reparam(ReparamState(p=p, phi=state.phi, rho=rho), data)
        for bump in (0.7, 0.9, 1.1, 1.5):
            rho_b = rho.copy()
            rho_b[j] = opt * bump
            worse = loglik_reparam(ReparamState(p=p, phi=state.phi, rho=rho_b), data)
            assert worse >= best - 1e-10 * (1.0 + abs(best))


def test_loglik_reparam_midpoint_convexity(rng):
    for _ in range(10):
        p = int(rng.integers(3, 7))
        data = random_dataset(p, 30, rng)
        s1 = random_state(p, rng)
        s2 = random_state(p, rng, support=list(s1.phi))  # shared acyclic support
        phi_mid = {e: 0.5 * (s1.phi[e] + s2.phi[e]) for e in s1.phi}
        mid = ReparamState(p=p, phi=phi_mid, rho=0.5 * (s1.rho + s2.rho))
        lhs = loglik_reparam(mid, data)
        rhs = 0.5 * (loglik_reparam(s1, data) + loglik_reparam(s2, data))
        assert lhs <= rhs + 1e-9 * (1.0 + abs(rhs))


def test_loglik_dimension_mismatch(rng):
    data = random_dataset(3, 20, rng)
    dag = WeightedDag(p=4, edges={}, omega2=np.ones(4))
    with pytest.raises(ValueError):
        loglik_dag(dag, data)


# ---------------------------------------------------------------- bic

def test_bic_empty_graph(rng):
    p, n = 5, 30
    data = random_dataset(p, n, rng)
    dag = WeightedDag(p=p, edges={}, omega2=np.ones(p))
    assert bic_score(dag, data) == pytest.approx(p + p * math.log(n), abs=1e-10)


def test_bic_zero_weight_edge_costs_log_n(rng):
    data = random_dataset(4, 25, rng)
    base = WeightedDag(p=4, edges={}, omega2=np.ones(4))
    padded = WeightedDag(p=4, edges={(0, 1): 0.0}, omega2=np.ones(4))
    assert bic_score(padded, data) - bic_score(base, data) == pytest.approx(math.log(25), abs=1e-12)


def test_bic_ranking_matches_least_squares_oracle(rng):
    truth = random_dag(SimConfig(p=10, expected_edges=12, n=80), rng)
    data, _ = sample_sem(truth, 80, rng)

    def oracle_bic(support):
        # independent refit: lstsq per node on the normalized columns
        total = 0.0
        for j in range(10):
            idx = [i for (i, jj) in support if jj == j]
            y = data.x[:, j]
            if idx:
                coef, *_ = np.linalg.lstsq(data.x[:, idx], y, rcond=None)
                resid = y - data.x[:, idx] @ coef
            else:
                resid = y
            omega2 = float(resid @ resid) / data.n
            total += data.n * math.log(omega2) + float(resid @ resid) / omega2
        return total + (len(support) + 10) * math.log(data.n)

    candidates = [frozenset(), frozenset(truth.edges)]
    edges = sorted(truth.edges)
    candidates.append(frozenset(edges[: len(edges) // 2]))
    candidates.append(frozenset(edges[1:]))
    ours, oracle = [], []
    for support in candidates:
        skeleton = WeightedDag(p=10, edges={e: 1.0 for e in support}, omega2=np.ones(10))
        ours.append(bic_score(refit_ols(skeleton, data), data))
        oracle.append(oracle_bic(support))
    np.testing.assert_allclose(ours, oracle, rtol=1e-9)
    assert np.argsort(ours).tolist() == np.argsort(oracle).tolist()
