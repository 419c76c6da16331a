import numpy as np
import pytest

from ccdr import Dataset, ReparamState, WeightedDag

# Theta of the 3-node chain X1 -> X2 -> X3 with unit weights and variances;
# also produced by the second, denser representation used in several tests.
THETA_CHAIN = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def chain3():
    return WeightedDag(p=3, edges={(0, 1): 1.0, (1, 2): 1.0}, omega2=np.ones(3))


@pytest.fixture
def dense3():
    # equivalent representation of THETA_CHAIN with three edges
    return WeightedDag(
        p=3,
        edges={(0, 1): 0.5, (0, 2): 1.0, (2, 1): 0.5},
        omega2=np.array([1.0, 0.5, 2.0]),
    )


def random_dataset(p, n, rng):
    return Dataset.from_raw(rng.standard_normal((n, p)))


def random_state(p, rng, density=0.4, support=None):
    """Random reparametrized state with an acyclic support.

    Edges run forward along a random node order, so the support is acyclic
    by construction.  ``support`` reuses a fixed edge set instead.
    """
    if support is None:
        order = rng.permutation(p)
        support = []
        for a in range(p):
            for b in range(a + 1, p):
                if rng.random() < density:
                    support.append((int(order[a]), int(order[b])))
    phi = {}
    for edge in support:
        v = float(rng.uniform(0.3, 1.5)) * (1 if rng.random() < 0.5 else -1)
        phi[edge] = v
    rho = rng.uniform(0.5, 3.0, size=p)
    return ReparamState(p=p, phi=phi, rho=rho)
