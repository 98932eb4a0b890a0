import numpy as np
import pytest

from kerncollab.config import ExperimentConfig
from kerncollab.kernels import KernelSpec, cross_matrix, gram
from kerncollab.problem import uniform_grid


def dense_posterior(kernel, lam, X, y, P):
    """Posterior mean and variance by a plain linear solve, no factor caching"""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(P.shape[0]), np.ones(P.shape[0])
    A = gram(kernel, X) + lam * np.eye(X.shape[0])
    k = cross_matrix(kernel, X, P)
    mu = k.T @ np.linalg.solve(A, y)
    var = 1.0 - np.sum(k * np.linalg.solve(A, k), axis=0)
    return mu, var


@pytest.fixture
def se_kernel():
    return KernelSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_grid():
    return uniform_grid(5)


@pytest.fixture
def oracle():
    return dense_posterior


@pytest.fixture
def tiny_config():
    return ExperimentConfig(T=30, K=3, grid_size=6, mc_runs=2, seed=7, n_explore=8)
