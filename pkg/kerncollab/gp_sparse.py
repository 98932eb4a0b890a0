"""
Nystrom sparse approximation of a client's GP posterior

Inducing points are drawn from the client's own exploration queries with
probability min(1, q0 * sigma^2_{N_T}(x_j)). The weight vector

    w = (lambda K_zz + K_zX K_Xz)^{-1} K_zX y

makes the approximate mean k_{z,x}^T w reproducible from (z, w) alone, which
is what gets broadcast. The approximate variance keeps its 1/lambda
prefactor, so with z = X it equals the exact variance divided by lambda.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from kerncollab import kernels
from kerncollab.gp_exact import GPPosterior, cholesky_with_retry, clamp_variance
from kerncollab.utils import as_point, as_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparsityParams:
    epsilon: float
    q0: float

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.q0 < 0:
            raise ValueError(f"q0 must be >= 0, got {self.q0}")

    @property
    def chi(self):
        return (1.0 + self.epsilon) / (1.0 - self.epsilon)

    @classmethod
    def from_defaults(cls, epsilon, T, K, delta0):
        return cls(epsilon=epsilon, q0=default_q0(epsilon, T, K, delta0))


@dataclass(frozen=True)
class InducingModel:
    z: np.ndarray
    kernel: kernels.KernelSpec
    lam: float
    w: Optional[np.ndarray] = None
    full_X: Optional[np.ndarray] = None
    full_y: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None

    @property
    def size(self):
        return int(self.z.shape[0])

    @property
    def d(self):
        return int(self.z.shape[1])

    @classmethod
    def from_broadcast(cls, z, w, kernel, lam, d):
        """Rebuild the mean-only model a peer holds after receiving every (z_s, w_s) pair"""
        w = np.asarray(w, dtype=float).ravel()
        z = np.asarray(z, dtype=float).reshape(len(w), d)
        return cls(z=z, kernel=kernel, lam=float(lam), w=w)

    def pairs(self):
        """Broadcast payload: one (inducing point, weight) pair per message"""
        if self.w is None:
            raise ValueError("weights have not been fitted")
        return [(self.z[s].copy(), float(self.w[s])) for s in range(self.size)]


def default_q0(epsilon, T, K, delta0) -> float:
    """6 (1 + eps) log(8 T K / delta0) / (eps^2 (1 - eps))"""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < delta0 < 1:
        raise ValueError(f"delta0 must lie in (0, 1), got {delta0}")
    if T < 1 or K < 1:
        raise ValueError(f"T and K must be >= 1, got T={T}, K={K}")
    return 6.0 * (1.0 + epsilon) * math.log(8.0 * T * K / delta0) / (epsilon ** 2 * (1.0 - epsilon))


def inclusion_probabilities(gp: GPPosterior, q0) -> np.ndarray:
    """p_j = min(1, q0 sigma^2_{N_T}(x_j)) at every historical query"""
    if gp.t < 1:
        raise ValueError("inducing sampling needs at least one observation")
    if math.isinf(q0):
        return np.ones(gp.t)
    _, var = gp.predict(gp.X)
    return np.minimum(1.0, q0 * var)


def sample_inducing(gp: GPPosterior, q0, rng) -> InducingModel:
    """Independent Bernoulli inclusion of each exploration query (weights left unset)"""
    p = inclusion_probabilities(gp, q0)
    # one uniform per point regardless of q0, so streams stay aligned across q0 sweeps
    mask = rng.random(gp.t) < p
    if not mask.any():
        logger.warning("inducing set is empty (q0=%g, %d candidates)", q0, gp.t)
    return InducingModel(
        z=gp.X[mask].copy(), kernel=gp.kernel, lam=gp.lam,
        full_X=gp.X.copy(), full_y=gp.y.copy(), mask=mask,
    )


def fit_weights(model: InducingModel) -> InducingModel:
    """Solve (lambda K_zz + K_zX K_Xz) w = K_zX y"""
    if model.full_X is None:
        raise ValueError("fitting weights needs the locally held observations")
    if model.size == 0:
        return replace(model, w=np.zeros(0))
    K_zz = kernels.gram(model.kernel, model.z)
    K_zX = kernels.cross_matrix(model.kernel, model.z, model.full_X)
    A = model.lam * K_zz + K_zX @ K_zX.T
    L = cholesky_with_retry(A)
    w = cho_solve((L, True), K_zX @ model.full_y, check_finite=False)
    return replace(model, w=w)


def approx_mean_batch(model: InducingModel, points) -> np.ndarray:
    P = as_points(points, d=model.d if model.size else None)
    if model.size == 0:
        return np.zeros(P.shape[0])
    if model.w is None:
        raise ValueError("weights have not been fitted")
    return kernels.cross_matrix(model.kernel, model.z, P).T @ model.w


def approx_mean(model: InducingModel, x) -> float:
    """k_{z,x}^T w; identically 0 for an empty inducing set"""
    return float(approx_mean_batch(model, as_point(x)[None, :])[0])


def approx_variance_batch(model: InducingModel, points) -> np.ndarray:
    if model.full_X is None:
        raise ValueError("the approximate variance needs the locally held observations")
    P = as_points(points, d=model.full_X.shape[1])
    prior = kernels.prior_diag(model.kernel, P)
    if model.size == 0:
        return prior / model.lam
    K_zz = kernels.gram(model.kernel, model.z)
    K_zX = kernels.cross_matrix(model.kernel, model.z, model.full_X)
    K_zP = kernels.cross_matrix(model.kernel, model.z, P)
    a = solve_triangular(cholesky_with_retry(K_zz), K_zP, lower=True, check_finite=False)
    L2 = cholesky_with_retry(K_zz + (K_zX @ K_zX.T) / model.lam)
    b = solve_triangular(L2, K_zP, lower=True, check_finite=False)
    var = (prior - np.sum(a ** 2, axis=0) + np.sum(b ** 2, axis=0)) / model.lam
    return clamp_variance(var)


def approx_variance(model: InducingModel, x) -> float:
    """(1/lambda)(k(x,x) - k_z^T K_zz^{-1} k_z + k_z^T (K_zz + K_zX K_Xz / lambda)^{-1} k_z)"""
    return float(approx_variance_batch(model, as_point(x)[None, :])[0])


def sparse_beta(B, R, lam, epsilon, T, delta) -> float:
    """B sqrt(2 lambda / (1 - eps)) + R sqrt(2 log(T / delta))"""
    if not 0 < epsilon < 1 or not 0 < delta < 1 or T < 1 or lam <= 0:
        raise ValueError("sparse_beta parameters out of range")
    return B * math.sqrt(2.0 * lam / (1.0 - epsilon)) + R * math.sqrt(2.0 * math.log(T / delta))


def comm_phase_length(q0, lam, gamma_hat) -> int:
    """ceil(9 (1 + 1/lambda) q0 gamma_hat)"""
    if q0 < 0 or lam <= 0 or gamma_hat < 0:
        raise ValueError(f"invalid inputs q0={q0}, lambda={lam}, gamma_hat={gamma_hat}")
    if gamma_hat == 0 or q0 == 0:
        logger.warning("communication phase length is 0 (q0=%g, gamma_hat=%g)", q0, gamma_hat)
        return 0
    value = 9.0 * (1.0 + 1.0 / lam) * q0 * gamma_hat
    if math.isinf(value):
        return np.iinfo(np.int64).max
    return int(math.ceil(value))


def sandwich_holds(model: InducingModel, gp: GPPosterior, grid, chi) -> bool:
    """(1/chi) sigma^2/lambda <= approx variance <= chi sigma^2/lambda at every grid point"""
    _, exact = gp.predict(grid)
    scaled = exact / gp.lam
    approx = approx_variance_batch(model, grid)
    slack = 1e-12
    return bool(np.all(scaled / chi <= approx + slack) and np.all(approx <= chi * scaled + slack))
