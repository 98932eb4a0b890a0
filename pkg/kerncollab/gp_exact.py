"""
Exact GP posterior for one observation function

The posterior keeps the lower Cholesky factor L of (K + lambda I) and the
whitened targets z = L^{-1} y, so that

    mean(x)     = (L^{-1} k_x)^T z
    variance(x) = k(x, x) - |L^{-1} k_x|^2

Appending a point extends L by one row. When a grid is attached, the whitened
cross-covariances V = L^{-1} K_{X, grid} are extended by one row as well and
the grid means/variances are updated in O(t m).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from kerncollab import kernels
from kerncollab.constants import CHOLESKY_JITTER, VARIANCE_CLAMP
from kerncollab.exceptions import DimensionError, NumericalError
from kerncollab.utils import argmax_first, as_point, as_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfidenceParams:
    B: float
    R: float
    delta: float

    def __post_init__(self):
        if self.B < 0 or self.R < 0:
            raise ValueError(f"B and R must be >= 0, got B={self.B}, R={self.R}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def cholesky_with_retry(A):
    """Lower Cholesky factor; one retry with a tiny diagonal jitter, then a hard error"""
    try:
        return cholesky(A, lower=True, check_finite=False)
    except LinAlgError:
        logger.debug("Cholesky failed, retrying with jitter %g", CHOLESKY_JITTER)
    try:
        return cholesky(A + CHOLESKY_JITTER * np.eye(A.shape[0]), lower=True, check_finite=False)
    except LinAlgError as e:
        raise NumericalError(f"matrix of size {A.shape[0]} is not positive definite after jitter") from e


def clamp_variance(var):
    """Clamp round-off negatives in (-1e-10, 0) to zero; anything lower is a breakdown"""
    var = np.asarray(var, dtype=float)
    if np.any(var < -VARIANCE_CLAMP):
        raise NumericalError(f"negative posterior variance {float(np.min(var)):.3e}")
    return np.maximum(var, 0.0)


class GPPosterior:
    """Posterior over one client's observation function"""

    def __init__(self, kernel, lam, d, grid=None):
        if not lam > 0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        self.kernel = kernel
        self.lam = float(lam)
        self.d = int(d)
        self.info_gain = 0.0
        self.provenance = []
        self._t = 0
        self._X = np.zeros((4, self.d))
        self._y = np.zeros(4)
        self._L = np.zeros((4, 4))
        self._z = np.zeros(4)
        self.grid = None
        self._V = None
        self._grid_mean = None
        self._grid_var = None
        if grid is not None:
            self.track(grid)

    @property
    def t(self):
        return self._t

    @property
    def X(self):
        return self._X[:self._t]

    @property
    def y(self):
        return self._y[:self._t]

    @property
    def chol(self):
        return self._L[:self._t, :self._t]

    @property
    def alpha(self):
        """(K + lambda I)^{-1} y"""
        if self._t == 0:
            return np.zeros(0)
        return solve_triangular(self.chol.T, self._z[:self._t], lower=False, check_finite=False)

    def _whiten(self, K_cross):
        if self._t == 0:
            return np.zeros((0,) + K_cross.shape[1:])
        return solve_triangular(self.chol, K_cross, lower=True, check_finite=False)

    def _grow(self):
        cap = self._X.shape[0]
        if self._t < cap:
            return
        new = 2 * cap
        X = np.zeros((new, self.d))
        X[:cap] = self._X
        y = np.zeros(new)
        y[:cap] = self._y
        z = np.zeros(new)
        z[:cap] = self._z
        L = np.zeros((new, new))
        L[:cap, :cap] = self._L
        self._X, self._y, self._z, self._L = X, y, z, L
        if self._V is not None:
            V = np.zeros((new, self._V.shape[1]))
            V[:cap] = self._V
            self._V = V

    def _check_dim(self, x):
        x = as_point(x)
        if x.size != self.d:
            raise DimensionError(f"expected a point of dimension {self.d}, got {x.size}")
        return x

    def track(self, grid):
        """Attach a fixed grid whose means and variances are kept up to date on append"""
        self.grid = as_points(grid, d=self.d)
        self._V = np.zeros((self._X.shape[0], self.grid.shape[0]))
        self._refresh_grid()
        return self

    def _refresh_grid(self):
        if self.grid is None:
            return
        t = self._t
        V = self._whiten(kernels.cross_matrix(self.kernel, self.X, self.grid))
        self._V[:t] = V
        self._grid_mean = V.T @ self._z[:t]
        self._grid_var = clamp_variance(kernels.prior_diag(self.kernel, self.grid) - np.sum(V ** 2, axis=0))

    def grid_mean(self):
        return self._grid_mean

    def grid_variance(self):
        return self._grid_var

    def predict(self, points):
        """Posterior means and variances at a batch of points"""
        P = as_points(points, d=self.d)
        V = self._whiten(kernels.cross_matrix(self.kernel, self.X, P))
        mu = V.T @ self._z[:self._t] if self._t else np.zeros(P.shape[0])
        var = kernels.prior_diag(self.kernel, P) - np.sum(V ** 2, axis=0)
        return mu, clamp_variance(var)

    def mean(self, x):
        mu, _ = self.predict(self._check_dim(x)[None, :])
        return float(mu[0])

    def variance(self, x):
        _, var = self.predict(self._check_dim(x)[None, :])
        return float(var[0])

    def std(self, x):
        return float(np.sqrt(self.variance(x)))

    def append(self, x, y, tag='explore', incremental=True):
        """Add one observation; info_gain grows by the pre-append variance at x"""
        x = self._check_dim(x)
        y = float(y)
        self._grow()
        t = self._t
        l = self._whiten(kernels.cross(self.kernel, self.X, x)) if t else np.zeros(0)
        prior = kernels.evaluate(self.kernel, x, x)
        sigma2 = float(clamp_variance(prior - np.dot(l, l)))
        self.info_gain += sigma2
        self.provenance.append(tag)
        self._X[t] = x
        self._y[t] = y

        if not incremental:
            self._t = t + 1
            self.refactorize()
            return self

        diag = np.sqrt(sigma2 + self.lam)
        self._L[t, :t] = l
        self._L[t, t] = diag
        z_new = (y - np.dot(l, self._z[:t])) / diag
        self._z[t] = z_new
        if self.grid is not None:
            k_grid = kernels.cross_matrix(self.kernel, x[None, :], self.grid)[0]
            v_row = (k_grid - l @ self._V[:t]) / diag
            self._V[t] = v_row
            self._grid_mean = self._grid_mean + v_row * z_new
            self._grid_var = clamp_variance(self._grid_var - v_row ** 2)
        self._t = t + 1
        return self

    def refactorize(self):
        """Recompute the factorization and every cache from scratch"""
        t = self._t
        A = kernels.gram(self.kernel, self.X) + self.lam * np.eye(t)
        self._L[:t, :t] = cholesky_with_retry(A) if t else A
        self._z[:t] = self._whiten(self.y)
        self._refresh_grid()

    def dataset_bytes(self):
        """Serialized (X, y) for replica comparisons"""
        return self.X.tobytes() + self.y.tobytes()


def beta(params: ConfidenceParams, lam) -> float:
    """Confidence width B + R sqrt((2 / lambda) log(2 / delta))"""
    return params.B + params.R * np.sqrt((2.0 / lam) * np.log(2.0 / params.delta))


def max_variance_point(gp: GPPosterior, grid):
    """(index, point) of the grid point with the largest posterior variance, lowest index on ties"""
    grid = as_points(grid, d=gp.d)
    if grid.shape[0] == 0:
        raise ValueError("max_variance_point needs a non-empty grid")
    if gp.grid is not None and gp.grid.shape == grid.shape and np.array_equal(gp.grid, grid):
        var = gp.grid_variance()
    else:
        _, var = gp.predict(grid)
    idx = argmax_first(var)
    return idx, grid[idx]


def max_std_bound_check(gp: GPPosterior, grid) -> bool:
    """Whether max_grid sigma_t(x) <= sqrt(12 info_gain / t); meant for max-variance runs with t >= 1"""
    if gp.t < 1:
        raise ValueError("bound is only defined for t >= 1")
    _, var = gp.predict(grid)
    return bool(np.sqrt(np.max(var)) <= np.sqrt(12.0 * gp.info_gain / gp.t))
