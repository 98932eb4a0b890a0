"""
Positive-definite kernels for kerncollab

Both families are normalized (k(x, x) = 1). The squared-exponential
convention is exp(-|x - x'|^2 / (2 l^2)); Matern is available only for the
half-integer smoothness values that have closed forms.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from kerncollab.constants import KernelFamily, MATERN_NU
from kerncollab.exceptions import ConfigError, DimensionError
from kerncollab.utils import as_point, as_points

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL
    lengthscale: float = 0.2
    nu: Optional[float] = None

    def __post_init__(self):
        if not self.lengthscale > 0:
            raise ConfigError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.family is KernelFamily.MATERN:
            try:
                nu = float(self.nu)
            except (TypeError, ValueError):
                nu = None
            if nu not in MATERN_NU:
                raise ConfigError(f"Matern smoothness must be one of {MATERN_NU}, got {self.nu}")
            # stored as a plain float
            object.__setattr__(self, 'nu', nu)
        elif self.nu is not None:
            raise ConfigError("smoothness nu only applies to the Matern family")

    def profile(self, sqdist):
        """Kernel value as a function of squared distance"""
        sqdist = np.maximum(sqdist, 0.0)
        if self.family is KernelFamily.SQUARED_EXPONENTIAL:
            return np.exp(-sqdist / (2.0 * self.lengthscale ** 2))
        r = np.sqrt(sqdist) / self.lengthscale
        if self.nu == 0.5:
            return np.exp(-r)
        if self.nu == 1.5:
            return (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
        return (1.0 + _SQRT5 * r + 5.0 * r ** 2 / 3.0) * np.exp(-_SQRT5 * r)

    def info_gain_exponent(self, d):
        """kappa = d / (2 nu + d) for Matern; None for SE (theory gives kappa -> 0)"""
        if self.family is KernelFamily.MATERN:
            return d / (2.0 * self.nu + d)
        return None


def evaluate(spec: KernelSpec, x, x_prime) -> float:
    """k(x, x') for a single pair of points"""
    a, b = as_point(x), as_point(x_prime)
    if a.shape != b.shape:
        raise DimensionError(f"points have dimension {a.size} and {b.size}")
    diff = a - b
    return float(spec.profile(np.dot(diff, diff)))


def gram(spec: KernelSpec, X) -> np.ndarray:
    """n x n Gram matrix; each unordered pair is evaluated once so the result is exactly symmetric"""
    X = as_points(X)
    n = X.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if n == 1:
        return np.ones((1, 1))
    return squareform(spec.profile(pdist(X, 'sqeuclidean')), checks=False) + np.eye(n)


def cross(spec: KernelSpec, X, x) -> np.ndarray:
    """Vector [k(X_1, x), ..., k(X_n, x)]"""
    x = as_point(x)
    X = as_points(X, d=x.size)
    if X.shape[0] == 0:
        return np.zeros(0)
    return cross_matrix(spec, X, x[None, :])[:, 0]


def cross_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """|A| x |B| matrix of kernel values"""
    A, B = as_points(A), as_points(B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"point sets have dimension {A.shape[1]} and {B.shape[1]}")
    return spec.profile(cdist(A, B, 'sqeuclidean'))


def prior_diag(spec: KernelSpec, X) -> np.ndarray:
    """k(x, x) for every x; identically 1 for the normalized families"""
    return np.ones(as_points(X).shape[0])
