"""
Problem instances for kerncollab: benchmark observation functions,
personalized mixing, noisy sampling and grid regret oracles
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from kerncollab.constants import Benchmark, STREAM_INSTANCE
from kerncollab.exceptions import ConfigError
from kerncollab.kernels import KernelSpec
from kerncollab.utils import as_points, make_stream


def branin(x, y):
    """Rescaled, sign-flipped Branin on [0, 1]^2 (larger is better)"""
    u = 15.0 * np.asarray(x, dtype=float) - 5.0
    v = 15.0 * np.asarray(y, dtype=float)
    inner = (v - 5.1 * u ** 2 / (4.0 * np.pi ** 2) + 5.0 * u / np.pi - 6.0) ** 2
    value = -(inner + (10.0 - 10.0 / (8.0 * np.pi)) * np.cos(u) - 44.81) / 51.95
    return value if np.ndim(value) else float(value)


def sobester(x, y):
    """Two-dimensional extension of the Forrester/Sobester test function"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    value = (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0) + (6.0 * y - 2.0) ** 2 * np.sin(12.0 * y - 4.0)
    return value if np.ndim(value) else float(value)


BASE_FUNCTIONS = {
    Benchmark.BRANIN: branin,
    Benchmark.SOBESTER: sobester,
}


@dataclass(frozen=True)
class BenchmarkFamily:
    """Composite member h(x1, x2) = base(x1^i, x2^j)"""
    base: Benchmark
    i: int
    j: int

    def __post_init__(self):
        if self.i not in (1, 2, 3) or self.j not in (1, 2, 3):
            raise ConfigError(f"exponents must be in {{1, 2, 3}}, got ({self.i}, {self.j})")

    @classmethod
    def from_index(cls, base, index):
        """Members are numbered 1..9 row-major over (i, j)"""
        if not 1 <= index <= 9:
            raise ConfigError(f"member index must be in 1..9, got {index}")
        return cls(base, (index - 1) // 3 + 1, (index - 1) % 3 + 1)

    @property
    def index(self):
        return 3 * (self.i - 1) + self.j

    def __call__(self, points):
        P = as_points(points, d=2)
        return BASE_FUNCTIONS[self.base](P[:, 0] ** self.i, P[:, 1] ** self.j)


def uniform_grid(n, d=2):
    """n^d points evenly spaced over [0, 1]^d, first coordinate varying slowest"""
    if n < 2:
        raise ConfigError(f"grid needs at least 2 points per axis, got {n}")
    axes = np.meshgrid(*([np.linspace(0.0, 1.0, n)] * d), indexing='ij')
    return np.stack([a.ravel() for a in axes], axis=1)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    grid: np.ndarray
    members: Tuple[BenchmarkFamily, ...]
    alpha: np.ndarray
    noise_var: float = 0.01
    kernel: KernelSpec = field(default_factory=KernelSpec)
    lam: float = 0.01
    bound_B: float = 15.0
    h_values: np.ndarray = field(init=False, repr=False)
    g_values: np.ndarray = field(init=False, repr=False)
    f_values: np.ndarray = field(init=False, repr=False)
    opt_index: np.ndarray = field(init=False, repr=False)
    opt_value: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if len(self.members) < 1 or len(self.members) != alpha.size:
            raise ConfigError(f"need one alpha per client, got {alpha.size} for {len(self.members)} clients")
        if np.any(alpha <= 0) or np.any(alpha >= 1):
            raise ConfigError("personalization weights must lie strictly inside (0, 1)")
        if self.noise_var < 0:
            raise ConfigError(f"noise variance must be >= 0, got {self.noise_var}")
        grid = as_points(self.grid)
        h = np.stack([member(grid) for member in self.members])
        g = h.mean(axis=0)
        f = alpha[:, None] * h + (1.0 - alpha[:, None]) * g[None, :]
        opt_index = np.argmax(f, axis=1)
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'h_values', h)
        object.__setattr__(self, 'g_values', g)
        object.__setattr__(self, 'f_values', f)
        object.__setattr__(self, 'opt_index', opt_index)
        object.__setattr__(self, 'opt_value', f[np.arange(len(self.members)), opt_index])

    @property
    def K(self):
        return len(self.members)

    @property
    def d(self):
        return int(self.grid.shape[1])

    def h(self, client, x):
        return float(self.members[client](as_points(x, d=self.d))[0])

    def g(self, x):
        return float(np.mean([self.h(i, x) for i in range(self.K)]))

    def f(self, client, x):
        a = self.alpha[client]
        return float(a * self.h(client, x) + (1.0 - a) * self.g(x))

    def optimum(self, client):
        """(x_i*, f_i(x_i*)) over the grid"""
        idx = int(self.opt_index[client])
        return self.grid[idx], float(self.opt_value[client])

    def observe_index(self, client, index, rng):
        return float(self.h_values[client, index] + np.sqrt(self.noise_var) * rng.standard_normal())

    def observe(self, client, x, rng):
        """h_i(x) plus Gaussian noise from the client's own stream"""
        return float(self.h(client, x) + np.sqrt(self.noise_var) * rng.standard_normal())

    def instantaneous_regret(self, client, index):
        return float(self.opt_value[client] - self.f_values[client, index])


def observe(inst: ProblemInstance, client, x, rng) -> float:
    return inst.observe(client, x, rng)


def cumulative_regret(inst: ProblemInstance, trace) -> float:
    """Sum over clients, then rounds, of f_i(x_i*) - f_i(x_{i,t}); trace holds grid indices, one row per client"""
    rows = [np.asarray(row, dtype=int) for row in trace]
    if len(rows) != inst.K:
        raise ValueError(f"trace has {len(rows)} clients, instance has {inst.K}")
    lengths = {row.size for row in rows}
    if len(lengths) > 1:
        raise ValueError(f"client traces have different lengths {sorted(lengths)}")
    total = 0.0
    for i, row in enumerate(rows):
        for gap in (inst.opt_value[i] - inst.f_values[i, row]).tolist():
            total += gap
    return total


def default_instance(seed, K=50, grid_size=30, base=Benchmark.BRANIN, noise_var=0.01,
                     kernel=None, lam=0.01, bound_B=15.0) -> ProblemInstance:
    """K clients, alpha ~ U[0.1, 0.9], members uniform over the 9 composites of `base`"""
    rng = make_stream(seed, STREAM_INSTANCE)
    alpha = rng.uniform(0.1, 0.9, size=K)
    indices = rng.integers(1, 10, size=K)
    return ProblemInstance(
        grid=uniform_grid(grid_size, 2),
        members=tuple(BenchmarkFamily.from_index(base, int(k)) for k in indices),
        alpha=alpha,
        noise_var=noise_var,
        kernel=kernel if kernel is not None else KernelSpec(),
        lam=lam,
        bound_B=bound_B,
    )
