"""
Configuration management for kerncollab experiments

Experiments are described by a flat set of keys. A config file is INI
("key = value" under any [section] header); sections are flattened and any
key missing from the file is taken from DEFAULT_CONFIG.
"""

import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from kerncollab.constants import (KAPPA_SE, MATERN_NU, SEED_ENV_VAR, Benchmark, CostModel,
                                  KernelFamily, Policy, STREAM_INDUCING)
from kerncollab.exceptions import ConfigError
from kerncollab.gp_sparse import default_q0
from kerncollab.kernels import KernelSpec
from kerncollab.policies import EpochSchedule
from kerncollab.problem import default_instance
from kerncollab.utils import make_stream

logger = logging.getLogger(__name__)

# Desk-scale defaults (can be overridden by config file or flags)
DEFAULT_CONFIG = {
    'policy': 'cepe',
    'T': 500,  # horizon
    'K': 10,  # number of clients
    'grid_size': 20,  # points per axis of the decision grid
    'mc_runs': 5,
    'seed': 0,
    'kernel': 'se',
    'nu': None,  # Matern smoothness, one of 0.5, 1.5, 2.5
    'lengthscale': 0.2,
    'lam': 0.01,
    'noise_var': 0.01,
    'kappa': None,  # derived from the kernel when unset
    'delta0': 1e-3,
    'schedule_c': 1.0,
    'n_explore': None,  # pins N_T; overrides schedule_c
    'epsilon': 0.5,
    'q0': None,  # default_q0(epsilon, T, K, delta0) when unset
    'comm_rounds': None,  # ceiling on the S-CEPE communication phase; unset = horizon only
    'B': 15.0,
    'R': 0.01,
    'delta': 1e-3,
    'ei_epsilon': 0.01,
    'pi_xi': 0.01,
    'benchmark': 'branin',
    'cost_model': 'upload',
    'out': 'results',
    'workers': 1,
}

FULL_SCALE = {
    'K': 50,
    'T': 2000,
    'grid_size': 30,
}

_INT_KEYS = {'T', 'K', 'grid_size', 'mc_runs', 'seed', 'n_explore', 'comm_rounds', 'workers'}
_STR_KEYS = {'policy', 'kernel', 'benchmark', 'cost_model', 'out'}


def get_config_path(path=None):
    """Explicit path, or kerncollab.ini in the working directory"""
    if path is not None:
        return Path(path)
    return Path.cwd() / 'kerncollab.ini'


def _coerce(key, raw):
    if key not in DEFAULT_CONFIG:
        raise ConfigError(f"unknown config key '{key}'")
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw == '' or raw.lower() == 'none':
            return None
    if key in _STR_KEYS:
        return str(raw).lower()
    try:
        if key in _INT_KEYS:
            try:
                return int(str(raw))
            except ValueError:
                value = float(raw)
                if not value.is_integer():
                    raise
                return int(value)
        return float(raw)
    except (TypeError, ValueError):
        kind = 'an integer' if key in _INT_KEYS else 'a number'
        raise ConfigError(f"'{key}' must be {kind}, got {raw!r}") from None


def read_config_file(path):
    """Flattened, coerced key/value pairs from an INI file"""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path, 'r') as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config file {path}: {e}") from e
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            values[key] = _coerce(key, raw)
    return values


def load_config(path=None, full_scale=False, overrides=None):
    """
    Merge defaults < full scale < config file < overrides.

    The seed falls back to the KERNCOLLAB_SEED environment variable when
    neither the file nor the overrides set it.
    """
    config = DEFAULT_CONFIG.copy()
    if full_scale:
        config.update(FULL_SCALE)

    config_path = get_config_path(path)
    from_file = {}
    if config_path.exists():
        from_file = read_config_file(config_path)
        logger.debug("loaded %d keys from %s", len(from_file), config_path)
    elif path is not None:
        raise ConfigError(f"config file {config_path} does not exist")
    config.update(from_file)

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if 'seed' not in overrides and 'seed' not in from_file and os.environ.get(SEED_ENV_VAR):
        config['seed'] = _coerce('seed', os.environ[SEED_ENV_VAR])
    for key, value in overrides.items():
        config[key] = _coerce(key, value)
    return config


def save_config(config, path):
    """Write a flat config as a single [experiment] section"""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser['experiment'] = {key: '' if value is None else str(value) for key, value in config.items()}
    with open(path, 'w') as f:
        parser.write(f)


@dataclass(frozen=True)
class ExperimentConfig:
    policy: str = 'cepe'
    T: int = 500
    K: int = 10
    grid_size: int = 20
    mc_runs: int = 5
    seed: int = 0
    kernel: str = 'se'
    nu: Optional[float] = None
    lengthscale: float = 0.2
    lam: float = 0.01
    noise_var: float = 0.01
    kappa: Optional[float] = None
    delta0: float = 1e-3
    schedule_c: float = 1.0
    n_explore: Optional[int] = None
    epsilon: float = 0.5
    q0: Optional[float] = None
    comm_rounds: Optional[int] = None
    B: float = 15.0
    R: float = 0.01
    delta: float = 1e-3
    ei_epsilon: float = 0.01
    pi_xi: float = 0.01
    benchmark: str = 'branin'
    cost_model: str = 'upload'
    out: str = 'results'
    workers: int = 1

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")
        values = {key: _coerce(key, value) for key, value in mapping.items()}
        return cls(**values).validate()

    def to_mapping(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()

    def validate(self):
        def need(ok, field_name, accepted):
            if not ok:
                raise ConfigError(f"{field_name} = {getattr(self, field_name)!r} is invalid, expected {accepted}")

        need(self.T >= 1, 'T', 'an integer >= 1')
        need(self.K >= 1, 'K', 'an integer >= 1')
        need(self.mc_runs >= 1, 'mc_runs', 'an integer >= 1')
        need(self.grid_size >= 2, 'grid_size', 'an integer >= 2')
        need(self.workers >= 1, 'workers', 'an integer >= 1')
        need(self.lengthscale > 0, 'lengthscale', 'a number > 0')
        need(self.lam > 0, 'lam', 'a number > 0')
        need(self.noise_var >= 0, 'noise_var', 'a number >= 0')
        need(0 < self.delta0 < 1, 'delta0', 'a number in (0, 1)')
        need(0 < self.delta < 1, 'delta', 'a number in (0, 1)')
        need(0 < self.epsilon < 1, 'epsilon', 'a number in (0, 1)')
        need(self.schedule_c > 0, 'schedule_c', 'a number > 0')
        need(self.B >= 0, 'B', 'a number >= 0')
        need(self.R >= 0, 'R', 'a number >= 0')
        need(self.ei_epsilon >= 0, 'ei_epsilon', 'a number >= 0')
        need(self.pi_xi >= 0, 'pi_xi', 'a number >= 0')
        need(self.kappa is None or 0 <= self.kappa < 1, 'kappa', 'a number in [0, 1)')
        need(self.q0 is None or self.q0 >= 0, 'q0', 'a number >= 0')
        need(self.comm_rounds is None or self.comm_rounds >= 0, 'comm_rounds', 'an integer >= 0')
        need(self.n_explore is None or 1 <= self.n_explore <= self.T, 'n_explore', f'an integer in 1..{self.T}')
        need(self.policy in {p.value for p in Policy}, 'policy', sorted(p.value for p in Policy))
        need(self.kernel in {k.value for k in KernelFamily}, 'kernel', sorted(k.value for k in KernelFamily))
        need(self.benchmark in {b.value for b in Benchmark}, 'benchmark', sorted(b.value for b in Benchmark))
        need(self.cost_model in {c.value for c in CostModel}, 'cost_model', sorted(c.value for c in CostModel))
        if self.kernel == KernelFamily.MATERN.value:
            need(self.nu in MATERN_NU, 'nu', f'one of {MATERN_NU} for the Matern kernel')
        else:
            need(self.nu is None, 'nu', 'unset for the squared-exponential kernel')
        return self

    @property
    def d(self):
        return 2

    def kernel_spec(self):
        return KernelSpec(family=KernelFamily(self.kernel), lengthscale=self.lengthscale, nu=self.nu)

    def resolved_kappa(self):
        """Explicit kappa, else d/(2 nu + d) for Matern and the SE surrogate"""
        if self.kappa is not None:
            return self.kappa
        exponent = self.kernel_spec().info_gain_exponent(self.d)
        return KAPPA_SE if exponent is None else exponent

    def resolved_q0(self):
        if self.q0 is not None:
            return self.q0
        return default_q0(self.epsilon, self.T, self.K, self.delta0)

    def schedule(self):
        if self.n_explore is not None:
            return EpochSchedule.targeting(self.T, self.n_explore, self.resolved_kappa(), self.delta0)
        return EpochSchedule.default(self.T, c=self.schedule_c, kappa=self.resolved_kappa(), delta0=self.delta0)

    def instance(self, seed):
        return default_instance(
            seed, K=self.K, grid_size=self.grid_size, base=Benchmark(self.benchmark),
            noise_var=self.noise_var, kernel=self.kernel_spec(), lam=self.lam, bound_B=self.B,
        )

    def inducing_streams(self, seed):
        return [make_stream(seed, STREAM_INDUCING, i) for i in range(self.K)]
