"""
Constants and enums for kerncollab
"""

from enum import Enum


class KernelFamily(Enum):
    SQUARED_EXPONENTIAL = 'se'
    MATERN = 'matern'


class Policy(Enum):
    CEPE = 'cepe'
    SCEPE = 'scepe'
    IGPUCB = 'igpucb'
    GPEI = 'gpei'
    GPPI = 'gppi'


class Benchmark(Enum):
    BRANIN = 'branin'
    SOBESTER = 'sobester'


class Phase(Enum):
    EXPLORE = 'explore'
    COMMUNICATE = 'communicate'
    EXPLOIT = 'exploit'
    GREEDY = 'greedy'


class PayloadKind(Enum):
    EXPLORATION_SAMPLE = 'exploration_sample'
    INDUCING_PAIR = 'inducing_pair'


class IntentKind(Enum):
    SILENT = 'silent'
    UPLOAD_SAMPLE = 'upload_sample'
    UPLOAD_INDUCING = 'upload_inducing'


class CostModel(Enum):
    UPLOAD = 'upload'
    PER_RECEIVER = 'per_receiver'


# Half-integer Matern smoothness values with closed forms
MATERN_NU = (0.5, 1.5, 2.5)

# Round-off window for negative posterior variances
VARIANCE_CLAMP = 1e-10

# Diagonal jitter for the single Cholesky retry
CHOLESKY_JITTER = 1e-10

# Information-gain exponent surrogate for the SE kernel (theory: kappa -> 0)
KAPPA_SE = 0.05

# RNG stream tags (first element of the SeedSequence spawn key)
STREAM_INSTANCE = 0
STREAM_NOISE = 1
STREAM_INDUCING = 2

# Fixed CSV schemas
ROUNDS_HEADER = ['round', 'client', 'query_index', 'reward', 'inst_regret',
                 'cum_regret_total', 'comm_scalars_total']
SUMMARY_HEADER = ['policy', 'T', 'K', 'seed', 'final_regret_mean',
                  'final_regret_stderr', 'comm_total']
SWEEP_HEADER = ['q0', 'inducing_total', 'comm_scepe', 'comm_cepe', 'regret_scepe',
                'regret_cepe', 'regret_ratio', 'cost_ratio']

SEED_ENV_VAR = 'KERNCOLLAB_SEED'
