"""
Utility functions for kerncollab
"""

import logging

import numpy as np

from kerncollab.exceptions import DimensionError

# Global flag so repeated CLI invocations in one process don't stack handlers
_logging_configured = False


def setup_logging(level=logging.INFO):
    """Configure the root logger once"""
    global _logging_configured
    if not _logging_configured:
        logging.basicConfig(
            level=level,
            format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        )
        _logging_configured = True
    else:
        logging.getLogger().setLevel(level)


def make_stream(seed, *key):
    """
    Derive an independent generator from (seed, key).

    Streams are keyed, not drawn in sequence, so the numbers a client sees
    do not depend on how many other clients exist or in what order they run.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def as_point(x):
    """Coerce a point to a 1-d float array"""
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


def as_points(X, d=None):
    """Coerce a point list to an (n, d) float array"""
    arr = np.asarray(X, dtype=float)
    if arr.size == 0:
        return np.zeros((0, d if d is not None else 0))
    if arr.ndim == 1:
        # a flat list is a list of scalar points unless a wider d says otherwise
        arr = arr[None, :] if d is not None and d > 1 else arr[:, None]
    if d is not None and arr.shape[1] != d:
        raise DimensionError(f"expected points of dimension {d}, got {arr.shape[1]}")
    return arr


def argmax_first(values):
    """Index of the maximum, lowest index on ties"""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("argmax of an empty sequence")
    return int(np.argmax(values))


def mean_and_stderr(samples):
    """Sample mean and standard error (0 for a single sample)"""
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / np.sqrt(samples.size))
