"""
SVG figures for kerncollab results
"""

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed element ids and no timestamp, so reruns produce identical files
matplotlib.rcParams['svg.hashsalt'] = 'kerncollab'
# Keep labels as <text> elements
matplotlib.rcParams['svg.fonttype'] = 'none'
_METADATA = {'Date': None}


def _save(fig, path):
    fig.savefig(path, format='svg', metadata=_METADATA)
    plt.close(fig)


def plot_regret(path, record):
    """Mean cumulative regret across Monte Carlo runs with a one standard-error band"""
    mean = record.mean_curve()
    stderr = record.stderr_curve()
    rounds = np.arange(1, mean.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, mean, label=record.policy)
    ax.fill_between(rounds, mean - stderr, mean + stderr, alpha=0.3)
    ax.set_xlabel('round')
    ax.set_ylabel('cumulative regret')
    ax.legend()
    _save(fig, path)


def plot_compare(path, table):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in table.columns.items():
        ax.plot(table.rounds, curve, label=name)
    ax.set_xlabel('round')
    ax.set_ylabel('cumulative regret')
    ax.legend()
    _save(fig, path)


def plot_sweep(path, rows):
    """Regret inflation against communication reduction, one marker per q0"""
    finite = [row for row in rows if np.isfinite(row.cost_ratio) and np.isfinite(row.regret_ratio)]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([row.cost_ratio for row in finite], [row.regret_ratio for row in finite], marker='o')
    for row in finite:
        ax.annotate(f"q0={row.q0:g}", (row.cost_ratio, row.regret_ratio), fontsize=7)
    ax.set_xlabel('communication reduction (CEPE / S-CEPE)')
    ax.set_ylabel('regret ratio (S-CEPE / CEPE)')
    _save(fig, path)
