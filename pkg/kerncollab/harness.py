"""
Experiment driver for kerncollab

A Simulation owns one seeded problem instance, one policy and one star
network and advances them a round at a time. run_experiment repeats that
over Monte Carlo seeds, compare lines several policies up on the same
instances and sweep_inducing trades S-CEPE's inducing budget off against
CEPE.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from kerncollab.constants import (ROUNDS_HEADER, STREAM_NOISE, SUMMARY_HEADER, SWEEP_HEADER,
                                  CostModel, Policy)
from kerncollab.exceptions import ConfigError
from kerncollab.network import StarNetwork, total_cost
from kerncollab.plotting import plot_regret
from kerncollab.policies import CEPEPolicy, GreedyAcquisitionPolicy, SCEPEPolicy
from kerncollab.utils import make_stream, mean_and_stderr

logger = logging.getLogger(__name__)

# Parameters that must agree for policies to be compared on the same instances
_SHARED_KEYS = ('seed', 'T', 'K', 'grid_size', 'mc_runs', 'benchmark', 'noise_var')


def scepe_explore_rounds(schedule):
    """max(1, floor(N_T)), tolerant of round-off in a pinned N_T"""
    return max(1, int(math.floor(schedule.n_T + 1e-9)))


def build_policy(config, instance, seed):
    policy = Policy(config.policy)
    if policy is Policy.CEPE:
        return CEPEPolicy(instance, config.schedule())
    if policy is Policy.SCEPE:
        return SCEPEPolicy(
            instance,
            n_explore=scepe_explore_rounds(config.schedule()),
            q0=config.resolved_q0(),
            T=config.T,
            inducing_streams=config.inducing_streams(seed),
            comm_cap=config.comm_rounds,
        )
    return GreedyAcquisitionPolicy(
        instance, policy, B=config.B, R=config.R, delta=config.delta,
        ei_epsilon=config.ei_epsilon, pi_xi=config.pi_xi,
    )


@dataclass
class RunRecord:
    """One Monte Carlo run; per-round arrays are indexed [t - 1, client]"""
    policy: str
    seed: int
    query_index: np.ndarray
    reward: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    comm_curve: np.ndarray
    ledger: dict
    explored: int = 0
    inducing_sizes: List[int] = field(default_factory=list)
    phase_lengths: tuple = ()

    @property
    def T(self):
        return int(self.query_index.shape[0])

    @property
    def K(self):
        return int(self.query_index.shape[1])

    @property
    def final_regret(self):
        return float(self.cum_regret[-1])

    @property
    def comm_total(self):
        return int(self.ledger['total'])


@dataclass
class ExperimentRecord:
    config: object
    runs: List[RunRecord]

    @property
    def policy(self):
        return self.config.policy

    def mean_curve(self):
        return np.mean([run.cum_regret for run in self.runs], axis=0)

    def stderr_curve(self):
        curves = np.array([run.cum_regret for run in self.runs])
        if len(self.runs) < 2:
            return np.zeros(curves.shape[1])
        return curves.std(axis=0, ddof=1) / np.sqrt(len(self.runs))

    def final_regret(self):
        return mean_and_stderr([run.final_regret for run in self.runs])

    def comm_total(self):
        return float(np.mean([run.comm_total for run in self.runs]))


class Simulation:
    """Barrier-synchronized rounds: select, observe, upload, broadcast, ingest"""

    def __init__(self, config, seed):
        self.config = config
        self.seed = int(seed)
        self.instance = config.instance(self.seed)
        self.policy = build_policy(config, self.instance, self.seed)
        self.network = StarNetwork(config.K, CostModel(config.cost_model))
        self.noise = [make_stream(self.seed, STREAM_NOISE, i) for i in range(config.K)]
        self.t = 0
        T, K = config.T, config.K
        self.query_index = np.zeros((T, K), dtype=np.int64)
        self.reward = np.zeros((T, K))
        self.inst_regret = np.zeros((T, K))

    def update(self):
        """Play one round for every client"""
        inst = self.instance
        t = self.t + 1
        # every client picks before any observation is drawn
        phase = self.policy.phase(t)
        queries = self.policy.select(t)
        # noisy personalized rewards, one stream per client
        rewards = [inst.observe_index(i, q.index, self.noise[i]) for i, q in enumerate(queries)]
        # uploads go through the server, then everyone ingests
        envelopes = self.policy.feedback(t, queries, rewards)
        deliveries = self.network.broadcast_round(envelopes, phase)
        self.policy.deliver(deliveries)

        # regret uses the noiseless f_i
        idx = np.array([q.index for q in queries], dtype=np.int64)
        self.query_index[t - 1] = idx
        self.reward[t - 1] = rewards
        self.inst_regret[t - 1] = inst.opt_value - inst.f_values[np.arange(inst.K), idx]
        self.t = t
        logger.debug("round %d (%s): %d uploads, regret %.4f", t, phase.value, len(envelopes),
                     float(self.inst_regret[t - 1].sum()))

    def run(self):
        while self.t < self.config.T:
            self.update()
        return self.record()

    def record(self):
        policy = self.policy
        explored, sizes, phases = 0, [], ()
        if isinstance(policy, CEPEPolicy):
            explored = policy.explored_rounds
        elif isinstance(policy, SCEPEPolicy):
            explored = policy.phase_lengths()[0]
            sizes = [s.inducing.size for s in policy.clients if s.inducing is not None]
            phases = policy.phase_lengths()
        return RunRecord(
            policy=self.config.policy,
            seed=self.seed,
            query_index=self.query_index[:self.t].copy(),
            reward=self.reward[:self.t].copy(),
            inst_regret=self.inst_regret[:self.t].copy(),
            cum_regret=np.cumsum(self.inst_regret[:self.t].sum(axis=1)),
            comm_curve=np.array(self.network.ledger.history, dtype=np.int64),
            ledger=self.network.ledger.snapshot(),
            explored=explored,
            inducing_sizes=sizes,
            phase_lengths=phases,
        )


def run_single(config, seed) -> RunRecord:
    sim = Simulation(config, seed)
    record = sim.run()
    logger.info("%s seed %d: final regret %.4f, %d scalars communicated",
                config.policy, seed, record.final_regret, total_cost(sim.network.ledger))
    return record


def _run_args(args):
    return run_single(*args)


def run_experiment(config) -> ExperimentRecord:
    """mc_runs independent runs with seeds seed + 0 .. seed + mc_runs - 1"""
    config = config.validate()
    jobs = [(config, config.seed + r) for r in range(config.mc_runs)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(_run_args, jobs))
    else:
        runs = [run_single(*job) for job in jobs]
    return ExperimentRecord(config=config, runs=runs)


@dataclass
class ComparisonTable:
    rounds: np.ndarray
    columns: Dict[str, np.ndarray]
    records: Dict[str, ExperimentRecord]


def compare(configs) -> ComparisonTable:
    """Mean cumulative-regret curve per policy over shared instances"""
    configs = list(configs)
    if not configs:
        raise ConfigError("compare needs at least one config")
    reference = configs[0]
    for other in configs[1:]:
        for key in _SHARED_KEYS:
            if getattr(other, key) != getattr(reference, key):
                raise ConfigError(f"compared configs disagree on {key}: "
                                  f"{getattr(reference, key)!r} vs {getattr(other, key)!r}")
    records = {}
    for config in configs:
        if config.policy in records:
            raise ConfigError(f"policy {config.policy} listed twice")
        records[config.policy] = run_experiment(config)
    return ComparisonTable(
        rounds=np.arange(1, reference.T + 1),
        columns={name: rec.mean_curve() for name, rec in records.items()},
        records=records,
    )


@dataclass
class SweepRow:
    q0: float
    inducing_total: float
    comm_scepe: float
    comm_cepe: float
    regret_scepe: float
    regret_cepe: float

    @property
    def regret_ratio(self):
        return self.regret_scepe / self.regret_cepe if self.regret_cepe > 0 else math.inf

    @property
    def cost_ratio(self):
        return self.comm_cepe / self.comm_scepe if self.comm_scepe > 0 else math.inf

    def as_row(self):
        return [self.q0, self.inducing_total, self.comm_scepe, self.comm_cepe, self.regret_scepe,
                self.regret_cepe, self.regret_ratio, self.cost_ratio]


def sweep_inducing(config, q0_list) -> List[SweepRow]:
    """S-CEPE at each q0 against one CEPE reference sharing the schedule"""
    cepe = run_experiment(config.replace(policy=Policy.CEPE.value))
    comm_cepe = cepe.comm_total()
    regret_cepe = cepe.final_regret()[0]
    rows = []
    for q0 in q0_list:
        scepe = run_experiment(config.replace(policy=Policy.SCEPE.value, q0=float(q0)))
        row = SweepRow(
            q0=float(q0),
            inducing_total=float(np.mean([sum(run.inducing_sizes) for run in scepe.runs])),
            comm_scepe=scepe.comm_total(),
            comm_cepe=comm_cepe,
            regret_scepe=scepe.final_regret()[0],
            regret_cepe=regret_cepe,
        )
        if row.comm_scepe == 0:
            logger.warning("q0=%g: S-CEPE communicated nothing, cost ratio is infinite", q0)
        logger.info("q0=%g: regret ratio %.3f, cost ratio %.3f", q0, row.regret_ratio, row.cost_ratio)
        rows.append(row)
    return rows


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_rounds_csv(path, record: RunRecord):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(ROUNDS_HEADER)
        for t in range(record.T):
            for i in range(record.K):
                writer.writerow([
                    t + 1, i, int(record.query_index[t, i]), _fmt(record.reward[t, i]),
                    _fmt(record.inst_regret[t, i]), _fmt(record.cum_regret[t]), int(record.comm_curve[t]),
                ])


def write_summary_csv(path, records):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SUMMARY_HEADER)
        for rec in records:
            mean, stderr = rec.final_regret()
            cfg = rec.config
            writer.writerow([cfg.policy, cfg.T, cfg.K, cfg.seed, _fmt(mean), _fmt(stderr), _fmt(rec.comm_total())])


def write_compare_csv(path, table: ComparisonTable):
    names = list(table.columns)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['round'] + names)
        for t, r in enumerate(table.rounds):
            writer.writerow([int(r)] + [_fmt(table.columns[name][t]) for name in names])


def write_sweep_csv(path, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([_fmt(v) for v in row.as_row()])


def write_run_outputs(record: ExperimentRecord, out_dir):
    """<policy>_run<r>.csv per run, summary.csv and <policy>.svg"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r, run in enumerate(record.runs):
        path = out / f"{record.policy}_run{r}.csv"
        write_rounds_csv(path, run)
        paths.append(path)
    write_summary_csv(out / 'summary.csv', [record])
    plot_regret(out / f"{record.policy}.svg", record)
    return paths + [out / 'summary.csv', out / f"{record.policy}.svg"]
