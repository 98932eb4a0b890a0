"""
Decision policies for kerncollab

CEPE interleaves max-variance exploration rounds (broadcast to everyone)
with personalized-mean exploitation rounds (silent). S-CEPE explores up
front, compresses each client's posterior mean into (inducing point, weight)
pairs, broadcasts those during a communication phase and then exploits a
fixed point. The IGP-UCB / GP-EI / GP-PI baselines act greedily every round
with every sample broadcast.

A round is barrier-synchronized: every client selects, every client
observes, uploads go through the server, every client ingests.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy.stats import norm

from kerncollab.constants import IntentKind, PayloadKind, Phase, Policy
from kerncollab.exceptions import ProtocolError, ScheduleError
from kerncollab.gp_exact import GPPosterior, max_variance_point
from kerncollab.gp_sparse import (InducingModel, approx_mean_batch, comm_phase_length,
                                  fit_weights, sample_inducing)
from kerncollab.network import Envelope
from kerncollab.utils import argmax_first, as_points

logger = logging.getLogger(__name__)

_PHASE_ORDER = {Phase.EXPLORE: 0, Phase.COMMUNICATE: 1, Phase.EXPLOIT: 2}


def default_rate(t, kappa, delta0):
    """t^{2/(3-kappa)} (log(t/delta0))^{1/3}"""
    return t ** (2.0 / (3.0 - kappa)) * math.log(t / delta0) ** (1.0 / 3.0)


class EpochSchedule:
    """Deterministic explore/exploit interleaving driven by a non-decreasing N_t"""

    def __init__(self, n_of_t: Callable[[int], float], T):
        self.n_of_t = n_of_t
        self.T = int(T)
        previous = None
        for t in range(1, self.T + 1):
            value = float(n_of_t(t))
            if not value > 0:
                raise ScheduleError(f"N_t must be positive, N_{t} = {value}")
            if previous is not None and value < previous:
                raise ScheduleError(f"N_t must be non-decreasing, N_{t - 1} = {previous} > N_{t} = {value}")
            previous = value
        if previous < 1:
            logger.warning("degenerate schedule: N_T = %g < 1, only round 1 will explore", previous)
        self.explored = []
        self._last_t = 0
        self._last_decision = False

    @classmethod
    def default(cls, T, c=1.0, kappa=0.05, delta0=1e-3):
        """N_t = c t^{2/(3-kappa)} (log(t/delta0))^{1/3}"""
        return cls(lambda t: c * default_rate(t, kappa, delta0), T)

    @classmethod
    def targeting(cls, T, n_explore, kappa=0.05, delta0=1e-3):
        """Default shape with c chosen so that N_T = n_explore"""
        c = n_explore / default_rate(T, kappa, delta0)
        return cls.default(T, c=c, kappa=kappa, delta0=delta0)

    def n(self, t):
        return float(self.n_of_t(t))

    @property
    def n_T(self):
        return self.n(self.T)

    def is_exploration_round(self, t):
        """True iff |A(t)| < N_t; a true round is recorded in A. Repeating the current t is idempotent."""
        if t < 1:
            raise ScheduleError(f"rounds start at 1, got {t}")
        if t == self._last_t:
            return self._last_decision
        if t < self._last_t:
            raise ScheduleError(f"round {t} requested after round {self._last_t}")
        explore = len(self.explored) < self.n(t)
        if explore:
            self.explored.append(t)
        self._last_t = t
        self._last_decision = explore
        return explore


@dataclass(frozen=True)
class CommIntent:
    kind: IntentKind
    pair: Optional[tuple] = None


SILENT = CommIntent(IntentKind.SILENT)


@dataclass(frozen=True)
class Query:
    index: int
    point: np.ndarray
    intent: CommIntent = SILENT


class ReplicaSet:
    """
    Peer posteriors rebuilt from broadcast samples.

    Every client receives the same envelopes, so the replicas are identical
    across clients and a single copy is held; each envelope is ingested once
    no matter how many clients hand it over.
    """

    def __init__(self, K, kernel, lam, d, grid=None):
        self.gps = [GPPosterior(kernel, lam, d, grid=grid) for _ in range(K)]
        self._seen = set()

    def ingest(self, envelope, tag):
        key = (envelope.round, envelope.sender)
        if key in self._seen:
            return
        self._seen.add(key)
        self.gps[envelope.sender].append(envelope.point, envelope.value, tag=tag)


@dataclass
class ClientState:
    id: int
    alpha: float
    K: int
    own_gp: GPPosterior
    peer_gps: Dict[int, GPPosterior] = field(default_factory=dict)
    bound_B: float = 15.0
    store: Optional[ReplicaSet] = None
    inducing: Optional[InducingModel] = None
    peer_models: Dict[int, InducingModel] = field(default_factory=dict)
    mean_cache: dict = field(default_factory=dict)
    phase: Optional[Phase] = None
    comm_cursor: int = 0
    fixed_query: Optional[int] = None
    queried: list = field(default_factory=list)
    received: int = 0

    def receive(self, envelopes, tag='explore'):
        """Ingest one round of broadcast samples into the peer replicas"""
        for env in envelopes:
            if env.payload_kind is not PayloadKind.EXPLORATION_SAMPLE:
                raise ProtocolError(f"client {self.id} cannot ingest {env.payload_kind.value} as a sample")
            self.store.ingest(env, tag)
            self.received += 1

    def peer(self, j):
        try:
            return self.peer_gps[j]
        except KeyError:
            raise ProtocolError(f"client {self.id} has no posterior for peer {j}") from None


def _grid_stats(gp, grid):
    if gp.grid is not None and gp.grid.shape == grid.shape and np.array_equal(gp.grid, grid):
        return gp.grid_mean(), gp.grid_variance()
    return gp.predict(grid)


def _combine(state, own, peer_sum):
    a = state.alpha
    return a * own + ((1.0 - a) / state.K) * peer_sum


def personalized_mean_grid(state: ClientState, grid) -> np.ndarray:
    """alpha mu_i + ((1 - alpha)/K) sum_j mu_j over a batch of points (own term appears in both)"""
    grid = as_points(grid, d=state.own_gp.d)
    total = np.zeros(grid.shape[0])
    for j in range(state.K):
        total = total + _grid_stats(state.peer(j), grid)[0]
    return _combine(state, _grid_stats(state.peer(state.id), grid)[0], total)


def personalized_std_grid(state: ClientState, grid) -> np.ndarray:
    """alpha sigma_i + ((1 - alpha)/K) sum_j sigma_j"""
    grid = as_points(grid, d=state.own_gp.d)
    total = np.zeros(grid.shape[0])
    for j in range(state.K):
        total = total + np.sqrt(_grid_stats(state.peer(j), grid)[1])
    return _combine(state, np.sqrt(_grid_stats(state.peer(state.id), grid)[1]), total)


def personalized_mean(state: ClientState, x) -> float:
    return float(personalized_mean_grid(state, as_points(x, d=state.own_gp.d))[0])


def cepe_query(state: ClientState, sched: EpochSchedule, t, grid) -> Query:
    """Max-variance exploration with upload, or silent personalized-mean exploitation"""
    grid = as_points(grid, d=state.own_gp.d)
    if sched.is_exploration_round(t):
        idx, point = max_variance_point(state.own_gp, grid)
        return Query(idx, point, CommIntent(IntentKind.UPLOAD_SAMPLE))
    idx = argmax_first(personalized_mean_grid(state, grid))
    return Query(idx, grid[idx], SILENT)


def _approx_grid_mean(state, model, grid):
    key = (id(model), grid.shape, grid.tobytes())
    if key not in state.mean_cache:
        state.mean_cache[key] = approx_mean_batch(model, grid)
    return state.mean_cache[key]


def scepe_query(state: ClientState, phase: Phase, t, grid) -> Query:
    """One S-CEPE decision; phases must arrive in Explore -> Communicate -> Exploit order"""
    grid = as_points(grid, d=state.own_gp.d)
    if state.phase is not None and _PHASE_ORDER[phase] < _PHASE_ORDER[state.phase]:
        raise ScheduleError(f"client {state.id}: {phase.value} phase requested after {state.phase.value}")
    state.phase = phase

    if phase is Phase.EXPLORE:
        # local max-variance, nothing leaves the client
        idx, point = max_variance_point(state.own_gp, grid)
        return Query(idx, point, SILENT)

    if phase is Phase.COMMUNICATE:
        if state.inducing is None or state.inducing.w is None:
            raise ProtocolError(f"client {state.id} entered communication without fitted weights")
        # play the local mean argmax while streaming one (z, w) pair per round
        mu, _ = _grid_stats(state.own_gp, grid)
        idx = argmax_first(mu)
        intent = SILENT
        if state.comm_cursor < state.inducing.size:
            intent = CommIntent(IntentKind.UPLOAD_INDUCING, state.inducing.pairs()[state.comm_cursor])
            state.comm_cursor += 1
        return Query(idx, grid[idx], intent)

    # exploit: chosen once from the approximate personalized mean, then repeated
    if state.fixed_query is None:
        total = np.zeros(grid.shape[0])
        for j in range(state.K):
            model = state.inducing if j == state.id else state.peer_models.get(j)
            if model is None:
                raise ProtocolError(f"client {state.id} has no inducing model for peer {j}")
            total = total + _approx_grid_mean(state, model, grid)
        own = _approx_grid_mean(state, state.inducing, grid)
        state.fixed_query = argmax_first(_combine(state, own, total))
    return Query(state.fixed_query, grid[state.fixed_query], SILENT)


def ucb_scores(mu, sigma, beta_t):
    return np.asarray(mu) + beta_t * np.asarray(sigma)


def ei_scores(mu, sigma, f_star, eps=0.01):
    """(mu - f* - eps) Phi(z) + sigma phi(z); max(0, mu - f* - eps) where sigma = 0"""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    improve = mu - f_star - eps
    positive = sigma > 0
    safe = np.where(positive, sigma, 1.0)
    z = improve / safe
    value = improve * norm.cdf(z) + safe * norm.pdf(z)
    return np.where(positive, value, np.maximum(improve, 0.0))


def pi_scores(mu, sigma, f_star, xi=0.01):
    """Phi((mu - f* - xi) / sigma); the indicator of improvement where sigma = 0"""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    improve = mu - f_star - xi
    positive = sigma > 0
    safe = np.where(positive, sigma, 1.0)
    return np.where(positive, norm.cdf(improve / safe), (improve > 0).astype(float))


def _point_stats(state, x):
    x = as_points(x, d=state.own_gp.d)
    return float(personalized_mean_grid(state, x)[0]), float(personalized_std_grid(state, x)[0])


def incumbent(state: ClientState, mu_grid=None, grid=None) -> float:
    """f*: best personalized mean over the client's past queries; the prior mean 0 before any"""
    if not state.queried:
        return 0.0
    if mu_grid is None:
        mu_grid = personalized_mean_grid(state, grid)
    return float(np.max(np.asarray(mu_grid)[state.queried]))


def ucb_acquisition(state: ClientState, x, beta_t) -> float:
    mu, sigma = _point_stats(state, x)
    return float(ucb_scores(mu, sigma, beta_t))


def ei_acquisition(state: ClientState, x, f_star, eps=0.01) -> float:
    mu, sigma = _point_stats(state, x)
    return float(ei_scores(mu, sigma, f_star, eps))


def pi_acquisition(state: ClientState, x, f_star, xi=0.01) -> float:
    mu, sigma = _point_stats(state, x)
    return float(pi_scores(mu, sigma, f_star, xi))


def igp_ucb_beta(t, B, R, delta):
    """B + R sqrt(2 (gamma_{t-1} + 1 + log(1/delta))) with gamma_{t-1} = log(t - 1)"""
    gamma = math.log(max(t - 1, 1))
    return B + R * math.sqrt(2.0 * (gamma + 1.0 + math.log(1.0 / delta)))


class CEPEPolicy:
    name = Policy.CEPE

    def __init__(self, instance, schedule):
        self.instance = instance
        self.schedule = schedule
        self.grid = instance.grid
        self.store = ReplicaSet(instance.K, instance.kernel, instance.lam, instance.d, grid=self.grid)
        self.clients = [
            ClientState(
                id=i, alpha=float(instance.alpha[i]), K=instance.K,
                own_gp=self.store.gps[i],
                peer_gps={j: self.store.gps[j] for j in range(instance.K)},
                bound_B=instance.bound_B, store=self.store,
            )
            for i in range(instance.K)
        ]

    def phase(self, t):
        return Phase.EXPLORE if self.schedule.is_exploration_round(t) else Phase.EXPLOIT

    def select(self, t):
        return [cepe_query(state, self.schedule, t, self.grid) for state in self.clients]

    def feedback(self, t, queries, rewards):
        """Uploads for this round; exploitation observations are never kept"""
        return [
            Envelope(t, state.id, PayloadKind.EXPLORATION_SAMPLE, q.point, y)
            for state, q, y in zip(self.clients, queries, rewards)
            if q.intent.kind is IntentKind.UPLOAD_SAMPLE
        ]

    def deliver(self, deliveries):
        for state in self.clients:
            state.receive(deliveries[state.id], tag='explore')

    @property
    def explored_rounds(self):
        return len(self.schedule.explored)


class SCEPEPolicy:
    name = Policy.SCEPE

    def __init__(self, instance, n_explore, q0, T, inducing_streams, comm_cap=None):
        self.instance = instance
        self.grid = instance.grid
        self.T = int(T)
        self.n_explore = min(int(n_explore), self.T)
        self.q0 = float(q0)
        self.inducing_streams = inducing_streams
        self.comm_cap = None if comm_cap is None else int(comm_cap)  # optional ceiling on N_T^(c)
        self.comm_length = None
        self._peers_built = False
        self._received = {j: [] for j in range(instance.K)}
        self._seen = set()
        shared_cache = {}
        self.clients = [
            ClientState(
                id=i, alpha=float(instance.alpha[i]), K=instance.K,
                own_gp=GPPosterior(instance.kernel, instance.lam, instance.d, grid=self.grid),
                bound_B=instance.bound_B, mean_cache=shared_cache,
            )
            for i in range(instance.K)
        ]

    def _prepare_communication(self):
        for state in self.clients:
            model = sample_inducing(state.own_gp, self.q0, self.inducing_streams[state.id])
            state.inducing = fit_weights(model)
        gamma_hat = max(state.own_gp.info_gain for state in self.clients)
        bound = comm_phase_length(self.q0, self.instance.lam, gamma_hat)
        # only the horizon bounds the phase unless a ceiling was asked for
        length = min(bound, self.T - self.n_explore)
        if self.comm_cap is not None:
            length = min(length, self.comm_cap)
        self.comm_length = max(0, length)
        sizes = [state.inducing.size for state in self.clients]
        if max(sizes) > self.comm_length:
            logger.warning("communication phase of %d rounds cannot carry inducing sets up to %d",
                           self.comm_length, max(sizes))
        logger.info("S-CEPE: inducing sets %s, communication phase %d rounds", sizes, self.comm_length)

    def _build_peer_models(self):
        inst = self.instance
        models = {}
        for j, pairs in self._received.items():
            expected = self.clients[j].inducing.size
            if len(pairs) < expected:
                logger.warning("only %d of %d inducing pairs from client %d arrived", len(pairs), expected, j)
            z = [p for p, _ in pairs]
            w = [v for _, v in pairs]
            models[j] = InducingModel.from_broadcast(z, w, inst.kernel, inst.lam, inst.d)
        for state in self.clients:
            state.peer_models = dict(models)
        self._peers_built = True

    def phase(self, t):
        if t <= self.n_explore:
            return Phase.EXPLORE
        if self.comm_length is None:
            self._prepare_communication()
        if t <= self.n_explore + self.comm_length:
            return Phase.COMMUNICATE
        if not self._peers_built:
            self._build_peer_models()
        return Phase.EXPLOIT

    def select(self, t):
        phase = self.phase(t)
        return [scepe_query(state, phase, t, self.grid) for state in self.clients]

    def feedback(self, t, queries, rewards):
        phase = self.phase(t)
        if phase is Phase.EXPLORE:
            for state, q, y in zip(self.clients, queries, rewards):
                state.own_gp.append(q.point, y, tag='explore')
            return []
        return [
            Envelope(t, state.id, PayloadKind.INDUCING_PAIR, q.intent.pair[0], q.intent.pair[1])
            for state, q in zip(self.clients, queries)
            if q.intent.kind is IntentKind.UPLOAD_INDUCING
        ]

    def deliver(self, deliveries):
        for state in self.clients:
            for env in deliveries[state.id]:
                state.received += 1
                key = (env.round, env.sender)
                if key in self._seen:
                    continue
                self._seen.add(key)
                self._received[env.sender].append((np.asarray(env.point, dtype=float), float(env.value)))

    def phase_lengths(self):
        comm = self.comm_length or 0
        explore = min(self.n_explore, self.T)
        comm = min(comm, self.T - explore)
        return explore, comm, self.T - explore - comm

    def inducing_total(self):
        return sum(state.inducing.size for state in self.clients if state.inducing is not None)


class GreedyAcquisitionPolicy:
    """IGP-UCB, GP-EI or GP-PI on the personalized surrogate, with every sample broadcast"""

    def __init__(self, instance, kind, B=15.0, R=0.01, delta=1e-3, ei_epsilon=0.01, pi_xi=0.01):
        if kind not in (Policy.IGPUCB, Policy.GPEI, Policy.GPPI):
            raise ValueError(f"not an acquisition baseline: {kind}")
        self.name = kind
        self.instance = instance
        self.grid = instance.grid
        self.B, self.R, self.delta = B, R, delta
        self.ei_epsilon, self.pi_xi = ei_epsilon, pi_xi
        self.store = ReplicaSet(instance.K, instance.kernel, instance.lam, instance.d, grid=self.grid)
        self.clients = [
            ClientState(
                id=i, alpha=float(instance.alpha[i]), K=instance.K,
                own_gp=self.store.gps[i],
                peer_gps={j: self.store.gps[j] for j in range(instance.K)},
                bound_B=B, store=self.store,
            )
            for i in range(instance.K)
        ]

    def phase(self, t):
        return Phase.GREEDY

    def _scores(self, state, t, mu_sum, sigma_sum, sigmas):
        mu = _combine(state, state.own_gp.grid_mean(), mu_sum)
        sigma = _combine(state, sigmas[state.id], sigma_sum)
        if self.name is Policy.IGPUCB:
            return ucb_scores(mu, sigma, igp_ucb_beta(t, self.B, self.R, self.delta))
        f_star = incumbent(state, mu_grid=mu)
        if self.name is Policy.GPEI:
            return ei_scores(mu, sigma, f_star, self.ei_epsilon)
        return pi_scores(mu, sigma, f_star, self.pi_xi)

    def select(self, t):
        # the collaborative sums are identical for every client, so build them once per round
        gps = self.store.gps
        sigmas = [np.sqrt(gp.grid_variance()) for gp in gps]
        mu_sum = np.sum([gp.grid_mean() for gp in gps], axis=0)
        sigma_sum = np.sum(sigmas, axis=0)
        queries = []
        for state in self.clients:
            idx = argmax_first(self._scores(state, t, mu_sum, sigma_sum, sigmas))
            state.queried.append(idx)
            queries.append(Query(idx, self.grid[idx], CommIntent(IntentKind.UPLOAD_SAMPLE)))
        return queries

    def feedback(self, t, queries, rewards):
        return [
            Envelope(t, state.id, PayloadKind.EXPLORATION_SAMPLE, q.point, y)
            for state, q, y in zip(self.clients, queries, rewards)
        ]

    def deliver(self, deliveries):
        for state in self.clients:
            state.receive(deliveries[state.id], tag='greedy')
