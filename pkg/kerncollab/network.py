"""
Simulated star network for kerncollab

Clients upload to the server, which broadcasts every envelope to every
client in the same round. The fabric is synchronous and lossless; the only
thing it measures is how many scalars were communicated.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from kerncollab.constants import CostModel, PayloadKind, Phase
from kerncollab.exceptions import ProtocolError

logger = logging.getLogger(__name__)

# Which payloads each phase may carry
_ALLOWED = {
    Phase.EXPLORE: {PayloadKind.EXPLORATION_SAMPLE},
    Phase.GREEDY: {PayloadKind.EXPLORATION_SAMPLE},
    Phase.COMMUNICATE: {PayloadKind.INDUCING_PAIR},
    Phase.EXPLOIT: set(),
}


@dataclass(frozen=True, eq=False)
class Envelope:
    round: int
    sender: int
    payload_kind: PayloadKind
    point: np.ndarray
    value: float

    @property
    def d(self):
        return int(np.asarray(self.point).size)

    @property
    def scalar_count(self):
        # a d-dimensional point plus one real, for samples and inducing pairs alike
        return self.d + 1


@dataclass
class CommLedger:
    K: int
    per_client: np.ndarray = None
    per_phase: dict = field(default_factory=lambda: defaultdict(int))
    total: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.per_client is None:
            self.per_client = np.zeros(self.K, dtype=np.int64)

    def charge(self, envelope, phase, multiplier=1):
        cost = envelope.scalar_count * multiplier
        self.per_client[envelope.sender] += cost
        self.per_phase[phase.value] += cost
        self.total += cost

    def close_round(self):
        self.history.append(self.total)

    def snapshot(self):
        return {
            'total': int(self.total),
            'per_client': self.per_client.tolist(),
            'per_phase': dict(self.per_phase),
        }


def total_cost(ledger: CommLedger) -> int:
    return int(ledger.total)


class StarNetwork:
    """Single-owner message fabric; all mutation goes through broadcast_round"""

    def __init__(self, K, cost_model=CostModel.UPLOAD):
        self.K = int(K)
        self.cost_model = CostModel(cost_model)
        self.ledger = CommLedger(self.K)
        self.rounds = 0

    def broadcast_round(self, envelopes, phase=Phase.EXPLORE):
        """Deliver every envelope to every client and charge the uploads"""
        envelopes = list(envelopes)
        # at most one upload per client per round
        senders = set()
        for env in envelopes:
            if not 0 <= env.sender < self.K:
                raise ProtocolError(f"unknown sender {env.sender}")
            if env.sender in senders:
                raise ProtocolError(f"client {env.sender} sent twice in round {env.round}")
            if env.payload_kind not in _ALLOWED[phase]:
                raise ProtocolError(f"{env.payload_kind.value} payload sent during {phase.value} phase")
            senders.add(env.sender)

        # d+1 scalars per upload, times K when each receiver is billed
        multiplier = self.K if self.cost_model is CostModel.PER_RECEIVER else 1
        for env in envelopes:
            self.ledger.charge(env, phase, multiplier)
        self.ledger.close_round()
        self.rounds += 1
        if envelopes:
            logger.debug("round %d: %d envelopes, ledger total %d", self.rounds, len(envelopes), self.ledger.total)

        # star topology: every client gets the same round, its own upload included
        delivered = tuple(envelopes)
        return {client: delivered for client in range(self.K)}
