import numpy as np
import pytest

from kerncollab.constants import CostModel, PayloadKind, Phase
from kerncollab.exceptions import ProtocolError
from kerncollab.network import Envelope, StarNetwork, total_cost


def sample(sender, round_=1, kind=PayloadKind.EXPLORATION_SAMPLE, d=2):
    return Envelope(round_, sender, kind, np.full(d, 0.5), 1.0)


class TestEnvelope:

    @pytest.mark.parametrize('kind', list(PayloadKind))
    @pytest.mark.parametrize('d', [1, 2, 5])
    def test_scalar_count(self, kind, d):
        assert sample(0, kind=kind, d=d).scalar_count == d + 1


class TestBroadcast:

    def test_every_client_receives_every_envelope(self):
        net = StarNetwork(4)
        sent = [sample(0), sample(2)]
        delivered = net.broadcast_round(sent)
        assert sorted(delivered) == [0, 1, 2, 3]
        for envelopes in delivered.values():
            assert list(envelopes) == sent

    def test_duplicate_sender(self):
        with pytest.raises(ProtocolError):
            StarNetwork(3).broadcast_round([sample(1), sample(1)])

    def test_unknown_sender(self):
        with pytest.raises(ProtocolError):
            StarNetwork(3).broadcast_round([sample(3)])

    @pytest.mark.parametrize('phase, kind', [
        (Phase.EXPLORE, PayloadKind.INDUCING_PAIR),
        (Phase.COMMUNICATE, PayloadKind.EXPLORATION_SAMPLE),
        (Phase.EXPLOIT, PayloadKind.EXPLORATION_SAMPLE),
    ])
    def test_payload_must_match_phase(self, phase, kind):
        with pytest.raises(ProtocolError):
            StarNetwork(2).broadcast_round([sample(0, kind=kind)], phase)

    def test_silent_round_still_closes(self):
        net = StarNetwork(2)
        net.broadcast_round([], Phase.EXPLOIT)
        assert net.rounds == 1
        assert net.ledger.history == [0]


class TestLedger:

    def test_upload_accounting(self):
        net = StarNetwork(3)
        net.broadcast_round([sample(0), sample(1), sample(2)], Phase.EXPLORE)
        net.broadcast_round([], Phase.EXPLOIT)
        net.broadcast_round([sample(1, 3)], Phase.EXPLORE)
        assert total_cost(net.ledger) == 4 * 3
        assert net.ledger.per_client.tolist() == [3, 6, 3]
        assert net.ledger.history == [9, 9, 12]
        assert net.ledger.snapshot()['per_phase'] == {'explore': 12}

    def test_per_receiver_multiplies_by_K(self):
        net = StarNetwork(5, CostModel.PER_RECEIVER)
        net.broadcast_round([sample(0), sample(4)], Phase.GREEDY)
        assert total_cost(net.ledger) == 2 * 3 * 5

    def test_history_is_monotone(self):
        net = StarNetwork(3)
        rng = np.random.default_rng(0)
        for t in range(1, 30):
            senders = [i for i in range(3) if rng.random() < 0.5]
            net.broadcast_round([sample(i, t) for i in senders])
        history = net.ledger.history
        assert all(a <= b for a, b in zip(history, history[1:]))
        assert history[-1] == net.ledger.total
