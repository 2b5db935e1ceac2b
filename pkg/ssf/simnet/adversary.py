"""Adversary strategies.

Corrupted validators are driven by copies of the honest state machine. A
strategy sees every message sent so far (rushing), may alter or add to
what its validators send, and picks delivery rounds. The world enforces
the post-GST delivery bound and rejects messages attributed to honest
validators.
"""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple, Type

from ..protocol.messages import (
    GENESIS,
    Acknowledgment,
    Block,
    Checkpoint,
    FfgVote,
    HeadVote,
    Message,
    Proposal,
    ValidatorIndex,
    genesis_checkpoint,
)
from ..protocol.validator import Round, Status, ValidatorState
from .scenario import Scenario, Strategy

logger = logging.getLogger(__name__)

SIDE_A = "A"
SIDE_B = "B"


class Adversary:
    """Honest mirror: corrupted validators keep following the protocol.

    :param sc: the scenario being simulated.
    """

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.states: Dict[ValidatorIndex, ValidatorState] = {}
        self.cursors: Dict[ValidatorIndex, int] = {}
        self.fired: Set[ValidatorIndex] = set()

    def on_corrupt(self, i: ValidatorIndex, state: ValidatorState, r: Round) -> None:
        """Take over the state of a validator corrupted at round r."""
        if state.status is Status.ASLEEP:
            state.wake(r)
        self.states[i] = state
        self.cursors[i] = 0

    def _feed(
        self,
        key: ValidatorIndex,
        state: ValidatorState,
        pool: Sequence[Message],
        r: Round,
    ) -> None:
        for message in pool[self.cursors[key] :]:
            state.on_receive(message, r)
        self.cursors[key] = len(pool)

    def act(self, r: Round, pool: Sequence[Message]) -> List[Message]:
        """Run the corrupted validators for round r and return what they send.

        :param r: current round.
        :param pool: every message sent so far, this round's included.
        """
        sent: List[Message] = []
        for i in sorted(self.states):
            state = self.states[i]
            self._feed(i, state, pool, r)
            for message in state.on_round(r):
                for deviation in self.deviate(i, state, message, r):
                    state.on_receive(deviation, r)
                    sent.append(deviation)
            state.drain_events()
        return sent

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        """Messages actually sent in place of an honest emission."""
        return [message]

    def delivery_round(
        self,
        message: Message,
        sender: ValidatorIndex,
        recipient: ValidatorIndex,
        r: Round,
    ) -> Optional[Round]:
        """Delivery round of a message to an honest recipient. None keeps the
        default latency. A round at or past the end of the run drops the
        message.
        """
        return None


class SilentProposer(Adversary):
    """Corrupted proposers never send their proposals."""

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        if isinstance(message, Proposal):
            logger.debug("v%s withholds its slot %s proposal", i, message.slot)
            return []
        return [message]


class HeadEquivocator(Adversary):
    """Each corrupted validator once adds a head vote for the parent of the
    block it votes for.
    """

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        if not isinstance(message, HeadVote) or i in self.fired:
            return [message]
        if message.block == GENESIS.id:
            return [message]
        self.fired.add(i)
        parent = state.view.blocks[message.block].parent
        assert parent is not None
        return [message, HeadVote(block=parent, slot=message.slot, voter=i)]


class FfgEquivocator(Adversary):
    """Each corrupted validator once casts a second FFG vote for the same
    target slot, to a fresh sibling block (E1).
    """

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        if not isinstance(message, FfgVote) or i in self.fired:
            return [message]
        self.fired.add(i)
        t = message.target.slot
        fork = Block(
            parent=message.source.block,
            slot=t,
            proposer=i,
            body=f"fork-v{i}@{t}".encode(),
        )
        other = FfgVote(
            source=message.source, target=Checkpoint(block=fork.id, slot=t), voter=i
        )
        return [message, fork, other]


class SurroundVoter(Adversary):
    """Each corrupted validator once replaces its FFG vote by one from the
    genesis checkpoint, surrounding its previous vote (E2).
    """

    def __init__(self, sc: Scenario):
        super().__init__(sc)
        self.previous: Dict[ValidatorIndex, FfgVote] = {}

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        if not isinstance(message, FfgVote):
            return [message]
        previous = self.previous.get(i)
        self.previous[i] = message
        if i in self.fired or previous is None or previous.source.slot < 1:
            return [message]
        self.fired.add(i)
        return [FfgVote(source=genesis_checkpoint(), target=message.target, voter=i)]


class AckSurrounder(Adversary):
    """After acknowledging a checkpoint of slot >= 1, each corrupted validator
    once votes over it from the genesis checkpoint (E3).
    """

    def __init__(self, sc: Scenario):
        super().__init__(sc)
        self.acked: Set[ValidatorIndex] = set()

    def deviate(
        self, i: ValidatorIndex, state: ValidatorState, message: Message, r: Round
    ) -> List[Message]:
        if isinstance(message, Acknowledgment) and message.slot >= 1:
            self.acked.add(i)
        elif isinstance(message, FfgVote) and i in self.acked and i not in self.fired:
            self.fired.add(i)
            surround = FfgVote(
                source=genesis_checkpoint(), target=message.target, voter=i
            )
            return [surround]
        return [message]


class Partitioner(Adversary):
    """Before GST, messages between the two sides of the honest validators
    are held back until GST.
    """

    def side_of(self, i: ValidatorIndex) -> str:
        return SIDE_A if i in self.sc.adversary.side_a else SIDE_B

    def delivery_round(
        self,
        message: Message,
        sender: ValidatorIndex,
        recipient: ValidatorIndex,
        r: Round,
    ) -> Optional[Round]:
        if r >= self.sc.gst or sender in self.sc.corruption:
            return None
        if self.side_of(sender) != self.side_of(recipient):
            return self.sc.gst
        return None


class DoubleFinalizer(Partitioner):
    """Partition plus two honest-looking copies ("shadows") of every corrupted
    validator, one per side. A shadow only sees its side's messages and only
    sends during its side's slots, which the route of the scenario picks.
    Shadow messages never cross sides.
    """

    def __init__(self, sc: Scenario):
        super().__init__(sc)
        self.shadows: Dict[Tuple[ValidatorIndex, str], ValidatorState] = {}
        self.shadow_cursors: Dict[Tuple[ValidatorIndex, str], int] = {}
        self.tags: Dict[str, Set[str]] = {}
        self.slots_a, self.slots_b = sc.adversary.schedule()

    def on_corrupt(self, i: ValidatorIndex, state: ValidatorState, r: Round) -> None:
        super().on_corrupt(i, state, r)
        for side in (SIDE_A, SIDE_B):
            self.shadows[(i, side)] = state.fork()
            self.shadow_cursors[(i, side)] = 0

    def _visible(self, message: Message, side: str) -> bool:
        sender = message.sender
        if sender is None:
            return True
        if sender in self.sc.corruption:
            return side in self.tags.get(message.digest, ())
        return self.side_of(sender) == side

    def act(self, r: Round, pool: Sequence[Message]) -> List[Message]:
        t = r // self.sc.rounds_per_slot
        sent: List[Message] = []
        for key in sorted(self.shadows):
            i, side = key
            shadow = self.shadows[key]
            for message in pool[self.shadow_cursors[key] :]:
                if self._visible(message, side):
                    shadow.on_receive(message, r)
            self.shadow_cursors[key] = len(pool)

            slots = self.slots_a if side == SIDE_A else self.slots_b
            for message in shadow.on_round(r):
                if t not in slots:
                    continue
                self.tags.setdefault(message.digest, set()).add(side)
                shadow.on_receive(message, r)
                sent.append(message)
            shadow.drain_events()
        return sent

    def delivery_round(
        self,
        message: Message,
        sender: ValidatorIndex,
        recipient: ValidatorIndex,
        r: Round,
    ) -> Optional[Round]:
        if sender in self.sc.corruption:
            sides = self.tags.get(message.digest)
            if sides is not None and self.side_of(recipient) not in sides:
                return self.sc.total_rounds
            return None
        return super().delivery_round(message, sender, recipient, r)


STRATEGIES: Dict[Strategy, Type[Adversary]] = {
    Strategy.HONEST_MIRROR: Adversary,
    Strategy.SILENT_PROPOSER: SilentProposer,
    Strategy.HEAD_EQUIVOCATOR: HeadEquivocator,
    Strategy.FFG_EQUIVOCATOR: FfgEquivocator,
    Strategy.SURROUND_VOTER: SurroundVoter,
    Strategy.ACK_SURROUNDER: AckSurrounder,
    Strategy.PARTITIONER: Partitioner,
    Strategy.DOUBLE_FINALIZER: DoubleFinalizer,
}


def make_adversary(sc: Scenario) -> Adversary:
    return STRATEGIES[sc.adversary.strategy](sc)
