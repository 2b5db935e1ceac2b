"""Round-by-round simulation of the validators, the network and the
adversary.
"""

import logging
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from ..protocol.messages import Message, Proposal, ValidatorIndex
from ..protocol.slasher import ViolationDetector
from ..protocol.validator import Round, Snapshot, Status, ValidatorState
from . import trace as tr
from .adversary import Adversary, make_adversary
from .scenario import Latency, Scenario

logger = logging.getLogger(__name__)

Delivery = Tuple[ValidatorIndex, Message]


@dataclass
class SimulationResult:
    """Trace of a run and the final state of its validators."""

    trace: tr.Trace
    states: Dict[ValidatorIndex, ValidatorState]
    adversary: Adversary


def _snapshot_payload(snapshot: Snapshot) -> Dict[str, object]:
    return {
        "status": snapshot.status.value,
        "canonical": snapshot.canonical,
        "available": snapshot.available,
        "finalized": snapshot.finalized,
        "justified": {
            "block": snapshot.justified.block,
            "slot": snapshot.justified.slot,
        },
    }


class WorldState:
    """The simulated network.

    Honest messages reach every honest validator by max(r, GST) + Δ, r being
    the round they were sent or first received by an honest validator. The
    adversary may pick any delivery round within that bound, and any round
    at all for its own messages.

    :param sc: a validated scenario.
    """

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.params = sc.params
        self.rng = random.Random(sc.seed)
        self.round: Round = 0
        self.trace = tr.Trace()
        self.adversary = make_adversary(sc)
        self.validators: Dict[ValidatorIndex, ValidatorState] = {
            i: ValidatorState(
                i,
                self.params,
                sc.proposer_of,
                Status.ACTIVE if sc.is_awake(i, 0) else Status.ASLEEP,
            )
            for i in range(sc.n)
        }
        self.in_flight: Dict[Round, List[Delivery]] = {}
        self.queued: Dict[ValidatorIndex, List[Message]] = {}
        self.received: Dict[ValidatorIndex, Set[str]] = {i: set() for i in range(sc.n)}
        self.relayed: Set[str] = set()
        self.pool: List[Message] = []
        self.known: Set[str] = set()
        self.sent: Set[str] = set()
        self.detectors = {i: ViolationDetector() for i in range(sc.n)}
        self.snapshots: Dict[ValidatorIndex, Snapshot] = {}

        self.trace.add(0, tr.WORLD, tr.SCENARIO, **sc.to_dict())

    # Message scheduling.

    def _is_honest(self, i: ValidatorIndex, r: Round) -> bool:
        return not self.sc.is_corrupted(i, r)

    def _default_delay(self) -> int:
        if self.sc.latency is Latency.RANDOM:
            return self.rng.randint(1, self.sc.delta)
        return self.sc.delta

    def _schedule(
        self, message: Message, sender: ValidatorIndex, r: Round, bounded: bool
    ) -> None:
        """Schedule delivery of a message to every other honest validator.

        :param bounded: apply the post-GST bound (honest sends and relays).
        """
        for recipient in range(self.sc.n):
            if recipient == sender or not self._is_honest(recipient, r):
                continue
            chosen = self.adversary.delivery_round(message, sender, recipient, r)
            delivery = r + self._default_delay() if chosen is None else chosen
            delivery = max(delivery, r + 1)
            if bounded:
                delivery = min(delivery, max(r, self.sc.gst) + self.sc.delta)
            if delivery >= self.sc.total_rounds:
                continue
            self.in_flight.setdefault(delivery, []).append((recipient, message))

    def _remember(self, message: Message) -> None:
        """Add a message, and the messages of its proposed view, to the set of
        known digests.
        """
        pending = [message]
        while pending:
            current = pending.pop()
            if current.digest in self.known:
                continue
            self.known.add(current.digest)
            if isinstance(current, Proposal):
                pending.append(current.block)
                pending.extend(
                    x for x in current.proposed_view if x.digest not in self.known
                )

    def _publish(self, message: Message, actor: str, r: Round) -> bool:
        """Write the send record and add the message to the pool. Returns
        False if the same message was already sent.
        """
        if message.digest in self.sent:
            return False
        self.sent.add(message.digest)
        self.trace.define(message, r, actor)
        self.trace.add(r, actor, tr.SEND, message=message.digest)
        self.pool.append(message)
        self._remember(message)
        return True

    def _send(self, i: ValidatorIndex, message: Message, r: Round) -> None:
        """Send a message of honest validator i."""
        if not self._publish(message, tr.actor_name(i), r):
            return
        for violation in self.detectors[i].observe(message):
            logger.error("Honest validator slashable: %s", violation.describe())
            self.trace.add(
                r,
                tr.actor_name(i),
                tr.SELF_VIOLATION,
                kind=violation.kind.value,
                evidence=[x.digest for x in violation.evidence],
            )
        self.received[i].add(message.digest)
        self.relayed.add(message.digest)
        if isinstance(message, Proposal):
            self.relayed.add(message.block.digest)
        self.validators[i].on_receive(message, r)
        self._schedule(message, i, r, bounded=True)

    def _receive(self, j: ValidatorIndex, message: Message, r: Round) -> None:
        """Deliver a message to honest validator j and relay it on its first
        receipt by an honest validator.
        """
        if message.digest in self.received[j]:
            return
        self.received[j].add(message.digest)
        self.validators[j].on_receive(message, r)

        if message.digest not in self.relayed:
            self.relayed.add(message.digest)
            if not isinstance(message, Proposal) or self._in_relay_window(message, r):
                self._schedule(message, j, r, bounded=True)
        if isinstance(message, Proposal):
            fresh = [x for x in message.proposed_view if x.digest not in self.relayed]
            for inner in sorted(fresh, key=lambda x: x.digest):
                self.relayed.add(inner.digest)
                self._schedule(inner, j, r, bounded=True)

    def _in_relay_window(self, proposal: Proposal, r: Round) -> bool:
        """Proposals are relayed during the first Δ rounds of their slot."""
        start = proposal.slot * self.sc.rounds_per_slot
        return start <= r < start + self.sc.delta

    def _is_forged(self, message: Message, r: Round) -> bool:
        """True for messages attributed to honest validators that were never
        sent by them.
        """
        sender = message.sender
        if sender is not None and self._is_honest(sender, r):
            return message.digest not in self.known
        if isinstance(message, Proposal):
            for inner in message.proposed_view:
                owner = inner.sender
                if owner is None or not self._is_honest(owner, r):
                    continue
                if inner.digest not in self.known and inner != message.block:
                    return True
        return False

    # Round steps.

    def _deliver(self, r: Round) -> None:
        due = sorted(self.in_flight.pop(r, []), key=lambda x: (x[0], x[1].digest))
        for recipient, message in due:
            if not self._is_honest(recipient, r):
                continue
            if not self.sc.is_awake(recipient, r):
                self.queued.setdefault(recipient, []).append(message)
                continue
            self._receive(recipient, message, r)

    def _transitions(self, r: Round) -> None:
        for i in range(self.sc.n):
            if self.sc.corruption_round(i) == r and i in self.validators:
                state = self.validators.pop(i)
                logger.debug("v%s corrupted at round %s", i, r)
                self.trace.add(r, tr.actor_name(i), tr.CORRUPT)
                self.adversary.on_corrupt(i, state, r)
                self.queued.pop(i, None)
                continue
            state = self.validators.get(i)
            if state is None or r == 0:
                continue
            awake = self.sc.is_awake(i, r)
            if state.status is not Status.ASLEEP and not awake:
                state.sleep()
                self.trace.add(r, tr.actor_name(i), tr.SLEEP)
            elif state.status is Status.ASLEEP and awake:
                state.wake(r)
                self.trace.add(r, tr.actor_name(i), tr.WAKE)
                for message in self.queued.pop(i, []):
                    self._receive(i, message, r)

    def _honest_round(self, r: Round) -> None:
        for i in sorted(self.validators):
            for message in self.validators[i].on_round(r):
                self._send(i, message, r)

    def _adversary_round(self, r: Round) -> None:
        for message in self.adversary.act(r, self.pool):
            sender = message.sender
            if self._is_forged(message, r):
                logger.warning(
                    "Rejected forged %s attributed to v%s",
                    type(message).__name__,
                    sender,
                )
                self.trace.add(
                    r, tr.ADVERSARY, tr.DROPPED, message=message.digest, reason="forged"
                )
                continue
            if sender is not None and self._publish(message, tr.ADVERSARY, r):
                self._schedule(message, sender, r, bounded=False)

    def _record_states(self, r: Round) -> None:
        for i in sorted(self.validators):
            state = self.validators[i]
            actor = tr.actor_name(i)
            for event in state.drain_events():
                self.trace.add(r, actor, event.kind, **event.payload)
            snapshot = state.snapshot()
            if self.snapshots.get(i) != snapshot:
                self.snapshots[i] = snapshot
                self.trace.add(r, actor, tr.STATE, **_snapshot_payload(snapshot))

    def step(self) -> None:
        """Simulate the current round and advance the clock."""
        r = self.round
        self._deliver(r)
        self._transitions(r)
        self._honest_round(r)
        self._adversary_round(r)
        self._record_states(r)
        self.round += 1

    @property
    def finished(self) -> bool:
        return self.round >= self.sc.total_rounds


def run(sc: Scenario, seed: Optional[int] = None) -> SimulationResult:
    """Simulate a scenario from round 0 to the end of its horizon.

    :param sc: the scenario.
    :param seed: overrides the scenario seed.
    :raises ScenarioError: if the scenario is invalid.
    """
    if seed is not None:
        sc = sc.with_changes(seed=seed)
    sc.validate()
    world = WorldState(sc)
    while not world.finished:
        world.step()
    logger.debug(
        "Simulated %s rounds, %s messages sent", sc.total_rounds, len(world.pool)
    )
    return SimulationResult(
        trace=world.trace, states=world.validators, adversary=world.adversary
    )
