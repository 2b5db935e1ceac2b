"""Honest validator state machine.

A slot lasts 4 * delta rounds and is split into four phases:

 * 4Δt        propose (slot-t proposer only)
 * 4Δt + Δ    head vote
 * 4Δt + 2Δ   fast/κ-deep confirmation and FFG vote
 * 4Δt + 3Δ   buffer merge and acknowledgment

Slot 0 is the genesis slot: nobody acts during its rounds.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Set

from .ffg import (
    ConflictingFinalizationError,
    compute_justification,
    finalized_chain,
    quorum,
)
from .forkchoice import ForkChoiceParams, hfc, rlmd_ghost
from .messages import (
    GENESIS,
    Acknowledgment,
    Block,
    BlockId,
    Checkpoint,
    FfgVote,
    HeadVote,
    Message,
    Proposal,
    Slot,
    ValidatorIndex,
    validate_message,
)
from .view import View

logger = logging.getLogger(__name__)

Round = int
ProposerRule = Callable[[Slot], ValidatorIndex]


class Status(Enum):
    """Participation status of a validator."""

    ASLEEP = "asleep"
    JOINING = "awake-joining"
    ACTIVE = "active"


class FcMode(Enum):
    """Fork choice used by the validator."""

    HFC = "hfc"
    RLMD = "rlmd"


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol parameters shared by all validators.

    :param n: number of validators.
    :param delta: network delay bound in rounds.
    :param eta: head vote expiry period in slots.
    :param kappa: depth, in blocks, of the κ-deep confirmation rule.
    :param fc_mode: fork choice (HFC by default, RLMD-GHOST for comparison
        runs).
    """

    n: int
    delta: int = 1
    eta: float = math.inf
    kappa: int = 2
    fc_mode: FcMode = FcMode.HFC

    @property
    def rounds_per_slot(self) -> int:
        return 4 * self.delta

    @property
    def fork_choice(self) -> ForkChoiceParams:
        return ForkChoiceParams(eta=self.eta, n=self.n)

    def slot_of(self, r: Round) -> Slot:
        return r // self.rounds_per_slot

    def phase_of(self, r: Round) -> int:
        """Offset of the round within its slot."""
        return r % self.rounds_per_slot


@dataclass(frozen=True)
class ValidatorEvent:
    """Something a validator noticed that is worth a trace record."""

    kind: str
    payload: Dict[str, object]


@dataclass(frozen=True)
class Snapshot:
    """Externally observable output of a validator at some round."""

    status: Status
    canonical: BlockId
    available: BlockId
    finalized: BlockId
    justified: Checkpoint


class ValidatorState:
    """State of one honest validator.

    Messages the validator sends are not added to its buffer here: whoever
    delivers the messages (the simulator, or an adversary driving a
    corrupted copy) hands them back through ``on_receive``.

    :param index: validator index.
    :param params: protocol parameters.
    :param proposer_of: rule giving the proposer of every slot.
    :param status: initial participation status.
    """

    def __init__(
        self,
        index: ValidatorIndex,
        params: ProtocolParams,
        proposer_of: ProposerRule,
        status: Status = Status.ACTIVE,
    ):
        self.index = index
        self.params = params
        self.proposer_of = proposer_of
        self.status = status
        self.view = View([GENESIS])
        self.buffer: Set[Message] = set()
        self.canonical: BlockId = GENESIS.id
        self.available: BlockId = GENESIS.id
        self.finalized: BlockId = GENESIS.id
        self.events: List[ValidatorEvent] = []
        self.reported_ties: Set[Slot] = set()

    def __repr__(self) -> str:
        return f"ValidatorState(v{self.index}, {self.status.value})"

    # Derived values.

    def fork_choice(self, t: Slot) -> BlockId:
        """Head of the canonical chain for slot t, computed on the view."""
        fc = hfc if self.params.fc_mode is FcMode.HFC else rlmd_ghost
        return fc(self.view, t, self.params.fork_choice)

    @property
    def latest_justified(self) -> Checkpoint:
        return compute_justification(self.view, self.params.n).latest

    def snapshot(self) -> Snapshot:
        return Snapshot(
            status=self.status,
            canonical=self.canonical,
            available=self.available,
            finalized=self.finalized,
            justified=self.latest_justified,
        )

    def _record(self, kind: str, **payload: object) -> None:
        self.events.append(ValidatorEvent(kind, payload))

    def drain_events(self) -> List[ValidatorEvent]:
        events, self.events = self.events, []
        return events

    # Message reception.

    def on_receive(self, message: Message, r: Round) -> bool:
        """Receive a message at round r.

        Every well formed message goes to the buffer. A slot-t proposal
        received by an active validator during [4Δt, 4Δt + Δ] also merges
        its proposed view into the view. Malformed messages are dropped.

        :return: False if the message was dropped.
        """
        reason = validate_message(message)
        if reason is None and isinstance(message, Proposal):
            if message.proposer != self.proposer_of(message.slot):
                reason = f"proposal from v{message.proposer}, not the slot proposer"
        if reason is not None:
            logger.debug("v%s dropped %s: %s", self.index, message.digest[:12], reason)
            self._record("dropped", message=message.digest, reason=reason)
            return False

        if isinstance(message, Proposal):
            if self.status is Status.ACTIVE and self.in_merge_window(message, r):
                if self.view.add_all(message.proposed_view):
                    self._refresh_available()
            else:
                self.buffer.update(
                    x for x in message.proposed_view if x not in self.view
                )
        if message not in self.view:
            self.buffer.add(message)
        return True

    def in_merge_window(self, proposal: Proposal, r: Round) -> bool:
        """True if r lies in [4Δt, 4Δt + Δ] for the slot t of the proposal."""
        start = proposal.slot * self.params.rounds_per_slot
        end = start + self.params.delta
        return self.params.slot_of(r) == proposal.slot and r <= end

    def merge_buffer(self) -> None:
        """Move the buffer into the view."""
        if not self.buffer:
            return
        changed = self.view.add_all(self.buffer)
        self.buffer = set()
        if changed:
            self._refresh_available()

    def _follow_canonical(self, head: BlockId) -> None:
        """Move the canonical head. An available chain that is no longer a
        prefix of it is cut back to their common ancestor, but not below the
        finalized head.
        """
        self.canonical = head
        if self.view.is_ancestor(self.available, head):
            return
        common = self.view.common_ancestor(self.available, head)
        if self.view.is_ancestor(self.finalized, common):
            self.available = common
        else:
            self.available = self.finalized
        logger.debug("v%s available chain cut back to %s", self.index, common[:12])

    def _report_tie(self) -> None:
        """Record a ``justification-tie`` event the first time the latest
        justified slot holds more than one justified checkpoint.
        """
        js = compute_justification(self.view, self.params.n)
        slot = js.latest.slot
        if not js.rivals or slot in self.reported_ties:
            return
        self.reported_ties.add(slot)
        tied = [js.latest, *js.rivals]
        logger.warning(
            "v%s sees %s justified checkpoints at slot %s", self.index, len(tied), slot
        )
        self._record(
            "justification-tie",
            slot=slot,
            checkpoints=[{"block": x.block, "slot": x.slot} for x in tied],
        )

    def _refresh_available(self) -> None:
        """Recompute the finalized head and keep it a prefix of the available
        chain.
        """
        self._report_tie()
        try:
            head = finalized_chain(self.view, self.params.n)[-1]
        except ConflictingFinalizationError as e:
            logger.warning("v%s keeps its finalized chain: %s", self.index, e)
            return
        self.finalized = head
        if not self.view.is_ancestor(head, self.available):
            self.available = head

    # Participation.

    def sleep(self) -> None:
        self.status = Status.ASLEEP

    def wake(self, r: Round) -> None:
        """Wake up at round r and start the joining protocol. Queued messages
        are delivered by the caller through ``on_receive``.
        """
        if self.status is Status.ASLEEP:
            self.status = Status.JOINING
            logger.debug("v%s woke up at round %s", self.index, r)

    def _complete_joining(self, r: Round) -> None:
        self.merge_buffer()
        self.status = Status.ACTIVE
        self._follow_canonical(self.fork_choice(self.params.slot_of(r)))
        self._record("active", canonical=self.canonical)

    def fork(self) -> "ValidatorState":
        """Independent copy of the validator, sharing no mutable state."""
        other = ValidatorState(self.index, self.params, self.proposer_of, self.status)
        other.view = self.view.copy()
        other.buffer = set(self.buffer)
        other.canonical = self.canonical
        other.available = self.available
        other.finalized = self.finalized
        other.reported_ties = set(self.reported_ties)
        return other

    # Slot phases.

    def on_round(self, r: Round) -> List[Message]:
        """Run the phase that starts at round r, if any, and return the
        messages to send.
        """
        if self.status is Status.ASLEEP:
            return []
        t = self.params.slot_of(r)
        phase = self.params.phase_of(r)
        delta = self.params.delta

        if self.status is Status.JOINING:
            if phase != 3 * delta:
                return []
            self._complete_joining(r)

        if t == 0:
            return []
        if phase == 0:
            if self.index == self.proposer_of(t):
                return [self.phase_propose(t)]
            return []
        if phase == delta:
            return [self.phase_head_vote(t)]
        if phase == 2 * delta:
            vote = self.phase_confirm_and_ffg_vote(t)
            return [vote] if vote is not None else []
        if phase == 3 * delta:
            ack = self.phase_merge_and_ack(t)
            return [ack] if ack is not None else []
        return []

    def phase_propose(self, t: Slot, body: Optional[bytes] = None) -> Proposal:
        """Merge the buffer and propose a new block extending the fork choice
        head.
        """
        self.merge_buffer()
        parent = self.fork_choice(t)
        block = Block(
            parent=parent,
            slot=t,
            proposer=self.index,
            body=body if body is not None else f"v{self.index}@{t}".encode(),
        )
        self.view.add(block)
        self._follow_canonical(block.id)
        return Proposal(
            block=block, proposed_view=self.view.messages, slot=t, proposer=self.index
        )

    def phase_head_vote(self, t: Slot) -> HeadVote:
        self._follow_canonical(self.fork_choice(t))
        return HeadVote(block=self.canonical, slot=t, voter=self.index)

    def fast_confirmed(self, t: Slot) -> BlockId:
        """Highest block of the canonical chain supported by a quorum of
        distinct slot-t head votes from the buffer, genesis if none is.

        A vote supports the canonical blocks that are ancestors of, or equal
        to, the block it votes for. Parents are looked up in the view and in
        the blocks of the buffer.
        """
        chain = self.view.chain(self.canonical)
        on_chain = set(chain)
        blocks: Dict[BlockId, Block] = dict(self.view.blocks)
        for message in self.buffer:
            if isinstance(message, Block):
                blocks.setdefault(message.id, message)
            elif isinstance(message, Proposal):
                blocks.setdefault(message.block.id, message.block)

        deepest: Dict[BlockId, Set[ValidatorIndex]] = {}
        for vote in self.buffer:
            if not isinstance(vote, HeadVote) or vote.slot != t:
                continue
            current: Optional[BlockId] = vote.block
            while current is not None and current not in on_chain:
                known = blocks.get(current)
                current = known.parent if known else None
            if current is not None:
                deepest.setdefault(current, set()).add(vote.voter)

        q = quorum(self.params.n)
        supporters: Set[ValidatorIndex] = set()
        for block in reversed(chain):
            supporters |= deepest.get(block, set())
            if len(supporters) >= q:
                return block
        return GENESIS.id

    def phase_confirm_and_ffg_vote(self, t: Slot) -> Optional[FfgVote]:
        """Update the available chain with the fast and κ-deep confirmation
        rules, then vote from the latest justified checkpoint to the slot-t
        checkpoint of the available chain.
        """
        fast = self.fast_confirmed(t)
        deep = self.view.prefix_at_depth(self.canonical, self.params.kappa)
        self._record("fast-confirm", slot=t, block=fast)

        is_ancestor = self.view.is_ancestor
        confirmed = (fast, deep)
        if not all(is_ancestor(x, self.available) for x in confirmed):
            self.available = self.view.higher(deep, fast)
        if not is_ancestor(self.finalized, self.available):
            self.available = self.finalized

        source = self.latest_justified
        if source.slot >= t:
            return None
        if source.block != self.available and is_ancestor(source.block, self.available):
            target = Checkpoint(block=self.available, slot=t)
        else:
            target = Checkpoint(block=source.block, slot=t)
        return FfgVote(source=source, target=target, voter=self.index)

    def phase_merge_and_ack(self, t: Slot) -> Optional[Acknowledgment]:
        """Merge the buffer and acknowledge the latest justified checkpoint if
        it belongs to the current slot.
        """
        self.merge_buffer()
        latest = self.latest_justified
        if latest.slot != t:
            return None
        return Acknowledgment(checkpoint=latest, slot=t, voter=self.index)


def round_robin(n: int, offset: int = 0) -> ProposerRule:
    """Proposer rule (t + offset) mod n."""

    def proposer_of(t: Slot) -> ValidatorIndex:
        return (t + offset) % n

    return proposer_of

