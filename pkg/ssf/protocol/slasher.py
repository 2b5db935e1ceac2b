"""Slashing: detection of E1 (FFG equivocation), E2 (surround voting), E3
(acknowledgment surround) and head vote equivocation, and extraction of the
culprits of a conflicting finalization.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .ffg import (
    SupermajorityLink,
    ack_counts,
    compute_finalized_with_acks,
    compute_justification,
    JustificationState,
)
from .messages import (
    GENESIS,
    Acknowledgment,
    Checkpoint,
    FfgVote,
    HeadVote,
    Message,
    ValidatorIndex,
    flatten,
)
from .view import View

logger = logging.getLogger(__name__)


class ViolationKind(Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    HEAD_EQUIVOCATION = "head-equivocation"


@dataclass(frozen=True)
class Violation:
    """A slashable offence with the two messages that prove it."""

    kind: ViolationKind
    offender: ValidatorIndex
    evidence: Tuple[Message, Message]

    def describe(self) -> str:
        return (
            f"{self.kind.value} by v{self.offender}: "
            + " vs ".join(x.digest[:12] for x in self.evidence)
        )


class InsufficientEvidenceError(Exception):
    """The message pool does not prove the claimed finalizations."""

    def __init__(self, checkpoint: Checkpoint, msg: Optional[str] = None):
        super().__init__(
            f"Insufficient evidence for checkpoint {checkpoint}: "
            + (msg if msg else "not finalized by the given messages.")
        )
        self.checkpoint = checkpoint


def check_e1(a: FfgVote, b: FfgVote) -> bool:
    """Two distinct FFG votes of one validator with the same target slot."""
    return a.voter == b.voter and a != b and a.target.slot == b.target.slot


def check_e2(a: FfgVote, b: FfgVote) -> bool:
    """One FFG vote's link strictly surrounds the other's."""

    def surrounds(outer: FfgVote, inner: FfgVote) -> bool:
        return (
            outer.source.slot < inner.source.slot
            and inner.target.slot < outer.target.slot
        )

    return a.voter == b.voter and (surrounds(a, b) or surrounds(b, a))


def check_e3(vote: FfgVote, ack: Acknowledgment) -> bool:
    """The vote's link strictly surrounds the acknowledged checkpoint."""
    return (
        vote.voter == ack.voter
        and vote.source.slot < ack.checkpoint.slot < vote.target.slot
    )


def check_head_equivocation(a: HeadVote, b: HeadVote) -> bool:
    return a.voter == b.voter and a != b and a.slot == b.slot


_VoterMessages = Tuple[List[FfgVote], List[Acknowledgment], List[HeadVote]]


def _evidence(a: Message, b: Message) -> Tuple[Message, Message]:
    return (a, b) if a.digest <= b.digest else (b, a)


def _pair_violations(
    voter: ValidatorIndex,
    ffg_votes: Sequence[FfgVote],
    acks: Sequence[Acknowledgment],
    head_votes: Sequence[HeadVote],
) -> Iterable[Violation]:
    for a, b in combinations(ffg_votes, 2):
        if check_e1(a, b):
            yield Violation(ViolationKind.E1, voter, _evidence(a, b))
        if check_e2(a, b):
            yield Violation(ViolationKind.E2, voter, _evidence(a, b))
    for vote in ffg_votes:
        for ack in acks:
            if check_e3(vote, ack):
                yield Violation(ViolationKind.E3, voter, (vote, ack))
    for a, b in combinations(head_votes, 2):
        if check_head_equivocation(a, b):
            yield Violation(ViolationKind.HEAD_EQUIVOCATION, voter, _evidence(a, b))


def scan(pool: Iterable[Message]) -> Set[Violation]:
    """All violations provable from pairs of messages of the pool, including
    the messages carried inside proposals.
    """
    by_voter: Dict[ValidatorIndex, _VoterMessages] = {}
    for message in flatten(pool):
        if isinstance(message, (FfgVote, Acknowledgment, HeadVote)):
            ffg_votes, acks, head_votes = by_voter.setdefault(
                message.voter, ([], [], [])
            )
            if isinstance(message, FfgVote):
                ffg_votes.append(message)
            elif isinstance(message, Acknowledgment):
                acks.append(message)
            else:
                head_votes.append(message)

    violations: Set[Violation] = set()
    for voter, (ffg_votes, acks, head_votes) in by_voter.items():
        violations.update(_pair_violations(voter, ffg_votes, acks, head_votes))
    return violations


class ViolationDetector:
    """Incremental slasher: reports the violations that each newly observed
    message forms with the messages observed before it.
    """

    def __init__(self) -> None:
        self.ffg_votes: Dict[ValidatorIndex, List[FfgVote]] = {}
        self.acks: Dict[ValidatorIndex, List[Acknowledgment]] = {}
        self.head_votes: Dict[ValidatorIndex, List[HeadVote]] = {}
        self.violations: List[Violation] = []

    def observe(self, message: Message) -> List[Violation]:
        found: List[Violation] = []
        if isinstance(message, FfgVote):
            for other in self.ffg_votes.get(message.voter, ()):
                evidence = _evidence(message, other)
                if check_e1(message, other):
                    found.append(Violation(ViolationKind.E1, message.voter, evidence))
                if check_e2(message, other):
                    found.append(Violation(ViolationKind.E2, message.voter, evidence))
            found.extend(
                Violation(ViolationKind.E3, message.voter, (message, ack))
                for ack in self.acks.get(message.voter, ())
                if check_e3(message, ack)
            )
            self._remember(self.ffg_votes, message)
        elif isinstance(message, Acknowledgment):
            found.extend(
                Violation(ViolationKind.E3, message.voter, (vote, message))
                for vote in self.ffg_votes.get(message.voter, ())
                if check_e3(vote, message)
            )
            self._remember(self.acks, message)
        elif isinstance(message, HeadVote):
            kind = ViolationKind.HEAD_EQUIVOCATION
            found.extend(
                Violation(kind, message.voter, _evidence(message, x))
                for x in self.head_votes.get(message.voter, ())
                if check_head_equivocation(message, x)
            )
            self._remember(self.head_votes, message)
        self.violations.extend(found)
        return found

    @staticmethod
    def _remember(
        store: Dict[ValidatorIndex, list],
        message: Union[FfgVote, Acknowledgment, HeadVote],
    ) -> None:
        known = store.setdefault(message.voter, [])
        if message not in known:
            known.append(message)


def _link_votes(link: SupermajorityLink, voter: ValidatorIndex) -> FfgVote:
    return FfgVote(source=link.source, target=link.target, voter=voter)


def _require_finalized(
    js: JustificationState, finalized: Iterable[Checkpoint], checkpoint: Checkpoint
) -> None:
    if checkpoint not in js.justifying:
        raise InsufficientEvidenceError(
            checkpoint, "not justified by the given messages."
        )
    if checkpoint not in finalized:
        raise InsufficientEvidenceError(checkpoint)


def extract_culprits(
    conflict: Tuple[Checkpoint, Checkpoint], pool: Iterable[Message], n: int
) -> Dict[ValidatorIndex, Violation]:
    """Identify validators that provably violated a slashing rule, given two
    conflicting finalized checkpoints.

    If a slot has two justified checkpoints, the voters common to the two
    links justifying them violated E1. Otherwise, let C be the finalized
    checkpoint with the lower slot and follow the justification chain of the
    other one to its first link jumping over C's slot. That link surrounds
    the link finalizing C (E2) or, if C is finalized only by
    acknowledgments, surrounds C itself (E3).

    :param conflict: the two conflicting finalized checkpoints.
    :param pool: messages proving both finalizations. Genesis is added if
        missing.
    :param n: number of validators.
    :return: one violation per culprit, keyed by validator index.
    :raises InsufficientEvidenceError: if the pool does not finalize both
        checkpoints, or if their blocks do not conflict.
    """
    messages = list(flatten(pool))
    view = View([GENESIS, *messages])
    js = compute_justification(view, n)
    acks = [x for x in messages if isinstance(x, Acknowledgment)]
    finalized = compute_finalized_with_acks(js, acks, n)
    for checkpoint in conflict:
        _require_finalized(js, finalized, checkpoint)

    low, high = sorted(conflict, key=lambda x: x.sort_key)
    if view.are_comparable(low.block, high.block):
        raise InsufficientEvidenceError(high, f"does not conflict with {low}.")

    culprits: Dict[ValidatorIndex, Violation] = {}

    # Two justified checkpoints for one slot: E1.
    double_slots = js.double_justified_slots()
    if double_slots:
        first, second = sorted(
            (x for x in js.justifying if x.slot == double_slots[0]),
            key=lambda x: x.sort_key,
        )[:2]
        link_a, link_b = js.justifying[first], js.justifying[second]
        assert link_a is not None and link_b is not None
        for voter in sorted(link_a.voters & link_b.voters):
            culprits[voter] = Violation(
                ViolationKind.E1,
                voter,
                _evidence(_link_votes(link_a, voter), _link_votes(link_b, voter)),
            )
        logger.debug("E1 culprits at slot %s: %s", double_slots[0], sorted(culprits))
        return culprits

    chain = js.justification_chain(high)
    j = next(i for i, x in enumerate(chain) if x.slot > low.slot)
    jumping = js.justifying[chain[j]]
    assert jumping is not None

    finalizing = [
        x for x in js.links if x.source == low and x.target.slot == low.slot + 1
    ]
    if finalizing:
        link = finalizing[0]
        for voter in sorted(link.voters & jumping.voters):
            culprits[voter] = Violation(
                ViolationKind.E2,
                voter,
                _evidence(_link_votes(link, voter), _link_votes(jumping, voter)),
            )
    else:
        ackers = ack_counts(acks).get(low, frozenset())
        for voter in sorted(ackers & jumping.voters):
            culprits[voter] = Violation(
                ViolationKind.E3,
                voter,
                (
                    _link_votes(jumping, voter),
                    Acknowledgment(checkpoint=low, slot=low.slot, voter=voter),
                ),
            )
    logger.debug("Culprits for %s vs %s: %s", low, high, sorted(culprits))
    return culprits


def verify_violation(violation: Violation) -> bool:
    """Re-check a violation's evidence against its predicate."""
    a, b = violation.evidence
    if a.sender != violation.offender or b.sender != violation.offender:
        return False
    if violation.kind is ViolationKind.E1:
        return isinstance(a, FfgVote) and isinstance(b, FfgVote) and check_e1(a, b)
    if violation.kind is ViolationKind.E2:
        return isinstance(a, FfgVote) and isinstance(b, FfgVote) and check_e2(a, b)
    if violation.kind is ViolationKind.E3:
        return (
            isinstance(a, FfgVote) and isinstance(b, Acknowledgment) and check_e3(a, b)
        )
    return (
        isinstance(a, HeadVote)
        and isinstance(b, HeadVote)
        and check_head_equivocation(a, b)
    )
