"""FFG finality gadget: supermajority links, justification and finalization
(by slot-adjacent links or by a supermajority of acknowledgments).
"""

import heapq
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .messages import (
    GENESIS,
    Acknowledgment,
    BlockId,
    Checkpoint,
    Slot,
    ValidatorIndex,
    genesis_checkpoint,
)
from .view import View


def quorum(n: int) -> int:
    """Smallest integer >= 2n/3."""
    if n < 1:
        raise ValueError(f"Validator count must be positive, got {n}.")
    return (2 * n + 2) // 3


@dataclass(frozen=True)
class SupermajorityLink:
    """At least quorum(n) distinct voters voting source -> target."""

    source: Checkpoint
    target: Checkpoint
    voters: FrozenSet[ValidatorIndex]


@dataclass(frozen=True)
class JustificationState:
    """Justification and finalization status of a view.

    :param justifying: justified checkpoints, each mapped to the link that
        justified it (None for the genesis checkpoint).
    :param links: supermajority links with a justified source.
    :param latest: latest justified checkpoint (LJ). Ties at the highest slot
        go to the smallest block id and are listed by ``rivals``.
    :param finalized: checkpoints finalized by a slot-adjacent link.
    """

    justifying: Dict[Checkpoint, Optional[SupermajorityLink]]
    links: Tuple[SupermajorityLink, ...]
    latest: Checkpoint
    finalized: FrozenSet[Checkpoint]

    @property
    def justified(self) -> FrozenSet[Checkpoint]:
        return frozenset(self.justifying)

    def justification_chain(self, checkpoint: Checkpoint) -> List[Checkpoint]:
        """Checkpoints from (genesis, 0) to ``checkpoint`` along the links that
        justified them.
        """
        chain = [checkpoint]
        link = self.justifying[checkpoint]
        while link is not None:
            chain.append(link.source)
            link = self.justifying[link.source]
        return chain[::-1]

    @property
    def rivals(self) -> List[Checkpoint]:
        """Other justified checkpoints of the latest justified slot, ascending.
        A rival means that a quorum intersection cast E1-slashable votes.
        """
        latest = self.latest
        return sorted(
            (x for x in self.justifying if x.slot == latest.slot and x != latest),
            key=lambda x: x.sort_key,
        )

    def double_justified_slots(self) -> List[Slot]:
        """Slots with more than one justified checkpoint, ascending."""
        counts: Dict[Slot, int] = {}
        for checkpoint in self.justifying:
            counts[checkpoint.slot] = counts.get(checkpoint.slot, 0) + 1
        return sorted(slot for slot, count in counts.items() if count > 1)


class ConflictingFinalizationError(Exception):
    """Two finalized checkpoints whose blocks conflict."""

    def __init__(self, first: Checkpoint, second: Checkpoint):
        super().__init__(
            f"Conflicting finalized checkpoints {first} and {second}: neither "
            "block is an ancestor of the other."
        )
        self.first = first
        self.second = second


def _valid_links(view: View, n: int) -> Dict[Checkpoint, List[SupermajorityLink]]:
    """Supermajority links made of valid votes, grouped by source."""
    q = quorum(n)
    by_source: Dict[Checkpoint, List[SupermajorityLink]] = {}
    for (source, target), voters in view.ffg_links.items():
        if len(voters) >= q and view.is_valid_ffg_link(source, target):
            by_source.setdefault(source, []).append(
                SupermajorityLink(source, target, frozenset(voters))
            )
    for links in by_source.values():
        links.sort(key=lambda x: x.target.sort_key)
    return by_source


def compute_justification(view: View, n: int) -> JustificationState:
    """Justification closure of a view.

    Starting from the genesis checkpoint, the target of every supermajority
    link whose source is already justified becomes justified, until nothing
    changes. A link counts only if both checkpoints are connected to genesis
    in the view, the source is an ancestor of the target and the source slot
    is lower. Slot-adjacent links also finalize their source.

    The result is cached in the view until the view changes.

    :param view: the view to read FFG votes from.
    :param n: number of validators, which sets the quorum.
    :return: the justified checkpoints with their justifying links, every
        link with a justified source, the latest justified checkpoint and the
        link-finalized checkpoints.
    """
    key = ("justification", n)
    if key in view.memo:
        return view.memo[key]

    genesis = genesis_checkpoint()
    by_source = _valid_links(view, n) if view.is_connected(GENESIS.id) else {}
    justifying: Dict[Checkpoint, Optional[SupermajorityLink]] = {genesis: None}
    links: List[SupermajorityLink] = []
    # Sources are processed by ascending (slot, block) so that the recorded
    # justifying links do not depend on insertion order.
    pending: List[Tuple[Tuple[Slot, BlockId], Checkpoint]] = [
        (genesis.sort_key, genesis)
    ]
    while pending:
        _, source = heapq.heappop(pending)
        for link in by_source.get(source, ()):
            links.append(link)
            if link.target not in justifying:
                justifying[link.target] = link
                heapq.heappush(pending, (link.target.sort_key, link.target))

    state = JustificationState(
        justifying=justifying,
        links=tuple(links),
        latest=min(justifying, key=lambda x: (-x.slot, x.block)),
        finalized=frozenset(
            x.source for x in links if x.target.slot == x.source.slot + 1
        ),
    )
    view.memo[key] = state
    return state


def compute_finalized(js: JustificationState) -> FrozenSet[Checkpoint]:
    """Justified checkpoints with a supermajority link to the next slot."""
    return js.finalized


def ack_counts(
    acks: Iterable[Acknowledgment],
) -> Dict[Checkpoint, FrozenSet[ValidatorIndex]]:
    """Distinct acknowledging voters of every checkpoint (valid acks only)."""
    voters: Dict[Checkpoint, set] = {}
    for ack in acks:
        if ack.checkpoint.slot == ack.slot:
            voters.setdefault(ack.checkpoint, set()).add(ack.voter)
    return {checkpoint: frozenset(x) for checkpoint, x in voters.items()}


def compute_finalized_with_acks(
    js: JustificationState, acks: Iterable[Acknowledgment], n: int
) -> FrozenSet[Checkpoint]:
    """Link-finalized checkpoints plus every justified checkpoint acknowledged
    by at least quorum(n) distinct validators.
    """
    q = quorum(n)
    acked = {
        checkpoint
        for checkpoint, voters in ack_counts(acks).items()
        if len(voters) >= q and checkpoint in js.justifying
    }
    return js.finalized | acked


def view_acks(view: View) -> List[Acknowledgment]:
    """Acknowledgments contained in a view."""
    return [x for x in view.messages if isinstance(x, Acknowledgment)]


def first_conflict(
    view: View, checkpoints: Iterable[Checkpoint]
) -> Optional[Tuple[Checkpoint, Checkpoint]]:
    """First pair of checkpoints, in ascending (slot, block) order, whose
    blocks conflict in the view.
    """
    ordered = sorted(checkpoints, key=lambda x: x.sort_key)
    for i, first in enumerate(ordered):
        for second in ordered[i + 1 :]:
            if not view.are_comparable(first.block, second.block):
                return first, second
    return None


def finalized_chain(
    view: View, n: int, acks: Iterable[Acknowledgment] = ()
) -> List[BlockId]:
    """Genesis followed by the blocks of the finalized checkpoints, ordered by
    ancestry.

    :param view: the view to read votes from.
    :param n: number of validators.
    :param acks: acknowledgments to take into account (none for link-only
        finalization).
    :raises ConflictingFinalizationError: if two finalized blocks conflict.
    """
    js = compute_justification(view, n)
    finalized = compute_finalized_with_acks(js, acks, n)
    conflict = first_conflict(view, finalized)
    if conflict:
        raise ConflictingFinalizationError(*conflict)
    blocks = {x.block for x in finalized} - {GENESIS.id}
    return [GENESIS.id, *sorted(blocks, key=view.height)]
