"""Fork choice: GHOST over filtered views.

RLMD-GHOST applies the filters FIL_eq, FIL_exp and FIL_lmd (in that order)
before GHOST. HFC first prunes the branches conflicting with the latest
justified checkpoint (FIL_ffg) and then runs RLMD-GHOST.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Set, Union

from pyrsistent import PSet, pset

from .ffg import compute_justification
from .messages import GENESIS, Block, BlockId, HeadVote, Slot, ValidatorIndex
from .view import View


@dataclass(frozen=True)
class ForkChoiceParams:
    """Fork choice parameters.

    :param eta: expiry period in slots, ``math.inf`` for no expiry.
    :param n: number of validators.
    """

    eta: float = math.inf
    n: int = 1


@dataclass(frozen=True)
class FilteredView:
    """Result (V', t) of a filter. V' is the base view minus the head votes
    that were filtered out and minus the pruned blocks.
    """

    view: View
    slot: Slot
    head_votes: FrozenSet[HeadVote]
    pruned: FrozenSet[BlockId] = field(default_factory=frozenset)

    @classmethod
    def of(cls, view: View, slot: Slot) -> "FilteredView":
        """Unfiltered view."""
        return cls(view=view, slot=slot, head_votes=frozenset(view.iter_head_votes()))

    @property
    def messages(self) -> PSet:
        """The message set V' of the filtered view."""

        def kept(message: object) -> bool:
            if isinstance(message, HeadVote):
                return message in self.head_votes
            if isinstance(message, Block):
                return message.id not in self.pruned
            return True

        return pset(x for x in self.view.messages if kept(x))

    def with_votes(self, votes: Iterable[HeadVote]) -> "FilteredView":
        return replace(self, head_votes=frozenset(votes))


AnyView = Union[View, FilteredView]


def _as_filtered(view: AnyView, slot: Slot) -> FilteredView:
    if isinstance(view, FilteredView):
        return view if view.slot == slot else replace(view, slot=slot)
    return FilteredView.of(view, slot)


def fil_eq(view: AnyView, t: Slot) -> FilteredView:
    """Remove every head vote of the validators that cast two distinct head
    votes for a single slot.
    """
    fv = _as_filtered(view, t)
    votes_by_key: Dict[tuple, int] = defaultdict(int)
    for vote in fv.head_votes:
        votes_by_key[(vote.voter, vote.slot)] += 1
    equivocators = {voter for (voter, _), count in votes_by_key.items() if count > 1}
    return fv.with_votes(x for x in fv.head_votes if x.voter not in equivocators)


def fil_exp(view: AnyView, t: Slot, eta: float) -> FilteredView:
    """Remove head votes from slots < t - eta. ``eta = math.inf`` keeps all."""
    fv = _as_filtered(view, t)
    return fv.with_votes(x for x in fv.head_votes if x.slot >= t - eta)


def fil_lmd(view: AnyView, t: Slot) -> FilteredView:
    """Keep, for every voter, only the head votes of their latest slot."""
    fv = _as_filtered(view, t)
    latest: Dict[ValidatorIndex, Slot] = {}
    for vote in fv.head_votes:
        latest[vote.voter] = max(vote.slot, latest.get(vote.voter, vote.slot))
    return fv.with_votes(x for x in fv.head_votes if x.slot == latest[x.voter])


def fil_ffg(view: AnyView, t: Slot, n: int) -> FilteredView:
    """Prune every block that conflicts with the block of the latest
    justified checkpoint. Votes are left untouched.
    """
    fv = _as_filtered(view, t)
    base = fv.view
    lj_block = compute_justification(base, n).latest.block
    if lj_block == GENESIS.id or not base.is_connected(lj_block):
        return fv

    keep: Set[BlockId] = set(base.chain(lj_block))
    pending = [lj_block]
    while pending:
        block = pending.pop()
        for child in base.children[block]:
            keep.add(child)
            pending.append(child)

    pruned = frozenset(x for x in base.connected_blocks() if x not in keep)
    return replace(fv, pruned=fv.pruned | pruned)


def subtree_weights(fv: FilteredView) -> Dict[BlockId, int]:
    """Weight of every block: the number of distinct voters with a surviving
    head vote for the block or one of its descendants. Votes for pruned or
    disconnected blocks weigh nothing.
    """
    view = fv.view
    supporters: Dict[BlockId, Set[ValidatorIndex]] = defaultdict(set)
    for vote in fv.head_votes:
        block = vote.block
        if not view.is_connected(block) or block in fv.pruned:
            continue
        current = block
        while current is not None and vote.voter not in supporters[current]:
            supporters[current].add(vote.voter)
            current = view.blocks[current].parent
    return {block: len(voters) for block, voters in supporters.items()}


def ghost(fv: FilteredView) -> BlockId:
    """Greedy heaviest-subtree walk from genesis. At every block, move to the
    child with the greatest weight, the smallest block id on ties, until a
    leaf of the filtered tree is reached.
    """
    view = fv.view
    if not view.is_connected(GENESIS.id):
        raise ValueError("GHOST requires a view containing genesis.")
    weights = subtree_weights(fv)
    head = GENESIS.id
    while True:
        children = [x for x in view.children[head] if x not in fv.pruned]
        if not children:
            return head
        head = min(children, key=lambda x: (-weights.get(x, 0), x))


def rlmd_ghost(view: AnyView, t: Slot, params: ForkChoiceParams) -> BlockId:
    """Head of the canonical chain for slot t under RLMD-GHOST.

    The head votes of the view are filtered in three steps: votes of head
    vote equivocators are removed, votes older than eta slots expire, and
    only the latest votes of every validator are kept. GHOST then walks the
    block tree from genesis towards the heaviest subtree. An equivocation
    anywhere in the view removes the equivocator, expired votes included.

    :param view: a view, or a view already filtered by FIL_ffg.
    :param t: the slot the fork choice is run for.
    :param params: expiry period and number of validators.
    :return: id of the head block.
    :raises ValueError: if the view does not contain genesis.
    """
    return ghost(fil_lmd(fil_exp(fil_eq(view, t), t, params.eta), t))


def hfc(view: AnyView, t: Slot, params: ForkChoiceParams) -> BlockId:
    """Head of the canonical chain for slot t under the hybrid fork choice.

    Blocks that conflict with the block of the latest justified checkpoint
    are pruned first, so the head always descends from that block. The
    remaining tree goes through RLMD-GHOST.

    :param view: the view to run the fork choice on.
    :param t: the slot the fork choice is run for.
    :param params: expiry period and number of validators.
    :return: id of the head block.
    """
    return rlmd_ghost(fil_ffg(view, t, params.n), t, params)
