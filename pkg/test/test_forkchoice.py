"""Fork choice filters and GHOST against brute-force oracles."""

import math
from typing import Dict, List, Set, Tuple

from hypothesis import given, settings, strategies as st

from ssf.protocol.ffg import compute_justification
from ssf.protocol.forkchoice import (
    FilteredView,
    ForkChoiceParams,
    fil_eq,
    fil_exp,
    fil_ffg,
    fil_lmd,
    ghost,
    hfc,
    rlmd_ghost,
    subtree_weights,
)
from ssf.protocol.messages import GENESIS, Block, Checkpoint, HeadVote
from ssf.protocol.view import View

from conftest import (
    block,
    chain,
    ffg_votes,
    head_votes,
    justified_views,
    trees,
    view_of,
)

N = 6


@st.composite
def voted_views(draw) -> Tuple[View, List[Block], List[HeadVote]]:
    blocks = draw(trees())
    votes = draw(
        st.lists(
            st.builds(
                lambda voter, b, slot: HeadVote(block=b.id, slot=slot, voter=voter),
                st.integers(min_value=0, max_value=N - 1),
                st.sampled_from(blocks),
                st.integers(min_value=0, max_value=8),
            ),
            max_size=14,
        )
    )
    return View(blocks + votes), blocks, votes


def oracle_votes(votes: List[HeadVote], t: int, eta: float) -> Dict[int, HeadVote]:
    """Surviving vote of every voter after the three RLMD filters."""
    by_key: Dict[Tuple[int, int], Set[HeadVote]] = {}
    for vote in votes:
        by_key.setdefault((vote.voter, vote.slot), set()).add(vote)
    equivocators = {voter for (voter, _), x in by_key.items() if len(x) > 1}
    kept: Dict[int, HeadVote] = {}
    for vote in votes:
        if vote.voter in equivocators or vote.slot < t - eta:
            continue
        if vote.voter not in kept or kept[vote.voter].slot < vote.slot:
            kept[vote.voter] = vote
    return kept


def oracle_ghost(view: View, kept: Dict[int, HeadVote]) -> str:
    def weight(b: str) -> int:
        return sum(
            1
            for x in kept.values()
            if view.is_connected(x.block) and view.is_ancestor(b, x.block)
        )

    head = GENESIS.id
    while view.children[head]:
        head = min(view.children[head], key=lambda x: (-weight(x), x))
    return head


@settings(max_examples=1000, deadline=None)
@given(voted=voted_views(), t=st.integers(min_value=0, max_value=9))
def test_fil_eq_matches_oracle(voted, t):
    view, _, votes = voted
    by_key: Dict[Tuple[int, int], Set[HeadVote]] = {}
    for vote in votes:
        by_key.setdefault((vote.voter, vote.slot), set()).add(vote)
    bad = {voter for (voter, _), x in by_key.items() if len(x) > 1}
    assert fil_eq(view, t).head_votes == {x for x in votes if x.voter not in bad}


@settings(max_examples=1000, deadline=None)
@given(
    voted=voted_views(),
    t=st.integers(min_value=0, max_value=9),
    eta=st.sampled_from([1, 2, 3, math.inf]),
)
def test_fil_exp_and_fil_lmd_match_oracle(voted, t, eta):
    view, _, votes = voted
    expired = fil_exp(view, t, eta)
    assert expired.head_votes == {x for x in votes if x.slot >= t - eta}
    latest = fil_lmd(view, t)
    for vote in latest.head_votes:
        assert all(x.slot <= vote.slot for x in votes if x.voter == vote.voter)
    assert {x.voter for x in latest.head_votes} == {x.voter for x in votes}


@settings(max_examples=1000, deadline=None)
@given(
    voted=voted_views(),
    t=st.integers(min_value=0, max_value=9),
    eta=st.sampled_from([1, 2, math.inf]),
)
def test_rlmd_ghost_matches_oracle(voted, t, eta):
    view, _, votes = voted
    kept = oracle_votes(votes, t, eta)
    params = ForkChoiceParams(eta=eta, n=N)
    assert rlmd_ghost(view, t, params) == oracle_ghost(view, kept)


@settings(max_examples=1000, deadline=None)
@given(voted=voted_views())
def test_subtree_weights_count_distinct_voters(voted):
    view, blocks, votes = voted
    weights = subtree_weights(FilteredView.of(view, 9))
    for b in blocks:
        voters = {x.voter for x in votes if view.is_ancestor(b.id, x.block)}
        assert weights.get(b.id, 0) == len(voters)


def test_ghost_breaks_ties_by_smallest_id():
    a, b = block(GENESIS.id, 1, tag="a"), block(GENESIS.id, 1, tag="b")
    view = view_of([a, b], head_votes(a.id, 1, [0]), head_votes(b.id, 1, [1]))
    assert ghost(FilteredView.of(view, 2)) == min(a.id, b.id)


def test_lmd_keeps_only_latest_votes():
    a, b = block(GENESIS.id, 1, tag="a"), block(GENESIS.id, 1, tag="b")
    # Voters 0 and 1 moved from a to b; voter 2 still on a.
    votes = head_votes(a.id, 1, [0, 1, 2]) + head_votes(b.id, 2, [0, 1])
    view = view_of([a, b], votes)
    assert rlmd_ghost(view, 3, ForkChoiceParams(n=3)) == b.id
    # With eta = 1, slot-1 votes at slot 3 have expired but slot-2 votes have not.
    assert rlmd_ghost(view, 3, ForkChoiceParams(eta=1, n=3)) == b.id
    assert len(fil_exp(view, 4, 1).head_votes) == 0


def test_equivocating_votes_are_ignored():
    a, b = block(GENESIS.id, 1, tag="a"), block(GENESIS.id, 1, tag="b")
    votes = head_votes(a.id, 1, [0, 1]) + head_votes(b.id, 1, [0, 2, 3])
    view = view_of([a, b], votes)
    # Voter 0 equivocates: a has 1 vote left, b has 2.
    assert rlmd_ghost(view, 2, ForkChoiceParams(n=4)) == b.id


def test_hfc_respects_latest_justified_checkpoint():
    main = chain(2, tag="main")
    fork = chain(3, tag="fork")
    genesis = Checkpoint(GENESIS.id, 0)
    justify = ffg_votes(genesis, Checkpoint(main[0].id, 1), range(3))
    # Heavier fork that conflicts with the justified block.
    votes = head_votes(fork[-1].id, 3, range(4))
    view = view_of(main, fork, justify, votes)
    params = ForkChoiceParams(n=4)
    assert rlmd_ghost(view, 4, params) == fork[-1].id
    assert hfc(view, 4, params) == main[-1].id
    pruned = fil_ffg(view, 4, 4).pruned
    assert pruned == {x.id for x in fork}


@settings(max_examples=1000, deadline=None)
@given(view=justified_views(n=N), t=st.integers(min_value=0, max_value=12))
def test_fil_ffg_prunes_exactly_the_conflicting_blocks(view, t):
    lj = compute_justification(view, N).latest.block
    pruned = fil_ffg(view, t, N).pruned
    if lj == GENESIS.id:
        assert pruned == frozenset()
    else:
        assert pruned == {
            x for x in view.connected_blocks() if not view.are_comparable(x, lj)
        }


@settings(max_examples=1000, deadline=None)
@given(
    view=justified_views(n=N),
    t=st.integers(min_value=0, max_value=12),
    eta=st.sampled_from([1, 2, math.inf]),
)
def test_hfc_head_descends_from_latest_justified_block(view, t, eta):
    lj = compute_justification(view, N).latest.block
    assert view.is_ancestor(lj, hfc(view, t, ForkChoiceParams(eta=eta, n=N)))
