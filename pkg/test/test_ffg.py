from typing import Set

import pytest
from hypothesis import given, settings, strategies as st

from ssf.protocol.ffg import (
    ConflictingFinalizationError,
    compute_finalized,
    compute_finalized_with_acks,
    compute_justification,
    finalized_chain,
    first_conflict,
    quorum,
    view_acks,
)
from ssf.protocol.messages import (
    GENESIS,
    Acknowledgment,
    Checkpoint,
    FfgVote,
    genesis_checkpoint,
)
from ssf.protocol.view import View

from conftest import block, chain, ffg_votes, view_of

G0 = genesis_checkpoint()


@given(n=st.integers(min_value=1, max_value=1000))
def test_quorum_is_smallest_two_thirds_majority(n):
    q = quorum(n)
    assert 3 * q >= 2 * n
    assert 3 * (q - 1) < 2 * n


def test_quorum_rejects_empty_validator_sets():
    with pytest.raises(ValueError):
        quorum(0)


def test_justification_and_finalization_by_links():
    blocks = chain(3)
    c1, c2 = Checkpoint(blocks[0].id, 1), Checkpoint(blocks[1].id, 2)
    view = view_of(blocks, ffg_votes(G0, c1, range(3)), ffg_votes(c1, c2, range(3)))
    js = compute_justification(view, 4)
    assert js.justified == {G0, c1, c2}
    assert js.latest == c2
    assert compute_finalized(js) == {G0, c1}
    assert js.justification_chain(c2) == [G0, c1, c2]
    assert finalized_chain(view, 4) == [GENESIS.id, blocks[0].id]


def test_finalized_chain_without_genesis_in_view():
    blocks = chain(2)
    c1, c2 = Checkpoint(blocks[0].id, 1), Checkpoint(blocks[1].id, 2)
    view = View([*blocks, *ffg_votes(G0, c1, range(4)), *ffg_votes(c1, c2, range(4))])
    assert GENESIS.id not in view.blocks
    assert compute_justification(view, 4).justified == {G0}
    assert finalized_chain(view, 4) == [GENESIS.id]


def test_tie_at_the_latest_justified_slot():
    a, b = block(GENESIS.id, 1, tag="a"), block(GENESIS.id, 1, tag="b")
    ca, cb = Checkpoint(a.id, 1), Checkpoint(b.id, 1)
    view = view_of([a, b], ffg_votes(G0, ca, range(3)), ffg_votes(G0, cb, range(1, 4)))
    js = compute_justification(view, 4)
    first, second = sorted([ca, cb], key=lambda x: x.block)
    assert js.latest == first
    assert js.rivals == [second]
    assert js.double_justified_slots() == [1]
    assert compute_finalized(js) == {G0}


def test_links_below_quorum_do_not_justify():
    blocks = chain(1)
    c1 = Checkpoint(blocks[0].id, 1)
    view = view_of(blocks, ffg_votes(G0, c1, range(2)))
    js = compute_justification(view, 4)
    assert js.justified == {G0}
    assert js.latest == G0


def test_links_from_unjustified_sources_are_ignored():
    blocks = chain(2)
    c1, c2 = Checkpoint(blocks[0].id, 1), Checkpoint(blocks[1].id, 2)
    view = view_of(blocks, ffg_votes(c1, c2, range(4)))
    assert compute_justification(view, 4).justified == {G0}


def test_ack_finalization():
    blocks = chain(1)
    c1 = Checkpoint(blocks[0].id, 1)
    acks = [Acknowledgment(checkpoint=c1, slot=1, voter=i) for i in range(3)]
    view = view_of(blocks, ffg_votes(G0, c1, range(3)), acks)
    js = compute_justification(view, 4)
    assert c1 not in compute_finalized(js)
    assert c1 in compute_finalized_with_acks(js, view_acks(view), 4)
    assert finalized_chain(view, 4) == [GENESIS.id]
    assert finalized_chain(view, 4, view_acks(view)) == [GENESIS.id, blocks[0].id]
    # Acks for a checkpoint that is not justified finalize nothing.
    assert c1 not in compute_finalized_with_acks(
        compute_justification(view_of(blocks), 4), acks, 4
    )


def test_conflicting_finalization_is_raised():
    left, right = chain(2, tag="l"), chain(4, tag="r")
    l1, l2 = Checkpoint(left[0].id, 1), Checkpoint(left[1].id, 2)
    r3, r4 = Checkpoint(right[2].id, 3), Checkpoint(right[3].id, 4)
    view = view_of(
        left,
        right,
        ffg_votes(G0, l1, range(3)),
        ffg_votes(l1, l2, range(3)),
        ffg_votes(G0, r3, range(1, 4)),
        ffg_votes(r3, r4, range(1, 4)),
    )
    with pytest.raises(ConflictingFinalizationError) as e:
        finalized_chain(view, 4)
    assert (e.value.first, e.value.second) == (l1, r3)
    assert first_conflict(view, [r3, l1, G0]) == (l1, r3)
    assert compute_justification(view, 4).double_justified_slots() == []


@st.composite
def ffg_pools(draw):
    blocks = chain(4) + chain(3, tag="fork")
    checkpoints = [G0] + [
        Checkpoint(b.id, slot)
        for b in blocks
        for slot in range(b.slot, 6)
        if draw(st.booleans())
    ]
    votes = draw(
        st.lists(
            st.builds(
                lambda s, t, i: FfgVote(source=s, target=t, voter=i),
                st.sampled_from(checkpoints),
                st.sampled_from(checkpoints),
                st.integers(min_value=0, max_value=3),
            ),
            max_size=60,
        )
    )
    return blocks, votes


@settings(max_examples=1000, deadline=None)
@given(pool=ffg_pools())
def test_justification_matches_fixed_point_oracle(pool):
    blocks, votes = pool
    n = 4
    view = View([GENESIS, *blocks, *votes])
    links = {}
    for vote in votes:
        links.setdefault((vote.source, vote.target), set()).add(vote.voter)
    strong = [
        link
        for link, voters in links.items()
        if len(voters) >= quorum(n) and view.is_valid_ffg_link(*link)
    ]
    justified: Set[Checkpoint] = {G0}
    changed = True
    while changed:
        changed = False
        for source, target in strong:
            if source in justified and target not in justified:
                justified.add(target)
                changed = True
    finalized = {
        s for s, t in strong if s in justified and t.slot == s.slot + 1
    }

    js = compute_justification(view, n)
    assert js.justified == justified
    assert js.finalized == finalized
    assert js.latest.slot == max(x.slot for x in justified)
