import pytest
from pyrsistent import pset

from ssf.protocol.messages import (
    GENESIS,
    Acknowledgment,
    Block,
    Checkpoint,
    FfgVote,
    HeadVote,
    Proposal,
    flatten,
    genesis_checkpoint,
    message_kind,
    validate_message,
)

from conftest import block


def test_messages_are_identified_by_content():
    a = HeadVote(block=GENESIS.id, slot=1, voter=3)
    b = HeadVote(block=GENESIS.id, slot=1, voter=3)
    assert a is not b
    assert a == b
    assert len({a, b}) == 1
    assert a != HeadVote(block=GENESIS.id, slot=1, voter=4)


def test_different_types_never_compare_equal():
    vote = HeadVote(block=GENESIS.id, slot=1, voter=0)
    ack = Acknowledgment(checkpoint=Checkpoint(GENESIS.id, 1), slot=1, voter=0)
    assert vote != ack


def test_block_id_is_its_digest():
    b = block(GENESIS.id, 1)
    assert b.id == b.digest
    assert len(b.id) == 64
    assert b.sender == 0
    assert GENESIS.sender is None


def test_checkpoint_order():
    checkpoints = [Checkpoint("b", 2), Checkpoint("a", 2), Checkpoint("z", 1)]
    ordered = sorted(checkpoints, key=lambda x: x.sort_key)
    assert ordered == [Checkpoint("z", 1), Checkpoint("a", 2), Checkpoint("b", 2)]
    assert genesis_checkpoint() == Checkpoint(GENESIS.id, 0)


@pytest.mark.parametrize(
    "message, reason",
    (
        (GENESIS, None),
        (block(GENESIS.id, 1), None),
        (Block(parent=None, slot=1, proposer=0), "block without parent"),
        (block(GENESIS.id, 0), "non-genesis block without proposer or at slot 0"),
        (Block(parent=GENESIS.id, slot=2, proposer=None), "non-genesis block"),
        (HeadVote(block=GENESIS.id, slot=-1, voter=0), "negative head vote slot"),
        (
            FfgVote(Checkpoint(GENESIS.id, 2), Checkpoint(GENESIS.id, 2), 0),
            "ffg vote source slot not below target slot",
        ),
        (
            Acknowledgment(checkpoint=Checkpoint(GENESIS.id, 2), slot=3, voter=0),
            "acknowledged checkpoint slot differs from ack slot",
        ),
    ),
)
def test_validate_message(message, reason):
    result = validate_message(message)
    if reason is None:
        assert result is None
    else:
        assert result is not None and result.startswith(reason)


def test_validate_proposal():
    b = block(GENESIS.id, 1, proposer=1)
    good = Proposal(block=b, proposed_view=pset([GENESIS, b]), slot=1, proposer=1)
    assert validate_message(good) is None

    wrong_slot = Proposal(block=b, proposed_view=pset([b]), slot=2, proposer=1)
    assert validate_message(wrong_slot) == "proposal slot differs from block slot"

    wrong_sender = Proposal(block=b, proposed_view=pset([b]), slot=1, proposer=2)
    assert "sender" in validate_message(wrong_sender)

    missing = Proposal(block=b, proposed_view=pset([GENESIS]), slot=1, proposer=1)
    assert "does not contain" in validate_message(missing)


def test_flatten_yields_nested_messages_once():
    b1 = block(GENESIS.id, 1, proposer=1)
    vote = HeadVote(block=b1.id, slot=1, voter=2)
    inner = Proposal(block=b1, proposed_view=pset([GENESIS, b1]), slot=1, proposer=1)
    b2 = block(b1.id, 2, proposer=2)
    outer = Proposal(
        block=b2, proposed_view=pset([GENESIS, b1, inner, vote, b2]), slot=2, proposer=2
    )
    flat = list(flatten([outer, vote, b1]))
    assert len(flat) == len(set(flat)) == 6
    assert set(flat) == {outer, inner, vote, GENESIS, b1, b2}


def test_message_kind():
    assert message_kind(GENESIS) == "block"
    assert message_kind(HeadVote(block=GENESIS.id, slot=1, voter=0)) == "head-vote"
