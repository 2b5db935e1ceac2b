import pytest
from hypothesis import given, strategies as st
from pyrsistent import pset

from ssf.protocol.codec import (
    CodecError,
    decode,
    digest,
    encode,
    from_record,
    split_records,
    to_record,
)
from ssf.protocol.messages import (
    GENESIS,
    Acknowledgment,
    Checkpoint,
    FfgVote,
    HeadVote,
    Proposal,
)

from conftest import block


def _proposal():
    b1 = block(GENESIS.id, 1, proposer=1)
    vote = HeadVote(block=b1.id, slot=1, voter=0)
    b2 = block(b1.id, 2, proposer=2)
    view = pset([GENESIS, b1, vote, b2])
    return Proposal(block=b2, proposed_view=view, slot=2, proposer=2), view


def test_genesis_encoding_is_stable():
    assert decode(encode(GENESIS)) == GENESIS
    assert decode(encode(GENESIS)).parent is None
    assert decode(encode(GENESIS)).proposer is None


def test_proposal_binary_record_needs_known_messages():
    proposal, view = _proposal()
    with pytest.raises(CodecError, match="unknown message"):
        decode(encode(proposal))
    known = {x.digest: x for x in view}
    decoded = decode(encode(proposal), known)
    assert decoded == proposal
    assert decoded.proposed_view == view


def test_proposal_text_record():
    proposal, view = _proposal()
    record = to_record(proposal)
    assert record["type"] == "propose"
    assert record["block"]["id"] == proposal.block.id
    assert record["proposed_view"] == sorted(x.digest for x in view)
    assert from_record(record, {x.digest: x for x in view}) == proposal


def test_digest_ignores_proposed_view_order():
    b1 = block(GENESIS.id, 1, proposer=1)
    votes = [HeadVote(block=b1.id, slot=1, voter=i) for i in range(5)]
    a = Proposal(block=b1, proposed_view=pset([b1, *votes]), slot=1, proposer=1)
    b = Proposal(
        block=b1, proposed_view=pset([*reversed(votes), b1]), slot=1, proposer=1
    )
    assert digest(a) == digest(b)


def test_split_records():
    messages = [
        GENESIS,
        HeadVote(block=GENESIS.id, slot=1, voter=0),
        FfgVote(Checkpoint(GENESIS.id, 0), Checkpoint(GENESIS.id, 1), 3),
        Acknowledgment(checkpoint=Checkpoint(GENESIS.id, 1), slot=1, voter=2),
    ]
    data = b"".join(encode(x) for x in messages)
    assert [decode(x) for x in split_records(data)] == messages
    with pytest.raises(CodecError):
        split_records(data[:-1])


@given(cut=st.integers(min_value=0, max_value=20))
def test_truncated_records_are_rejected(cut):
    data = encode(FfgVote(Checkpoint(GENESIS.id, 0), Checkpoint(GENESIS.id, 1), 3))
    with pytest.raises(CodecError):
        decode(data[: len(data) - 1 - cut])


def test_trailing_bytes_and_unknown_tags_are_rejected():
    data = encode(GENESIS)
    with pytest.raises(CodecError, match="trailing"):
        decode(data + b"\x00")
    with pytest.raises(CodecError, match="Unknown message tag"):
        decode(b"\x09" + data[1:])


def test_block_record_with_wrong_id_is_rejected():
    record = to_record(block(GENESIS.id, 1))
    record["id"] = "0" * 64
    with pytest.raises(CodecError, match="id mismatch"):
        from_record(record)
    with pytest.raises(CodecError, match="Unknown"):
        from_record({"type": "gossip"})
    with pytest.raises(CodecError, match="Malformed"):
        from_record({"type": "head-vote", "slot": 1})
