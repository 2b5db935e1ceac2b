import io
import json

import pytest
from pyrsistent import pset

from ssf.protocol.messages import GENESIS, HeadVote, Proposal
from ssf.simnet import trace as tr
from ssf.simnet.trace import Trace, TraceError, actor_index, actor_name

from conftest import block, honest_scenario


def test_actor_names():
    assert actor_name(3) == "v3"
    assert actor_index("v3") == 3
    assert actor_index(tr.WORLD) is None
    assert actor_index(tr.ADVERSARY) is None


def test_header(smoke_run):
    trace = smoke_run.trace
    header = trace.records[0]
    assert (header.round, header.actor, header.event) == (0, tr.WORLD, tr.SCENARIO)
    assert trace.scenario == honest_scenario(n=4, horizon=8)


def test_messages_are_defined_before_use(smoke_run):
    defined = set()
    for record in smoke_run.trace:
        if record.event == tr.MESSAGE:
            defined.add(record.payload["digest"])
        elif record.event == tr.SEND:
            assert record.payload["message"] in defined
    assert defined == set(smoke_run.trace.messages)


def test_sent_messages(smoke_run):
    trace = smoke_run.trace
    sent = trace.sent_messages()
    assert len(sent) == len(list(trace.events(tr.SEND)))
    votes = [x for x in sent if isinstance(x, HeadVote)]
    # one head vote per validator and slot, slot 0 excepted
    assert len(votes) == 4 * 7


def test_define_proposal_after_its_view():
    b1 = block(GENESIS.id, 1, proposer=1)
    vote = HeadVote(block=b1.id, slot=1, voter=2)
    proposal = Proposal(
        block=b1, proposed_view=pset([GENESIS, b1, vote]), slot=1, proposer=1
    )
    trace = Trace()
    assert trace.define(proposal, 4, "v1") == proposal.digest
    digests = [x.payload["digest"] for x in trace.events(tr.MESSAGE)]
    assert digests[-1] == proposal.digest
    assert set(digests) == {GENESIS.digest, b1.digest, vote.digest, proposal.digest}
    trace.define(proposal, 5, "v1")
    trace.define(vote, 5, "v2")
    assert len(trace) == 4


def test_load_preserves_the_trace(smoke_run):
    text = smoke_run.trace.dumps()
    loaded = Trace.loads(text)
    assert loaded.dumps() == text
    assert set(loaded.messages) == set(smoke_run.trace.messages)

    f = io.StringIO()
    smoke_run.trace.dump(f)
    assert f.getvalue() == text
    f.seek(0)
    assert len(Trace.load(f)) == len(smoke_run.trace)


def test_load_ignores_blank_lines(smoke_run):
    lines = smoke_run.trace.dumps().splitlines()
    assert len(Trace.from_lines(["", *lines, "  "])) == len(lines)


def test_load_empty():
    with pytest.raises(TraceError, match="Empty trace"):
        Trace.loads("\n\n")


def test_load_malformed_line(smoke_run):
    lines = smoke_run.trace.dumps().splitlines()
    lines[2] = lines[2][:-5]
    with pytest.raises(TraceError, match="line 3"):
        Trace.from_lines(lines)
    with pytest.raises(TraceError, match="Malformed trace record"):
        Trace.from_lines([lines[0], '{"round": 1}'])


def test_load_without_header(smoke_run):
    lines = smoke_run.trace.dumps().splitlines()
    with pytest.raises(TraceError, match="scenario"):
        Trace.from_lines(lines[1:])


def test_load_undefined_message(smoke_run):
    lines = smoke_run.trace.dumps().splitlines()
    first_send = next(i for i, x in enumerate(lines) if '"event":"send"' in x)
    digest = json.loads(lines[first_send])["payload"]["message"]

    def defines_it(line: str) -> bool:
        raw = json.loads(line)
        return raw["event"] == tr.MESSAGE and raw["payload"]["digest"] == digest

    kept = [x for x in lines if not defines_it(x)]
    with pytest.raises(TraceError):
        Trace.from_lines(kept)


def test_load_digest_mismatch(smoke_run):
    lines = smoke_run.trace.dumps().splitlines()
    index = next(i for i, x in enumerate(lines) if '"event":"message"' in x)
    raw = json.loads(lines[index])
    raw["payload"]["digest"] = "0" * 64
    lines[index] = json.dumps(raw)
    with pytest.raises(TraceError, match="digest mismatch"):
        Trace.from_lines(lines)
