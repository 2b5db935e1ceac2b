import math

import pytest
from hypothesis import given, settings, strategies as st

from ssf.protocol.ffg import ConflictingFinalizationError, finalized_chain, view_acks
from ssf.protocol.messages import (
    GENESIS,
    Acknowledgment,
    Checkpoint,
    FfgVote,
    HeadVote,
    genesis_checkpoint,
)
from ssf.protocol.slasher import (
    InsufficientEvidenceError,
    Violation,
    ViolationDetector,
    ViolationKind,
    check_e1,
    check_e2,
    check_e3,
    check_head_equivocation,
    extract_culprits,
    scan,
    verify_violation,
)
from ssf.protocol.view import View

from conftest import chain, ffg_votes, view_of

G0 = genesis_checkpoint()
N = 4

checkpoints = st.builds(
    Checkpoint, st.sampled_from(["a" * 64, "b" * 64]), st.integers(0, 5)
)
votes = st.builds(FfgVote, checkpoints, checkpoints, st.integers(0, 1))


@settings(max_examples=1000)
@given(a=votes, b=votes)
def test_ffg_predicates_match_definitions(a, b):
    same = a.voter == b.voter
    assert check_e1(a, b) == (same and a != b and a.target.slot == b.target.slot)
    s1, t1, s2, t2 = a.source.slot, a.target.slot, b.source.slot, b.target.slot
    surround = (s1 < s2 and t2 < t1) or (s2 < s1 and t1 < t2)
    assert check_e2(a, b) == (same and surround)
    assert check_e2(a, b) == check_e2(b, a)


@settings(max_examples=1000)
@given(vote=votes, checkpoint=checkpoints, voter=st.integers(0, 1))
def test_e3_matches_definition(vote, checkpoint, voter):
    ack = Acknowledgment(checkpoint=checkpoint, slot=checkpoint.slot, voter=voter)
    expected = (
        vote.voter == voter
        and vote.source.slot < checkpoint.slot < vote.target.slot
    )
    assert check_e3(vote, ack) == expected


def test_head_equivocation():
    a = HeadVote(block="a" * 64, slot=3, voter=1)
    b = HeadVote(block="b" * 64, slot=3, voter=1)
    assert check_head_equivocation(a, b)
    assert not check_head_equivocation(a, a)
    assert not check_head_equivocation(a, HeadVote(block="b" * 64, slot=4, voter=1))


def test_scan_and_detector_agree():
    t1, t2 = Checkpoint("a" * 64, 2), Checkpoint("b" * 64, 2)
    pool = [
        FfgVote(G0, t1, 0),
        FfgVote(G0, t2, 0),
        FfgVote(Checkpoint("a" * 64, 1), Checkpoint("a" * 64, 2), 1),
        FfgVote(G0, Checkpoint("a" * 64, 3), 1),
        Acknowledgment(checkpoint=Checkpoint("c" * 64, 2), slot=2, voter=2),
        FfgVote(Checkpoint("c" * 64, 1), Checkpoint("c" * 64, 3), 2),
        FfgVote(G0, t1, 3),
    ]
    found = scan(pool)
    assert {(x.kind, x.offender) for x in found} == {
        (ViolationKind.E1, 0),
        (ViolationKind.E2, 1),
        (ViolationKind.E3, 2),
    }
    assert all(verify_violation(x) for x in found)

    detector = ViolationDetector()
    incremental = [v for message in pool for v in detector.observe(message)]
    assert set(incremental) == found
    again = detector.observe(pool[1])
    assert [x.kind for x in again] == [ViolationKind.E1]
    assert len(detector.ffg_votes[0]) == 2


def test_verify_violation_rejects_wrong_evidence():
    a = FfgVote(G0, Checkpoint("a" * 64, 2), 0)
    b = FfgVote(G0, Checkpoint("a" * 64, 3), 0)
    assert not verify_violation(Violation(ViolationKind.E1, 0, (a, b)))
    assert not verify_violation(Violation(ViolationKind.E2, 0, (a, b)))
    c = FfgVote(G0, Checkpoint("b" * 64, 2), 0)
    assert verify_violation(Violation(ViolationKind.E1, 0, (a, c)))
    assert not verify_violation(Violation(ViolationKind.E1, 1, (a, c)))


def _fixture(route: str):
    """Two conflicting finalizations with 4 validators, validators 1 and 2
    voting on both sides.
    """
    left, right = chain(2, tag="l"), chain(4, tag="r")
    l1, l2 = Checkpoint(left[0].id, 1), Checkpoint(left[1].id, 2)
    pool = [*left, *right, *ffg_votes(G0, l1, range(3))]
    if route == "E1":
        r2, r3 = Checkpoint(right[1].id, 2), Checkpoint(right[2].id, 3)
        pool += ffg_votes(l1, l2, range(3))
        pool += ffg_votes(G0, r2, range(1, 4)) + ffg_votes(r2, r3, range(1, 4))
        return pool, (l1, r2)
    r3, r4 = Checkpoint(right[2].id, 3), Checkpoint(right[3].id, 4)
    if route == "E2":
        pool += ffg_votes(l1, l2, range(3))
    else:
        pool += [Acknowledgment(checkpoint=l1, slot=1, voter=i) for i in range(3)]
    pool += ffg_votes(G0, r3, range(1, 4)) + ffg_votes(r3, r4, range(1, 4))
    return pool, (l1, r3)


@pytest.mark.parametrize("route", ("E1", "E2", "E3"))
def test_extract_culprits(route):
    pool, conflict = _fixture(route)
    assert GENESIS not in pool
    # Without genesis in the view no link is connected.
    assert finalized_chain(View(pool), N, view_acks(View(pool))) == [GENESIS.id]
    view = view_of(pool)
    with pytest.raises(ConflictingFinalizationError) as e:
        finalized_chain(view, N, view_acks(view))
    assert (e.value.first, e.value.second) == conflict

    culprits = extract_culprits(conflict, pool, N)
    assert sorted(culprits) == [1, 2]
    assert len(culprits) >= math.ceil(N / 3)
    for i, violation in culprits.items():
        assert violation.kind is ViolationKind(route)
        assert violation.offender == i
        assert verify_violation(violation)


def test_extract_culprits_requires_both_finalizations():
    pool, conflict = _fixture("E3")
    without_acks = [x for x in pool if not isinstance(x, Acknowledgment)]
    with pytest.raises(InsufficientEvidenceError):
        extract_culprits(conflict, without_acks, N)
    with pytest.raises(InsufficientEvidenceError, match="not justified"):
        extract_culprits((conflict[0], Checkpoint(GENESIS.id, 5)), pool, N)
