"""Property checkers over simulation traces.

Every checker is a pure function of a trace: it reads the scenario header,
the sent messages and the validator state records, and returns a Verdict.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
)

from ..protocol.ffg import (
    ConflictingFinalizationError,
    compute_finalized_with_acks,
    compute_justification,
    finalized_chain,
    quorum,
    view_acks,
)
from ..protocol.messages import (
    GENESIS,
    Block,
    BlockId,
    Checkpoint,
    HeadVote,
    Message,
    Proposal,
    Slot,
    ValidatorIndex,
    flatten,
)
from ..protocol.slasher import (
    InsufficientEvidenceError,
    extract_culprits,
    verify_violation,
)
from ..protocol.validator import FcMode, Round, Status
from ..protocol.view import View
from ..simnet import trace as tr
from ..simnet.participation import check_compliance, honest_active
from ..simnet.scenario import Scenario
from ..simnet.world import run
from .verdict import Verdict

logger = logging.getLogger(__name__)

AVAILABLE = "ava"
FINALIZED = "fin"


@dataclass(frozen=True)
class StateRecord:
    """Output of an honest validator, valid from ``round`` until its next
    state record.
    """

    round: Round
    status: Status
    canonical: BlockId
    available: BlockId
    finalized: BlockId
    justified: Checkpoint

    def head(self, chain: str) -> BlockId:
        return self.finalized if chain == FINALIZED else self.available


@dataclass(frozen=True)
class Sent:
    round: Round
    sender: Optional[ValidatorIndex]
    honest: bool
    message: Message


class TraceIndex:
    """Lookup tables built once from a trace.

    :param trace: the trace to index.
    """

    def __init__(self, trace: tr.Trace):
        self.trace = trace
        self.sc: Scenario = trace.scenario
        self.total_rounds = self.sc.total_rounds
        self.rps = self.sc.rounds_per_slot

        blocks = [GENESIS]
        blocks.extend(x for x in trace.messages.values() if isinstance(x, Block))
        self.blocks = View(blocks)

        self.timelines: Dict[ValidatorIndex, List[StateRecord]] = {}
        self.sends: List[Sent] = []
        self.fast_confirms: Dict[Tuple[ValidatorIndex, Slot], BlockId] = {}
        self.honest_proposals: Dict[Slot, Tuple[Proposal, Round]] = {}
        for record in trace:
            if record.event == tr.STATE:
                self._add_state(record)
            elif record.event == tr.SEND:
                self._add_send(record)
            elif record.event == tr.FAST_CONFIRM:
                i = tr.actor_index(record.actor)
                if i is not None:
                    slot = int(record.payload["slot"])
                    self.fast_confirms[(i, slot)] = str(record.payload["block"])
        self._anc: Dict[BlockId, FrozenSet[BlockId]] = {}

    def _add_state(self, record: tr.TraceRecord) -> None:
        i = tr.actor_index(record.actor)
        if i is None:
            return
        payload = record.payload
        self.timelines.setdefault(i, []).append(
            StateRecord(
                round=record.round,
                status=Status(payload["status"]),
                canonical=payload["canonical"],
                available=payload["available"],
                finalized=payload["finalized"],
                justified=Checkpoint(
                    block=payload["justified"]["block"],
                    slot=int(payload["justified"]["slot"]),
                ),
            )
        )

    def _add_send(self, record: tr.TraceRecord) -> None:
        message = self.trace.messages[record.payload["message"]]
        honest = record.actor != tr.ADVERSARY
        self.sends.append(Sent(record.round, message.sender, honest, message))
        if honest and isinstance(message, Proposal):
            self.honest_proposals.setdefault(message.slot, (message, record.round))

    # Queries.

    def state_at(self, i: ValidatorIndex, r: Round) -> Optional[StateRecord]:
        """Latest state record of validator i at or before round r."""
        timeline = self.timelines.get(i, [])
        position = bisect.bisect_right([x.round for x in timeline], r)
        if position == 0:
            return None
        record = timeline[position - 1]
        if self.sc.is_corrupted(i, r):
            return None
        return record

    def active_at(self, r: Round) -> Iterator[Tuple[ValidatorIndex, StateRecord]]:
        """Honest validators active at the end of round r, with their state."""
        for i in sorted(self.timelines):
            record = self.state_at(i, r)
            if record is not None and record.status is Status.ACTIVE:
                yield i, record

    def intervals(self) -> Iterator[Tuple[ValidatorIndex, StateRecord, Round]]:
        """Every state record with the round its validity ends (exclusive)."""
        for i in sorted(self.timelines):
            timeline = self.timelines[i]
            corrupted = self.sc.corruption_round(i)
            for k, record in enumerate(timeline):
                if k + 1 < len(timeline):
                    end = timeline[k + 1].round
                else:
                    end = self.total_rounds
                if corrupted is not None:
                    end = min(end, corrupted)
                if end > record.round:
                    yield i, record, end

    def ancestors(self, head: BlockId) -> FrozenSet[BlockId]:
        if head not in self._anc:
            self._anc[head] = frozenset(self.blocks.chain(head))
        return self._anc[head]

    def is_prefix(self, a: BlockId, b: BlockId) -> bool:
        return a in self.ancestors(b)

    def slot_start(self, t: Slot) -> Round:
        return t * self.rps


CHAIN_NAMES = {AVAILABLE: "available", FINALIZED: "finalized"}


def check_safety(
    trace: tr.Trace, chain: str = FINALIZED, t_after: Round = 0
) -> Verdict:
    """Every two confirmed chains of honest active validators, at any rounds
    from t_after on, are prefix-comparable.
    """
    prop = f"safety-{chain}"
    index = TraceIndex(trace)
    first_seen: Dict[BlockId, Tuple[ValidatorIndex, Round]] = {}
    for i, record, end in index.intervals():
        if end <= t_after or record.status is not Status.ACTIVE:
            continue
        first_seen.setdefault(record.head(chain), (i, max(record.round, t_after)))

    heads = sorted(first_seen, key=lambda x: (-index.blocks.height(x), x))
    if heads:
        top = heads[0]
        for head in heads[1:]:
            if not index.is_prefix(head, top):
                (i, r), (j, s) = first_seen[top], first_seen[head]
                return Verdict.failed(
                    prop,
                    f"v{i}@{r} and v{j}@{s} have conflicting {CHAIN_NAMES[chain]} "
                    "chains",
                    first=(i, r, top),
                    second=(j, s, head),
                )
    return Verdict.passed(prop, f"{len(heads)} distinct heads from round {t_after}")


def check_liveness(
    trace: tr.Trace,
    t_after: Round = 0,
    t_conf: Optional[Round] = None,
    chain: str = AVAILABLE,
) -> Verdict:
    """From round t_after + t_conf on, the confirmed chain of every active
    honest validator contains an honest block proposed less than t_conf
    rounds earlier.

    :param t_conf: confirmation time, by default 4Δ(κ+2) for the available
        chain and 12Δ for the finalized chain.
    """
    prop = f"liveness-{chain}"
    index = TraceIndex(trace)
    sc = index.sc
    if t_conf is None:
        t_conf = 4 * sc.delta * (sc.kappa + 2) if chain == AVAILABLE else 12 * sc.delta

    proposed_at = {p.block.id: r for p, r in index.honest_proposals.values()}
    latest: Dict[BlockId, Round] = {}

    def latest_honest(head: BlockId) -> Round:
        """Latest proposal round of an honest block on the chain of head."""
        if head not in latest:
            best = -1
            for block in index.blocks.chain(head):
                best = max(best, proposed_at.get(block, -1))
            latest[head] = best
        return latest[head]

    checked = 0
    for r in range(t_after + t_conf, index.total_rounds):
        for i, record in index.active_at(r):
            checked += 1
            if latest_honest(record.head(chain)) <= r - t_conf:
                return Verdict.failed(
                    prop,
                    f"v{i}@{r}: no honest block proposed after round {r - t_conf} in "
                    f"the {CHAIN_NAMES[chain]} chain",
                    validator=i,
                    round=r,
                    window=(r - t_conf, r),
                )
    return Verdict.passed(prop, f"{checked} (validator, round) pairs, t_conf={t_conf}")


def check_reorg_resilience(trace: tr.Trace) -> Verdict:
    """Honest proposals of slot t stay in the canonical chain of every active
    validator from round 4Δt + Δ on, and blocks fast-confirmed in slot t
    from round 4Δ(t+1) + Δ on.
    """
    prop = "reorg-resilience"
    index = TraceIndex(trace)
    sc = index.sc
    if sc.gst != 0:
        return Verdict.waived(prop, f"GST is {sc.gst}, not 0")

    obligations: List[Tuple[BlockId, Round, str]] = [
        (p.block.id, index.slot_start(t) + sc.delta, f"proposal of slot {t}")
        for t, (p, _) in sorted(index.honest_proposals.items())
    ]
    obligations.extend(
        (block, index.slot_start(t + 1) + sc.delta, f"fast confirmation of v{i}@{t}")
        for (i, t), block in sorted(index.fast_confirms.items())
    )

    for block, start, what in obligations:
        for i, record, end in index.intervals():
            if end <= start or record.status is not Status.ACTIVE:
                continue
            if not index.is_prefix(block, record.canonical):
                r = max(record.round, start)
                return Verdict.failed(
                    prop,
                    f"{what} [{block[:12]}] not canonical for v{i}@{r}",
                    block=block,
                    validator=i,
                    round=r,
                )
    return Verdict.passed(prop, f"{len(obligations)} blocks stayed canonical")


def check_fast_confirmation(trace: tr.Trace) -> Verdict:
    """In synchronous slots with an honest proposer and at least quorum(n)
    honest active validators, every active validator fast-confirms the
    proposal at 4Δt + 2Δ.
    """
    prop = "fast-confirmation"
    index = TraceIndex(trace)
    sc = index.sc
    q = quorum(sc.n)
    slots = 0
    for t, (proposal, _) in sorted(index.honest_proposals.items()):
        start = index.slot_start(t)
        if start < sc.gst or len(honest_active(sc, start + sc.delta)) < q:
            continue
        slots += 1
        for i, _ in index.active_at(start + 2 * sc.delta):
            confirmed = index.fast_confirms.get((i, t))
            if confirmed != proposal.block.id:
                return Verdict.failed(
                    prop,
                    f"v{i} did not fast-confirm the slot {t} proposal",
                    validator=i,
                    slot=t,
                    confirmed=confirmed,
                )
    return Verdict.passed(prop, f"{slots} slots checked")


def check_finality(trace: tr.Trace) -> Verdict:
    """With honest proposers in slots t and t+1 after max(GST, GAT) + 4Δ, the
    slot-t block is in the finalized chain of every active validator by
    round 4Δ(t+2).
    """
    prop = "finality"
    index = TraceIndex(trace)
    sc = index.sc
    start_after = max(sc.gst, sc.gat) + sc.rounds_per_slot
    slots = 0
    for t, (proposal, _) in sorted(index.honest_proposals.items()):
        deadline = index.slot_start(t + 2)
        if index.slot_start(t) < start_after or t + 1 not in index.honest_proposals:
            continue
        if deadline >= index.total_rounds:
            continue
        slots += 1
        for i, record in index.active_at(deadline):
            if not index.is_prefix(proposal.block.id, record.finalized):
                return Verdict.failed(
                    prop,
                    f"slot {t} block not finalized by v{i} at round {deadline}",
                    validator=i,
                    slot=t,
                    round=deadline,
                )
    return Verdict.passed(prop, f"{slots} slots checked")


def observer_views(index: TraceIndex) -> Callable[[Round], View]:
    """Views of an observer that receives every sent message by
    max(send round, GST) + Δ. Rounds must be queried in ascending order.
    """
    sc = index.sc
    arrivals = sorted(
        ((max(x.round, sc.gst) + sc.delta, k) for k, x in enumerate(index.sends)),
    )
    view = View([GENESIS])
    position = 0

    def view_at(r: Round) -> View:
        nonlocal position
        while position < len(arrivals) and arrivals[position][0] <= r:
            view.add_all(flatten([index.sends[arrivals[position][1]].message]))
            position += 1
        return view

    return view_at


def check_ssf(trace: tr.Trace) -> Verdict:
    """Honest proposals of slots after max(GST, GAT) + 4Δ are finalized by a
    supermajority of acknowledgments, as seen by the observer, at round
    4Δ(t+1). Their checkpoint is also the latest justified checkpoint of
    every active validator at round 4Δt + 3Δ.
    """
    prop = "ssf"
    index = TraceIndex(trace)
    sc = index.sc
    start_after = max(sc.gst, sc.gat) + sc.rounds_per_slot
    view_at = observer_views(index)
    slots = 0
    for t, (proposal, _) in sorted(index.honest_proposals.items()):
        deadline = index.slot_start(t + 1)
        if index.slot_start(t) < start_after or deadline >= index.total_rounds:
            continue
        slots += 1
        checkpoint = Checkpoint(block=proposal.block.id, slot=t)

        merge_round = index.slot_start(t) + 3 * sc.delta
        for i, record in index.active_at(merge_round):
            if record.justified != checkpoint:
                return Verdict.failed(
                    prop,
                    f"v{i} did not justify the slot {t} proposal at round "
                    f"{merge_round}",
                    validator=i,
                    slot=t,
                )

        view = view_at(deadline)
        js = compute_justification(view, sc.n)
        if checkpoint not in compute_finalized_with_acks(js, view_acks(view), sc.n):
            return Verdict.failed(
                prop,
                f"slot {t} proposal not ack-finalized at round {deadline}",
                slot=t,
                round=deadline,
            )
    return Verdict.passed(prop, f"{slots} slots finalized within their slot")


def check_accountability(trace: tr.Trace) -> Verdict:
    """Conflicting finalizations in the messages of a run expose at least
    ⌈n/3⌉ culprits, all of them corrupted, each with verified evidence.
    """
    prop = "accountability"
    index = TraceIndex(trace)
    sc = index.sc
    pool = [x.message for x in index.sends]
    view = View([GENESIS, *flatten(pool)])
    try:
        finalized_chain(view, sc.n, view_acks(view))
    except ConflictingFinalizationError as e:
        conflict = (e.first, e.second)
        logger.debug("Conflicting finalization: %s vs %s", e.first, e.second)
    else:
        return Verdict.passed(prop, "no conflicting finalization")

    try:
        culprits = extract_culprits(conflict, pool, sc.n)
    except InsufficientEvidenceError as e:
        return Verdict.failed(prop, str(e), conflict=[str(x) for x in conflict])

    threshold = math.ceil(sc.n / 3)
    honest = sorted(i for i in culprits if i not in sc.corruption)
    unverified = sorted(i for i, v in culprits.items() if not verify_violation(v))
    kinds = sorted({v.kind.value for v in culprits.values()})
    found = ", ".join(f"v{i}" for i in sorted(culprits))
    if honest:
        return Verdict.failed(
            prop, f"honest validators accused: {honest}", honest=honest
        )
    if unverified:
        return Verdict.failed(prop, f"unverified evidence for {unverified}")
    if len(culprits) < threshold:
        return Verdict.failed(
            prop, f"{len(culprits)} culprits, fewer than {threshold}: {found}"
        )
    return Verdict.passed(
        prop, f"{len(culprits)} culprits ({'/'.join(kinds)}): {found}"
    )


def check_prefix_invariant(trace: tr.Trace, strict: bool = True) -> Verdict:
    """For every active honest validator at every round, the finalized chain
    is a prefix of the available chain and, if strict, the available chain
    a prefix of the canonical chain.
    """
    prop = "prefix"
    index = TraceIndex(trace)
    checked = 0
    for i, record, _ in index.intervals():
        if record.status is not Status.ACTIVE:
            continue
        checked += 1
        if not index.is_prefix(record.finalized, record.available):
            return Verdict.failed(
                prop,
                f"v{i}@{record.round}: finalized chain not a prefix of the "
                "available chain",
                validator=i,
                round=record.round,
            )
        if strict and not index.is_prefix(record.available, record.canonical):
            return Verdict.failed(
                prop,
                f"v{i}@{record.round}: available chain not a prefix of the "
                "canonical chain",
                validator=i,
                round=record.round,
            )
    return Verdict.passed(prop, f"{checked} states checked")


def check_view_merge(trace: tr.Trace) -> Verdict:
    """In synchronous slots with an honest proposal, every active validator
    votes for the proposal and adopts the proposer's latest justified
    checkpoint.
    """
    prop = "view-merge"
    index = TraceIndex(trace)
    sc = index.sc
    head_votes: Dict[Tuple[ValidatorIndex, Slot], BlockId] = {
        (x.message.voter, x.message.slot): x.message.block
        for x in index.sends
        if x.honest and isinstance(x.message, HeadVote)
    }
    slots = 0
    for t, (proposal, _) in sorted(index.honest_proposals.items()):
        start = index.slot_start(t)
        if start < sc.gst:
            continue
        proposer_state = index.state_at(proposal.proposer, start)
        if proposer_state is None:
            continue
        slots += 1
        for i, record in index.active_at(start + sc.delta):
            vote = head_votes.get((i, t))
            if vote != proposal.block.id:
                return Verdict.failed(
                    prop,
                    f"v{i} did not vote for the slot {t} proposal",
                    validator=i,
                    slot=t,
                )
            if record.justified != proposer_state.justified:
                return Verdict.failed(
                    prop,
                    f"v{i} latest justified {record.justified} differs from the "
                    f"proposer's {proposer_state.justified} in slot {t}",
                    validator=i,
                    slot=t,
                )
    return Verdict.passed(prop, f"{slots} slots checked")


def check_equivalence(sc: Scenario, seed: Optional[int] = None) -> Verdict:
    """Run the scenario with both fork choices and compare the two traces
    record by record. Waived unless the scenario is compliant with GST = 0.
    """
    prop = "equivalence"
    if seed is not None:
        sc = sc.with_changes(seed=seed)
    if sc.gst != 0:
        return Verdict.waived(prop, f"GST is {sc.gst}, not 0")

    with_hfc = run(sc.with_changes(fc_mode=FcMode.HFC)).trace
    report = check_compliance(sc, with_hfc.sent_messages())
    if not report.compliant:
        return Verdict.waived(prop, "scenario is not compliant")
    with_rlmd = run(sc.with_changes(fc_mode=FcMode.RLMD)).trace

    first = _first_divergence(with_hfc.records[1:], with_rlmd.records[1:])
    if first is None:
        return Verdict.passed(prop, f"{len(with_hfc) - 1} records identical")
    position, left, right = first
    return Verdict.failed(
        prop,
        f"first divergence at record {position}: {left} vs {right}",
        position=position,
    )


def _first_divergence(
    left: Sequence[tr.TraceRecord], right: Sequence[tr.TraceRecord]
) -> Optional[Tuple[int, str, str]]:
    def where(records: Sequence[tr.TraceRecord], k: int) -> str:
        if k >= len(records):
            return "end of trace"
        x = records[k]
        return f"round {x.round} {x.actor} {x.event}"

    for k in range(max(len(left), len(right))):
        a = left[k].to_json() if k < len(left) else None
        b = right[k].to_json() if k < len(right) else None
        if a != b:
            return k + 1, where(left, k), where(right, k)
    return None


PROPERTIES: Dict[str, Callable[[tr.Trace, Round, Optional[Round]], Verdict]] = {
    "safety-ava": lambda x, after, _: check_safety(x, AVAILABLE, after),
    "safety-fin": lambda x, after, _: check_safety(x, FINALIZED, after),
    "liveness-ava": lambda x, after, conf: check_liveness(x, after, conf, AVAILABLE),
    "liveness-fin": lambda x, after, conf: check_liveness(x, after, conf, FINALIZED),
    "reorg-resilience": lambda x, *_: check_reorg_resilience(x),
    "fast-confirmation": lambda x, *_: check_fast_confirmation(x),
    "finality": lambda x, *_: check_finality(x),
    "ssf": lambda x, *_: check_ssf(x),
    "accountability": lambda x, *_: check_accountability(x),
    "prefix": lambda x, *_: check_prefix_invariant(x),
    "view-merge": lambda x, *_: check_view_merge(x),
}


def check_property(
    name: str, trace: tr.Trace, t_after: Round = 0, t_conf: Optional[Round] = None
) -> Verdict:
    """Run one named checker. t_after and t_conf only apply to safety and
    liveness.

    :raises KeyError: for unknown property names.
    """
    return PROPERTIES[name](trace, t_after, t_conf)


def check_all(
    trace: tr.Trace, t_after: Round = 0, t_conf: Optional[Round] = None
) -> List[Verdict]:
    return [f(trace, t_after, t_conf) for f in PROPERTIES.values()]
