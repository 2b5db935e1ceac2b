"""Participation derived from a scenario's schedules, and the τ-sleepiness
compliance check.
"""

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Set

from ..protocol.messages import Message, Slot, ValidatorIndex
from ..protocol.slasher import ViolationKind, scan
from ..protocol.validator import Round, Status
from .scenario import Scenario


def join_round(sc: Scenario, wake: Round) -> Round:
    """First merge round (4Δt + 3Δ) at or after a wake-up round."""
    rps = sc.rounds_per_slot
    merge = 3 * sc.delta
    t = wake // rps
    if wake % rps > merge:
        t += 1
    return t * rps + merge


def status_at(sc: Scenario, i: ValidatorIndex, r: Round) -> Status:
    """Status of an honest validator at the end of round r. A validator awake
    at round 0 starts active. One that wakes up later joins at the next
    merge round.
    """
    if not sc.is_awake(i, r):
        return Status.ASLEEP
    wakes = [b for _, b in sc.sleep.get(i, ()) if b <= r]
    if not wakes:
        return Status.ACTIVE
    return Status.ACTIVE if r >= join_round(sc, max(wakes)) else Status.JOINING


def honest_active(sc: Scenario, r: Round) -> FrozenSet[ValidatorIndex]:
    """Honest validators that are active at round r."""
    return frozenset(
        i
        for i in range(sc.n)
        if not sc.is_corrupted(i, r) and status_at(sc, i, r) is Status.ACTIVE
    )


def adversarial(sc: Scenario, r: Round) -> FrozenSet[ValidatorIndex]:
    return frozenset(i for i in range(sc.n) if sc.is_corrupted(i, r))


def _h(sc: Scenario, s: Slot) -> FrozenSet[ValidatorIndex]:
    """H_s: honest validators active at round 4Δs + Δ, empty for s < 0."""
    if s < 0:
        return frozenset()
    return honest_active(sc, s * sc.rounds_per_slot + sc.delta)


def check_tau_sleepiness(sc: Scenario, t: Slot) -> bool:
    """|H_{t-1}| > |A_t ∪ (H_{t-τ, t-2} minus H_{t-1})|."""
    previous = _h(sc, t - 1)
    tau = sc.tau if sc.tau is not None else sc.eta
    first = 0 if math.isinf(tau) else max(t - int(tau), 0)
    stale: Set[ValidatorIndex] = set()
    for s in range(first, t - 1):
        stale |= _h(sc, s)
    stale -= previous
    corrupted = adversarial(sc, t * sc.rounds_per_slot + sc.delta)
    return len(previous) > len(corrupted | stale)


@dataclass
class ComplianceReport:
    """τ-compliance of a scenario.

    :param failing_slots: slots after GST violating τ-sleepiness.
    :param head_equivocators: validators with two head votes for one slot.
    :param strengthened: fewer than ⌈n/3⌉ head vote equivocators.
    """

    n: int
    checked_slots: List[Slot] = field(default_factory=list)
    failing_slots: List[Slot] = field(default_factory=list)
    head_equivocators: FrozenSet[ValidatorIndex] = frozenset()

    @property
    def strengthened(self) -> bool:
        return len(self.head_equivocators) < math.ceil(self.n / 3)

    @property
    def compliant(self) -> bool:
        return not self.failing_slots and self.strengthened

    def describe(self) -> List[str]:
        lines = [
            f"slots checked: {len(self.checked_slots)}, failing: "
            + (", ".join(map(str, self.failing_slots)) or "none"),
            "head vote equivocators: "
            + (", ".join(f"v{i}" for i in sorted(self.head_equivocators)) or "none"),
            f"compliant: {self.compliant}",
        ]
        return lines


def check_compliance(
    sc: Scenario, messages: Iterable[Message] = ()
) -> ComplianceReport:
    """Check τ-sleepiness for every slot t >= 1 starting at or after GST, and
    the strengthened condition on the head vote equivocators of the given
    messages.
    """
    first = max(1, -(-sc.gst // sc.rounds_per_slot))
    report = ComplianceReport(n=sc.n)
    for t in range(first, sc.horizon):
        report.checked_slots.append(t)
        if not check_tau_sleepiness(sc, t):
            report.failing_slots.append(t)
    report.head_equivocators = frozenset(
        x.offender for x in scan(messages) if x.kind is ViolationKind.HEAD_EQUIVOCATION
    )
    return report
