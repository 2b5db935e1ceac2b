"""Scenario definition: validator count, timing, sleep and corruption
schedules, and adversary strategy of a simulation.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from ..protocol.messages import Slot, ValidatorIndex
from ..protocol.validator import FcMode, ProtocolParams, Round, round_robin
from ..utils.config import (
    TOP_LEVEL,
    config_values_from_file,
    find_config_file,
    str_to_enum,
    str_to_list,
)

Interval = Tuple[Round, Round]


class ScenarioError(ValueError):
    """A scenario violating one or more of its invariants."""

    def __init__(self, problems: List[str], source: Optional[str] = None):
        where = f" [{source}]" if source else ""
        super().__init__(
            f"Invalid scenario{where}:\n -> " + "\n -> ".join(problems)
        )
        self.problems = problems


class Strategy(Enum):
    """Adversary strategies."""

    HONEST_MIRROR = "honest-mirror"
    SILENT_PROPOSER = "silent-proposer"
    HEAD_EQUIVOCATOR = "head-equivocator"
    FFG_EQUIVOCATOR = "ffg-equivocator"
    SURROUND_VOTER = "surround-voter"
    ACK_SURROUNDER = "ack-surrounder"
    PARTITIONER = "partitioner"
    DOUBLE_FINALIZER = "double-finalizer"


class Latency(Enum):
    """Delay of messages not held back by the adversary."""

    MAX = "max"
    RANDOM = "random"


STRATEGY_SYNONYMS: Dict[Strategy, Tuple[str, ...]] = {
    Strategy.HONEST_MIRROR: (Strategy.HONEST_MIRROR.value, "honest", "mirror", "none"),
    Strategy.SILENT_PROPOSER: (Strategy.SILENT_PROPOSER.value, "silent"),
    Strategy.HEAD_EQUIVOCATOR: (Strategy.HEAD_EQUIVOCATOR.value, "head-equivocation"),
    Strategy.FFG_EQUIVOCATOR: (Strategy.FFG_EQUIVOCATOR.value, "e1"),
    Strategy.SURROUND_VOTER: (Strategy.SURROUND_VOTER.value, "surround", "e2"),
    Strategy.ACK_SURROUNDER: (Strategy.ACK_SURROUNDER.value, "e3"),
    Strategy.PARTITIONER: (Strategy.PARTITIONER.value, "partition"),
    Strategy.DOUBLE_FINALIZER: (Strategy.DOUBLE_FINALIZER.value, "double-finalization"),
}

LATENCY_SYNONYMS: Dict[Latency, Tuple[str, ...]] = {
    Latency.MAX: (Latency.MAX.value, "delta", "fixed"),
    Latency.RANDOM: (Latency.RANDOM.value, "uniform"),
}

FC_MODE_SYNONYMS: Dict[FcMode, Tuple[str, ...]] = {
    FcMode.HFC: (FcMode.HFC.value, "ffg"),
    FcMode.RLMD: (FcMode.RLMD.value, "rlmd-ghost", "ghost"),
}

ROUTES = ("E1", "E2", "E3")

# Slots in which the corrupted validators take part on sides A and B. Side A
# holds the proposers of its slots, side B those of the later slots.
ROUTE_SLOTS: Dict[str, Tuple[FrozenSet[Slot], FrozenSet[Slot]]] = {
    # Both sides justify a slot 2 checkpoint.
    "E1": (frozenset({1, 2}), frozenset({2, 3, 4})),
    # Side B justifies from genesis over the link finalizing slot 1.
    "E2": (frozenset({1, 2}), frozenset({3, 4})),
    # Side A finalizes slot 1 by acknowledgments only.
    "E3": (frozenset({1}), frozenset({2, 3})),
}


def str_to_strategy(value: str) -> Strategy:
    return str_to_enum(value, STRATEGY_SYNONYMS, "adversary strategy")


def str_to_latency(value: str) -> Latency:
    return str_to_enum(value, LATENCY_SYNONYMS, "latency model")


def str_to_fc_mode(value: str) -> FcMode:
    return str_to_enum(value, FC_MODE_SYNONYMS, "fork choice mode")


@dataclass(frozen=True)
class AdversarySpec:
    """Adversary strategy and its parameters.

    :param strategy: strategy run by the corrupted validators.
    :param side_a: honest validators on side A of a partition. The other
        honest validators form side B.
    :param route: double-finalization route, one of E1, E2 or E3. It sets
        the slots in which corrupted validators take part on each side.
    :param slots_a: overrides the route's slots for side A.
    :param slots_b: overrides the route's slots for side B.
    """

    strategy: Strategy = Strategy.HONEST_MIRROR
    side_a: FrozenSet[ValidatorIndex] = frozenset()
    route: Optional[str] = None
    slots_a: FrozenSet[Slot] = frozenset()
    slots_b: FrozenSet[Slot] = frozenset()

    def schedule(self) -> Tuple[FrozenSet[Slot], FrozenSet[Slot]]:
        """Slots in which corrupted validators take part on sides A and B."""
        slots_a, slots_b = ROUTE_SLOTS.get(self.route or "", (frozenset(),) * 2)
        return (self.slots_a or slots_a, self.slots_b or slots_b)


@dataclass
class Scenario:
    """Everything that determines a simulation run.

    :param n: number of validators.
    :param delta: network delay bound in rounds after GST.
    :param horizon: number of slots to simulate, slot 0 included.
    :param gst: global stabilization time (round).
    :param gat: global awake time (round).
    :param eta: head vote expiry period in slots.
    :param tau: sleepiness window in slots, defaults to eta.
    :param kappa: κ-deep confirmation depth in blocks.
    :param seed: seed of the random latency model.
    :param latency: delay of messages not held by the adversary.
    :param fc_mode: fork choice used by honest validators.
    :param proposer_offset: proposer of slot t is (t + offset) mod n.
    :param sleep: per validator, half-open intervals [a, b) of asleep rounds.
    :param corruption: per validator, the round from which it is corrupted.
    :param adversary: adversary strategy.
    """

    n: int
    delta: int
    horizon: int
    gst: Round = 0
    gat: Round = 0
    eta: float = math.inf
    tau: Optional[float] = None
    kappa: int = 2
    seed: int = 0
    latency: Latency = Latency.MAX
    fc_mode: FcMode = FcMode.HFC
    proposer_offset: int = 0
    sleep: Dict[ValidatorIndex, Tuple[Interval, ...]] = field(default_factory=dict)
    corruption: Dict[ValidatorIndex, Round] = field(default_factory=dict)
    adversary: AdversarySpec = field(default_factory=AdversarySpec)

    def __post_init__(self) -> None:
        if self.tau is None:
            self.tau = self.eta

    @property
    def rounds_per_slot(self) -> int:
        return 4 * self.delta

    @property
    def total_rounds(self) -> int:
        return self.horizon * self.rounds_per_slot

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(
            n=self.n,
            delta=self.delta,
            eta=self.eta,
            kappa=self.kappa,
            fc_mode=self.fc_mode,
        )

    def proposer_of(self, t: Slot) -> ValidatorIndex:
        return round_robin(self.n, self.proposer_offset)(t)

    def corruption_round(self, i: ValidatorIndex) -> Optional[Round]:
        return self.corruption.get(i)

    def is_corrupted(self, i: ValidatorIndex, r: Round) -> bool:
        start = self.corruption.get(i)
        return start is not None and r >= start

    def is_awake(self, i: ValidatorIndex, r: Round) -> bool:
        """Corrupted validators are always awake."""
        if self.is_corrupted(i, r):
            return True
        return not any(a <= r < b for a, b in self.sleep.get(i, ()))

    def honest(self, r: Round) -> List[ValidatorIndex]:
        return [i for i in range(self.n) if not self.is_corrupted(i, r)]

    def ever_corrupted(self) -> FrozenSet[ValidatorIndex]:
        return frozenset(self.corruption)

    def with_changes(self, **changes: Any) -> "Scenario":
        """Copy of the scenario with some fields replaced."""
        values = {**self.__dict__, **changes}
        if "eta" in changes and "tau" not in changes:
            values["tau"] = None
        return Scenario(**values)

    def validate(self) -> None:
        """Verify the scenario invariants.

        :raises ScenarioError: listing every violated invariant.
        """
        problems: List[str] = []
        if self.n < 1:
            problems.append(f"n must be at least 1, got {self.n}")
        if self.delta < 1:
            problems.append(f"delta must be at least 1, got {self.delta}")
        if self.horizon < 1:
            problems.append(f"horizon must be at least 1 slot, got {self.horizon}")
        for name in ("gst", "gat", "seed", "proposer_offset"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must not be negative")
        if self.kappa < 0:
            problems.append("kappa must not be negative")
        if self.eta < 1 or (self.tau is not None and self.tau < 1):
            problems.append("eta and tau must be at least 1 slot")

        for i in sorted(set(self.sleep) | set(self.corruption)):
            if not 0 <= i < self.n:
                problems.append(f"validator index v{i} out of range [0, {self.n})")
        for i, intervals in sorted(self.sleep.items()):
            for a, b in intervals:
                if not 0 <= a < b:
                    problems.append(f"v{i}: invalid sleep interval [{a}, {b})")
                if b > self.gat and i not in self.corruption:
                    problems.append(
                        f"v{i}: honest validator asleep after GAT ({self.gat}) "
                        f"in [{a}, {b})"
                    )
                start = self.corruption.get(i)
                if start is not None and b > start:
                    problems.append(
                        f"v{i}: asleep in [{a}, {b}) after its corruption at "
                        f"round {start}"
                    )
        for i, start in sorted(self.corruption.items()):
            if start < 0:
                problems.append(f"v{i}: negative corruption round {start}")

        problems.extend(self._validate_adversary())
        if problems:
            raise ScenarioError(problems)

    def _validate_adversary(self) -> List[str]:
        problems: List[str] = []
        adv = self.adversary
        for i in sorted(adv.side_a):
            if not 0 <= i < self.n:
                problems.append(f"side_a: validator index v{i} out of range")
        if adv.strategy in (Strategy.PARTITIONER, Strategy.DOUBLE_FINALIZER):
            if not adv.side_a:
                problems.append(f"{adv.strategy.value}: side_a must not be empty")
        if adv.strategy is Strategy.DOUBLE_FINALIZER:
            if adv.route not in ROUTES:
                problems.append(
                    f"double-finalizer: route must be one of {', '.join(ROUTES)}"
                )
            if not self.corruption:
                problems.append("double-finalizer: no corrupted validator")
        if adv.strategy is not Strategy.HONEST_MIRROR and not self.corruption:
            if adv.strategy is not Strategy.PARTITIONER:
                problems.append(
                    f"{adv.strategy.value}: strategy set but no validator is "
                    "corrupted"
                )
        return problems

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form of the scenario, as written in trace headers."""

        def number(x: float) -> Any:
            return "inf" if math.isinf(x) else x

        return {
            "n": self.n,
            "delta": self.delta,
            "horizon": self.horizon,
            "gst": self.gst,
            "gat": self.gat,
            "eta": number(self.eta),
            "tau": number(self.tau),  # type: ignore[arg-type]
            "kappa": self.kappa,
            "seed": self.seed,
            "latency": self.latency.value,
            "fc_mode": self.fc_mode.value,
            "proposer_offset": self.proposer_offset,
            "sleep": {
                str(i): [list(x) for x in v] for i, v in sorted(self.sleep.items())
            },
            "corruption": {str(i): r for i, r in sorted(self.corruption.items())},
            "adversary": {
                "strategy": self.adversary.strategy.value,
                "side_a": sorted(self.adversary.side_a),
                "route": self.adversary.route,
                "slots_a": sorted(self.adversary.slots_a),
                "slots_b": sorted(self.adversary.slots_b),
            },
        }

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "Scenario":
        adversary = values.get("adversary", {})
        return cls(
            n=int(values["n"]),
            delta=int(values["delta"]),
            horizon=int(values["horizon"]),
            gst=int(values.get("gst", 0)),
            gat=int(values.get("gat", 0)),
            eta=float(values.get("eta", "inf")),
            tau=float(values["tau"]) if values.get("tau") is not None else None,
            kappa=int(values.get("kappa", 2)),
            seed=int(values.get("seed", 0)),
            latency=str_to_latency(values.get("latency", "max")),
            fc_mode=str_to_fc_mode(values.get("fc_mode", "hfc")),
            proposer_offset=int(values.get("proposer_offset", 0)),
            sleep={
                int(i): tuple((int(a), int(b)) for a, b in v)
                for i, v in values.get("sleep", {}).items()
            },
            corruption={
                int(i): int(r) for i, r in values.get("corruption", {}).items()
            },
            adversary=AdversarySpec(
                strategy=str_to_strategy(adversary.get("strategy", "honest-mirror")),
                side_a=frozenset(adversary.get("side_a", ())),
                route=adversary.get("route"),
                slots_a=frozenset(adversary.get("slots_a", ())),
                slots_b=frozenset(adversary.get("slots_b", ())),
            ),
        )

    def describe(self) -> List[str]:
        """Summary lines for display."""
        lines = [
            f"validators: {self.n}, delta: {self.delta}, horizon: {self.horizon} "
            f"slots ({self.total_rounds} rounds)",
            f"GST: {self.gst}, GAT: {self.gat}, eta: {self.eta}, tau: {self.tau}, "
            f"kappa: {self.kappa}",
            f"seed: {self.seed}, latency: {self.latency.value}, "
            f"fork choice: {self.fc_mode.value}",
            f"adversary: {self.adversary.strategy.value}",
        ]
        if self.corruption:
            lines.append(
                "corrupted: "
                + ", ".join(f"v{i}@{r}" for i, r in sorted(self.corruption.items()))
            )
        if self.sleep:
            lines.append(
                "sleeping: "
                + ", ".join(
                    f"v{i} {' '.join(f'[{a},{b})' for a, b in v)}"
                    for i, v in sorted(self.sleep.items())
                )
            )
        return lines


def _validator_key(key: str) -> ValidatorIndex:
    if not (key.startswith("v") and key[1:].isdigit()):
        raise ValueError(f"'{key}' is not a validator name (expected v<index>)")
    return int(key[1:])


def _intervals(value: str) -> Tuple[Interval, ...]:
    intervals = []
    for item in str_to_list(value):
        a, sep, b = item.partition("-")
        if not sep:
            raise ValueError(f"'{item}' is not an interval (expected a-b)")
        intervals.append((int(a), int(b)))
    return tuple(intervals)


def _int_set(value: str) -> FrozenSet[int]:
    return frozenset(
        _validator_key(x) if x.startswith("v") else int(x) for x in str_to_list(value)
    )


def _number(value: str) -> float:
    return math.inf if value.lower() in ("inf", "infinity") else float(value)


def load_scenario(path: str) -> Scenario:
    """Load a scenario file.

    :param path: the file, as a path or as a name inside SSF_SCENARIO_DIR.
    :raises ScenarioError: if the file does not describe a valid scenario.
    :raises ValueError: if the file cannot be found.
    """
    config_file = find_config_file(path)
    tables = config_values_from_file(
        config_file,
        args_required=("n", "delta", "horizon"),
        tables=("proposers", "sleep", "corruption", "adversary"),
    )
    top = tables[TOP_LEVEL]
    proposers = tables.get("proposers", {})
    adversary = tables.get("adversary", {})

    try:
        if proposers.get("rule", "round-robin") not in ("round-robin", "round_robin"):
            raise ValueError(f"unknown proposer rule '{proposers['rule']}'")
        eta = _number(top.get("eta", "inf"))
        scenario = Scenario(
            n=int(top["n"]),
            delta=int(top["delta"]),
            horizon=int(top["horizon"]),
            gst=int(top.get("gst", 0)),
            gat=int(top.get("gat", 0)),
            eta=eta,
            tau=_number(top["tau"]) if "tau" in top else None,
            kappa=int(top.get("kappa", 2)),
            seed=int(top.get("seed", 0)),
            latency=str_to_latency(top.get("latency", "max")),
            fc_mode=str_to_fc_mode(top.get("fc_mode", "hfc")),
            proposer_offset=int(proposers.get("offset", 0)),
            sleep={
                _validator_key(k): _intervals(v)
                for k, v in tables.get("sleep", {}).items()
            },
            corruption={
                _validator_key(k): int(v)
                for k, v in tables.get("corruption", {}).items()
            },
            adversary=AdversarySpec(
                strategy=str_to_strategy(adversary.get("strategy", "honest-mirror")),
                side_a=_int_set(adversary.get("side_a", "")),
                route=adversary["route"].upper() if "route" in adversary else None,
                slots_a=_int_set(adversary.get("slots_a", "")),
                slots_b=_int_set(adversary.get("slots_b", "")),
            ),
        )
    except ValueError as e:
        raise ScenarioError([str(e)], source=config_file) from None

    try:
        scenario.validate()
    except ScenarioError as e:
        raise ScenarioError(e.problems, source=config_file) from None
    return scenario
