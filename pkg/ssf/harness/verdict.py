"""Checker verdicts."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable


class Outcome(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    WAIVED = "WAIVED"


@dataclass(frozen=True)
class Verdict:
    """Result of checking one property on one trace.

    :param property: name of the checked property.
    :param outcome: PASS, FAIL, or WAIVED when a precondition does not hold.
    :param detail: one-line human readable detail.
    :param counterexample: data locating the violation, empty unless FAIL.
    """

    property: str
    outcome: Outcome
    detail: str = ""
    counterexample: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def passed(cls, prop: str, detail: str = "") -> "Verdict":
        return cls(prop, Outcome.PASS, detail)

    @classmethod
    def failed(cls, prop: str, detail: str, **counterexample: Any) -> "Verdict":
        return cls(prop, Outcome.FAIL, detail, counterexample)

    @classmethod
    def waived(cls, prop: str, detail: str) -> "Verdict":
        return cls(prop, Outcome.WAIVED, detail)

    @property
    def ok(self) -> bool:
        """False only for FAIL."""
        return self.outcome is not Outcome.FAIL

    def as_line(self) -> str:
        """Machine parsable form: '<OUTCOME> <property> <detail>'."""
        return f"{self.outcome.value} {self.property} {self.detail}".rstrip()


def all_ok(verdicts: Iterable[Verdict]) -> bool:
    return all(x.ok for x in verdicts)
