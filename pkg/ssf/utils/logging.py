"""Logging and user display related functions."""

from typing import Iterable, Sequence

from ..harness.verdict import Verdict
from ..simnet.scenario import Scenario
from .timer import Timer

RULE = "#" * 100


def print_summary_start(sc: Scenario, source: str) -> None:
    """Print the scenario summary before a run."""
    print(
        RULE + "\n",
        f"### Scenario: {source}\n",
        "###  -> " + "\n###  -> ".join(sc.describe()) + "\n",
        "### ",
        sep="",
    )


def print_lines(title: str, lines: Sequence[str]) -> None:
    print(
        f"### {title}:\n",
        "###  -> " + "\n###  -> ".join(lines or ["none"]) + "\n",
        "### ",
        sep="",
    )


def print_verdicts(verdicts: Iterable[Verdict]) -> None:
    """One machine parsable line per verdict."""
    for verdict in verdicts:
        print(verdict.as_line())


def print_summary_end(description: str, timer: Timer) -> None:
    """Print end of command summary with the recorded times."""
    print(f"### Completed {description} in {timer.total_time_as_str}.")
    if len(timer.laps) > 1:
        print(
            "### Times:\n",
            "###  - " + "\n###  - ".join(timer.recorded_times_as_str) + "\n",
            sep="",
        )
    print(RULE + "\n")
