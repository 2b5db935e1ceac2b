"""Functions of the "run", "equivalence" and "compliance" workflows, which
simulate scenario files.
"""

import logging
import sys
from typing import Optional

from ..harness.checks import check_all, check_equivalence
from ..harness.verdict import all_ok
from ..simnet.participation import check_compliance
from ..simnet.scenario import Scenario, load_scenario
from ..simnet.trace import SELF_VIOLATION
from ..simnet.world import run
from ..utils.logging import (
    print_lines,
    print_summary_end,
    print_summary_start,
    print_verdicts,
)
from ..utils.timer import Timer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _load(scenario: str, seed: Optional[int] = None) -> Optional[Scenario]:
    """Load and validate a scenario file. Errors are printed and give None."""
    try:
        sc = load_scenario(scenario)
        if seed is not None:
            sc = sc.with_changes(seed=seed)
        sc.validate()
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return None
    return sc


def run_scenario(
    scenario: str,
    seed: Optional[int] = None,
    trace: Optional[str] = None,
    check: bool = False,
) -> int:
    """Simulate a scenario file, optionally writing its trace and checking
    every property on it.
    """
    sc = _load(scenario, seed)
    if sc is None:
        return EXIT_USAGE

    timer = Timer(start_timer=True)
    print_summary_start(sc, scenario)
    result = run(sc)
    timer.lap("simulation")

    self_violations = list(result.trace.events(SELF_VIOLATION))
    print_lines(
        "Run",
        [
            f"records: {len(result.trace)}",
            f"messages sent: {len(result.trace.sent_messages())}",
            f"honest self-violations: {len(self_violations)}",
        ],
    )

    if trace is not None:
        with open(trace, "w", encoding="utf-8") as f:
            result.trace.dump(f)
        timer.lap("trace dump")
        print(f"### Trace written to {trace}")

    exit_code = EXIT_OK
    if check:
        verdicts = check_all(result.trace)
        timer.lap("checks")
        print_verdicts(verdicts)
        if not all_ok(verdicts):
            exit_code = EXIT_VIOLATION

    timer.stop()
    print_summary_end(f"run of {scenario}", timer)
    return exit_code


def equivalence(scenario: str, seed: Optional[int] = None) -> int:
    """Compare the traces of a compliant scenario under the hybrid and the
    plain RLMD-GHOST fork choice.
    """
    sc = _load(scenario, seed)
    if sc is None:
        return EXIT_USAGE

    timer = Timer(start_timer=True)
    verdict = check_equivalence(sc)
    timer.stop()
    print_verdicts([verdict])
    logger.debug("Equivalence checked in %s", timer.total_time_as_str)
    return EXIT_OK if verdict.ok else EXIT_VIOLATION


def compliance(scenario: str) -> int:
    """Check the sleepiness condition of a scenario for every slot after GST,
    and simulate it to count the head vote equivocators among the messages
    actually sent.
    """
    sc = _load(scenario)
    if sc is None:
        return EXIT_USAGE
    report = check_compliance(sc, run(sc).trace.sent_messages())
    print_lines(f"Compliance of {scenario}", report.describe())
    return EXIT_OK if report.compliant else EXIT_VIOLATION
