"""Functions of the "check" and "slash-scan" workflows, which read trace
files written by the "run" workflow.
"""

import sys
from typing import Optional

from ..harness.checks import check_all, check_property
from ..harness.verdict import all_ok
from ..protocol.slasher import scan
from ..simnet.trace import JUSTIFICATION_TIE, Trace, TraceError
from ..utils.logging import print_lines, print_verdicts
from .simulate import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION

ALL_PROPERTIES = "all"


def _load_trace(path: str) -> Optional[Trace]:
    try:
        with open(path, encoding="utf-8") as f:
            return Trace.load(f)
    except (OSError, TraceError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return None


def check_trace(
    property: str,  # pylint: disable=redefined-builtin
    trace: str,
    t_after: int = 0,
    t_conf: Optional[int] = None,
) -> int:
    """Check a property, or all of them, on a trace file."""
    loaded = _load_trace(trace)
    if loaded is None:
        return EXIT_USAGE
    if property == ALL_PROPERTIES:
        verdicts = check_all(loaded, t_after, t_conf)
    else:
        verdicts = [check_property(property, loaded, t_after, t_conf)]
    print_verdicts(verdicts)
    return EXIT_OK if all_ok(verdicts) else EXIT_VIOLATION


def slash_scan(trace: str) -> int:
    """List every slashable offence provable from the messages of a trace.
    Offences by validators that were never corrupted count as violations.
    """
    loaded = _load_trace(trace)
    if loaded is None:
        return EXIT_USAGE
    sc = loaded.scenario
    violations = sorted(
        scan(loaded.sent_messages()),
        key=lambda x: (x.offender, x.kind.value, x.describe()),
    )
    print_lines("Slashable offences", [x.describe() for x in violations])
    ties = [
        f"{x.actor}@{x.round}: slot {x.payload['slot']}"
        for x in loaded.events(JUSTIFICATION_TIE)
    ]
    if ties:
        print_lines("Justification ties seen by honest validators", ties)
    honest = sorted({x.offender for x in violations if x.offender not in sc.corruption})
    if honest:
        print(f"### Offences by honest validators: {honest}")
        return EXIT_VIOLATION
    return EXIT_OK
