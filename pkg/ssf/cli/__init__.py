"""Command line interface module."""

import logging
import sys
from typing import Any, Dict, Optional, Sequence

from .. import __version__
from ..harness.checks import PROPERTIES
from ..workflows.inspect_trace import ALL_PROPERTIES, check_trace, slash_scan
from ..workflows.simulate import compliance, equivalence, run_scenario
from .cli_builder import Argument, CliWithSubcommands, Subcommand

SCENARIO = Argument("scenario", help="Scenario file, or its name in SSF_SCENARIO_DIR.")
SEED = Argument(
    "--seed", dest="seed", type=int, default=None, help="Override the seed."
)
TRACE_IN = Argument(
    "-t", "--trace", dest="trace", required=True, help="Trace file to read."
)


class Cli(CliWithSubcommands):
    """Command line arguments and options."""

    description = "Single-slot-finality protocol simulator and property checker"
    version = __version__
    global_arguments = (
        Argument(
            "-v",
            "--verbose",
            dest="verbose",
            help="Display debug messages.",
            default=False,
            action="store_true",
        ),
    )
    subcommands = (
        Subcommand(
            f=run_scenario,
            name="run",
            arguments=(
                SCENARIO,
                SEED,
                Argument(
                    "-t", "--trace", dest="trace", default=None, help="Write the trace."
                ),
                Argument(
                    "-c",
                    "--check",
                    dest="check",
                    help="Check every property on the trace.",
                    default=False,
                    action="store_true",
                ),
            ),
        ),
        Subcommand(
            f=check_trace,
            name="check",
            arguments=(
                Argument("property", choices=(*PROPERTIES, ALL_PROPERTIES)),
                TRACE_IN,
                Argument(
                    "--t-after",
                    dest="t_after",
                    type=int,
                    default=0,
                    help="First round checked by safety and liveness.",
                ),
                Argument(
                    "--t-conf",
                    dest="t_conf",
                    type=int,
                    default=None,
                    help="Confirmation time of the liveness checks, in rounds.",
                ),
            ),
        ),
        Subcommand(f=equivalence, aliases=("eq",), arguments=(SCENARIO, SEED)),
        Subcommand(f=slash_scan, arguments=(TRACE_IN,)),
        Subcommand(f=compliance, arguments=(SCENARIO,)),
    )

    def handle_global_arguments(self, user_input_args: Dict[str, Any]) -> None:
        if user_input_args.pop("verbose"):
            logging.basicConfig(level=logging.DEBUG)


def run(args: Optional[Sequence[str]] = None) -> int:
    """Launcher for the ssf application."""
    if args is None:
        args = sys.argv[1:]
    return Cli(args).exit_code
