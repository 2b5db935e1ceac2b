"""Parsing of key = value config files with [table] sections."""

import os
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

SCENARIO_DIR_ENV_VAR = "SSF_SCENARIO_DIR"
TOP_LEVEL = ""

E = TypeVar("E", bound=Enum)
ConfigTables = Dict[str, Dict[str, str]]


def strip_comment(s: str, sep: str = "#") -> str:
    """Strips comments - any characters placed after a # - from strings."""
    return s[: s.find(sep)].strip() if sep in s else s.strip()


def str_to_list(value: str) -> List[str]:
    """Converts a string to a list of strings by splitting it using a number
    of pre-defined separators.
    """
    value = value.strip()
    if not value:
        return []
    for sep in (";", ","):
        if sep in value:
            return [x.strip() for x in value.split(sep) if x.strip()]
    return [value]


def str_to_enum(value: str, synonyms: Mapping[E, Tuple[str, ...]], name: str) -> E:
    """Returns the Enum member whose value, or one of its synonyms, matches
    the given string.
    """
    for member, accepted in synonyms.items():
        if value.strip().lower() in accepted:
            return member

    raise ValueError(
        f"The value '{value}' does not match any accepted {name} or one of "
        "its synonyms. Accepted values are: "
        + "; ".join(
            f"{member.value}: {', '.join(accepted)}"
            for member, accepted in synonyms.items()
        )
        + "."
    )


def config_values_from_file(
    config_file_path: str,
    args_required: Sequence[str] = (),
    tables: Sequence[str] = (),
) -> ConfigTables:
    """Load the values of a config file, grouped by table. Values found
    before the first "[table]" header belong to the top-level table, stored
    under the empty string key.

    :param config_file_path: path of the file to read.
    :param args_required: top-level keys that must be present.
    :param tables: accepted table names. Any other table name is an error.
    :raises ValueError: on a missing required key, an unknown table or a line
        that is not a "key = value" pair.
    """
    values: ConfigTables = {TOP_LEVEL: {}}
    current = TOP_LEVEL
    errors: List[str] = []

    with open(os.path.expanduser(config_file_path), mode="r", encoding="utf8") as f:
        for line_number, line in enumerate(f, start=1):
            line = strip_comment(line)
            if not line:
                continue

            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if current not in tables:
                    errors.append(f"line {line_number}: unknown table [{current}]")
                values.setdefault(current, {})
                continue

            if "=" not in line:
                errors.append(f"line {line_number}: expected 'key = value'")
                continue

            argument, value = map(str.strip, line.split("=", 1))
            argument = argument.replace("-", "_")
            values[current][argument] = value.replace('"', "")

    missing_args = [x for x in args_required if x not in values[TOP_LEVEL]]
    if missing_args:
        errors.append("missing required value(s): " + ", ".join(missing_args))
    if errors:
        raise ValueError(
            f"Error in config file [{config_file_path}]:\n -> " + "\n -> ".join(errors)
        )

    return values


def config_file_from_environment_variable(
    environment_var_name: str, file_name: str
) -> Optional[str]:
    """Look for file_name in the directory named by the given shell
    environment variable. Returns None if the variable is not set or the
    file is not there.
    """
    if environment_var_name not in os.environ:
        return None

    directory = Path(os.path.expanduser(os.environ[environment_var_name]))
    if not directory.is_dir():
        raise ValueError(
            "Error loading config file: the directory defined in the "
            f"[{environment_var_name}] environment variable is missing or "
            f"cannot be accessed: {directory}"
        )
    config_file = directory.joinpath(file_name)
    return config_file.as_posix() if config_file.is_file() else None


def find_config_file(file_name: str) -> str:
    """Search for a config file in different locations and return its path.

    The following locations are searched:
     * the path as given (absolute, or relative to the working directory).
     * the directory named by the SSF_SCENARIO_DIR environment variable.
    """
    if os.path.isfile(os.path.expanduser(file_name)):
        return os.path.expanduser(file_name)

    config_file = config_file_from_environment_variable(SCENARIO_DIR_ENV_VAR, file_name)
    if config_file:
        return config_file

    raise ValueError(
        f"Error loading scenario file: cannot find '{file_name}'. "
        "The following locations were searched: \n"
        f" * Path: {os.path.abspath(os.path.expanduser(file_name))}\n"
        f" * Environment variable: {SCENARIO_DIR_ENV_VAR}"
    )
