"""
Utility functions for qfi-bell.
"""
import csv
import io
import json
import math
import re
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.config import PRECISION
from common.errors import SpecParseError

UNDEFINED = "undefined"


def format_float(value: Optional[float], digits: int = PRECISION) -> str:
    """
    Format a float with a fixed number of significant digits.

    Args:
        value: The value to format, None for an undefined quantity
        digits: Significant digits

    Returns:
        Formatted string, "undefined" for None
    """
    if value is None:
        return UNDEFINED
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(value)
    return f"{value:.{digits}g}"


def format_json_response(obj: Any, indent: int = 2) -> str:
    """
    Format an object as a JSON string.

    Args:
        obj: The object to format
        indent: Indentation level

    Returns:
        Formatted JSON string
    """
    return json.dumps(obj, indent=indent)


def format_csv(columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
    """
    Format rows as CSV text with a header line.

    Args:
        columns: Column names, in output order
        rows: Row dicts keyed by column name

    Returns:
        CSV text, floats printed with PRECISION significant digits
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(row.get(column)) for column in columns])
    return buffer.getvalue()


def rounded_row(row: Dict[str, Any], digits: int = PRECISION) -> Dict[str, Any]:
    """
    Round the floats of a row the way CSV output prints them.

    Args:
        row: Row dict
        digits: Significant digits

    Returns:
        Row dict with floats rounded, for JSON output mirroring CSV
    """
    rounded = {}
    for key, value in row.items():
        if isinstance(value, float) and not isinstance(value, bool):
            rounded[key] = float(format_float(value, digits)) if math.isfinite(value) else format_float(value, digits)
        else:
            rounded[key] = value
    return rounded


def validate_input(
    data: Dict[str, Any],
    required_fields: List[str],
    field_validators: Optional[Dict[str, Callable[[Any], None]]] = None
) -> Dict[str, str]:
    """
    Validate a configuration dict.

    Args:
        data: The input data
        required_fields: List of required field names
        field_validators: Optional dict of field validators

    Returns:
        Dict of validation errors, empty if validation passes
    """
    errors = {}

    # Check required fields
    for field in required_fields:
        if field not in data or data[field] is None or data[field] == "":
            errors[field] = f"Field '{field}' is required"

    # Apply field validators
    if field_validators:
        for field, validator in field_validators.items():
            if field in data and data[field] is not None and field not in errors:
                try:
                    validator(data[field])
                except ValueError as e:
                    errors[field] = str(e)

    return errors


def parse_param_range(text: str) -> Tuple[float, float, int]:
    """
    Parse a parameter range of the form a:b:steps.

    Args:
        text: Range string, e.g. "0:0.3:200"

    Returns:
        Tuple (start, stop, steps)

    Raises:
        SpecParseError: If the range is malformed
    """
    match = re.fullmatch(r"\s*([^:]+):([^:]+):([^:]+)\s*", text or "")
    if not match:
        raise SpecParseError(f"Range '{text}' is not of the form a:b:steps", text)

    start_token, stop_token, steps_token = match.groups()
    start = _parse_number(start_token)
    stop = _parse_number(stop_token)

    try:
        steps = int(steps_token)
    except ValueError:
        raise SpecParseError(f"Bad step count '{steps_token}' in range '{text}'", steps_token)

    if steps < 1:
        raise SpecParseError(f"Step count must be positive in range '{text}'", steps_token)

    return start, stop, steps


def parse_state_spec(text: str) -> Tuple[str, int, Tuple[float, ...]]:
    """
    Parse a state spec of the form family:N[:param...].

    Args:
        text: State spec, e.g. "oat:50:0.05"

    Returns:
        Tuple (family, n_parties, params)

    Raises:
        SpecParseError: If a token cannot be parsed
    """
    tokens = (text or "").strip().split(":")
    if len(tokens) < 2 or not tokens[0]:
        raise SpecParseError(f"State spec '{text}' is not of the form family:N[:param]", text)

    family = tokens[0].lower()
    try:
        n_parties = int(tokens[1])
    except ValueError:
        raise SpecParseError(f"Bad party count '{tokens[1]}' in state spec '{text}'", tokens[1])

    params = tuple(_parse_number(token) for token in tokens[2:])
    return family, n_parties, params


def parse_int_list(text: str) -> List[int]:
    """
    Parse a comma separated list of integers, e.g. "4,6,8".

    Args:
        text: The list string

    Returns:
        List of integers
    """
    values = []
    for token in (text or "").split(","):
        token = token.strip()
        if not token:
            continue
        try:
            values.append(int(token))
        except ValueError:
            raise SpecParseError(f"Bad integer '{token}' in list '{text}'", token)
    if not values:
        raise SpecParseError(f"Empty integer list '{text}'", text or "")
    return values


def _parse_number(token: str) -> float:
    """Parse a float token, accepting 'pi' multiples such as 'pi/2'."""
    token = token.strip()
    match = re.fullmatch(r"(-?[0-9.eE+-]*)\*?pi(?:/([0-9.]+))?", token)
    try:
        if match:
            factor = match.group(1)
            value = math.pi * (float(factor) if factor not in ("", "-") else (-1.0 if factor == "-" else 1.0))
            if match.group(2):
                value /= float(match.group(2))
            return value
        return float(token)
    except ValueError:
        raise SpecParseError(f"Bad number '{token}'", token)
