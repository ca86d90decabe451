"""
Scan operations module.

Builds states from the family:N[:param] mini-grammar, aggregates the
single-state report, and produces the rows of parameter scans, the witness
region map and the Mermin threshold table. Rows are computed in a worker
pool and returned in grid order.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.config import get_thread_count
from common.errors import SpecParseError, ValidationError
from common.utils import parse_state_spec, validate_input
from operations.bell import (
    DEFAULT_RESOLUTION,
    default_region_grid,
    mermin_bound,
    mermin_check,
    mermin_mixture_threshold,
    optimize_eq17,
    optimize_eq3m,
    qfi_necessary_condition,
    region_map,
    squeezing_summary,
    witness_1m,
    witness_2m,
)
from operations.fisher import exceeds_limit, qfi_exact, shot_noise_limit
from operations.oracle import MAX_MERMIN_LHV_PARTIES, mermin_lhv_max
from operations.symmetric import (
    SymmetricState,
    dicke_operator_sz,
    state_css,
    state_dicke,
    state_from_dict,
    state_ghz,
    state_ghz_mixture,
    state_maximally_mixed,
    state_oat,
    state_tat,
)

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS = 6
OUTPUT_FORMATS = ("csv", "json")

REGION_COLUMNS = ["xi2", "C", "w1m_margin", "w2m_margin", "w1m_violated", "w2m_violated"]

SCAN_COLUMNS = [
    "family", "n", "param",
    "xi2", "zeta2", "C",
    "qfi", "qfi_over_N", "N_over_xi2",
    "eq17_value", "eq17_phi", "eq17_violated",
    "eq3m_value", "eq3m_violated",
    "w1m_margin", "w1m_violated", "w2m_margin", "w2m_violated",
    "mermin_value", "mermin_bound", "mermin_violated",
    "qfi_beats_N", "qfi_beats_2N", "lb_beats_N",
]

THRESHOLD_COLUMNS = ["n", "mermin_bound", "mermin_p_threshold", "qfi_p_threshold", "lhv_max"]


@dataclass(frozen=True)
class StateFamily:
    """A buildable state family: its builder, parameter name and parameter count bounds."""
    name: str
    builder: Callable[..., SymmetricState]
    parameter: Optional[str]
    min_params: int
    max_params: int


STATE_FAMILIES: Dict[str, StateFamily] = {
    "ghz": StateFamily("ghz", state_ghz, None, 0, 0),
    "css": StateFamily("css", state_css, "theta", 1, 2),
    "oat": StateFamily("oat", state_oat, "mu", 1, 1),
    "tat": StateFamily("tat", state_tat, "chi", 1, 1),
    "mix": StateFamily("mix", state_ghz_mixture, "p", 1, 1),
    "dicke": StateFamily("dicke", lambda n, k: state_dicke(n, int(k)), "k", 1, 1),
    "maxmixed": StateFamily("maxmixed", state_maximally_mixed, None, 0, 0),
}

SCAN_FAMILIES = ("oat", "tat", "mix", "css", "ghz")


def get_family(name: str) -> StateFamily:
    family = STATE_FAMILIES.get(name)
    if family is None:
        raise SpecParseError(f"Unknown state family '{name}', expected one of {sorted(STATE_FAMILIES)}", name)
    return family


def build_state(family_name: str, n: int, params: Sequence[float] = ()) -> SymmetricState:
    """
    Build a state of a named family.

    Args:
        family_name: Key of STATE_FAMILIES
        n: Number of qubits
        params: Family parameters

    Returns:
        SymmetricState
    """
    family = get_family(family_name)
    if not family.min_params <= len(params) <= family.max_params:
        raise SpecParseError(
            f"Family '{family.name}' takes {family.min_params} to {family.max_params} parameters, got {len(params)}",
            family.name,
        )
    return family.builder(n, *params)


def build_state_from_spec(text: str) -> SymmetricState:
    """Build a state from a spec such as ghz:8, oat:50:0.05 or mix:6:0.4."""
    family, n, params = parse_state_spec(text)
    return build_state(family, n, params)


def load_state(source: str) -> SymmetricState:
    """
    Load a state from a .json file written by --save-state, or build it from a spec.

    Args:
        source: Path ending in .json, or a state spec

    Returns:
        SymmetricState
    """
    if source.lower().endswith(".json"):
        with open(source, "r") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise SpecParseError(f"State file '{source}' is not valid JSON: {e}", source)
        return state_from_dict(data)
    return build_state_from_spec(source)


def build_report(
    rho: SymmetricState,
    label: str = "",
    settings: int = DEFAULT_SETTINGS,
    resolution: int = DEFAULT_RESOLUTION
) -> Dict[str, Any]:
    """
    Aggregate QFI, squeezing, witnesses and Bell values of one state.

    Args:
        rho: State with N >= 2
        label: Spec or file the state came from
        settings: Number of settings of the m-setting inequality
        resolution: Optimization grid resolution

    Returns:
        Nested report dict
    """
    n = rho.n_parties
    if n < 2:
        raise ValidationError(f"Reports need N >= 2, got {n}")

    summary = squeezing_summary(rho)
    report: Dict[str, Any] = {
        "state": label,
        "n": n,
        "kind": rho.kind,
        "qfi": qfi_exact(rho, dicke_operator_sz(n)).to_dict(),
        "squeezing": summary.to_dict(),
        "witness_1m": witness_1m(summary).to_dict(),
        "witness_2m": witness_2m(summary).to_dict(),
        "necessary_condition": (
            qfi_necessary_condition(summary).to_dict() if summary.xi2_defined and summary.xi2 > 0 else None
        ),
    }

    eq17 = optimize_eq17(rho, resolution)
    eq3m = optimize_eq3m(rho, settings, resolution)
    mermin = mermin_check(rho)
    report["eq17"] = {"value": eq17.value, "phi": eq17.details["phi"], "violated": eq17.violated}
    report["eq3m"] = {
        "m": settings,
        "value": eq3m.value,
        "half_width": eq3m.details["half_width"],
        "classical_bound_offset": eq3m.classical_bound_offset,
        "violated": eq3m.violated,
    }
    report["mermin"] = {"value": mermin.value, "bound": mermin.classical_bound_offset, "violated": mermin.violated}
    return report


def _report_lines(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    lines = []
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(_report_lines(value, f"{name}."))
        else:
            lines.append((name, value))
    return lines


def format_report_text(report: Dict[str, Any], formatter: Callable[[Any], str]) -> str:
    """One 'key: value' line per leaf of the report, in insertion order."""
    return "\n".join(f"{key}: {formatter(value)}" for key, value in _report_lines(report)) + "\n"


@dataclass(frozen=True)
class ScanConfig:
    """Parameter scan: a family, party counts, a parameter grid and output options."""
    family: str
    n_values: Tuple[int, ...]
    param_range: Optional[Tuple[float, float, int]] = None
    settings: int = DEFAULT_SETTINGS
    resolution: int = DEFAULT_RESOLUTION
    output_path: Optional[str] = None
    output_format: str = "csv"
    extra_params: Tuple[float, ...] = field(default_factory=tuple)

    def validate(self) -> None:
        """
        Raises:
            ValidationError: With the per-field messages in details
        """
        def check_family(value):
            if value not in SCAN_FAMILIES:
                raise ValueError(f"Family must be one of {', '.join(SCAN_FAMILIES)}")

        def check_n_values(value):
            if not value:
                raise ValueError("At least one N is required")
            if any(n < 2 for n in value):
                raise ValueError("Every N must be at least 2")

        def check_range(value):
            if value[2] < 1:
                raise ValueError("Parameter grid must be nonempty")

        def check_at_least_two(name):
            def check(value):
                if value < 2:
                    raise ValueError(f"{name} must be at least 2")
            return check

        def check_format(value):
            if value not in OUTPUT_FORMATS:
                raise ValueError(f"Format must be one of {', '.join(OUTPUT_FORMATS)}")

        required = ["family", "n_values"]
        if self.family != "ghz":
            required.append("param_range")
        errors = validate_input(
            self.__dict__,
            required,
            {
                "family": check_family,
                "n_values": check_n_values,
                "param_range": check_range,
                "settings": check_at_least_two("Number of settings"),
                "resolution": check_at_least_two("Resolution"),
                "output_format": check_format,
            },
        )
        if errors:
            raise ValidationError("Invalid scan configuration: " + "; ".join(errors.values()), errors)

    def parameter_values(self) -> List[Optional[float]]:
        """Sorted parameter grid, [None] for the parameterless family."""
        if self.family == "ghz":
            return [None]
        start, stop, steps = self.param_range
        return sorted(float(v) for v in np.linspace(start, stop, steps))


def scan_row(
    family: str,
    n: int,
    param: Optional[float],
    settings: int = DEFAULT_SETTINGS,
    resolution: int = DEFAULT_RESOLUTION,
    extra_params: Sequence[float] = ()
) -> Dict[str, Any]:
    """
    All scan columns for one parameter point.

    Args:
        family: Scan family
        n: Number of qubits
        param: Family parameter, None for GHZ
        settings: Number of settings of the m-setting inequality
        resolution: Optimization grid resolution
        extra_params: Further family parameters after the scanned one

    Returns:
        Row dict keyed by SCAN_COLUMNS
    """
    params = ([] if param is None else [param]) + list(extra_params)
    rho = build_state(family, n, params)
    summary = squeezing_summary(rho)
    qfi = qfi_exact(rho, dicke_operator_sz(n)).qfi
    eq17 = optimize_eq17(rho, resolution)
    eq3m = optimize_eq3m(rho, settings, resolution)
    mermin = mermin_check(rho)
    w1m = witness_1m(summary)
    w2m = witness_2m(summary)

    lower_bound = n / summary.xi2 if summary.xi2_defined and summary.xi2 > 0 else None
    return {
        "family": family,
        "n": n,
        "param": param,
        "xi2": summary.xi2,
        "zeta2": summary.zeta2,
        "C": summary.contrast,
        "qfi": qfi,
        "qfi_over_N": qfi / n,
        "N_over_xi2": lower_bound,
        "eq17_value": eq17.value,
        "eq17_phi": eq17.details["phi"],
        "eq17_violated": bool(eq17.violated),
        "eq3m_value": eq3m.value,
        "eq3m_violated": bool(eq3m.violated),
        "w1m_margin": w1m.margin,
        "w1m_violated": bool(w1m.violated),
        "w2m_margin": w2m.margin,
        "w2m_violated": bool(w2m.violated),
        "mermin_value": mermin.value,
        "mermin_bound": mermin.classical_bound_offset,
        "mermin_violated": bool(mermin.violated),
        "qfi_beats_N": exceeds_limit(qfi, shot_noise_limit(n)),
        "qfi_beats_2N": exceeds_limit(qfi, 2 * shot_noise_limit(n)),
        "lb_beats_N": lower_bound is not None and exceeds_limit(lower_bound, shot_noise_limit(n)),
    }


def run_scan(config: ScanConfig) -> List[Dict[str, Any]]:
    """
    Scan rows for every (N, parameter) point, ordered by N then parameter.

    Args:
        config: Validated scan configuration

    Returns:
        List of row dicts
    """
    config.validate()
    points = [(n, p) for n in config.n_values for p in config.parameter_values()]
    threads = min(get_thread_count(), len(points))
    logger.info("Scanning %s over %d points with %d threads", config.family, len(points), threads)

    def compute(point):
        n, param = point
        return scan_row(config.family, n, param, config.settings, config.resolution, config.extra_params)

    with ThreadPoolExecutor(max_workers=threads) as executor:
        rows = list(executor.map(compute, points))

    logger.info("Scan finished: %d rows", len(rows))
    return rows


def region_map_rows(resolution: int = 200) -> List[Dict[str, Any]]:
    """
    Witness region map on the default grid, one worker task per xi^2 row.

    Args:
        resolution: Grid points per axis

    Returns:
        Rows keyed by REGION_COLUMNS, row-major in xi^2
    """
    xi2_grid, c_grid = default_region_grid(resolution)
    threads = min(get_thread_count(), len(xi2_grid))
    logger.info("Region map on a %dx%d grid with %d threads", resolution, resolution, threads)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        blocks = list(executor.map(lambda xi2: region_map([xi2], c_grid), xi2_grid))
    return [row for block in blocks for row in block]


def threshold_rows(n_values: Sequence[int]) -> List[Dict[str, Any]]:
    """
    Mermin bound, GHZ-mixture thresholds and the enumerated local maximum per N.

    lhv_max is left undefined above the enumeration cap.
    """
    if not n_values or any(n < 2 for n in n_values):
        raise ValidationError("Threshold table needs party counts N >= 2")
    rows = []
    for n in n_values:
        rows.append({
            "n": n,
            "mermin_bound": mermin_bound(n),
            "mermin_p_threshold": mermin_mixture_threshold(n),
            "qfi_p_threshold": 1.0 / math.sqrt(n),
            "lhv_max": mermin_lhv_max(n) if n <= MAX_MERMIN_LHV_PARTIES else None,
        })
    return rows
