import logging
import sys
import traceback
from functools import wraps
from typing import Any, Dict, List, Optional, Sequence

import click

from common.config import DEBUG
from common.errors import exit_code_for, is_qfi_bell_error
from common.utils import (
    format_csv,
    format_float,
    format_json_response,
    parse_int_list,
    parse_param_range,
    rounded_row,
)
from common.version import VERSION
from operations import scans, verify
from operations.bell import DEFAULT_RESOLUTION
from operations.symmetric import state_to_dict

logger = logging.getLogger("qfi_bell")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool) -> None:
    """Log to stderr; stdout carries only data."""
    level = logging.DEBUG if verbose or DEBUG else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def handle_error(func):
    """Decorator to turn errors into a message on stderr and an exit code."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:
            if is_qfi_bell_error(e):
                logger.error(f"{e.__class__.__name__}: {e.message}")
                if e.details:
                    logger.debug(f"Details: {e.details}")
            elif isinstance(e, OSError):
                logger.error(f"I/O error: {str(e)}")
            else:
                logger.error(f"Unexpected error: {str(e)}")
                logger.error(traceback.format_exc())
            click.echo(f"Error: {str(e)}", err=True)
            sys.exit(exit_code_for(e))

    return wrapper


def emit(text: str, out: Optional[str]) -> None:
    """Write output to a file, or to stdout when no path is given."""
    if out:
        with open(out, "w", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {out}")
    else:
        click.echo(text, nl=False)


def render_rows(columns: Sequence[str], rows: List[Dict[str, Any]], output_format: str) -> str:
    if output_format == "json":
        return format_json_response([rounded_row({c: row.get(c) for c in columns}) for row in rows]) + "\n"
    return format_csv(columns, rows)


@click.group()
@click.version_option(VERSION, prog_name="qfi-bell")
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool):
    """
    Quantum Fisher information and Bell correlations of collective spin states.

    States are given as family:N[:param], e.g. ghz:8, oat:50:0.05, tat:20:0.1,
    mix:6:0.4, css:10:pi/2, dicke:6:3 or maxmixed:4.
    """
    configure_logging(verbose)


@cli.command("report")
@click.argument("state")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report to a file.")
@click.option("--save-state", type=click.Path(dir_okay=False), help="Also save the state as JSON.")
@click.option("--angles", "settings", type=int, default=scans.DEFAULT_SETTINGS, show_default=True,
              help="Number of settings m of the m-setting inequality.")
@click.option("--grid", "resolution", type=int, default=DEFAULT_RESOLUTION, show_default=True,
              help="Resolution of the angle optimization.")
@handle_error
def report(state: str, output_format: str, out: Optional[str], save_state: Optional[str], settings: int,
           resolution: int):
    """Report QFI, squeezing, witnesses and Bell values of STATE (a spec or a .json state file)."""
    rho = scans.load_state(state)
    if save_state:
        emit(format_json_response(state_to_dict(rho)) + "\n", save_state)

    data = scans.build_report(rho, state, settings, resolution)
    if output_format == "json":
        emit(format_json_response(data) + "\n", out)
    else:
        emit(scans.format_report_text(data, format_float), out)


@cli.command("region-map")
@click.option("--grid", "resolution", type=int, default=200, show_default=True, help="Grid points per axis.")
@click.option("--out", type=click.Path(dir_okay=False), help="Output file, stdout by default.")
@click.option("--format", "output_format", type=click.Choice(scans.OUTPUT_FORMATS), default="csv", show_default=True)
@handle_error
def region_map(resolution: int, out: Optional[str], output_format: str):
    """Witness margins over the (xi^2, C) grid."""
    rows = scans.region_map_rows(resolution)
    emit(render_rows(scans.REGION_COLUMNS, rows, output_format), out)


@cli.command("scan")
@click.option("--family", required=True, type=click.Choice(scans.SCAN_FAMILIES))
@click.option("--n", "n_list", required=True, help="Comma separated party counts, e.g. 4,6,8.")
@click.option("--param-range", help="Parameter grid a:b:steps, e.g. 0:0.3:200.")
@click.option("--param", "extra", multiple=True, type=float, help="Fixed extra family parameter (css phi).")
@click.option("--angles", "settings", type=int, default=scans.DEFAULT_SETTINGS, show_default=True)
@click.option("--grid", "resolution", type=int, default=DEFAULT_RESOLUTION, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--format", "output_format", type=click.Choice(scans.OUTPUT_FORMATS), default="csv", show_default=True)
@handle_error
def scan(family: str, n_list: str, param_range: Optional[str], extra: Sequence[float], settings: int,
         resolution: int, out: Optional[str], output_format: str):
    """One row per parameter point of a state family."""
    config = scans.ScanConfig(
        family=family,
        n_values=tuple(parse_int_list(n_list)),
        param_range=parse_param_range(param_range) if param_range else None,
        settings=settings,
        resolution=resolution,
        output_path=out,
        output_format=output_format,
        extra_params=tuple(extra),
    )
    rows = scans.run_scan(config)
    emit(render_rows(scans.SCAN_COLUMNS, rows, output_format), out)


@cli.command("thresholds")
@click.option("--n", "n_list", default="2,3,4,5,6,7,8", show_default=True, help="Comma separated party counts.")
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--format", "output_format", type=click.Choice(scans.OUTPUT_FORMATS), default="csv", show_default=True)
@handle_error
def thresholds(n_list: str, out: Optional[str], output_format: str):
    """Mermin bound and GHZ-mixture thresholds per N."""
    rows = scans.threshold_rows(parse_int_list(n_list))
    emit(render_rows(scans.THRESHOLD_COLUMNS, rows, output_format), out)


@cli.command("verify")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random state corpus.")
@click.option("--inject-fault", type=click.Choice(sorted(verify.CHECKS)), help="Perturb one check.")
@handle_error
def verify_command(seed: int, inject_fault: Optional[str]):
    """Cross-check the Dicke-basis results against the full-space oracle."""
    result = verify.run_verification(seed, inject_fault)
    rows = [check.to_dict() for check in result.results]
    click.echo(format_csv(["name", "passed", "max_error", "tolerance", "cases"], rows), nl=False)
    verify.require_passed(result)
    logger.info("All %d checks passed", len(rows))


if __name__ == "__main__":
    cli()
