"""
Main entry point for the RPC fitter.
This module parses the command line and routes subcommands (fit, project, localize, evaluate, sweep) to their agents.

Exit codes:
    0 success
    1 unexpected error
    2 usage or configuration error
    3 input/output error (missing or unreadable file)
    4 parse error in an input file
    5 insufficient or degenerate data
    6 numerical failure
    7 sensor projection failure
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from agents.sweep_agent import SWEEP_KINDS
from routers.command_router import CommandRouter
from utils.config import FitterConfig
from utils.errors import EXIT_USAGE, ConfigurationError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

# command-line destination -> configuration key
CONFIG_FLAGS = {
    "rmse_tolerance": "rmse_tolerance",
    "max_wls_iterations": "max_wls_iterations",
    "max_iccv_iterations": "max_iccv_iterations",
    "lcurve_samples": "lcurve_samples",
    "denominator_floor": "denominator_floor",
    "iccv_ridge_ratio": "iccv_ridge_ratio",
    "grid_length": "n_lonlat",
    "alt_layers": "n_alt",
    "threads": "threads",
}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--threads", type=int, help="Worker threads (default 1, deterministic)")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")


def _add_fit_options(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("fit options")
    group.add_argument("--rmse-tolerance", type=float, help="Stop when the RMSE changes by less than this (pixels)")
    group.add_argument("--max-wls-iterations", type=int)
    group.add_argument("--max-iccv-iterations", type=int)
    group.add_argument("--lcurve-samples", type=int, help="Number of sampled ridge parameters")
    group.add_argument("--denominator-floor", type=float)
    group.add_argument("--iccv-ridge-ratio", type=float, help="ICCV identity weight as a fraction of the smallest singular value (default 0.1)")


def _add_grid_options(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("grid options")
    group.add_argument("--bounds", type=float, nargs=6, metavar=("LON_MIN", "LON_MAX", "LAT_MIN", "LAT_MAX", "ALT_MIN", "ALT_MAX"))
    group.add_argument("--grid-length", type=int, help="Samples per horizontal axis (default 50)")
    group.add_argument("--alt-layers", type=int, help="Elevation layers (default 10)")


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command-line parser.

    Returns:
        ArgumentParser
    """
    parser = argparse.ArgumentParser(prog="rpcfit", description="Fit, apply and evaluate rational polynomial camera models.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="Fit an RPC model to a sensor or to correspondences")
    source = fit.add_mutually_exclusive_group(required=True)
    source.add_argument("--sensor", help="Sensor configuration JSON")
    source.add_argument("--correspondences", help="CSV with lon,lat,alt,row,col")
    fit.add_argument("--out-rpc", required=True, help="Output RPC text file")
    fit.add_argument("--out-report", help="Output fit report JSON (default: <out-rpc>.report.json)")
    fit.add_argument("--lcurve", action="store_true", help="Include the sampled L-curve in the report")
    _add_grid_options(fit)
    _add_fit_options(fit)
    _add_common(fit)

    project = subparsers.add_parser("project", help="Project lon,lat,alt points through an RPC model")
    project.add_argument("--rpc", required=True)
    project.add_argument("--points", required=True, help="CSV with lon,lat,alt")
    project.add_argument("--out", required=True)
    _add_common(project)

    localize = subparsers.add_parser("localize", help="Localize row,col pixels at a given altitude")
    localize.add_argument("--rpc", required=True)
    localize.add_argument("--pixels", required=True, help="CSV with row,col,alt")
    localize.add_argument("--out", required=True)
    _add_common(localize)

    evaluate = subparsers.add_parser("evaluate", help="Check point RMSE of an RPC model against a sensor")
    evaluate.add_argument("--rpc", required=True)
    evaluate.add_argument("--sensor", required=True)
    evaluate.add_argument("--out", required=True, help="Output JSON")
    _add_grid_options(evaluate)
    _add_common(evaluate)

    sweep = subparsers.add_parser("sweep", help="Run a grid-length or surface-area sweep")
    sweep.add_argument("kind", choices=SWEEP_KINDS)
    sweep.add_argument("--config", help="Sweep configuration JSON; flags override its values")
    sweep.add_argument("--sensor", help="Sensor configuration JSON")
    sweep.add_argument("--lengths", type=int, nargs="+", help="grid_length: grid lengths")
    sweep.add_argument("--center", type=float, nargs=2, metavar=("LON", "LAT"), help="surface_area: footprint center")
    sweep.add_argument("--half-widths", type=float, nargs="+", help="surface_area: half widths in degrees")
    sweep.add_argument("--alt-range", type=float, nargs=2, metavar=("ALT_MIN", "ALT_MAX"))
    sweep.add_argument("--out", required=True, help="Output JSON, rewritten after every sample")
    sweep.add_argument("--out-csv", help="Output CSV (param,row_rmse,col_rmse,chosen_h,iterations)")
    _add_grid_options(sweep)
    _add_fit_options(sweep)
    _add_common(sweep)
    return parser


def _parameters(args: argparse.Namespace) -> Dict[str, Any]:
    parameters = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    # sweep files use the configuration key names
    if args.command == "sweep":
        parameters["n_lonlat"] = parameters.get("grid_length")
        parameters["n_alt"] = parameters.get("alt_layers")
        parameters["fit_overrides"] = _overrides(args)
    return parameters


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: getattr(args, dest) for dest, key in CONFIG_FLAGS.items() if getattr(args, dest, None) is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the RPC fitter.

    Args:
        argv: Command-line arguments (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = FitterConfig(config_override=_overrides(args))
    except ConfigurationError as e:
        print(f"ConfigurationError: {str(e)}", file=sys.stderr)
        return EXIT_USAGE
    if config.get("verbose"):
        logging.getLogger().setLevel(logging.DEBUG)

    router = CommandRouter(config)
    response = router.route(args.command, _parameters(args))
    code = router.exit_code(response)
    if code == 0:
        print(json.dumps(response, indent=2, sort_keys=True, default=str))
    else:
        print(f"{response.get('error')}: {response.get('message')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
