import argparse
import math
import os
import re
import sys
from typing import List, Optional

from pydantic import ValidationError

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.errors import InvalidParameterError, ReportWriteError, SimulationError, StateFileError
from app.experiments import SweepConfig, run_gate_checks, run_sweep, write_report
from app.fidelity import max_tolerable_epsilon
from app.utils import format_float, setup_logger

logger = setup_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_PI_TERM = re.compile(r"^(?P<coef>[-+]?(?:\d+(?:\.\d*)?|\.\d+)?)\*?pi(?:/(?P<div>\d+(?:\.\d*)?))?$")


def parse_angle(token: str) -> float:
    """Accepts plain floats and multiples of pi such as 'pi', 'pi/2', '3pi/2', '0.5*pi'."""
    token = token.strip().lower()
    match = _PI_TERM.match(token)
    if match:
        coef = match.group("coef")
        value = math.pi * (float(coef) if coef not in (None, "", "+", "-") else (-1.0 if coef == "-" else 1.0))
        if match.group("div") is None:
            return value
        divisor = float(match.group("div"))
        if divisor == 0:
            raise ValueError(f"zero divisor in angle {token!r}")
        return value / divisor
    return float(token)


def parse_grid(text: str) -> List[float]:
    try:
        return [parse_angle(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid angle list {text!r}: {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Fidelity of inaccurate one-way (measurement-based) quantum computation"
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser("sweep", help="Sweep (u, epsilon, delta) and compare fidelity with its bound")
    sweep.add_argument("--seed", type=int, default=0, help="Seed for register sampling")
    sweep.add_argument("--qubits", type=int, default=2, help="Register size for random states (2-8)")
    sweep.add_argument("--trials", type=int, default=1, help="Number of registers")
    sweep.add_argument("--epsilon", type=parse_grid, default=[0.0, 0.1, 0.2], help="Comma-separated epsilon values")
    sweep.add_argument("--delta", type=parse_grid, default=[0.0], help="Comma-separated delta values")
    sweep.add_argument("--u", type=parse_grid, default=[0.0], help="Comma-separated measurement angles")
    sweep.add_argument("--mode", choices=["analytic", "exhaustive", "sampled"], default="exhaustive")
    sweep.add_argument("--shots", type=int, default=None, help="Shots per cell in sampled mode (default 100000)")
    sweep.add_argument("--state", default=None, help="bell | zero | path to a state file")
    sweep.add_argument("--out", required=True, help="Path to save the report")
    sweep.add_argument("--format", choices=["csv", "json"], default="csv")

    check = commands.add_parser("gate-check", help="Noiseless oracle checks of the gate patterns")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--trials", type=int, default=200)

    budget = commands.add_parser("budget", help="Largest epsilon the bound allows for a fidelity threshold")
    budget.add_argument("--entanglement", type=float, required=True, help="S in [0, 1]")
    budget.add_argument("--threshold", type=float, required=True, help="Target mean fidelity in [0, 1]")

    return parser


def _sweep(args) -> int:
    try:
        config = SweepConfig(
            seed=args.seed,
            n_qubits=args.qubits,
            trials=args.trials,
            epsilon_grid=args.epsilon,
            delta_grid=args.delta,
            u_grid=args.u,
            mode=args.mode,
            shots=args.shots,
            output_format=args.format,
            output_path=args.out,
            state=args.state,
        )
    except ValidationError as e:
        logger.error(f"Invalid sweep configuration: {e}")
        return EXIT_USAGE

    try:
        rows = run_sweep(config)
        write_report(rows, config.output_path, config.output_format)
    except (StateFileError, ReportWriteError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except SimulationError as e:
        logger.error(f"Sweep failed: {e}")
        return EXIT_FAILURE

    violations = sum(r.bound_violated for r in rows)
    if violations:
        logger.error(f"{violations} row(s) violate the fidelity bound")
        return EXIT_FAILURE
    return EXIT_OK


def _gate_check(args) -> int:
    if args.trials < 1:
        logger.error("--trials must be at least 1")
        return EXIT_USAGE
    try:
        summary = run_gate_checks(args.seed, args.trials)
    except SimulationError as e:
        logger.error(f"Gate check failed: {e}")
        return EXIT_FAILURE
    for line in summary.lines():
        print(line)
    return EXIT_OK if summary.passed else EXIT_FAILURE


def _budget(args) -> int:
    try:
        epsilon = max_tolerable_epsilon(args.entanglement, args.threshold)
    except InvalidParameterError as e:
        logger.error(str(e))
        return EXIT_USAGE
    print(format_float(epsilon))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(level=args.log_level)

    handlers = {"sweep": _sweep, "gate-check": _gate_check, "budget": _budget}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
