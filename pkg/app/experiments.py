"""
Batch experiments: seeded random registers, (u, ε, δ) sweeps of the process-g
fidelity against its bound, and noiseless oracle checks of the gate patterns.

Randomness comes from numpy's PCG64 generator (numpy.random.default_rng).
Trial t of a sweep seeded with s draws its register from default_rng((s, t)),
so a row never depends on how many rows were produced before it.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from app.bases import DeviationParams, deviated_basis
from app.errors import CapacityError, ReportWriteError, StateFileError
from app.fidelity import (
    FORMULA_TOL,
    AnalyticInputs,
    analytic_branch_stats,
    experiment_report,
    fidelity_upper_bound,
    mean_fidelity_analytic,
)
from app.patterns import (
    circuit_equivalent,
    cnot_pattern,
    execute_pattern,
    execute_sequence,
    replay_elementary,
    x_rotation_pattern,
    z_rotation_pattern,
)
from app.statevector import (
    MAX_QUBITS,
    StateVector,
    apply_cz,
    apply_single_qubit,
    fidelity,
    project_measure,
    rotation_x,
    rotation_z,
)
from app.utils import SeedLike, make_rng, setup_logger

logger = setup_logger()

SPECIAL_STATES = ("bell", "zero")
REPORT_FIELDS = [
    "seed", "trial", "n_qubits", "u", "epsilon", "delta", "S", "xi",
    "P_plus", "P_minus", "F_plus", "F_minus", "F_mean_analytic", "F_mean_simulated",
    "bound", "slack", "bound_violated",
]

GATE_INFIDELITY_TOL = 1e-9
PROBABILITY_TOL = 1e-10
COMMUTATION_TOL = 1e-12
REPLAY_TOL = 1e-10


class SweepConfig(BaseModel):
    seed: int = Field(default=0, ge=0)
    n_qubits: int = Field(default=2, ge=2, le=8)
    trials: int = Field(default=1, ge=1)
    epsilon_grid: List[float] = Field(default_factory=lambda: [0.0, 0.1, 0.2])
    delta_grid: List[float] = Field(default_factory=lambda: [0.0])
    u_grid: List[float] = Field(default_factory=lambda: [0.0])
    mode: Literal["analytic", "exhaustive", "sampled"] = "exhaustive"
    shots: Optional[int] = None
    output_format: Literal["csv", "json"] = "csv"
    output_path: Optional[Path] = None
    # "bell", "zero" or a path to a custom state file
    state: Optional[str] = None

    @field_validator("epsilon_grid", "delta_grid", "u_grid")
    @classmethod
    def _non_empty_finite(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("grid must not be empty")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("grid values must be finite")
        return v

    @field_validator("epsilon_grid")
    @classmethod
    def _epsilon_range(cls, v: List[float]) -> List[float]:
        bad = [x for x in v if not 0.0 <= x <= math.pi]
        if bad:
            raise ValueError(f"epsilon values must lie in [0, pi]: {bad}")
        return v

    @model_validator(mode="after")
    def _shots_for_sampling(self) -> "SweepConfig":
        if self.mode == "sampled":
            if self.shots is None:
                self.shots = 100_000
            if self.shots < 100:
                raise ValueError("sampled mode needs at least 100 shots")
        return self


class ReportRow(BaseModel):
    seed: int
    trial: int
    n_qubits: int
    u: float
    epsilon: float
    delta: float
    S: float
    xi: float
    P_plus: float
    P_minus: float
    F_plus: float
    F_minus: float
    F_mean_analytic: float
    F_mean_simulated: float
    bound: float
    slack: float
    bound_violated: bool


def haar_state(n: int, seed: SeedLike = None) -> StateVector:
    """Normalized standard complex Gaussian amplitudes, i.e. a Haar-random pure state."""
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"Cannot sample a {n}-qubit state (1..{MAX_QUBITS})")
    rng = make_rng(seed)
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(amps / np.linalg.norm(amps))


def sample_random_state(n: int, seed: SeedLike) -> StateVector:
    if n < 2:
        raise CapacityError(f"Sweep registers need at least 2 qubits, got {n}")
    return haar_state(n, seed)


def special_state(name: str, n_qubits: int) -> StateVector:
    """'bell': (|00>+|11>)/√2 on qubits 0,1 with |0> elsewhere; 'zero': |0...0>."""
    if name == "zero":
        return StateVector.basis_state([0] * n_qubits)
    if name == "bell":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = amps[3] = 1 / np.sqrt(2)
        return StateVector(amps)
    raise StateFileError(f"Unknown special state {name!r}; expected one of {SPECIAL_STATES}")


def load_state_file(path) -> StateVector:
    """Line 1: n_qubits. Then 2**n lines of 're im'."""
    try:
        lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    except OSError as e:
        raise StateFileError(f"Cannot read state file {path}: {e}") from e
    if not lines:
        raise StateFileError(f"State file {path} is empty")

    try:
        n = int(lines[0].strip())
        values = np.array([[float(x) for x in line.split()] for line in lines[1:]], dtype=float)
    except ValueError as e:
        raise StateFileError(f"Malformed state file {path}: {e}") from e

    if not 1 <= n <= MAX_QUBITS:
        raise StateFileError(f"State file {path} declares {n} qubits")
    if values.shape != (1 << n, 2):
        raise StateFileError(f"State file {path}: expected {1 << n} lines of 're im', got shape {values.shape}")
    return StateVector.from_amplitudes(values[:, 0] + 1j * values[:, 1], normalize=True)


def injected_state(config: SweepConfig) -> Optional[StateVector]:
    if config.state is None:
        return None
    if config.state in SPECIAL_STATES:
        return special_state(config.state, config.n_qubits)
    state = load_state_file(config.state)
    if state.n_qubits < 2:
        raise StateFileError(f"Injected state must have at least 2 qubits, got {state.n_qubits}")
    return state


def _analytic_row(state: StateVector, u: float, dev: DeviationParams) -> Dict:
    inputs = AnalyticInputs.from_state(state, dev)
    stats = analytic_branch_stats(inputs, allow_degenerate=True)
    F_mean = mean_fidelity_analytic(inputs)
    bound = fidelity_upper_bound(inputs.S, dev.epsilon)
    return dict(
        u=u, epsilon=dev.epsilon, delta=dev.delta, S=inputs.S, xi=inputs.xi,
        P_plus=stats.P_plus, P_minus=stats.P_minus, F_plus=stats.F_plus, F_minus=stats.F_minus,
        F_mean_analytic=F_mean, F_mean_simulated=float("nan"), bound=bound, slack=bound - F_mean,
    )


def _simulated_row(state: StateVector, u: float, dev: DeviationParams) -> Dict:
    report = experiment_report(state, u, dev)
    return dict(
        u=u, epsilon=report.epsilon, delta=report.delta, S=report.S, xi=report.xi,
        P_plus=report.P_plus, P_minus=report.P_minus, F_plus=report.F_plus, F_minus=report.F_minus,
        F_mean_analytic=report.F_mean_analytic, F_mean_simulated=report.F_mean_simulated,
        bound=report.bound, slack=report.slack,
    )


def _sampled_row(state: StateVector, u: float, dev: DeviationParams, shots: int, rng: np.random.Generator) -> Dict:
    """Replaces P± by empirical frequencies of `shots` deviated measurements and F_mean by its Monte-Carlo estimate."""
    row = _simulated_row(state, u, dev)
    hits = int(rng.binomial(shots, min(max(row["P_plus"], 0.0), 1.0)))
    frequencies = (hits / shots, (shots - hits) / shots)
    row["P_plus"], row["P_minus"] = frequencies
    row["F_mean_simulated"] = sum(
        freq * f for freq, f in zip(frequencies, (row["F_plus"], row["F_minus"])) if freq > 0.0
    )
    return row


def run_sweep(config: SweepConfig) -> List[ReportRow]:
    """One row per (trial, u, ε, δ), in that nesting order."""
    logger.info(
        f"Sweep: seed={config.seed} trials={config.trials} mode={config.mode} "
        f"cells/trial={len(config.u_grid) * len(config.epsilon_grid) * len(config.delta_grid)}"
    )
    fixed = injected_state(config)
    rows = []
    for trial in range(config.trials):
        state = fixed if fixed is not None else sample_random_state(config.n_qubits, (config.seed, trial))
        cell = 0
        for u in config.u_grid:
            for epsilon in config.epsilon_grid:
                for delta in config.delta_grid:
                    dev = DeviationParams(epsilon=epsilon, delta=delta)
                    if config.mode == "analytic":
                        values = _analytic_row(state, u, dev)
                    elif config.mode == "exhaustive":
                        values = _simulated_row(state, u, dev)
                    else:
                        rng = make_rng((config.seed, trial, cell))
                        values = _sampled_row(state, u, dev, config.shots, rng)
                    cell += 1

                    row = ReportRow(
                        seed=config.seed,
                        trial=trial,
                        n_qubits=state.n_qubits,
                        bound_violated=values["slack"] < -FORMULA_TOL,
                        **values,
                    )
                    if row.bound_violated:
                        logger.warning(f"Bound violated: trial={trial} u={u} epsilon={epsilon} delta={delta} slack={row.slack:.3g}")
                    rows.append(row)

    violations = sum(r.bound_violated for r in rows)
    logger.info(f"Sweep finished: {len(rows)} rows, {violations} bound violations")
    return rows


def rows_to_frame(rows: List[ReportRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=REPORT_FIELDS)


def write_report(rows: List[ReportRow], path, output_format: str = "csv") -> Path:
    """CSV floats carry 17 significant digits; JSON floats use Python's round-trip repr, NaN as null."""
    path = Path(path)
    try:
        if output_format == "csv":
            rows_to_frame(rows).to_csv(path, index=False, float_format="%.17g", na_rep="nan")
        elif output_format == "json":
            records = [
                {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.model_dump().items()}
                for r in rows
            ]
            with open(path, "w", encoding="utf-8") as f:
                json.dump(records, f, indent=2)
                f.write("\n")
        else:
            raise ValueError(f"Unknown output format {output_format!r}")
    except OSError as e:
        raise ReportWriteError(f"Failed to write report to {path}: {e}") from e
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


@dataclass
class GateCheckSummary:
    trials: int
    worst_infidelity: Dict[str, float] = field(default_factory=dict)
    max_probability_error: float = 0.0
    replay_discrepancy: float = 0.0
    commutation_discrepancy: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            all(v <= GATE_INFIDELITY_TOL for v in self.worst_infidelity.values())
            and self.max_probability_error <= PROBABILITY_TOL
            and self.replay_discrepancy <= REPLAY_TOL
            and self.commutation_discrepancy <= COMMUTATION_TOL
        )

    def lines(self) -> List[str]:
        out = [f"{gate:<12} worst infidelity {value:.3e}" for gate, value in self.worst_infidelity.items()]
        out.append(f"{'probability':<12} max |sum - 1|    {self.max_probability_error:.3e}")
        out.append(f"{'replay':<12} max discrepancy  {self.replay_discrepancy:.3e}")
        out.append(f"{'commutation':<12} max discrepancy  {self.commutation_discrepancy:.3e}")
        out.append("PASS" if self.passed else "FAIL")
        return out


def _worst_branch_infidelity(run, oracle: StateVector) -> float:
    return max(1.0 - fidelity(oracle, b.outcome.post_state) for b in run)


def _replay_discrepancy(register: StateVector, pattern) -> float:
    direct = execute_pattern(register, pattern).by_label()
    worst = 0.0
    for commute_first in (False, True):
        for branch in replay_elementary(register, pattern, commute_first=commute_first):
            other = direct[branch.outcome.label].outcome
            worst = max(
                worst,
                abs(branch.outcome.probability - other.probability),
                1.0 - fidelity(branch.outcome.post_state, other.post_state),
            )
    return worst


def commutation_discrepancy(state: StateVector, basis) -> float:
    """Measuring qubit 0 then bonding the survivors vs bonding qubits 1,2 then measuring qubit 0."""
    worst = 0.0
    for branch in ("+", "-"):
        p_first, measured_first = project_measure(state, 0, basis, branch)
        measured_first = apply_cz(measured_first, 0, 1)
        p_after, bonded_first = project_measure(apply_cz(state, 1, 2), 0, basis, branch)
        worst = max(
            worst,
            abs(p_first - p_after),
            float(np.max(np.abs(measured_first.amplitudes - bonded_first.amplitudes))),
        )
    return worst


def run_gate_checks(seed: int, trials: int) -> GateCheckSummary:
    """Noiseless oracle checks of the gate patterns and Euler chains, plus replay and CZ commutation checks."""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    rng = make_rng(seed)
    summary = GateCheckSummary(trials=trials, worst_infidelity={"x_rotation": 0.0, "z_rotation": 0.0, "cnot": 0.0, "euler": 0.0})

    def record(name: str, run, oracle: StateVector):
        summary.worst_infidelity[name] = max(summary.worst_infidelity[name], _worst_branch_infidelity(run, oracle))
        summary.max_probability_error = max(summary.max_probability_error, abs(run.total_probability() - 1.0))

    for _ in range(trials):
        n = int(rng.integers(1, 4))
        register = haar_state(n, rng)
        target = int(rng.integers(0, n))
        u = float(rng.uniform(0.0, 2 * np.pi))
        for pattern in (x_rotation_pattern(u, target), z_rotation_pattern(u, target)):
            record(pattern.name, execute_pattern(register, pattern), circuit_equivalent(register, pattern))
            summary.replay_discrepancy = max(summary.replay_discrepancy, _replay_discrepancy(register, pattern))

        alpha, beta, gamma = rng.uniform(0.0, 2 * np.pi, size=3)
        chain = [z_rotation_pattern(gamma, target), x_rotation_pattern(beta, target), z_rotation_pattern(alpha, target)]
        oracle = apply_single_qubit(register, target, rotation_z(alpha) @ rotation_x(beta) @ rotation_z(gamma))
        record("euler", execute_sequence(register, chain), oracle)

        n = int(rng.integers(2, 4))
        register = haar_state(n, rng)
        control, target = (int(q) for q in rng.choice(n, size=2, replace=False))
        pattern = cnot_pattern(control, target)
        record("cnot", execute_pattern(register, pattern), circuit_equivalent(register, pattern))
        summary.replay_discrepancy = max(summary.replay_discrepancy, _replay_discrepancy(register, pattern))

        dev = DeviationParams(epsilon=float(rng.uniform(0.0, np.pi)), delta=float(rng.uniform(0.0, 2 * np.pi)))
        basis = deviated_basis(float(rng.uniform(0.0, 2 * np.pi)), dev)
        summary.commutation_discrepancy = max(summary.commutation_discrepancy, commutation_discrepancy(haar_state(3, rng), basis))

    logger.debug(f"gate-check: {trials} trials done")
    if not summary.passed:
        logger.error("gate-check: oracle failure")
    return summary
