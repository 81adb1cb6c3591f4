"""
Fidelity of one elementary step (process g) under a deviated measurement.

For a register |ψ> whose first qubit has reduced state ρ, with
ξ = Tr(ρZ) and S = 2[1 - Tr(ρ²)], attaching a |+> ancilla, bonding it with CZ
and measuring the first qubit in the deviated basis gives

    P± = (1 ± ξ sin ε cos δ) / 2
    F± = [1 ± ξ sin ε cos δ - (1 - ξ²) sin²(ε/2)] / (2 P±)
    F  = P+ F+ + P- F- = 1 - (1 - ξ²) sin²(ε/2) <= 1 - S sin²(ε/2)

where the last step uses 1 - ξ² >= S.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.bases import DeviationParams, deviated_basis, ideal_basis
from app.errors import DegenerateBranchError, InvalidParameterError, VerificationError
from app.patterns import GatePattern, execute_pattern
from app.statevector import (
    DEGENERATE_PROB,
    BranchOutcome,
    StateVector,
    apply_cz,
    extend_with_plus,
    fidelity,
    project_measure,
    reduced_density_single,
)
from app.utils import setup_logger

logger = setup_logger()

FORMULA_TOL = 1e-10
CLAMP_TOL = 1e-12
# below this branch probability, per-branch fidelities are too ill-conditioned to compare at FORMULA_TOL
COMPARABLE_PROB = 1e-6


def _require_entangleable(state: StateVector):
    if state.n_qubits < 2:
        raise InvalidParameterError("Entanglement with the rest of the register needs at least 2 qubits")


def _clamp(value: float, low: float, high: float, what: str) -> float:
    if value < low - CLAMP_TOL or value > high + CLAMP_TOL:
        raise VerificationError(f"{what} = {value!r} outside [{low}, {high}]")
    return float(min(max(value, low), high))


def entanglement_S(state: StateVector, q: int = 0) -> float:
    """2[1 - Tr(ρ_q²)]: 0 for a product state, 1 when q is maximally entangled."""
    _require_entangleable(state)
    rho = reduced_density_single(state, q)
    purity = float(np.trace(rho @ rho).real)
    return _clamp(2.0 * (1.0 - purity), 0.0, 1.0, "S")


def xi(state: StateVector, q: int = 0) -> float:
    """Tr(ρ_q Z) = P(qubit q = 0) - P(qubit q = 1)."""
    state._check_index(q)
    weights = np.abs(state.amplitudes) ** 2
    bits = (np.arange(state.dimension) >> q) & 1
    return _clamp(float(np.sum(weights * (1 - 2 * bits))), -1.0, 1.0, "xi")


def process_g_branches(state: StateVector, u: float, dev: Optional[DeviationParams] = None) -> Tuple[BranchOutcome, BranchOutcome]:
    """
    Attach one |+> ancilla, CZ it to qubit 0, measure qubit 0 at angle u
    (deviated by dev, ideal when dev is None). Returns the '+' and '-' branches;
    a degenerate branch comes back with post_state None.
    """
    n = state.n_qubits
    bonded = apply_cz(extend_with_plus(state, 1), 0, n)
    basis = ideal_basis(u) if dev is None else deviated_basis(u, dev)

    branches = []
    for label in ("+", "-"):
        try:
            p, post = project_measure(bonded, 0, basis, label)
            branches.append(BranchOutcome(label, p, post))
        except DegenerateBranchError as e:
            logger.warning(f"process g: branch {label} is degenerate (p={e.probability:.3g})")
            branches.append(BranchOutcome(label, e.probability, None))
    return branches[0], branches[1]


@dataclass(frozen=True)
class AnalyticInputs:
    xi: float
    S: float
    epsilon: float
    delta: float

    def __post_init__(self):
        if not -1.0 - CLAMP_TOL <= self.xi <= 1.0 + CLAMP_TOL:
            raise InvalidParameterError(f"xi must lie in [-1, 1], got {self.xi}")
        if 1.0 - self.xi ** 2 < self.S - FORMULA_TOL:
            raise VerificationError(f"1 - xi^2 = {1 - self.xi ** 2!r} is below S = {self.S!r}")

    @classmethod
    def from_state(cls, state: StateVector, dev: DeviationParams, q: int = 0) -> "AnalyticInputs":
        return cls(xi=xi(state, q), S=entanglement_S(state, q), epsilon=dev.epsilon, delta=dev.delta)


class BranchStats(NamedTuple):
    P_plus: float
    P_minus: float
    F_plus: float
    F_minus: float


def analytic_branch_stats(inputs: AnalyticInputs, allow_degenerate: bool = False) -> BranchStats:
    """
    Closed-form P± and F±. A branch with P < 1e-14 has no fidelity; it raises
    unless allow_degenerate, in which case its F is NaN.
    """
    bias = inputs.xi * math.sin(inputs.epsilon) * math.cos(inputs.delta)
    loss = (1.0 - inputs.xi ** 2) * math.sin(inputs.epsilon / 2) ** 2
    probabilities = (0.5 * (1.0 + bias), 0.5 * (1.0 - bias))

    fidelities = []
    for sign, p in zip((1.0, -1.0), probabilities):
        if p < DEGENERATE_PROB:
            if not allow_degenerate:
                raise DegenerateBranchError(f"P = {p:.3g}: branch fidelity undefined", probability=p)
            fidelities.append(float("nan"))
            continue
        f = (1.0 + sign * bias - loss) / (2.0 * p)
        if not -FORMULA_TOL <= f <= 1.0 + FORMULA_TOL:
            raise VerificationError(f"Branch fidelity {f!r} outside [0, 1]")
        fidelities.append(min(max(f, 0.0), 1.0))

    return BranchStats(probabilities[0], probabilities[1], fidelities[0], fidelities[1])


def mean_fidelity_analytic(inputs: AnalyticInputs) -> float:
    return 1.0 - (1.0 - inputs.xi ** 2) * math.sin(inputs.epsilon / 2) ** 2


def fidelity_upper_bound(S: float, epsilon: float) -> float:
    """1 - S sin²(ε/2)"""
    if not -CLAMP_TOL <= S <= 1.0 + CLAMP_TOL:
        raise InvalidParameterError(f"S must lie in [0, 1], got {S}")
    if not 0.0 <= epsilon <= math.pi:
        raise InvalidParameterError(f"epsilon must lie in [0, pi], got {epsilon}")
    S = min(max(S, 0.0), 1.0)
    return 1.0 - S * math.sin(epsilon / 2) ** 2


def max_tolerable_epsilon(S: float, threshold: float) -> float:
    """
    Largest ε for which the bound still allows a mean fidelity of `threshold`.
    Staying below it is necessary, not sufficient, for F >= threshold.
    """
    if not 0.0 <= S <= 1.0:
        raise InvalidParameterError(f"S must lie in [0, 1], got {S}")
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f"threshold must lie in [0, 1], got {threshold}")
    if S == 0.0 or 1.0 - threshold >= S:
        return math.pi
    return 2.0 * math.asin(math.sqrt((1.0 - threshold) / S))


@dataclass(frozen=True)
class ProofRelation:
    lhs: float
    rhs: float
    mu: float
    nu: float
    lambda0: float
    lambda1: float

    @property
    def z_aligned(self) -> bool:
        """Equality holds when the eigenbasis is the Z basis, or trivially when ρ is maximally mixed."""
        return abs(math.cos(self.mu) ** 2 - 1.0) < FORMULA_TOL or abs(self.lambda0 - self.lambda1) < FORMULA_TOL


def verify_proof_relation(state: StateVector, q: int = 0) -> ProofRelation:
    """
    Writes ρ = λ0|τ0><τ0| + λ1|τ1><τ1| with |τ0> = cos(μ/2)|0> + e^{-iν} sin(μ/2)|1>
    and checks 1 - ξ² = 1 - (λ0 - λ1)² cos²μ >= 1 - (λ0 - λ1)² = S.
    """
    _require_entangleable(state)
    rho = reduced_density_single(state, q)
    eigenvalues, eigenvectors = np.linalg.eigh(rho)
    lambda1, lambda0 = (float(v) for v in eigenvalues)
    tau0 = eigenvectors[:, 1]

    mu = 2.0 * math.acos(min(abs(tau0[0]), 1.0))
    nu = float(-np.angle(tau0[1] * np.conj(tau0[0]))) if abs(tau0[0]) > CLAMP_TOL else 0.0

    gap = (lambda0 - lambda1) ** 2
    relation = ProofRelation(
        lhs=1.0 - gap * math.cos(mu) ** 2,
        rhs=1.0 - gap,
        mu=mu,
        nu=nu,
        lambda0=lambda0,
        lambda1=lambda1,
    )

    if relation.lhs < relation.rhs - FORMULA_TOL:
        raise VerificationError(f"1 - xi^2 = {relation.lhs!r} < S = {relation.rhs!r}")
    S = entanglement_S(state, q)
    if abs(relation.rhs - S) > FORMULA_TOL:
        raise VerificationError(f"1 - (l0 - l1)^2 = {relation.rhs!r} differs from S = {S!r}")
    z = xi(state, q)
    if abs(relation.lhs - (1.0 - z ** 2)) > FORMULA_TOL:
        raise VerificationError(f"Eigendecomposition gives {relation.lhs!r}, 1 - xi^2 = {1 - z ** 2!r}")
    return relation


@dataclass
class FidelityReport:
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
    degenerate: Tuple[str, ...] = ()

    @property
    def bound_violated(self) -> bool:
        return self.slack < -FORMULA_TOL


def experiment_report(state: StateVector, u: float, dev: DeviationParams, check: bool = True) -> FidelityReport:
    """
    Runs process g noiselessly and with the deviated measurement, pairs branches
    by label and weights them with the deviated probabilities. P± and F± in the
    report are the simulated ones; with check, they are compared to the closed forms.
    """
    _require_entangleable(state)
    inputs = AnalyticInputs.from_state(state, dev)
    analytic = analytic_branch_stats(inputs, allow_degenerate=True)

    ideal = process_g_branches(state, u, None)
    noisy = process_g_branches(state, u, dev)

    probabilities, fidelities, degenerate = [], [], []
    for reference, branch in zip(ideal, noisy):
        if branch.degenerate or reference.degenerate:
            degenerate.append(branch.label)
            probabilities.append(0.0)
            fidelities.append(float("nan"))
            continue
        probabilities.append(branch.probability)
        fidelities.append(fidelity(reference.post_state, branch.post_state))

    simulated = sum(p * f for p, f in zip(probabilities, fidelities) if p > 0.0)
    F_mean = mean_fidelity_analytic(inputs)
    bound = fidelity_upper_bound(inputs.S, dev.epsilon)

    report = FidelityReport(
        u=float(u),
        epsilon=dev.epsilon,
        delta=dev.delta,
        S=inputs.S,
        xi=inputs.xi,
        P_plus=probabilities[0],
        P_minus=probabilities[1],
        F_plus=fidelities[0],
        F_minus=fidelities[1],
        F_mean_analytic=F_mean,
        F_mean_simulated=float(simulated),
        bound=bound,
        slack=bound - F_mean,
        degenerate=tuple(degenerate),
    )
    if check:
        _check_against_closed_form(report, analytic)
    return report


def _check_against_closed_form(report: FidelityReport, analytic: BranchStats):
    simulated_p = (report.P_plus, report.P_minus)
    simulated_f = (report.F_plus, report.F_minus)
    for label, p_sim, p_ana, f_sim, f_ana in zip("+-", simulated_p, analytic[:2], simulated_f, analytic[2:]):
        if abs(p_sim - p_ana) > FORMULA_TOL:
            raise VerificationError(f"P{label}: simulated {p_sim!r} vs closed form {p_ana!r}")
        if p_ana > COMPARABLE_PROB and abs(f_sim - f_ana) > FORMULA_TOL:
            raise VerificationError(f"F{label}: simulated {f_sim!r} vs closed form {f_ana!r}")
    if abs(report.F_mean_simulated - report.F_mean_analytic) > FORMULA_TOL:
        raise VerificationError(
            f"Mean fidelity: simulated {report.F_mean_simulated!r} vs closed form {report.F_mean_analytic!r}"
        )
    if report.F_mean_simulated > report.bound + FORMULA_TOL:
        raise VerificationError(f"Mean fidelity {report.F_mean_simulated!r} exceeds bound {report.bound!r}")


@dataclass
class PatternFidelity:
    mean_fidelity: float
    probabilities: Dict[str, float] = field(default_factory=dict)
    fidelities: Dict[str, float] = field(default_factory=dict)


def pattern_fidelity(register: StateVector, pattern: GatePattern, dev: DeviationParams,
                     instructions: Sequence[int] = (0,)) -> PatternFidelity:
    """
    Mean fidelity of a whole gate when the chosen measurements are deviated.
    Corrected outputs are paired by full outcome history.
    """
    reference = execute_pattern(register, pattern).by_label()
    noisy = execute_pattern(register, pattern.with_deviation(dev, instructions))

    result = PatternFidelity(mean_fidelity=0.0)
    for branch in noisy:
        label = branch.outcome.label
        if label not in reference:
            continue
        f = fidelity(reference[label].outcome.post_state, branch.outcome.post_state)
        result.probabilities[label] = branch.outcome.probability
        result.fidelities[label] = f
        result.mean_fidelity += branch.outcome.probability * f
    return result
