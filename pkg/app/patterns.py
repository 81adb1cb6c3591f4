"""
One-buffered measurement patterns for the x-rotation, z-rotation and C-NOT gates.

Each measurement of qubit m into a freshly bonded |+> ancilla teleports the
logical state as X^s H e^{-i(a/2)Z}, where a is the measurement angle and s = 1
for a '-' outcome. Two such steps give

    x-rotation (X, then ±u adaptive):  X^{s2} Z^{s1} e^{-i(u/2)X}
    z-rotation (u, then X):            X^{s2} Z^{s1} e^{-i(u/2)Z}
    C-NOT (target wire X, X; control bonded to the middle qubit):
                                       X^{s2}_out Z^{s1}_out Z^{s1}_control CNOT

and the byproduct tables below undo those Pauli prefixes.
"""
import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from app.bases import DeviationParams, adaptive_basis, deviated_basis, ideal_basis, reduce_angle
from app.errors import DegenerateBranchError, PatternError
from app.statevector import (
    HADAMARD,
    PAULIS,
    BranchOutcome,
    StateVector,
    apply_cz,
    apply_single_qubit,
    extend_with_plus,
    permute_qubits,
    project_measure,
    rotation_x,
    rotation_z,
)
from app.utils import SeedLike, make_rng, setup_logger

logger = setup_logger()

MAX_EXHAUSTIVE_MEASUREMENTS = 12
OUTCOMES = ("+", "-")


class Ancilla(NamedTuple):
    """The k-th ancilla of a pattern; resolves to qubit n_register + k."""

    index: int


QubitRef = Union[int, Ancilla]


def resolve(ref: QubitRef, n_register: int) -> int:
    if isinstance(ref, Ancilla):
        return n_register + ref.index
    if ref >= n_register:
        raise PatternError(f"Register qubit {ref} does not exist in a {n_register}-qubit register")
    return int(ref)


@dataclass(frozen=True)
class MeasurementInstruction:
    target: QubitRef
    angle: float
    adaptive_on: Optional[int] = None
    deviation: Optional[DeviationParams] = None


@dataclass(frozen=True)
class RecordEntry:
    instruction: int
    outcome: str
    probability: float
    gate: int = 0


@dataclass(frozen=True)
class MeasurementRecord:
    entries: Tuple[RecordEntry, ...] = ()

    @property
    def outcomes(self) -> Tuple[str, ...]:
        return tuple(e.outcome for e in self.entries)

    def extended(self, entry: RecordEntry) -> "MeasurementRecord":
        return MeasurementRecord(self.entries + (entry,))


PauliString = Dict[QubitRef, str]


def byproduct_table(
    n_instructions: int,
    x_domains: Dict[QubitRef, Sequence[int]],
    z_domains: Dict[QubitRef, Sequence[int]],
) -> Dict[Tuple[str, ...], PauliString]:
    """
    Expands X/Z dependency sets into one Pauli string per outcome pattern.
    A qubit gets X (Z) when an odd number of the instructions in its X (Z)
    domain returned '-'. X and Z together are written Y, equal up to phase.
    """
    letters = {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
    table = {}
    for outcomes in itertools.product(OUTCOMES, repeat=n_instructions):
        flips = [1 if o == "-" else 0 for o in outcomes]
        paulis = {}
        for ref in set(x_domains) | set(z_domains):
            x = sum(flips[i] for i in x_domains.get(ref, ())) % 2
            z = sum(flips[i] for i in z_domains.get(ref, ())) % 2
            if (x, z) in letters:
                paulis[ref] = letters[(x, z)]
        table[outcomes] = paulis
    return table


@dataclass(frozen=True)
class GatePattern:
    name: str
    angle: float
    target: int
    ancilla_count: int
    bonds: Tuple[Tuple[QubitRef, QubitRef], ...]
    instructions: Tuple[MeasurementInstruction, ...]
    byproduct_rules: Dict[Tuple[str, ...], PauliString]
    # output ancilla -> register qubit whose index it takes over
    output_map: Dict[QubitRef, int]
    control: Optional[int] = None

    def __post_init__(self):
        measured = [instr.target for instr in self.instructions]
        if len(set(measured)) != len(measured):
            raise PatternError(f"{self.name}: a qubit is measured more than once")
        for i, instr in enumerate(self.instructions):
            if instr.adaptive_on is not None and not 0 <= instr.adaptive_on < i:
                raise PatternError(f"{self.name}: instruction {i} adapts on a later instruction")
        for a, b in self.bonds:
            for ref in (a, b):
                self._check_ref(ref)
            if a == b:
                raise PatternError(f"{self.name}: self-bond on {a}")
        expected = set(itertools.product(OUTCOMES, repeat=len(self.instructions)))
        if set(self.byproduct_rules) != expected:
            raise PatternError(f"{self.name}: byproduct rules do not cover every outcome pattern")
        for rule in self.byproduct_rules.values():
            if any(ref in measured for ref in rule):
                raise PatternError(f"{self.name}: byproduct acts on a measured qubit")

    def _check_ref(self, ref: QubitRef):
        if isinstance(ref, Ancilla):
            if not 0 <= ref.index < self.ancilla_count:
                raise PatternError(f"{self.name}: ancilla {ref.index} outside 0..{self.ancilla_count - 1}")
        elif ref < 0:
            raise PatternError(f"{self.name}: negative register index {ref}")

    @property
    def register_qubits(self) -> List[int]:
        refs = {ref for bond in self.bonds for ref in bond if not isinstance(ref, Ancilla)}
        return sorted(refs)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(Ancilla(k) for k in range(self.ancilla_count))
        g.add_edges_from(self.bonds)
        return g

    def with_deviation(self, dev: DeviationParams, instructions: Optional[Sequence[int]] = None) -> "GatePattern":
        chosen = set(range(len(self.instructions)) if instructions is None else instructions)
        updated = tuple(
            replace(instr, deviation=dev) if i in chosen else instr
            for i, instr in enumerate(self.instructions)
        )
        return replace(self, instructions=updated)


def _check_target(target: int, name: str):
    if not isinstance(target, (int, np.integer)) or target < 0:
        raise PatternError(f"{name}: invalid target qubit {target!r}")


def _wire_rotation(name: str, target: int, first: MeasurementInstruction, second: MeasurementInstruction, angle: float) -> GatePattern:
    a0, a1 = Ancilla(0), Ancilla(1)
    return GatePattern(
        name=name,
        angle=angle,
        target=target,
        ancilla_count=2,
        bonds=((target, a0), (a0, a1)),
        instructions=(first, second),
        byproduct_rules=byproduct_table(2, x_domains={a1: [1]}, z_domains={a1: [0]}),
        output_map={a1: target},
    )


def x_rotation_pattern(u: float, target: int) -> GatePattern:
    """Realizes e^{-i(u/2)X} on `target`: X on the target, then ±u on the first ancilla."""
    _check_target(target, "x_rotation")
    u = reduce_angle(u)
    return _wire_rotation(
        "x_rotation",
        target,
        MeasurementInstruction(target=target, angle=0.0),
        MeasurementInstruction(target=Ancilla(0), angle=u, adaptive_on=0),
        u,
    )


def z_rotation_pattern(u: float, target: int) -> GatePattern:
    """Realizes e^{-i(u/2)Z} on `target`: u on the target, then X on the first ancilla."""
    _check_target(target, "z_rotation")
    u = reduce_angle(u)
    return _wire_rotation(
        "z_rotation",
        target,
        MeasurementInstruction(target=target, angle=u),
        MeasurementInstruction(target=Ancilla(0), angle=0.0),
        u,
    )


def cnot_pattern(control: int, target: int) -> GatePattern:
    _check_target(control, "cnot")
    _check_target(target, "cnot")
    if control == target:
        raise PatternError(f"cnot: control and target are both qubit {target}")
    a0, a1 = Ancilla(0), Ancilla(1)
    return GatePattern(
        name="cnot",
        angle=0.0,
        target=target,
        control=control,
        ancilla_count=2,
        bonds=((target, a0), (control, a0), (a0, a1)),
        instructions=(
            MeasurementInstruction(target=target, angle=0.0),
            MeasurementInstruction(target=a0, angle=0.0),
        ),
        byproduct_rules=byproduct_table(2, x_domains={a1: [1]}, z_domains={a1: [0], control: [0]}),
        output_map={a1: target},
    )


def circuit_equivalent(register: StateVector, pattern: GatePattern) -> StateVector:
    """The circuit-model unitary the pattern is meant to realize."""
    if pattern.name == "x_rotation":
        return apply_single_qubit(register, pattern.target, rotation_x(pattern.angle))
    if pattern.name == "z_rotation":
        return apply_single_qubit(register, pattern.target, rotation_z(pattern.angle))
    if pattern.name == "cnot":
        state = apply_single_qubit(register, pattern.target, HADAMARD)
        state = apply_cz(state, pattern.control, pattern.target)
        return apply_single_qubit(state, pattern.target, HADAMARD)
    raise PatternError(f"No circuit oracle for pattern {pattern.name!r}")


class ExecutedBranch(NamedTuple):
    outcome: BranchOutcome
    record: MeasurementRecord


@dataclass
class PatternExecution:
    branches: List[ExecutedBranch] = field(default_factory=list)
    # histories whose probability fell below the degenerate threshold
    dropped: List[MeasurementRecord] = field(default_factory=list)

    def __iter__(self) -> Iterator[ExecutedBranch]:
        return iter(self.branches)

    def __len__(self) -> int:
        return len(self.branches)

    def __getitem__(self, i: int) -> ExecutedBranch:
        return self.branches[i]

    def total_probability(self) -> float:
        return float(sum(b.outcome.probability for b in self.branches))

    def by_label(self) -> Dict[str, ExecutedBranch]:
        return {b.outcome.label: b for b in self.branches}


@dataclass
class _Path:
    state: StateVector
    live: List[int]
    record: MeasurementRecord = MeasurementRecord()
    probability: float = 1.0

    def position(self, label: int) -> int:
        return self.live.index(label)


def _check_mode(mode: str):
    if mode not in ("exhaustive", "sampled"):
        raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")


def _cz(path: _Path, a: int, b: int) -> _Path:
    path.state = apply_cz(path.state, path.position(a), path.position(b))
    return path


def _basis_for(instr: MeasurementInstruction, outcomes: Tuple[str, ...]):
    angle = instr.angle
    if instr.adaptive_on is not None:
        angle = adaptive_basis(angle, outcomes[instr.adaptive_on])
    if instr.deviation is not None:
        return deviated_basis(angle, instr.deviation)
    return ideal_basis(angle)


def _measure(paths: List[_Path], index: int, instr: MeasurementInstruction, n_register: int,
             mode: str, rng: np.random.Generator, dropped: List[MeasurementRecord]) -> List[_Path]:
    label = resolve(instr.target, n_register)
    survivors = []
    for path in paths:
        basis = _basis_for(instr, path.record.outcomes)
        pos = path.position(label)
        live = path.live[:pos] + path.live[pos + 1:]

        if mode == "exhaustive":
            for outcome in OUTCOMES:
                try:
                    p, post = project_measure(path.state, pos, basis, outcome)
                except DegenerateBranchError as e:
                    record = path.record.extended(RecordEntry(index, outcome, e.probability))
                    logger.debug(f"Dropping degenerate history {''.join(record.outcomes)}")
                    dropped.append(record)
                    continue
                survivors.append(_Path(post, live, path.record.extended(RecordEntry(index, outcome, p)), path.probability * p))
        else:
            try:
                p_plus, post_plus = project_measure(path.state, pos, basis, "+")
            except DegenerateBranchError:
                p_plus, post_plus = 0.0, None
            if post_plus is not None and rng.random() < p_plus:
                outcome, p, post = "+", p_plus, post_plus
            else:
                try:
                    p, post = project_measure(path.state, pos, basis, "-")
                    outcome = "-"
                except DegenerateBranchError:
                    outcome, p, post = "+", p_plus, post_plus
            survivors.append(_Path(post, live, path.record.extended(RecordEntry(index, outcome, p)), path.probability * p))
    return survivors


def _finalize(path: _Path, pattern: GatePattern, n_register: int) -> ExecutedBranch:
    state = path.state
    for ref, letter in pattern.byproduct_rules[path.record.outcomes].items():
        state = apply_single_qubit(state, path.position(resolve(ref, n_register)), PAULIS[letter])

    relabel = {resolve(out, n_register): resolve(src, n_register) for out, src in pattern.output_map.items()}
    logical = [relabel.get(label, label) for label in path.live]
    order = sorted(range(len(logical)), key=logical.__getitem__)
    state = permute_qubits(state, order)

    outcome = BranchOutcome(label="".join(path.record.outcomes), probability=path.probability, post_state=state)
    return ExecutedBranch(outcome, path.record)


def _check_size(pattern: GatePattern, n_register: int, mode: str):
    for ref in pattern.register_qubits:
        resolve(ref, n_register)
    if mode == "exhaustive" and len(pattern.instructions) > MAX_EXHAUSTIVE_MEASUREMENTS:
        raise PatternError(
            f"{pattern.name}: {len(pattern.instructions)} measurements exceed the exhaustive cap; use sampled mode"
        )


def execute_pattern(register: StateVector, pattern: GatePattern, mode: str = "exhaustive",
                    seed: SeedLike = None) -> PatternExecution:
    """
    Attaches the pattern's ancillas, applies every bond, then measures in order.
    Exhaustive mode returns all branches; sampled mode returns one, drawn with
    its Born probability from the seeded generator.
    """
    _check_mode(mode)
    n = register.n_qubits
    _check_size(pattern, n, mode)
    rng = make_rng(seed)

    path = _Path(extend_with_plus(register, pattern.ancilla_count), list(range(n + pattern.ancilla_count)))
    for a, b in pattern.bonds:
        _cz(path, resolve(a, n), resolve(b, n))

    dropped: List[MeasurementRecord] = []
    paths = [path]
    for index, instr in enumerate(pattern.instructions):
        paths = _measure(paths, index, instr, n, mode, rng, dropped)

    if dropped:
        logger.warning(f"{pattern.name}: dropped {len(dropped)} degenerate branch(es)")
    return PatternExecution([_finalize(p, pattern, n) for p in paths], dropped)


def execute_sequence(register: StateVector, patterns: Sequence[GatePattern], mode: str = "exhaustive",
                     seed: SeedLike = None) -> PatternExecution:
    """Runs several patterns back to back, attaching each gate's ancillas only when it starts."""
    _check_mode(mode)
    if mode == "exhaustive":
        total = sum(len(p.instructions) for p in patterns)
        if total > MAX_EXHAUSTIVE_MEASUREMENTS:
            raise PatternError(f"{total} measurements in sequence exceed the exhaustive cap; use sampled mode")
    rng = make_rng(seed)

    current = [ExecutedBranch(BranchOutcome("", 1.0, register), MeasurementRecord())]
    dropped: List[MeasurementRecord] = []
    for gate, pattern in enumerate(patterns):
        following = []
        for branch in current:
            run = execute_pattern(branch.outcome.post_state, pattern, mode, rng)
            dropped.extend(
                MeasurementRecord(branch.record.entries + tuple(replace(e, gate=gate) for e in rec.entries))
                for rec in run.dropped
            )
            for step in run:
                record = MeasurementRecord(branch.record.entries + tuple(replace(e, gate=gate) for e in step.record.entries))
                outcome = BranchOutcome(
                    label=branch.outcome.label + step.outcome.label,
                    probability=branch.outcome.probability * step.outcome.probability,
                    post_state=step.outcome.post_state,
                )
                following.append(ExecutedBranch(outcome, record))
        current = following
    return PatternExecution(current, dropped)


@dataclass(frozen=True)
class ElementaryStep:
    """
    Attach one ancilla, bond it to the measured qubit, measure. Kind 'h' steps
    also bond the ancilla to another live qubit; that bond commutes with the
    measurement, so the step reduces to kind 'g'.
    """

    kind: str
    instruction: int
    measured: QubitRef
    ancilla: Ancilla
    bond: Tuple[QubitRef, QubitRef]
    commuting_bonds: Tuple[Tuple[QubitRef, QubitRef], ...] = ()

    @property
    def reducible_to_g(self) -> bool:
        return self.kind == "h"


def decompose_to_elementary(pattern: GatePattern) -> List[ElementaryStep]:
    graph = pattern.graph()
    attached = set()
    measured = set()
    applied = set()
    steps = []

    def key(a, b):
        return frozenset((a, b))

    for index, instr in enumerate(pattern.instructions):
        m = instr.target
        fresh = [nb for nb in graph.neighbors(m) if isinstance(nb, Ancilla) and nb not in attached]
        if len(fresh) != 1:
            raise PatternError(f"{pattern.name}: step {index} attaches {len(fresh)} ancillas; unrecognized pattern shape")
        ancilla = fresh[0]
        attached.add(ancilla)

        pending = [nb for nb in graph.neighbors(m) if nb != ancilla and key(m, nb) not in applied]
        if pending:
            raise PatternError(f"{pattern.name}: bonds {pending} on qubit {m} belong to no elementary step")

        commuting = []
        for nb in graph.neighbors(ancilla):
            if nb == m or (isinstance(nb, Ancilla) and nb not in attached):
                continue
            if nb in measured:
                raise PatternError(f"{pattern.name}: ancilla {ancilla} bonds to already-measured {nb}")
            commuting.append((ancilla, nb))

        applied.add(key(m, ancilla))
        applied.update(key(a, b) for a, b in commuting)
        measured.add(m)
        steps.append(ElementaryStep(
            kind="h" if commuting else "g",
            instruction=index,
            measured=m,
            ancilla=ancilla,
            bond=(m, ancilla),
            commuting_bonds=tuple(commuting),
        ))

    unused = {key(a, b) for a, b in pattern.bonds} - applied
    if unused:
        raise PatternError(f"{pattern.name}: bonds {[tuple(b) for b in unused]} belong to no elementary step")
    return steps


def replay_elementary(register: StateVector, pattern: GatePattern, steps: Optional[Sequence[ElementaryStep]] = None,
                      mode: str = "exhaustive", seed: SeedLike = None, commute_first: bool = False) -> PatternExecution:
    """
    Executes the pattern one elementary step at a time. With commute_first, a
    process-h step measures before applying its commuting bonds.
    """
    _check_mode(mode)
    n = register.n_qubits
    _check_size(pattern, n, mode)
    if steps is None:
        steps = decompose_to_elementary(pattern)
    rng = make_rng(seed)

    dropped: List[MeasurementRecord] = []
    paths = [_Path(register, list(range(n)))]
    for step in steps:
        instr = pattern.instructions[step.instruction]
        anc = resolve(step.ancilla, n)
        m = resolve(step.measured, n)
        commuting = [(resolve(a, n), resolve(b, n)) for a, b in step.commuting_bonds]

        for path in paths:
            path.state = extend_with_plus(path.state, 1)
            path.live = path.live + [anc]
            _cz(path, m, anc)
            if not commute_first:
                for a, b in commuting:
                    _cz(path, a, b)

        paths = _measure(paths, step.instruction, instr, n, mode, rng, dropped)

        if commute_first:
            for path in paths:
                for a, b in commuting:
                    _cz(path, a, b)

    return PatternExecution([_finalize(p, pattern, n) for p in paths], dropped)
