import json
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.bases import DeviationParams, deviated_basis
from app.errors import CapacityError, ReportWriteError, StateFileError
from app.experiments import (
    REPORT_FIELDS,
    SweepConfig,
    commutation_discrepancy,
    haar_state,
    load_state_file,
    run_gate_checks,
    run_sweep,
    sample_random_state,
    special_state,
    write_report,
)
from app.fidelity import entanglement_S
from app.statevector import fidelity
from app.utils import make_rng


def test_random_states_are_seeded():
    a = sample_random_state(3, (5, 0))
    b = sample_random_state(3, (5, 0))
    c = sample_random_state(3, (5, 1))
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert not np.array_equal(a.amplitudes, c.amplitudes)
    with pytest.raises(CapacityError):
        sample_random_state(1, 0)


def test_random_states_are_normalized():
    rng = make_rng(1)
    for _ in range(1000):
        state = sample_random_state(int(rng.integers(2, 9)), rng)
        assert abs(state.norm() - 1.0) <= 1e-12


def test_two_qubit_entanglement_statistics():
    # for Haar-random two-qubit states E[Tr ρ²] = 4/5, so E[S] = 2/5
    rng = make_rng(2)
    values = []
    for _ in range(10_000):
        state = sample_random_state(2, rng)
        a = state.amplitudes
        concurrence_sq = 4 * abs(a[0] * a[3] - a[1] * a[2]) ** 2
        S = entanglement_S(state)
        assert S == pytest.approx(concurrence_sq, abs=1e-12)
        values.append(S)
    assert abs(np.mean(values) - 0.4) < 0.02


def test_special_states():
    bell = special_state("bell", 3)
    assert entanglement_S(bell) == pytest.approx(1.0)
    assert special_state("zero", 2).amplitudes[0] == 1.0
    with pytest.raises(StateFileError):
        special_state("ghz", 3)


def test_load_state_file(tmp_path):
    path = tmp_path / "bell.txt"
    path.write_text("2\n1 0\n0 0\n0 0\n1 0\n")
    assert fidelity(load_state_file(path), special_state("bell", 2)) == pytest.approx(1.0)

    short = tmp_path / "short.txt"
    short.write_text("2\n1 0\n0 0\n")
    with pytest.raises(StateFileError):
        load_state_file(short)

    garbled = tmp_path / "garbled.txt"
    garbled.write_text("1\n1 zero\n0 0\n")
    with pytest.raises(StateFileError):
        load_state_file(garbled)

    with pytest.raises(StateFileError):
        load_state_file(tmp_path / "missing.txt")


def test_zero_epsilon_rows_are_exact():
    rows = run_sweep(SweepConfig(seed=3, n_qubits=3, trials=5, epsilon_grid=[0.0], u_grid=[0.0, 1.0]))
    assert len(rows) == 10
    for row in rows:
        assert row.F_mean_analytic == 1.0
        assert row.bound == 1.0
        assert row.slack == 0.0
        assert row.F_mean_simulated == pytest.approx(1.0, abs=1e-10)


def test_bell_sweep_saturates():
    rows = run_sweep(SweepConfig(state="bell", epsilon_grid=[math.pi / 2], delta_grid=[0.0, 1.0]))
    for row in rows:
        assert row.S == pytest.approx(1.0)
        assert row.F_mean_analytic == pytest.approx(0.5)
        assert abs(row.slack) <= 1e-10
        assert not row.bound_violated


def test_row_order():
    config = SweepConfig(seed=1, trials=2, u_grid=[0.0, 1.0], epsilon_grid=[0.1, 0.2], delta_grid=[0.0, 0.5])
    rows = run_sweep(config)
    keys = [(r.trial, r.u, r.epsilon, r.delta) for r in rows]
    assert keys == sorted(keys)
    assert len(rows) == 16


def test_sweep_has_no_violations():
    config = SweepConfig(
        seed=0,
        n_qubits=4,
        trials=100,
        u_grid=[0.0, 2.0],
        epsilon_grid=list(np.linspace(0.0, np.pi, 10)),
        delta_grid=list(np.linspace(0.0, 2 * np.pi, 5, endpoint=False)),
    )
    rows = run_sweep(config)
    assert len(rows) == 10_000
    assert not any(r.bound_violated for r in rows)


def test_analytic_mode_leaves_simulation_empty():
    rows = run_sweep(SweepConfig(seed=2, mode="analytic", epsilon_grid=[0.3]))
    assert math.isnan(rows[0].F_mean_simulated)
    assert rows[0].F_mean_analytic == pytest.approx(1 - (1 - rows[0].xi ** 2) * math.sin(0.15) ** 2)


def test_sampled_frequencies_within_three_sigma():
    config = SweepConfig(
        seed=9,
        n_qubits=3,
        trials=4,
        mode="sampled",
        u_grid=[0.0, 1.0],
        epsilon_grid=[0.0, 0.4, 0.8, 1.6, 2.4],
        delta_grid=[0.0, 0.5, 1.5, 3.0, 4.5],
    )
    rows = run_sweep(config)
    assert len(rows) == 200
    within = 0
    for row in rows:
        p = 0.5 * (1 + row.xi * math.sin(row.epsilon) * math.cos(row.delta))
        sigma = math.sqrt(p * (1 - p) / config.shots)
        within += abs(row.P_plus - p) <= 3 * sigma + 1e-12
        assert row.P_plus + row.P_minus == pytest.approx(1.0)
    assert within / len(rows) >= 0.99


def test_sampled_mode_defaults_and_reproducibility():
    config = SweepConfig(seed=4, mode="sampled", epsilon_grid=[0.5, 1.0])
    assert config.shots == 100_000
    first = [r.P_plus for r in run_sweep(config)]
    second = [r.P_plus for r in run_sweep(config)]
    assert first == second


def test_csv_output_is_byte_identical(tmp_path):
    config = SweepConfig(seed=7, n_qubits=3, trials=3, epsilon_grid=[0.1, 0.7], delta_grid=[0.0, 2.0])
    a = write_report(run_sweep(config), tmp_path / "a.csv")
    b = write_report(run_sweep(config), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trips_exactly(tmp_path):
    config = SweepConfig(seed=8, n_qubits=3, trials=2, epsilon_grid=[0.1, 1.3], u_grid=[0.0, 0.4])
    rows = run_sweep(config)
    path = write_report(rows, tmp_path / "report.csv")

    frame = pd.read_csv(path, float_precision="round_trip")
    assert list(frame.columns) == REPORT_FIELDS
    for row, (_, back) in zip(rows, frame.iterrows()):
        for name, value in row.model_dump().items():
            if isinstance(value, float) and math.isnan(value):
                assert math.isnan(back[name])
            else:
                assert back[name] == value, name


def test_analytic_csv_writes_nan(tmp_path):
    rows = run_sweep(SweepConfig(seed=1, mode="analytic"))
    path = write_report(rows, tmp_path / "analytic.csv")
    frame = pd.read_csv(path)
    assert frame["F_mean_simulated"].isna().all()


def test_json_output(tmp_path):
    rows = run_sweep(SweepConfig(state="zero", epsilon_grid=[math.pi / 2], mode="exhaustive"))
    path = write_report(rows, tmp_path / "report.json", "json")
    records = json.loads(path.read_text())
    assert len(records) == len(rows)
    assert list(records[0]) == REPORT_FIELDS
    assert records[0]["F_minus"] is None
    assert records[0]["P_minus"] == 0.0

    analytic = write_report(run_sweep(SweepConfig(mode="analytic")), tmp_path / "analytic.json", "json")
    assert all(r["F_mean_simulated"] is None for r in json.loads(analytic.read_text()))


def test_json_floats_round_trip_exactly(tmp_path):
    rows = run_sweep(SweepConfig(seed=4, trials=2, epsilon_grid=[0.1, 0.3], delta_grid=[0.2]))
    records = json.loads(write_report(rows, tmp_path / "exact.json", "json").read_text())
    for row, record in zip(rows, records):
        for key, value in row.model_dump().items():
            if isinstance(value, float) and math.isnan(value):
                assert record[key] is None, key
            else:
                assert record[key] == value, key


def test_unwritable_report_path(tmp_path):
    rows = run_sweep(SweepConfig(epsilon_grid=[0.1]))
    with pytest.raises(ReportWriteError):
        write_report(rows, tmp_path / "missing" / "report.csv")


@pytest.mark.parametrize(
    "overrides",
    [
        {"epsilon_grid": []},
        {"epsilon_grid": [4.0]},
        {"epsilon_grid": [-0.1]},
        {"delta_grid": [float("nan")]},
        {"n_qubits": 9},
        {"n_qubits": 1},
        {"trials": 0},
        {"seed": -1},
        {"mode": "sampled", "shots": 50},
        {"mode": "quantum"},
    ],
)
def test_invalid_configurations(overrides):
    with pytest.raises(ValidationError):
        SweepConfig(**overrides)


def test_gate_checks_pass_and_are_reproducible():
    first = run_gate_checks(seed=1, trials=20)
    assert first.passed
    assert first.lines()[-1] == "PASS"
    assert run_gate_checks(seed=1, trials=20) == first


def test_gate_check_summary_is_left_to_the_caller(caplog):
    with caplog.at_level("DEBUG", logger="mbqc_fidelity"):
        summary = run_gate_checks(seed=2, trials=3)
    assert summary.passed
    assert not any("worst infidelity" in r.getMessage() for r in caplog.records)
    assert not any(r.getMessage().endswith("PASS") for r in caplog.records)


def test_measurement_commutes_with_remote_bonds():
    rng = make_rng(5)
    for _ in range(100):
        dev = DeviationParams(epsilon=rng.uniform(0, np.pi), delta=rng.uniform(0, 2 * np.pi))
        basis = deviated_basis(rng.uniform(0, 2 * np.pi), dev)
        assert commutation_discrepancy(haar_state(3, rng), basis) <= 1e-12
