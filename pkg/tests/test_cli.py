import json
import math

import pandas as pd
import pytest

from app.experiments import ReportRow
from cli.mbqc_fidelity import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main, parse_angle


@pytest.mark.parametrize(
    "token, expected",
    [
        ("0.25", 0.25),
        ("pi", math.pi),
        ("-pi", -math.pi),
        ("pi/2", math.pi / 2),
        ("3pi/2", 3 * math.pi / 2),
        ("0.5*pi", 0.5 * math.pi),
        ("2*pi", 2 * math.pi),
    ],
)
def test_parse_angle(token, expected):
    assert parse_angle(token) == pytest.approx(expected)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ValueError):
        parse_angle("half")
    with pytest.raises(ValueError):
        parse_angle("pi/0")


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--seed", "3", "--trials", "2", "--qubits", "3",
                 "--epsilon", "0,0.1,pi/2", "--delta", "0,1", "--out", str(out)])
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert len(frame) == 12
    assert not frame["bound_violated"].any()


def test_sweep_with_bell_state(tmp_path):
    out = tmp_path / "bell.json"
    code = main(["sweep", "--state", "bell", "--epsilon", "pi/2", "--format", "json", "--out", str(out)])
    assert code == EXIT_OK
    records = json.loads(out.read_text())
    assert records[0]["F_mean_analytic"] == pytest.approx(0.5)


def test_sweep_exits_with_failure_on_bound_violation(tmp_path, monkeypatch):
    violating = ReportRow(
        seed=0, trial=0, n_qubits=2, u=0.0, epsilon=0.5, delta=0.0, S=1.0, xi=0.0,
        P_plus=0.5, P_minus=0.5, F_plus=0.8, F_minus=0.8, F_mean_analytic=0.8, F_mean_simulated=0.8,
        bound=0.9, slack=-0.1, bound_violated=True,
    )
    monkeypatch.setattr("cli.mbqc_fidelity.run_sweep", lambda config: [violating])
    out = tmp_path / "violated.csv"
    assert main(["sweep", "--out", str(out)]) == EXIT_FAILURE
    assert pd.read_csv(out)["bound_violated"].all()


def test_sweep_with_state_file(tmp_path):
    state = tmp_path / "state.txt"
    state.write_text("2\n0.8 0\n0 0\n0 0\n0.6 0\n")
    out = tmp_path / "custom.csv"
    assert main(["sweep", "--state", str(state), "--mode", "analytic", "--out", str(out)]) == EXIT_OK
    assert out.exists()


def test_sweep_usage_errors(tmp_path):
    out = str(tmp_path / "x.csv")
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--epsilon", "abc", "--out", out])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--epsilon", "pi/0", "--out", out])
    assert exc.value.code == EXIT_USAGE

    assert main(["sweep", "--qubits", "9", "--out", out]) == EXIT_USAGE
    assert main(["sweep", "--epsilon=-0.1", "--out", out]) == EXIT_USAGE
    assert main(["sweep", "--mode", "sampled", "--shots", "10", "--out", out]) == EXIT_USAGE
    assert main(["sweep", "--state", str(tmp_path / "nope.txt"), "--out", out]) == EXIT_USAGE
    assert main(["sweep", "--out", str(tmp_path / "missing" / "x.csv")]) == EXIT_USAGE


def test_gate_check(capsys):
    assert main(["gate-check", "--seed", "2", "--trials", "5"]) == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed.count("PASS") == 1
    assert sum("worst infidelity" in line for line in printed) == 4
    assert main(["gate-check", "--trials", "0"]) == EXIT_USAGE


def test_budget(capsys):
    assert main(["budget", "--entanglement", "1", "--threshold", "0.5"]) == EXIT_OK
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(printed) == pytest.approx(math.pi / 2)
    assert main(["budget", "--entanglement", "2", "--threshold", "0.5"]) == EXIT_USAGE


def test_exit_codes_are_distinct():
    assert len({EXIT_OK, EXIT_FAILURE, EXIT_USAGE}) == 3
