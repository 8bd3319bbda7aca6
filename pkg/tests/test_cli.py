import csv
import io
import json

import pytest

import main
from src import config

MIXED_QUTRIT = '{"kind": "bloch", "dim": 3, "n": [0, 0, 0, 0, 0, 0, 0, 0]}'
PURE_QUTRIT = '{"kind": "family", "name": "one_param", "params": {"index": 8, "value": -1}}'


def run_cli(capsys, *argv):
    code = main.main(list(argv))
    return code, capsys.readouterr()


def test_eval_q_maximally_mixed(capsys):
    code, out = run_cli(capsys, "eval-q", "--state", MIXED_QUTRIT, "--a", "lambda3", "--b", "lambda7")
    assert code == 0
    payload = json.loads(out.out)
    assert payload["report"]["q"] == pytest.approx(4 / 9)
    assert "Q =" in out.err


def test_eval_q_defaults_to_json(capsys):
    code, out = run_cli(capsys, "eval-q", "--state", PURE_QUTRIT, "--a", "lambda3", "--b", "lambda7")
    assert code == 0
    assert json.loads(out.out)["report"]["q"] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("argv, fmt, grid", [
    (["eval-q", "--state", "x", "--a", "l", "--b", "l"], "json", config.DEFAULT_GRID),
    (["scheme", "--state", "x"], "json", config.DEFAULT_GRID),
    (["classify", "--state", "x"], "json", config.DEFAULT_GRID),
    (["budget"], "json", config.DEFAULT_GRID),
    (["audit"], "json", config.DEFAULT_GRID),
    (["concordance", "all"], "json", config.DEFAULT_CONCORDANCE_GRID),
    (["sweep", "--family", "qubit", "--start", "0", "--stop", "1", "--step", "0.5"], "csv", config.DEFAULT_GRID),
])
def test_subcommand_defaults_do_not_leak(argv, fmt, grid):
    args = main.build_parser().parse_args(argv)
    assert args.format == fmt
    assert args.grid == grid


def test_non_hermitian_density_exits_4(capsys):
    state = '{"kind": "density", "dim": 2, "re": [[0.5, 0.5], [0, 0.5]]}'
    code, out = run_cli(capsys, "eval-q", "--state", state, "--a", "sigmaz", "--b", "sigmax")
    assert code == 4
    assert "not Hermitian" in out.err


def test_eval_q_same_observable_is_zero(capsys):
    code, out = run_cli(capsys, "eval-q", "--state", MIXED_QUTRIT, "--a", "lambda5", "--b", "lambda5")
    assert code == 0
    assert json.loads(out.out)["report"]["q"] == pytest.approx(0.0, abs=1e-12)


def test_eval_q_state_from_file(capsys, tmp_path):
    path = tmp_path / "state.json"
    path.write_text('{"kind": "bloch", "dim": 2, "n": [0, 0, 0.6]}')
    code, out = run_cli(capsys, "eval-q", "--state", str(path), "--a", "sigmaz", "--b", "[1, 0, 0]",
                        "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert float(rows[0]["q"]) == pytest.approx(1 - 0.36)


@pytest.mark.parametrize("state, a", [
    ('{"kind": "bloch", "dim": 3', "lambda3"),
    (MIXED_QUTRIT, "lambda9"),
    (MIXED_QUTRIT, "sigmax"),
])
def test_eval_q_bad_input_exits_2(capsys, state, a):
    code, out = run_cli(capsys, "eval-q", "--state", state, "--a", a, "--b", "lambda7")
    assert code == 2
    assert "[!] ERROR" in out.err
    assert out.out == ""


def test_scheme_pure(capsys):
    code, out = run_cli(capsys, "scheme", "--state", PURE_QUTRIT)
    assert code == 0
    payload = json.loads(out.out)
    assert payload["verdict"] == "Pure"
    assert payload["budget"]["total"] == 4


def test_scheme_rejects_qubit(capsys):
    code, _ = run_cli(capsys, "scheme", "--state", '{"kind": "bloch", "dim": 2, "n": [0, 0, 1]}')
    assert code == 2


def test_scheme_positivity_violation(capsys):
    code, out = run_cli(capsys, "scheme", "--state",
                        '{"kind": "family", "name": "one_param", "params": {"index": 8, "value": 0.9}}')
    assert code == 3
    assert "Admissible range" in out.err


def test_bad_epsilon(capsys):
    code, _ = run_cli(capsys, "scheme", "--state", PURE_QUTRIT, "--epsilon", "-1")
    assert code == 2


def test_classify(capsys):
    state = '{"kind": "family", "name": "isotropic", "params": {"p": 0.5}}'
    code, out = run_cli(capsys, "classify", "--state", state, "--grid", "8")
    assert code == 0
    payload = json.loads(out.out)
    assert payload["verdict"] == "Mixed"
    assert payload["q_max"] == pytest.approx(16 / 81, abs=1e-9)


def test_concordance_writes_reports(capsys, tmp_path):
    code, out = run_cli(capsys, "concordance", "qubit_spin_pair", "--grid", "8", "--report-dir", str(tmp_path))
    assert code == 0
    assert json.loads(out.out)[0]["verdict"] == "ExactMatch"
    for name in ("qubit_spin_pair.json", "qubit_spin_pair.csv", "summary.json"):
        assert (tmp_path / name).exists()


def test_concordance_accepts_alias(capsys, tmp_path):
    code, out = run_cli(capsys, "concordance", "eq5", "--grid", "8", "--report-dir", str(tmp_path))
    assert code == 0
    summary = json.loads(out.out)
    assert summary[0]["formula_id"] == "qubit_spin_pair"
    assert summary[0]["verdict"] == "ExactMatch"
    assert (tmp_path / "qubit_spin_pair.json").exists()


def test_concordance_unknown_id(capsys, tmp_path):
    code, _ = run_cli(capsys, "concordance", "no_such_formula", "--report-dir", str(tmp_path))
    assert code == 2


def test_concordance_baseline_regression(capsys, tmp_path):
    baseline = tmp_path / "baseline.json"
    baseline.write_text(json.dumps({"mixture_q": {"verdict": "ExactMatch"}}))
    code, out = run_cli(capsys, "concordance", "mixture_q", "--grid", "8", "--report-dir", str(tmp_path / "r"),
                        "--baseline", str(baseline))
    assert code == 1
    assert "mixture_q" in out.err


def test_budget(capsys):
    code, out = run_cli(capsys, "budget")
    assert code == 0
    table = json.loads(out.out)
    assert [row["tomography_computed"] for row in table] == [3, 15, 8, 80]


def test_sweep_qubit(capsys):
    argv = ("sweep", "--family", "qubit", "--start", "-1", "--stop", "1", "--step", "0.25")
    code, first = run_cli(capsys, *argv)
    assert code == 0
    rows = list(csv.reader(io.StringIO(first.out)))
    assert rows[0] == ["n", "q_max", "linear_entropy", "verdict"]
    assert len(rows) == 10
    assert rows[1][3] == "Pure" and rows[5][3] == "Mixed"
    _, second = run_cli(capsys, *argv)
    assert first.out == second.out


def test_sweep_one_param_json(capsys):
    code, out = run_cli(capsys, "sweep", "--family", "one_param:8", "--start", "-1", "--stop", "0.5",
                        "--step", "0.5", "--format", "json")
    assert code == 0
    points = json.loads(out.out)
    assert [p["verdict"] for p in points] == ["Pure", "Mixed", "Mixed", "Mixed"]


def test_sweep_out_of_range(capsys):
    code, out = run_cli(capsys, "sweep", "--family", "one_param:8", "--start", "-1", "--stop", "0.6",
                        "--step", "0.1")
    assert code == 2
    assert "state space" in out.err


def test_blind_spot(capsys):
    code, out = run_cli(capsys, "blind-spot", "--family", "qubit_orthogonal", "--epsilon", "0.01")
    assert code == 0
    payload = json.loads(out.out)
    assert payload["threshold"] == pytest.approx(0.99 ** 0.5, abs=1e-9)
    assert payload["full_range"] is False


def test_audit_passes(capsys):
    code, out = run_cli(capsys, "audit", "--count", "40", "--seed", "3")
    assert code == 0
    payload = json.loads(out.out)
    assert payload["all_passed"] is True
    assert payload["properties"]["nonnegativity"]["passed"] == 40
    assert payload["properties"]["bloch_roundtrip"]["passed"] == 20


def test_audit_needs_samples(capsys):
    code, _ = run_cli(capsys, "audit", "--count", "0")
    assert code == 2


def test_parse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        main.main(["sweep", "--family", "qubit"])
    assert err.value.code == 2
