from __future__ import annotations

import json

import pytest

from mitlguard.cli import main
from mitlguard.modelio import game_model
from models import small_cases


@pytest.fixture
def model_file(tmp_path):
    p = tmp_path / "reach.json"
    p.write_text(json.dumps(game_model(small_cases()[0].game, "F[0,3] g", "reach")))
    return str(p)


def _hashes(out_dir) -> dict:
    m = json.loads((out_dir / "manifest.json").read_text())
    return {f["path"]: f["sha256"] for f in m["outputs"]}


def test_bad_kernel_exit_code(tmp_path, model_file, capsys):
    doc = json.loads(open(model_file).read())
    doc["game"]["transitions"][0]["p"] = 0.01
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["abstract", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_schema_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema": 1}))
    assert main(["abstract", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "SchemaError" in capsys.readouterr().err


def test_unsupported_fragment_exit_code(tmp_path, model_file, capsys):
    rc = main(["synthesize", model_file, "--spec", "G[0,2] F[0,1] g", "--out", str(tmp_path / "o")])
    assert rc == 3
    assert capsys.readouterr().err.startswith("unsupported:")


def test_twotank_abstract(tmp_path, capsys):
    assert main(["abstract", "--benchmark", "twotank", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "dsg.json").read_text())
    assert len(doc["game"]["states"]) == 49
    assert capsys.readouterr().out.startswith("49 states")


def test_synthesize_outputs_and_determinism(tmp_path, model_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synthesize", model_file, "--out", str(a), "--emit-gamecs", "--emit-tba", "--emit-product"]) == 0
    assert main(["synthesize", model_file, "--out", str(b), "--emit-gamecs", "--emit-tba", "--emit-product",
                 "--threads", "4"]) == 0
    ha, hb = _hashes(a), _hashes(b)
    assert set(ha) == {"policy.json", "values.csv", "trace.csv", "report.json", "product.json", "gamecs.json",
                       "tba.json"}
    assert ha == hb
    report = json.loads((a / "report.json").read_text())
    assert 0 < report["value"] <= 1 and report["monotone"] and report["bounded"]


def test_true_spec_has_value_one(tmp_path, model_file):
    assert main(["synthesize", model_file, "--spec", "true", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["value"] == 1.0


def test_empty_gamecs_warns(tmp_path, model_file, capsys):
    assert main(["gamecs", model_file, "--spec", "F[0,3] bad", "--out", str(tmp_path)]) == 0
    err = capsys.readouterr().err
    assert "no accepting end component" in err
    assert json.loads((tmp_path / "gamecs.json").read_text())["components"] == []


def test_simulate_passive_single_rollout(tmp_path, model_file):
    assert main(["synthesize", model_file, "--out", str(tmp_path)]) == 0
    assert main(["simulate", model_file, "--policy-in", str(tmp_path / "policy.json"), "--adversary", "passive",
                 "-n", "1", "--seed", "3", "--out", str(tmp_path / "sim")]) == 0
    s = json.loads((tmp_path / "sim" / "summary.json").read_text())
    assert s["n"] == 1 and s["p_hat"] in (0.0, 1.0)
    rows = (tmp_path / "sim" / "trajectories.csv").read_text().splitlines()
    assert len(rows) > 1


def test_simulate_rejects_foreign_policy(tmp_path, model_file):
    assert main(["synthesize", model_file, "--out", str(tmp_path)]) == 0
    other = tmp_path / "other.json"
    other.write_text(json.dumps(game_model(small_cases()[2].game, "G[0,3] !bad", "safety")))
    rc = main(["simulate", str(other), "--policy-in", str(tmp_path / "policy.json"), "-n", "5",
               "--out", str(tmp_path / "sim")])
    assert rc == 2


def test_baseline_oblivious(tmp_path, model_file):
    assert main(["synthesize", model_file, "--baseline", "oblivious", "--out", str(tmp_path)]) == 0
    r = json.loads((tmp_path / "report.json").read_text())
    assert r["policy_kind"] == "baseline-oblivious"
    assert r["policy_value"] <= r["value"] + 1e-9


def test_check_spec(capsys):
    assert main(["check-spec", "F[0,3] (a & b)", "--props", "a,b"]) == 0
    out = capsys.readouterr().out
    assert "automaton:" in out and "atoms:      a, b" in out
    assert main(["check-spec", "F[0,3] c", "--props", "a,b"]) == 2


def test_bad_threads(capsys):
    assert main(["check-spec", "true", "--threads", "0"]) == 2
