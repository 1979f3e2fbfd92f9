import json

import numpy as np
import pytest

from dynlearn import cli, experiments, presets
from dynlearn.dynamics import ParamId, ParamSchedule, UnitConvention
from dynlearn.errors import ValidationError
from dynlearn.experiments import RunConfig, read_csv
from dynlearn.weights import FIXTURES, Provenance, WeightFile, fixture


@pytest.fixture
def published_witness(tmp_path):
    path = tmp_path / "w.json"
    fixture("witness-trained", "raw").save(path)
    return path


# ------------------------------------------------------------- weight files


def test_weight_file_round_trip_is_byte_identical(tmp_path, rng):
    s = ParamSchedule.constant(30.0, trainable={ParamId.KA: False},
                               KA=rng.normal(), KB=list(rng.normal(size=3)), Zeta=1 / 3,
                               EpsA=[0.1, 0.2], EpsB=1e-17)
    wf = WeightFile(s, UnitConvention.TWO_PI_MILLI, Provenance("x", 7, 0.125, 3, "n"))
    text = wf.dumps()
    assert WeightFile.loads(text).dumps() == text
    path = tmp_path / "a.json"
    wf.save(path)
    WeightFile.load(path).save(tmp_path / "b.json")
    assert path.read_bytes() == (tmp_path / "b.json").read_bytes()


@pytest.mark.parametrize("name", FIXTURES)
@pytest.mark.parametrize("units", ["raw", "twopi"])
def test_fixtures_load_and_round_trip(name, units):
    wf = fixture(name, units)
    assert wf.units.value == units
    assert WeightFile.loads(wf.dumps()).dumps() == wf.dumps()


def test_gate_fixture_copies_first_bias_segment():
    eps_b = fixture("xor-trained").schedule.values[ParamId.EpsB]
    assert eps_b[0] == eps_b[1]


@pytest.mark.parametrize("text", [
    "not json",
    "{}",
    json.dumps({"schema_version": 9, "units": "raw", "t_f": 1, "values": {}}),
    json.dumps({"schema_version": 1, "units": "furlongs", "t_f": 1, "values": {}}),
    json.dumps({"schema_version": 1, "units": "raw", "t_f": -1, "values": {}}),
])
def test_malformed_weight_files(text):
    with pytest.raises(ValidationError):
        WeightFile.loads(text)


def test_unknown_fixture():
    with pytest.raises(ValidationError):
        fixture("nope")


# ------------------------------------------------------------------ presets


def test_all_presets_describe():
    for name, p in presets.PRESETS.items():
        info = p.describe()
        assert info["name"] == name
        json.dumps(info)
    assert len(presets.PRESETS) == 15


def test_describe_witness_train():
    info = presets.get("witness-train").describe()
    assert info["segments"] == {"KA": 4, "KB": 4, "Zeta": 4, "EpsA": 4, "EpsB": 4}
    assert info["t_f"] == 1000.0
    assert [p["target"] for p in info["pairs"]] == [1.0, 0.0, 0.0, presets.P_TARGET]


def test_unknown_preset():
    with pytest.raises(ValidationError):
        presets.get("fig99")


# -------------------------------------------------------------- run config


def test_run_config_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"eta": 0.5, "epochs": 3}))
    cfg = RunConfig.from_json(path)
    assert (cfg.eta, cfg.epochs) == (0.5, 3)
    path.write_text(json.dumps({"learning_rate": 1}))
    with pytest.raises(ValidationError):
        RunConfig.from_json(path)


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv("QNN_SEED", "42")
    assert RunConfig(seed=1).resolved_seed() == 42
    monkeypatch.setenv("QNN_SEED", "x")
    with pytest.raises(ValidationError):
        RunConfig().resolved_seed()
    monkeypatch.delenv("QNN_SEED")
    assert RunConfig(seed=1).resolved_seed() == 1


# --------------------------------------------------------------- evaluation


def test_eval_csv_is_deterministic_with_metadata():
    wf = fixture("witness-trained")
    a = experiments.run_eval(wf, "bell;werner:F=0.3").csv()
    assert a == experiments.run_eval(wf, "bell;werner:F=0.3").csv()
    meta, rows = read_csv(a)
    assert a.startswith("# ")
    assert meta["units"] == "raw"
    assert [r["state_id"] for r in rows] == ["bell", "werner:F=0.3"]
    assert tuple(rows[0]) == experiments.EVAL_HEADER


def test_empty_eval_set():
    res = experiments.run_eval(fixture("witness-trained"), "")
    assert res.labels == [] and res.rms is None
    _, rows = read_csv(res.csv())
    assert rows == []


def test_units_mismatch_is_rejected():
    with pytest.raises(ValidationError):
        experiments.run_eval(fixture("witness-trained", "raw"), "bell", units="twopi")


def test_mixed_grid_seed_changes_states():
    a = experiments.resolve_set("grid-mixed", seed=1)[1][:5]
    b = experiments.resolve_set("grid-mixed", seed=2)[1][:5]
    assert not np.allclose(a, b)


def test_sweep_endpoints_inclusive():
    res = experiments.run_sweep(fixture("witness-trained"), "werner", "F", 0.0, 1.0, 5)
    np.testing.assert_allclose(res.values, [0, 0.25, 0.5, 0.75, 1.0])
    assert res.tg_witness[-1] == pytest.approx(-1.0)
    with pytest.raises(ValidationError):
        experiments.run_sweep(fixture("witness-trained"), "werner", "gamma", 0, 1, 3)
    with pytest.raises(ValidationError):
        experiments.run_sweep(fixture("witness-trained"), "werner", "F", 0, 1, 0)


def test_replay_reports_both_conventions():
    raw = experiments.testing_replay("raw")
    twopi = experiments.testing_replay("twopi")
    assert raw.reproduces and raw.rms <= 0.01
    assert not twopi.reproduces


def test_short_training_and_history():
    res = experiments.run_training("gates-xor", RunConfig(epochs=3))
    assert res.weights.provenance.epochs == 3
    assert len(res.history) == 4
    assert res.weights.schedule.values[ParamId.KA] == (2.1333,)
    _, rows = read_csv(res.history_csv())
    assert [int(r["epoch"]) for r in rows] == [0, 1, 2, 3]


def test_training_rejects_non_training_preset():
    with pytest.raises(ValidationError):
        experiments.run_training("fig3-werner")


def test_single_value_scan():
    res = experiments.run_target_scan([0.44], RunConfig(epochs=2))
    assert res.status == ["ok"] and res.best_target == 0.44
    with pytest.raises(ValidationError):
        experiments.run_target_scan([1.5], RunConfig(epochs=1))
    with pytest.raises(ValidationError):
        experiments.run_target_scan([])


# ---------------------------------------------------------------------- CLI


def test_cli_describe(capsys):
    assert cli.main(["describe", "fig2-p3"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["sweep"]["points"] == 41


def test_cli_train_eval_round_trip(tmp_path, monkeypatch):
    monkeypatch.setenv("QNN_SEED", "5")
    out = tmp_path / "x.json"
    assert cli.main(["train", "gates-xor", "--epochs", "2", "--out", str(out)]) == 0
    wf = WeightFile.load(out)
    assert wf.provenance.seed == 5
    assert (tmp_path / "x.history.csv").exists()
    csv_path = tmp_path / "e.csv"
    assert cli.main(["eval", "--weights", str(out), "--set", "basis:label=01",
                     "--out", str(csv_path)]) == 0
    meta, rows = read_csv(csv_path.read_text())
    assert meta["seed"] == "5"
    assert float(rows[0]["qnn_output"]) != 0.0


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 1, "eta": 0.1}))
    out = tmp_path / "w.json"
    assert cli.main(["train", "gates-xnor", "--config", str(cfg), "--out", str(out)]) == 0
    assert "eta=0.1" in WeightFile.load(out).provenance.note


def test_cli_sweep(published_witness, capsys):
    code = cli.main(["sweep", "--weights", str(published_witness), "--family", "bell",
                     "--param", "theta", "--from", "0", "--to", "2pi", "--points", "3"])
    assert code == 0
    meta, rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 3 and float(meta["to"]) == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("argv", [
    ["eval", "--weights", "/nonexistent.json", "--set", "table8"],
    ["describe", "nope"],
    ["sweep", "--weights", "W", "--family", "nope", "--param", "x"],
    ["scan-target", "--values", "a,b"],
    ["train", "gates-xor", "--units", "furlongs"],
])
def test_cli_validation_exit_code(argv, published_witness):
    argv = [str(published_witness) if a == "W" else a for a in argv]
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(cli.main(argv))
    assert exc.value.code == 2


def test_cli_units_mismatch_exit_code(published_witness):
    assert cli.main(["eval", "--weights", str(published_witness), "--set", "bell",
                     "--units", "twopi"]) == 2


def test_cli_divergence_exit_code(tmp_path):
    assert cli.main(["train", "gates-xor", "--eta", "1e12", "--epochs", "3",
                     "--out", str(tmp_path / "d.json")]) == 3
