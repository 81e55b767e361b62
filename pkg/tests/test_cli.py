import csv
import hashlib
import json
import os

import numpy as np
import pytest

from pvnne import cli, config as rc, dataio
from pvnne.errors import ConfigError

TINY = """\
seed = 3
[synth]
n_days = 60
composition = [[80, 10, 10], [60, 30, 10]]
[ensemble]
n_structures = 2
models_per_structure = 2
hidden_schedule = [5, 8]
trainer_split = {1 = "LM", 2 = "PSO"}
[trainers.lm]
max_epochs = 5
[trainers.pso]
max_iterations = 5
[trainers.bp]
max_epochs = 50
[evaluation]
train_days = 10
validation_days = 2
lengths = [10, 15, 20]
resolutions = [15, 30, 60]
"""


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    p = d / "tiny.toml"
    p.write_text(TINY)
    return d, str(p)


@pytest.fixture(scope="module")
def synth_dir(tiny):
    d, cfg = tiny
    out = d / "synth"
    assert cli.main(["synth", "--config", cfg, "--out", str(out)]) == 0
    return out


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_synth_outputs_and_manifest(synth_dir):
    rows = read(synth_dir / "data.csv")
    assert rows[0] == ["timestamp", "pv_kw", "ghi_wm2", "temp_c", "wind_ms", "humidity_pct"]
    assert len(rows) == 1 + 60 * 96
    man = json.loads((synth_dir / "manifest.json").read_text())
    assert man["command"] == "synth" and man["seed"] == 3
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((synth_dir / name).read_bytes()).hexdigest() == digest
    cfg = json.loads((synth_dir / "config.json").read_text())
    assert man["config_sha256"] == rc.config_hash(cfg)
    assert cfg["ensemble"]["hidden_schedule"] == [5, 8]


def test_synth_is_deterministic(tiny, synth_dir):
    d, cfg = tiny
    out = d / "synth2"
    assert cli.main(["synth", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "data.csv").read_bytes() == (synth_dir / "data.csv").read_bytes()
    other = d / "synth3"
    assert cli.main(["synth", "--config", cfg, "--out", str(other), "--seed", "4"]) == 0
    assert (other / "data.csv").read_bytes() != (synth_dir / "data.csv").read_bytes()


def test_ingest_fills_gaps_and_resamples(tiny, synth_dir):
    d, cfg = tiny
    rows = read(synth_dir / "data.csv")
    rows[500][1] = ""
    del rows[700]
    holed = d / "holed.csv"
    with open(holed, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    out = d / "ingest"
    assert cli.main(["ingest", "--config", cfg, "--input", str(holed), "--out", str(out),
                     "--resolution", "30"]) == 0
    ds = dataio.read_csv(out / "clean.csv")
    assert ds.resolution_minutes == 30 and len(ds) == 60 * 48
    assert not any(np.isnan(v).any() for v in ds.values.values())
    man = json.loads((out / "manifest.json").read_text())
    assert man["inputs"]["holed.csv"] == hashlib.sha256(holed.read_bytes()).hexdigest()


def test_classify(tiny, synth_dir):
    d, cfg = tiny
    out = d / "classify"
    assert cli.main(["classify", "--config", cfg, "--input", str(synth_dir / "data.csv"),
                     "--out", str(out)]) == 0
    rows = read(out / "classification.csv")
    assert rows[0] == ["date", "k_t", "class"] and len(rows) == 61
    assert {r[2] for r in rows[1:]} <= {"Clear", "PartiallyCloudy", "Cloudy"}


def test_train_forecast_and_jobs_determinism(tiny, synth_dir):
    d, cfg = tiny
    data = str(synth_dir / "data.csv")
    a, b = d / "train1", d / "train2"
    assert cli.main(["train", "--config", cfg, "--input", data, "--out", str(a),
                     "--day", "2014-02-20"]) == 0
    assert cli.main(["train", "--config", cfg, "--input", data, "--out", str(b),
                     "--day", "2014-02-20", "--jobs", "2"]) == 0
    assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()
    assert cli.main(["forecast", "--config", cfg, "--input", data, "--out", str(a),
                     "--day", "2014-02-20"]) == 0
    rows = read(a / "forecast.csv")
    assert rows[0] == ["timestamp", "forecast_kw"] and len(rows) == 97
    vals = np.array([float(r[1]) for r in rows[1:]])
    assert np.all(vals[:28] == 0) and np.all(vals[68:] == 0) and vals[28:68].max() > 0
    members = read(a / "members.csv")
    assert len(members) == 1 + 4 and len(members[1]) == 41


def test_evaluate(tiny, synth_dir):
    d, cfg = tiny
    out = d / "evaluate"
    assert cli.main(["evaluate", "--config", cfg, "--input", str(synth_dir / "data.csv"),
                     "--out", str(out)]) == 0
    rows = read(out / "table.csv")
    assert rows[0][2:] == ["M1", "M2", "M3", "M4", "M5", "M6"] and rows[-1][0] == "Average"
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["average_mape"]) == {"M1", "M2", "M3", "M4", "M5", "M6"}


def test_experiments(tiny, synth_dir):
    d, cfg = tiny
    data = str(synth_dir / "data.csv")
    out = d / "exp"
    assert cli.main(["experiment-resolution", "--config", cfg, "--input", data,
                     "--out", str(out)]) == 0
    rows = read(out / "resolution.csv")
    assert [r[0] for r in rows[1:]] == ["15", "30", "60"]
    assert cli.main(["experiment-length", "--config", cfg, "--input", data,
                     "--out", str(out)]) == 0
    rows = read(out / "length.csv")
    assert rows[0] == ["date", "kind", "train_days", "mape_pct"]
    per_day = {}
    for r in rows[1:]:
        per_day.setdefault(r[0], []).append((r[2], float(r[3])))
    assert per_day and all([n for n, _ in v] == ["10", "15", "20"] for v in per_day.values())
    assert any(len({m for _, m in v}) > 1 for v in per_day.values())


def test_exit_codes(tiny, tmp_path, capsys):
    d, cfg = tiny
    bad = tmp_path / "bad.toml"
    bad.write_text("[ensemble]\nwidth = 3\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "unknown configuration key" in capsys.readouterr().err
    assert cli.main(["forecast", "--config", cfg, "--out", str(tmp_path / "y")]) == 2
    assert cli.main(["forecast", "--config", cfg, "--out", str(tmp_path / "y"),
                     "--day", "2014-02-20"]) == 2
    assert cli.main(["ingest", "--input", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "z")]) == 1
    assert cli.main(["train", "--config", cfg, "--day", "tomorrow",
                     "--out", str(tmp_path / "w")]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["synth", "--resolution", "7"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["teleport"])
    assert info.value.code == 2
    assert not os.path.exists(tmp_path / "x" / "manifest.json")


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    cli.atomic_write(str(p), "hello\n")
    assert p.read_text() == "hello\n" and os.listdir(p.parent) == ["f.txt"]


def test_config_loading(tmp_path):
    cfg = rc.load_config()
    assert cfg["seed"] == 0 and rc.peak_power(cfg) == 1200.0
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"seed": 5, "site": {"latitude": 10.0}}))
    cfg = rc.load_config(str(j))
    assert cfg["seed"] == 5 and rc.site(cfg).latitude_deg == 10.0
    assert rc.canonical_json(cfg) == rc.canonical_json(rc.load_config(str(j)))
    with pytest.raises(ConfigError):
        rc.load_config(overrides={"wavelet": {"extension": "zero"}})
    with pytest.raises(ConfigError):
        rc.load_config(overrides={"ensemble": {"hidden_schedule": [1, 2]}})
    with pytest.raises(ConfigError):
        rc.load_config(str(tmp_path / "nope.toml"))
