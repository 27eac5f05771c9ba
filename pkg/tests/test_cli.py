import json
from datetime import datetime

import pytest

from mirrornet.cli import DESK_ORACLE, DESK_WORLD, RunConfig, load_config, logical_time, main

TINY = """\
[run]
seed = 3
probe_k = 200
timestamp = {stamp}
[dataset]
count = 4000
shard_rows = 2000
test_size = 400
[train]
max_epochs = 2
learning_rate = 0.001
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY.format(stamp="2024-10-10T02:36:25"))
    return path


def error_line(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_defaults_use_desk_profile():
    cfg = load_config()
    assert cfg.world == DESK_WORLD and cfg.oracle == DESK_ORACLE
    assert cfg.train.neurons_per_layer == 15 and cfg.train.batch_size == 25


def test_config_round_trips_through_text(tmp_path, tiny):
    cfg = load_config(tiny)
    path = tmp_path / "again.cfg"
    with open(path, "w") as fh:
        cfg.to_parser().write(fh)
    assert load_config(path) == cfg


def test_logical_time_precedence(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
    assert logical_time(RunConfig(timestamp="2024-10-10T02:36:25")) == datetime(2024, 10, 10, 2, 36, 25)
    assert logical_time(RunConfig()) == datetime(1970, 1, 2)
    monkeypatch.delenv("SOURCE_DATE_EPOCH")
    assert logical_time(RunConfig(), datetime(2000, 1, 1)) == datetime(2000, 1, 1)


@pytest.mark.parametrize("text,fragment", [
    ("[world]\nrough_prob = 2\n", "rough_prob"),
    ("[world]\nbogus = 1\n", "bogus"),
    ("[nonsense]\na = 1\n", "nonsense"),
    ("[train]\nhidden_layers = x\n", "hidden_layers"),
    ("[dataset]\nlabel_source = oracle\n", "label_source"),
    ("[run]\ngrid = huge\n", "grid"),
])
def test_invalid_config_exits_3_without_writing(tmp_path, capsys, text, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    assert main(["gen", "--config", str(cfg), "--out", str(out)]) == 3
    err = error_line(capsys)
    assert err["error"] == "invalid-config" and fragment in err["message"]
    assert not out.exists()


def test_usage_errors_exit_2(capsys):
    assert main(["frobnicate"]) == 2
    assert error_line(capsys)["exit_code"] == 2
    assert main(["eval", "--checkpoint", "x.ckpt"]) == 2


def test_missing_checkpoint_exits_4_naming_path(tmp_path, capsys):
    missing = tmp_path / "missing.ckpt"
    assert main(["cmni", "--checkpoint", str(missing), "--data", "d.csv"]) == 4
    err = error_line(capsys)
    assert err["path"] == str(missing) and "missing.ckpt" in err["message"]


def test_missing_config_exits_4(tmp_path, capsys):
    assert main(["gen", "--config", str(tmp_path / "nope.cfg")]) == 4


def test_gen_is_deterministic_and_honours_out_root(tmp_path, tiny, monkeypatch):
    monkeypatch.setenv("MIRRORNET_OUT", str(tmp_path / "root"))
    assert main(["gen", "--config", str(tiny), "--count", "500"]) == 0
    assert main(["gen", "--config", str(tiny), "--count", "500", "--out", str(tmp_path / "b")]) == 0
    (first,) = (tmp_path / "root").iterdir()
    assert first.name.startswith("gen-")
    assert (first / "dataset.csv").read_bytes() == (tmp_path / "b" / "dataset.csv").read_bytes()


def test_pipeline_subcommands(tmp_path, tiny, capsys):
    cfg = ["--config", str(tiny)]
    assert main(["gen", *cfg, "--out", str(tmp_path / "g")]) == 0
    assert main(["split", *cfg, "--data", str(tmp_path / "g" / "dataset.csv"), "--out", str(tmp_path / "s")]) == 0
    assert main(["train", *cfg, "--data", str(tmp_path / "s" / "train.csv"), "--out", str(tmp_path / "t")]) == 0
    ckpt = sorted((tmp_path / "t").glob("*epoch2-*.ckpt"))[0]
    assert ckpt.name.startswith("checkpoint-20241010-023625-")
    test = str(tmp_path / "s" / "test.csv")
    assert main(["probe", *cfg, "--checkpoint", str(ckpt), "--data", test, "--out", str(tmp_path / "p")]) == 0
    stats_csv = tmp_path / "p" / "stats.csv"
    assert main(["cmni", *cfg, "--checkpoint", str(ckpt), "--stats", str(stats_csv), "--out", str(tmp_path / "c")]) == 0
    assert main(["cmni", *cfg, "--checkpoint", str(ckpt), "--data", test, "--out", str(tmp_path / "c2")]) == 0
    assert (tmp_path / "c" / "cmni.json").read_bytes() == (tmp_path / "c2" / "cmni.json").read_bytes()
    assert main(["circuits", *cfg, "--checkpoint", str(ckpt), "--cmni-report", str(tmp_path / "c" / "cmni.json"),
                 "--out", str(tmp_path / "h")]) == 0
    assert (tmp_path / "h" / "circuits.txt").exists()
    assert main(["eval", *cfg, "--checkpoint", str(ckpt), "--data", test, "--out", str(tmp_path / "e")]) == 0
    ev = json.loads((tmp_path / "e" / "eval.json").read_text())
    assert sum(map(sum, ev["rows_predicted_columns_actual"])) == 400
    assert main(["sweep", *cfg, "--data", str(tmp_path / "s" / "train.csv"), "--epochs", "1",
                 "--out", str(tmp_path / "w")]) == 0
    assert main(["report", *cfg, "--sweep", str(tmp_path / "w"), "--data", test, "--out", str(tmp_path / "r")]) == 0
    assert "runs: 1" in capsys.readouterr().out


def test_run_all_bundles_are_byte_identical(tmp_path, tiny):
    for name in ("a", "b"):
        assert main(["run-all", "--config", str(tiny), "--out", str(tmp_path / name)]) == 0
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    assert any(p.suffix == ".ckpt" for p in files_a)
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["logical_time"] == "2024-10-10T02:36:25"
    assert len(manifest["files"]) == len(files_a) - 1
