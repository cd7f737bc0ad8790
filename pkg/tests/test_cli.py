import configparser
import csv
import subprocess
import sys

import pytest

from insured_marl.cli import main
from insured_marl.config import DEFAULTS, STRATEGIES, ConfigError, RunConfig

SMALL = """
[run]
seed = 3
[synth]
n_assets = 2
n_dates = 40
[train]
episodes = {episodes}
batch_size = 8
capacity = 500
[agent]
actor_hidden = 8
critic_hidden = 16
[madqn]
hidden = 8
[baseline]
up_resolution = 11
"""


def write_cfg(tmp_path, episodes=2, extra=""):
    p = tmp_path / "run.cfg"
    p.write_text(SMALL.format(episodes=episodes) + extra)
    return p


def test_init_writes_every_default(tmp_path):
    assert main(["init", "--out", str(tmp_path)]) == 0
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(tmp_path / "default.cfg")
    for sec, kv in DEFAULTS.items():
        assert dict(parser[sec]) == kv
    RunConfig.from_file(tmp_path / "default.cfg")


def test_train_zero_episodes(tmp_path):
    cfg = write_cfg(tmp_path, episodes=0)
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--strategies", "maddpg,madqn"]) == 0
    assert (out / "checkpoints" / "maddpg.ckpt").is_file()
    assert (out / "checkpoints" / "madqn.ckpt").is_file()
    assert (out / "logs" / "maddpg_train.csv").read_text() == "episode\n"
    manifest = (out / "manifest_train.cfg").read_text()
    assert "[manifest]" in manifest and "data_sha256" in manifest


def test_missing_data_file_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o"), "--data", str(tmp_path / "gone.csv")])
    assert code == 2
    assert "gone.csv" in capsys.readouterr().err


def test_unknown_strategy_and_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(write_cfg(tmp_path, extra="[env]\nbogus = 1\n"))
    assert main(["train", "--config", str(write_cfg(tmp_path)), "--strategies", "ppo"]) == 2


def test_full_pipeline_is_reproducible(tmp_path):
    cfg = write_cfg(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
        assert main(["backtest", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert any(f.name == "metrics.csv" for f in files)
    for f in files:
        if f.suffix == ".cfg":
            # manifests differ only in the output directory they record
            a = (outs[0] / f).read_text().replace(str(outs[0]), "X")
            b = (outs[1] / f).read_text().replace(str(outs[1]), "X")
            assert a == b
        else:
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    with (outs[0] / "report" / "metrics.csv").open() as fh:
        assert [r["strategy"] for r in csv.DictReader(fh)] == list(STRATEGIES)


def test_manifest_replays_the_run(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "a"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--strategies", "cppi-maddpg"]) == 0
    replay = tmp_path / "b"
    assert main(["train", "--config", str(out / "manifest_train.cfg"), "--out", str(replay)]) == 0
    assert (out / "logs" / "cppi-maddpg_train.csv").read_bytes() == \
        (replay / "logs" / "cppi-maddpg_train.csv").read_bytes()
    assert (out / "checkpoints" / "cppi-maddpg.ckpt").read_bytes() == \
        (replay / "checkpoints" / "cppi-maddpg.ckpt").read_bytes()


def test_buyhold_cash_has_no_return_or_drawdown(tmp_path):
    cfg = write_cfg(tmp_path)
    cfg.write_text(cfg.read_text().replace("up_resolution = 11", "up_resolution = 11\nbuyhold_weights = cash"))
    out = tmp_path / "o"
    assert main(["backtest", "--config", str(cfg), "--out", str(out), "--strategies", "buyhold"]) == 0
    with (out / "report" / "metrics.csv").open() as fh:
        row = next(csv.DictReader(fh))
    assert float(row["AR"]) == 0 and float(row["MaxD"]) == 0


def test_backtest_dimension_mismatch_exits_2(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--strategies", "maddpg"]) == 0
    cfg.write_text(cfg.read_text().replace("n_assets = 2", "n_assets = 3"))
    assert main(["backtest", "--config", str(cfg), "--out", str(out), "--strategies", "maddpg"]) == 2


def test_backtest_without_checkpoint_exits_2(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "o"), "--strategies", "maddpg"]) == 2


def test_compare_ranks_reports(tmp_path, capsys):
    for name, rows in (("a", [("maddpg", 0.0822, 1.5, 0.1226)]), ("b", [("tipp-maddpg", 0.0968, 1.9, 0.0902)])):
        d = tmp_path / name
        d.mkdir()
        (d / "metrics.csv").write_text("strategy,AR,SR,MaxD,sparsity\n" +
                                       "".join(f"{s},{ar},{sr},{md},0.0\n" for s, ar, sr, md in rows))
    out = tmp_path / "cmp.csv"
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(out)]) == 0
    with out.open() as fh:
        best = {r["metric"]: r["strategy"] for r in csv.DictReader(fh) if r["best"] == "1"}
    assert best == {"AR": "tipp-maddpg", "SR": "tipp-maddpg", "MaxD": "tipp-maddpg"}


def test_compare_schema_mismatch_exits_2(tmp_path):
    (tmp_path / "m.csv").write_text("name,score\nx,1\n")
    assert main(["compare", str(tmp_path / "m.csv"), "--out", str(tmp_path / "c.csv")]) == 2


def test_csv_data_and_seed_override(tmp_path):
    from insured_marl.market_data import save_csv, synth_gbm
    save_csv(synth_gbm(2, 30, seed=9), tmp_path / "px.csv")
    cfg = write_cfg(tmp_path)
    out = tmp_path / "o"
    assert main(["backtest", "--config", str(cfg), "--out", str(out), "--data", str(tmp_path / "px.csv"),
                 "--seed", "11", "--strategies", "up,random"]) == 0
    manifest = (out / "manifest_backtest.cfg").read_text()
    assert "seed = 11" in manifest and "data_file_sha256" in manifest


def test_console_entry_point_runs(tmp_path):
    r = subprocess.run([sys.executable, "-m", "insured_marl", "init", "--out", str(tmp_path / "x.cfg")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and (tmp_path / "x.cfg").is_file()
