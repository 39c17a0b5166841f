"""Training loop, checkpoints, experiment plumbing, and the CLI."""

import numpy as np
import pytest
from click.testing import CliRunner

from commdet.checkpoint import save_checkpoint, load_checkpoint
from commdet.cli import main as cli_main
from commdet.experiments import (SweepSpec, make_detector, sweep, write_csv,
                                 read_csv, run_experiment)
from commdet.generators import SbmConfig, sample_sbm
from commdet.gnn import GnnConfig, GnnModel
from commdet.train import TrainingDiverged, train, evaluate


def tiny_dataset(count=6, n=40, seed=0):
    return [sample_sbm(SbmConfig(n, 2, 10.0, 1.0), seed=(seed, i))
            for i in range(count)]


def tiny_model(seed=0, classes=2, **kw):
    cfg = GnnConfig(depth=2, width=4, J=1, classes=classes, **kw)
    return GnnModel.init(cfg, seed=seed)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def test_train_empty_dataset_errors():
    with pytest.raises(ValueError):
        train(tiny_model(), [])


def test_train_deterministic_loss_curves():
    data = tiny_dataset()
    r1 = train(tiny_model(seed=1), data, epochs=2)
    r2 = train(tiny_model(seed=1), data, epochs=2)
    assert r1.losses == r2.losses
    assert r1.epoch_losses == r2.epoch_losses


def test_train_reduces_loss_on_easy_data():
    data = tiny_dataset(count=20, n=60)
    model = tiny_model(seed=2)
    run = train(model, data, epochs=8, cache_operators=True)
    assert run.epoch_losses[-1] < run.epoch_losses[0]
    assert evaluate(model, data) > 0.3


def test_train_generator_single_pass():
    def stream():
        for i in range(5):
            yield sample_sbm(SbmConfig(30, 2, 8.0, 1.0), seed=i)
    run = train(tiny_model(seed=3), stream(), epochs=10)
    assert len(run.epoch_losses) == 1  # generators are exhausted once
    assert len(run.losses) == 5


def test_train_divergence_diagnostics():
    model = tiny_model(seed=4)
    model.params["readout"][:] = np.inf
    with pytest.raises(TrainingDiverged) as err:
        train(model, tiny_dataset(count=1))
    assert "non-finite loss" in str(err.value)
    assert "readout" in str(err.value)


def test_train_checkpoints_best_validation(tmp_path):
    data = tiny_dataset(count=8, n=50)
    ckpt = tmp_path / "model.ckpt"
    model = tiny_model(seed=5)
    run = train(model, data, epochs=3, val_data=data[:3],
                checkpoint_path=ckpt)
    assert len(run.val_overlaps) == 3
    assert run.best_val_overlap == max(run.val_overlaps)
    assert ckpt.exists()
    loaded = GnnModel.load(ckpt)
    assert loaded.cfg == model.cfg


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

def test_checkpoint_bit_exact_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    arrays = {"a": rng.standard_normal((3, 4)).astype(np.float32),
              "b": rng.standard_normal((7,)).astype(np.float32)}
    path = tmp_path / "c.ckpt"
    save_checkpoint(path, arrays, meta={"note": 1})
    back, meta = load_checkpoint(path)
    assert meta == {"note": 1}
    for k in arrays:
        assert back[k].tobytes() == arrays[k].tobytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_checkpoint_rejects_future_version(tmp_path):
    import json
    import struct
    from commdet.checkpoint import MAGIC
    header = json.dumps({"format_version": 99, "meta": {}, "arrays": []})
    path = tmp_path / "future.ckpt"
    path.write_bytes(MAGIC + struct.pack("<I", len(header)) +
                     header.encode())
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_model_save_load_roundtrip(tmp_path):
    model = tiny_model(seed=7, classes=3)
    path = tmp_path / "m.ckpt"
    model.save(path)
    loaded = GnnModel.load(path)
    assert loaded.cfg == model.cfg
    for k, v in model.params.items():
        assert np.array_equal(loaded.params[k], v)


# ---------------------------------------------------------------------------
# sweeps and experiment plumbing
# ---------------------------------------------------------------------------

def test_sweep_single_point_row_counts(tmp_path):
    out = tmp_path / "sweep.csv"
    spec = SweepSpec(detectors=["bh_assoc", "pm"], snr_grid=[2.0],
                     graphs_per_point=1, n=100, d_avg=4.0, pm_layers=5,
                     seed=0, output=str(out))
    rows = sweep(spec)
    assert len(rows) == 2
    assert {r["detector"] for r in rows} == {"bh_assoc", "pm"}
    assert all(r["graphs"] == 1 for r in rows)


def test_sweep_below_threshold_near_chance():
    spec = SweepSpec(detectors=["bh_assoc", "laplacian_sym"], snr_grid=[0.5],
                     graphs_per_point=10, n=400, d_avg=4.0, seed=1)
    for row in sweep(spec):
        assert abs(row["mean_overlap"]) <= 0.1


def test_make_detector_unknown_and_missing_model():
    spec = SweepSpec(detectors=["bh_assoc"], snr_grid=[1.0])
    with pytest.raises(ValueError):
        make_detector("nonsense", spec)
    with pytest.raises(ValueError):
        make_detector("gnn", spec)


def test_csv_roundtrip(tmp_path):
    rows = [{"detector": "bh_assoc", "snr": 1.5, "mean_overlap": 0.42},
            {"detector": "pm", "snr": 1.5, "mean_overlap": 0.1}]
    path = tmp_path / "rows.csv"
    write_csv(path, rows)
    back = read_csv(path)
    assert len(back) == 2
    for orig, got in zip(rows, back):
        assert got["detector"] == orig["detector"]
        assert float(got["snr"]) == orig["snr"]
        assert float(got["mean_overlap"]) == orig["mean_overlap"]


def test_run_experiment_unknown_name(tmp_path):
    with pytest.raises(ValueError):
        run_experiment("nonsense", tmp_path)


def test_snap_experiment_missing_files_message(tmp_path):
    with pytest.raises(FileNotFoundError) as err:
        run_experiment("snap", tmp_path)
    assert "--snap-edges" in str(err.value)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_gen_train_eval_roundtrip(tmp_path):
    runner = CliRunner()
    data_dir = tmp_path / "data"
    res = runner.invoke(cli_main, [
        "gen", "--kind", "sbm", "--n", "40", "--k", "2", "--a", "10",
        "--b", "1", "--count", "4", "--out", str(data_dir), "--seed", "0"])
    assert res.exit_code == 0, res.output
    assert (data_dir / "manifest.csv").exists()

    ckpt = tmp_path / "model.ckpt"
    res = runner.invoke(cli_main, [
        "train", "--data", str(data_dir), "--depth", "2", "--width", "4",
        "--j", "1", "--epochs", "1", "--out", str(ckpt), "--seed", "0"])
    assert res.exit_code == 0, res.output
    assert ckpt.exists()

    res = runner.invoke(cli_main, [
        "eval", "--model", str(ckpt), "--data", str(data_dir)])
    assert res.exit_code == 0, res.output
    assert "mean overlap" in res.output


def test_cli_sweep_writes_csv(tmp_path):
    runner = CliRunner()
    out = tmp_path / "sweep.csv"
    res = runner.invoke(cli_main, [
        "sweep", "--detectors", "bh_assoc", "--snr-grid", "2.0",
        "--graphs-per-point", "2", "--n", "80", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["detector"] == "bh_assoc"


def test_cli_config_file_defaults(tmp_path):
    # data defaults come from the TOML section; explicit flags still win
    config = tmp_path / "conf.toml"
    data_dir = tmp_path / "data"
    config.write_text(
        '[data]\nkind = "sbm"\nn = 30\na = 9.0\nb = 1.0\ncount = 3\n')
    runner = CliRunner()
    res = runner.invoke(cli_main, [
        "--config", str(config), "gen", "--out", str(data_dir)])
    assert res.exit_code == 0, res.output
    rows = read_csv(data_dir / "manifest.csv")
    assert len(rows) == 3
    assert all(int(r["n"]) == 30 for r in rows)


def test_cli_snap_build(tmp_path):
    edges = tmp_path / "edges.txt"
    comms = tmp_path / "comms.txt"
    edges.write_text("".join(f"{i}\t{i + 1}\n" for i in range(9)) + "3\t6\n")
    comms.write_text("0\t1\t2\t3\t4\t5\n4\t5\t6\t7\t8\t9\n")
    out = tmp_path / "snapdata"
    runner = CliRunner()
    res = runner.invoke(cli_main, [
        "snap-build", "--edges", str(edges), "--communities", str(comms),
        "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "1 subgraphs" in res.output
    assert (out / "manifest.csv").exists()
