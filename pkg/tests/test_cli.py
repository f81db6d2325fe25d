import csv
import io
import json

import pytest

from dropoutts.cli import DEFAULTS, main

TINY = ["--T", "800", "--L", "24", "--H", "8", "--epochs", "2", "--hidden", "8"]


def _rows(path):
    return list(csv.reader(io.StringIO(path.read_bytes().decode("utf-8"))))


def _tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.is_file() and p.name != "timing.json"}


def test_synth_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--sigma", "0.5", "--seed", "7", "--out", str(a)]) == 0
    assert main(["synth", "--sigma", "0.5", "--seed", "7", "--out", str(b)]) == 0
    assert {"clean.csv", "noisy.csv", "mask.csv", "stats.json", "manifest.json"} <= set(_tree(a))
    assert _tree(a) == _tree(b)
    stats = json.loads((a / "stats.json").read_text())
    assert stats["schema"] == "dropoutts.synth/1" and len(stats["config_hash"]) == 16
    assert abs(stats["stats"]["snr_db"] - 12.39) <= 1.5


def test_synth_multiple_levels(tmp_path):
    assert main(["synth", "--sigma", "0.1", "--sigma", "0.9", "--T", "960", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sigma_0.1" / "noisy.csv").is_file()
    assert (tmp_path / "sigma_0.9" / "stats.json").is_file()


def test_bad_level_rejected(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["synth", "--sigma", "0.2", "--out", str(tmp_path)])
    assert e.value.code != 0
    assert "0.1, 0.3, 0.5, 0.7, 0.9" in capsys.readouterr().err


def test_config_level_rejected_before_compute(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sweep": {"levels": [0.2]}}))
    assert main(["paradox", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "sigma level 0.2" in capsys.readouterr().err
    assert not (tmp_path / "o" / "paradox.csv").exists()


@pytest.mark.parametrize("argv, needle", [
    (["train", "--mode", "fixed", "--p", "1.0"], "[0, 1)"),
    (["train", "--epochs", "-3"], "train.epochs"),
    (["train", "--L", "0"], "data.L"),
])
def test_out_of_domain_values(tmp_path, capsys, argv, needle):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert needle in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"epoch": 3}}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "train.epoch" in capsys.readouterr().err


def test_missing_data_dir(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path)]) == 2
    assert "noisy.csv" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"epochs": 1, "hidden": 4, "mode": "none"},
                               "data": {"T": 800, "L": 24, "H": 8}}))
    out = tmp_path / "r"
    assert main(["train", "--config", str(cfg), "--mode", "fixed", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["mode"] == "fixed"
    assert rep["config"]["train"]["hidden"] == 4 and rep["config"]["train"]["epochs"] == 1


def test_train_fixed_smoke(tmp_path):
    out = tmp_path / "r"
    assert main(["train", "--sigma", "0.5", "--mode", "fixed", "--p", "0.1", *TINY, "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema"] == "dropoutts.report/1" and rep["mode"] == "fixed"
    assert all(v == v and v < float("inf") for v in rep["train_loss"] + rep["val_loss"])
    assert rep["horizons"][0]["h"] == 8 and rep["target"] == "clean"
    assert (out / "model.bin").is_file() and (out / "timing.json").is_file()
    assert not (out / "rates.csv").exists()


def test_train_adaptive_params_move_and_rates_dumped(tmp_path):
    out = tmp_path / "r"
    assert main(["train", "--sigma", "0.5", "--mode", "adaptive", "--gamma", "1.0", *TINY,
                 "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    init = {"alpha": 10.0, "w_s": 1.0, "b_s": 0.0, "gamma": 1.0}
    final = rep["final_scorer_params"]
    assert any(final[k] != v for k, v in init.items())
    rows = _rows(out / "rates.csv")
    assert rows[0][:5] == ["epoch", "sample", "score", "s_hat", "p"]
    assert all(0.05 <= float(r[4]) <= 0.5 for r in rows[1:])


def test_train_seed_determinism(tmp_path):
    args = ["train", "--sigma", "0.3", "--mode", "adaptive", *TINY]
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        assert main(args + ["--seed", seed, "--out", str(tmp_path / name)]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    ra = (tmp_path / "a" / "report.json").read_bytes()
    rc = (tmp_path / "c" / "report.json").read_bytes()
    assert ra != rc


def test_train_from_synth_dir_and_eval(tmp_path):
    d = tmp_path / "d"
    assert main(["synth", "--sigma", "0.7", "--T", "800", "--out", str(d)]) == 0
    run = tmp_path / "run"
    assert main(["train", "--data", str(d), "--mode", "none", *TINY, "--out", str(run)]) == 0
    ev1, ev2 = tmp_path / "e1", tmp_path / "e2"
    assert main(["eval", "--run", str(run), "--data", str(d), "--out", str(ev1)]) == 0
    assert main(["eval", "--run", str(run), "--data", str(d), "--seed", "99", "--out", str(ev2)]) == 0
    e1 = json.loads((ev1 / "eval.json").read_text())
    rep = json.loads((run / "report.json").read_text())
    assert e1["splits"]["test"]["clean"]["mse"] == rep["horizons"][0]["mse"]
    assert (ev1 / "eval.json").read_bytes() == (ev2 / "eval.json").read_bytes()


def test_eval_needs_run(tmp_path):
    assert main(["eval", "--out", str(tmp_path)]) == 2


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("DROPOUTTS_OUT", str(tmp_path / "root"))
    assert main(["synth", "--sigma", "0.1", "--T", "960"]) == 0
    assert (tmp_path / "root" / "synth" / "noisy.csv").is_file()


def test_analyze_outputs(tmp_path):
    out = tmp_path / "an"
    assert main(["analyze", "--T", "4000", "--plot-data", "--out", str(out)]) == 0
    bench = _rows(out / "detrend_bench.csv")
    assert bench[0] == ["scenario", "strategy", "edge_mae", "config_hash"]
    assert len(bench) == 1 + 12
    sp = _rows(out / "sparsity.csv")[1:]
    for ch in {r[0] for r in sp}:
        mine = [r for r in sp if r[0] == ch]
        energies = [float(r[4]) for r in mine]
        assert energies == sorted(energies)
        assert all(-1 <= float(r[3]) <= 1 for r in mine)
    corr = json.loads((out / "correlation.json").read_text())
    assert corr["points"] == 7 and -1 <= corr["pearson_r"] <= 1
    spec = _rows(out / "spectrum.csv")
    assert spec[0][:5] == ["channel", "bin", "frequency", "amplitude", "mask"]


def test_analyze_user_csv(tmp_path):
    import numpy as np

    t = np.arange(2000)
    x = np.column_stack([np.sin(2 * np.pi * t / 50), np.cos(2 * np.pi * t / 24) + 0.001 * t])
    path = tmp_path / "user.csv"
    path.write_text("a,b\n" + "\n".join(f"{float(u)!r},{float(v)!r}" for u, v in x) + "\n")
    out = tmp_path / "an"
    assert main(["analyze", "--input", str(path), "--T", "2000", "--out", str(out)]) == 0
    prof = _rows(out / "profile.csv")
    assert prof[-1][0] == "input"
    corr = json.loads((out / "correlation.json").read_text())
    assert corr["points"] == 8


def test_ablate_full_row_and_repeatable(tmp_path):
    args = ["ablate", "--sigma", "0.5", "--seeds", "1", *TINY]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "ablation.csv").read_bytes() == (tmp_path / "b" / "ablation.csv").read_bytes()
    rows = _rows(tmp_path / "a" / "ablation.csv")
    full = [r for r in rows if r[0] == "full"][0]
    assert full[1:4] == ["global_ols", "1", "1"]
    assert len(rows) == 1 + 7


def test_paradox_shape(tmp_path):
    out = tmp_path / "p"
    assert main(["paradox", "--seeds", "1", *TINY, "--out", str(out)]) == 0
    rows = _rows(out / "paradox.csv")
    header = rows[0]
    means = [h for h in header if h.endswith("_mean")]
    assert means == ["fixed_0.05_mean", "fixed_0.1_mean", "fixed_0.3_mean", "fixed_0.5_mean", "adaptive_mean"]
    assert [float(r[0]) for r in rows[1:]] == [0.1, 0.3, 0.5, 0.7, 0.9]


def test_defaults_are_serialisable():
    json.dumps(DEFAULTS, sort_keys=True)
