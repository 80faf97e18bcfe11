import csv

import numpy as np
import pytest

from phm.cli import main
from phm.data import generate_shapes_dataset, save_dataset
from phm.image import load_ppm, save_ppm
from phm.matcher import load_params


@pytest.fixture
def distinct_ppm(tmp_path):
    rng = np.random.default_rng(0)
    x = np.stack([rng.permutation(256).reshape(16, 16) / 255 for _ in range(3)])
    path = tmp_path / "x.ppm"
    save_ppm(x, path)
    return path


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["bench", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    assert main(["equalize", str(tmp_path / "nope.ppm"), str(tmp_path / "o.ppm")]) == 2
    assert "nope.ppm" in capsys.readouterr().err


def test_hist_csv(tmp_path, distinct_ppm):
    out = tmp_path / "h.csv"
    assert main(["hist", str(distinct_ppm), "--csv", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["bin", "r", "g", "b"]
    assert len(rows) == 257
    assert all(r[1:] == ["1", "1", "1"] for r in rows[1:])


def test_hist_stdout(distinct_ppm, capsys):
    assert main(["hist", str(distinct_ppm)]) == 0
    assert capsys.readouterr().out.startswith("bin,r,g,b\n0,1,1,1\n")


def test_phm_apply_matches_equalize(tmp_path, distinct_ppm):
    params = tmp_path / "p.phm1"
    assert main(["phm-init", "--channels", "3", "--size", "2048", str(params)]) == 0
    assert load_params(params).params.shape == (3, 2048)
    assert main(["phm-apply", str(params), str(distinct_ppm), str(tmp_path / "y.ppm")]) == 0
    assert main(["equalize", str(distinct_ppm), str(tmp_path / "e.ppm")]) == 0
    y, e = load_ppm(tmp_path / "y.ppm"), load_ppm(tmp_path / "e.ppm")
    assert np.max(np.abs(y - e)) <= 2 / 255 + 1e-12


def test_phm_apply_channel_mismatch(tmp_path, distinct_ppm):
    params = tmp_path / "p.phm1"
    main(["phm-init", "--channels", "1", "--size", "8", str(params)])
    assert main(["phm-apply", str(params), str(distinct_ppm), str(tmp_path / "y.ppm")]) == 2


def test_match_to_self(tmp_path, distinct_ppm):
    out = tmp_path / "m.ppm"
    assert main(["match", str(distinct_ppm), str(distinct_ppm), str(out)]) == 0
    np.testing.assert_array_equal(load_ppm(out), load_ppm(distinct_ppm))


def test_gen_data_degrade_eval_round(tmp_path, capsys):
    data, fog = tmp_path / "data", tmp_path / "fog"
    assert main(["gen-data", "--out", str(data), "--per-class", "2", "--classes", "3", "--seed", "1"]) == 0
    assert len(list(data.glob("*/*.ppm"))) == 6
    assert main(["degrade", "--in", str(data), "--out", str(fog), "--kind", "fog", "--severity", "0.6"]) == 0
    f = sorted(fog.glob("*/*.ppm"))[0]
    assert load_ppm(f).min() >= 0.42 - 1 / 255

    run = tmp_path / "run"
    assert main(["train", "--data", str(data), "--epochs", "1", "--seed", "0", "--size", "16",
                 "--batch-size", "4", "--out-dir", str(run)]) == 0
    assert {p.name for p in run.iterdir()} == {"metrics.csv", "model.tcn1", "params.phm1"}
    capsys.readouterr()
    ev = tmp_path / "eval.csv"
    assert main(["eval", "--model", str(run / "model.tcn1"), "--params", str(run / "params.phm1"),
                 "--data", str(data), "--degrade", "fog:0.7", "--out", str(ev)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("top1=")
    top1 = float(out.strip().split("=")[1])
    rows = list(csv.reader(ev.open()))
    assert rows[0] == ["degrade", "n", "top1"]
    assert rows[1][:2] == ["fog:0.7", "6"] and float(rows[1][2]) == top1


def test_eval_empty_directory(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    model = tmp_path / "run"
    main(["train", "--data", "synthetic", "--per-class", "1", "--classes", "2", "--epochs", "1",
          "--size", "8", "--out-dir", str(model)])
    capsys.readouterr()
    code = main(["eval", "--model", str(model / "model.tcn1"), "--data", str(empty)])
    assert code != 0
    assert str(empty) in capsys.readouterr().err


def test_bad_degrade_flag(tmp_path):
    assert main(["eval", "--model", "m", "--data", "d", "--degrade", "rain:0.5"]) == 1


def test_bench_output(capsys):
    assert main(["bench", "--image", "32x24", "--iters", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in lines] == ["phm_forward", "equalize", "match"]
    assert all("mean_ms=" in ln and "min_ms=" in ln for ln in lines)


def test_train_same_flags_same_files(tmp_path):
    data = tmp_path / "d"
    save_dataset(generate_shapes_dataset(2, 3, seed=0), data)
    for name in ("a", "b"):
        assert main(["train", "--data", str(data), "--epochs", "2", "--seed", "3", "--size", "32",
                     "--batch-size", "4", "--out-dir", str(tmp_path / name)]) == 0
    for f in ("metrics.csv", "model.tcn1", "params.phm1"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
