import csv

import numpy as np
import pytest

from rulereg.cli import main, parse_k_range


def write_csv(path, n=40, seed=0, target=True):
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "c"] + (["y"] if target else []))
        for _ in range(n):
            a, b = rng.integers(0, 10), rng.integers(0, 10)
            c = rng.choice(["red", "blue"])
            y = 3 * (a > 4) + (c == "red") + rng.integers(0, 2)
            w.writerow([a, b, c] + ([y] if target else []))
    return path


@pytest.fixture
def files(tmp_path):
    return write_csv(tmp_path / "train.csv"), tmp_path


def test_parse_k_range():
    assert parse_k_range("5") == (5,)
    assert parse_k_range("2..4") == (2, 3, 4)
    assert parse_k_range("2,4") == (2, 4)
    for bad in ("x", "0", "4..2"):
        with pytest.raises(Exception):
            parse_k_range(bad)


def test_train_predict_show(files, capsys):
    train, tmp = files
    model = tmp / "m.json"
    assert main(["train", "--data", str(train), "--target", "y", "--method", "rule",
                 "--k-classes", "2..3", "--folds", "3", "--model", str(model)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("method=rule ")
    assert main(["predict", "--data", str(train), "--model", str(model)]) == 0
    preds = capsys.readouterr().out.split()
    assert len(preds) == 40
    nolabel = write_csv(tmp / "new.csv", n=5, seed=1, target=False)
    assert main(["predict", "--data", str(nolabel), "--model", str(model),
                 "--out", str(tmp / "p.txt")]) == 0
    assert len((tmp / "p.txt").read_text().split()) == 5
    assert main(["show", "--model", str(model)]) == 0
    assert "ELSE y =" in capsys.readouterr().out


def test_predict_names_missing_column(files, capsys):
    train, tmp = files
    model = tmp / "m.json"
    main(["train", "--data", str(train), "--target", "y", "--method", "tree", "--model", str(model)])
    bad = tmp / "bad.csv"
    bad.write_text("a,c\n1,red\n")
    capsys.readouterr()
    assert main(["predict", "--data", str(bad), "--model", str(model)]) == 1
    assert "'b' missing" in capsys.readouterr().err


def test_evaluate_and_compare(files, capsys):
    train, tmp = files
    for method in ("knn", "median-baseline"):
        assert main(["evaluate", "--data", str(train), "--target", "y", "--method", method,
                     "--folds", "5", "--out", str(tmp / f"{method}.csv")]) == 0
    text = capsys.readouterr().out
    assert "knn" in text and "median-baseline" in text
    assert main(["compare", str(tmp / "knn.csv"), str(tmp / "median-baseline.csv")]) == 0
    assert "significant" in capsys.readouterr().out
    main(["evaluate", "--data", str(train), "--target", "y", "--method", "knn", "--folds", "4",
          "--out", str(tmp / "other.csv")])
    capsys.readouterr()
    assert main(["compare", str(tmp / "knn.csv"), str(tmp / "other.csv")]) == 1
    assert "different protocols" in capsys.readouterr().err


def test_sweep(files, capsys):
    train, tmp = files
    assert main(["sweep", "--data", str(train), "--target", "y", "--k-classes", "2,3",
                 "--folds", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in lines[2:4]] == ["k=2", "k=3"]
    assert main(["sweep", "--data", str(train), "--target", "y", "--method", "knn"]) == 1


def test_errors_exit_nonzero(files, capsys):
    train, tmp = files
    assert main(["train", "--data", str(tmp / "nope.csv"), "--target", "y",
                 "--model", str(tmp / "m.json")]) == 1
    assert main(["train", "--data", str(train), "--target", "zzz",
                 "--model", str(tmp / "m.json")]) == 1
    assert main(["show", "--model", str(train)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", str(train), "--method", "bogus", "--model", "m"])
    assert exc.value.code == 2
    assert "error:" in capsys.readouterr().err


def test_benchmark_name_accepted(tmp_path, capsys):
    model = tmp_path / "m.json"
    assert main(["train", "--data", "cpu", "--method", "median-baseline", "--model", str(model)]) == 0
    assert "method=median-baseline" in capsys.readouterr().out
