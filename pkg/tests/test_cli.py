import csv
import logging

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from convexfm import cli
from convexfm.cli import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, \
    main
from convexfm.data import movielens_to_dataset, parse_libfm
from convexfm.exceptions import NumericalError
from convexfm.model import CfmModel, load_model, save_model
from convexfm.sparse import LowRankFactors
from convexfm.train import TRACE_COLUMNS

RATINGS = "1\t10\t4\t0\n1\t20\t3\t0\n2\t10\t5\t0\n3\t30\t1\t0\n2\t30\t2\t0\n"


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    level = root.level
    yield
    if cli._handler is not None:
        root.removeHandler(cli._handler)
        cli._handler = None
    root.setLevel(level)


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "synth.libfm"
    assert main(["synth", "--d", "5", "--n", "40", "--seed", "1",
                 "--output", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def linear_model(tmp_path):
    path = tmp_path / "linear.npz"
    save_model(CfmModel([1.0, 2.0, -1.0], LowRankFactors.empty(2, 0.0),
                        0.0, 2), path)
    return path


def test_train_writes_model_and_trace(synth_file, tmp_path, capsys):
    model_path = tmp_path / "model.npz"
    trace_path = tmp_path / "trace.csv"
    status = main(["-q", "train", str(synth_file), "--eta", "10",
                   "--iters", "6", "--model", str(model_path),
                   "--trace", str(trace_path)])
    assert status == EXIT_OK
    assert capsys.readouterr().out.startswith("train_rmse\t")
    model = load_model(model_path)
    assert model.feature_dim == 5
    assert 1 <= model.rank <= 6
    with open(trace_path, newline="") as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == TRACE_COLUMNS
        rows = list(reader)
    assert [int(row["iter"]) for row in rows] == list(range(6))
    objective = np.array([float(row["objective"]) for row in rows])
    assert np.all(np.diff(objective) <= 1e-9 * objective[0])


def test_train_with_split_and_saved_test(synth_file, tmp_path, capsys):
    held_out = tmp_path / "test.libfm"
    status = main(["-q", "train", str(synth_file), "--eta", "10",
                   "--iters", "3", "--split", "0.75",
                   "--save-test", str(held_out)])
    assert status == EXIT_OK
    assert "\ttest_rmse\t" in capsys.readouterr().out
    assert parse_libfm(held_out).n == 10


def test_ridge_repeats(synth_file, capsys):
    status = main(["-q", "train", str(synth_file), "--ridge", "--split",
                   "0.5", "--repeats", "3", "--seed", "4"])
    assert status == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[1] for line in lines[:3]] == ["4", "5", "6"]
    assert lines[3].startswith("mean_test_rmse\t")
    assert "\tstderr\t" in lines[3]


def test_repeats_need_a_split(synth_file, capsys):
    assert main(["train", str(synth_file), "--ridge", "--repeats", "3"]) \
        == EXIT_USAGE
    assert "--split" in capsys.readouterr().err


def test_missing_input(tmp_path, capsys):
    missing = tmp_path / "nope.libfm"
    status = main(["train", str(missing), "--eta", "1"])
    assert status == EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_missing_eta(synth_file, capsys):
    assert main(["train", str(synth_file)]) == EXIT_USAGE
    assert "--eta" in capsys.readouterr().err


def test_bad_arguments(synth_file, tmp_path):
    assert main(["fit"]) == EXIT_USAGE
    assert main(["train", str(synth_file), "--eta", "-1"]) == EXIT_USAGE
    assert main(["train", str(synth_file), "--ridge", "--repeats", "2",
                 "--test", str(synth_file)]) == EXIT_USAGE


def test_malformed_data(tmp_path, capsys):
    path = tmp_path / "bad.libfm"
    path.write_text("1 0:1\n1 0:x\n")
    assert main(["train", str(path), "--eta", "1"]) == EXIT_DATA
    assert f"{path}:2:" in capsys.readouterr().err


def test_numerical_failure(synth_file, monkeypatch, capsys):
    def diverge(train, config, test=None):
        raise NumericalError("non-finite residual",
                             diagnostics={"iter": 3})
    monkeypatch.setattr("convexfm.cli.hazan_fit", diverge)
    assert main(["train", str(synth_file), "--eta", "1"]) \
        == EXIT_NUMERICAL
    assert "'iter': 3" in capsys.readouterr().err


def test_convert_matches_direct_encoding(tmp_path):
    raw = tmp_path / "u.data"
    raw.write_text(RATINGS)
    out = tmp_path / "ratings.libfm"
    assert main(["convert", str(raw), "--output", str(out)]) == EXIT_OK
    converted = parse_libfm(out)
    direct = movielens_to_dataset(raw)
    assert converted.block_layout == direct.block_layout
    assert_array_equal(converted.y, direct.y)
    assert_array_equal(converted.X.toarray(), direct.X.toarray())


def test_synth_is_deterministic(tmp_path):
    paths = [tmp_path / "a.libfm", tmp_path / "b.libfm"]
    for path in paths:
        assert main(["synth", "--d", "4", "--n", "10", "--seed", "7",
                     "--output", str(path)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_predict_and_evaluate(linear_model, tmp_path, capsys):
    data = tmp_path / "data.libfm"
    data.write_text("2 0:1 1:1\n5 0:2\n")
    out = tmp_path / "predictions.txt"
    assert main(["predict", str(linear_model), str(data), "--output",
                 str(out)]) == EXIT_OK
    assert out.read_text().split() == ["2.0", "5.0"]
    assert main(["predict", str(linear_model), str(data)]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["2.0", "5.0"]
    assert main(["evaluate", str(linear_model), str(data)]) == EXIT_OK
    assert capsys.readouterr().out == "rmse\t0.000000\n"


def test_predict_rejects_garbage_model(tmp_path, capsys):
    model = tmp_path / "model.npz"
    model.write_text("not a model")
    data = tmp_path / "data.libfm"
    data.write_text("1 0:1\n")
    assert main(["predict", str(model), str(data)]) == EXIT_DATA
