import json

import numpy as np
import pytest

from rulereg import modelio
from rulereg.methods import METHODS, RunConfig, fit

from conftest import random_data


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    return random_data(rng, n=60), random_data(rng, n=25)


@pytest.mark.parametrize("method", METHODS)
def test_round_trip_is_byte_identical(method, data, tmp_path):
    train, test = data
    model = fit(RunConfig(method, k_classes=(2, 3), folds=3), train)
    text = modelio.dumps(model)
    path = tmp_path / "m.json"
    modelio.save(model, path)
    loaded = modelio.load(path)
    assert modelio.dumps(loaded) == text
    assert np.array_equal(loaded.predict(test), model.predict(test))
    for i in range(test.n):
        assert loaded.predict_case(test.row(i)) == pytest.approx(model.predict_case(test.row(i)))
    assert loaded.summary().split()[:2] == model.summary().split()[:2]


def test_rejects_foreign_files():
    with pytest.raises(modelio.ModelFormatError):
        modelio.loads("not json")
    with pytest.raises(modelio.ModelFormatError):
        modelio.loads("[1, 2]")
    with pytest.raises(modelio.ModelFormatError):
        modelio.loads(json.dumps({"format": "other"}))
    with pytest.raises(modelio.ModelFormatError, match="version"):
        modelio.loads(json.dumps({"format": modelio.FORMAT, "version": 99}))


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "out.txt"
    modelio.atomic_write(p, "a")
    modelio.atomic_write(p, "b")
    assert p.read_text() == "b" and [f.name for f in tmp_path.iterdir()] == ["out.txt"]
