import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rulereg.dataset import Dataset, Feature, FeatureSchema

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.load_profile("default")


def make_data(X, y, kinds=None, names=None, levels=None):
    """Dataset from a numeric matrix; categorical columns hold level codes."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    kinds = kinds or ["continuous"] * p
    names = names or [f"x{j}" for j in range(p)]
    schema = FeatureSchema(tuple(Feature(n, k) for n, k in zip(names, kinds)), "y")
    if levels is None:
        levels = tuple(
            tuple(f"v{i}" for i in range(int(X[:, j].max()) + 1)) if k == "categorical" else ()
            for j, k in enumerate(kinds)
        )
    return Dataset(schema, X, np.asarray(y, dtype=float), levels)


def random_data(rng, n=40, p=3, n_cat=1, n_levels=3, integer=True):
    """Small mixed dataset with ties in continuous columns and a noisy target."""
    cols, kinds = [], []
    for j in range(p):
        if j < n_cat:
            cols.append(rng.integers(0, n_levels, n))
            kinds.append("categorical")
        else:
            cols.append(rng.integers(0, 8, n) if integer else rng.normal(size=n))
            kinds.append("continuous")
    X = np.column_stack(cols).astype(float)
    y = rng.integers(0, 20, n).astype(float)
    return make_data(X, y, kinds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Log one acceptance line; the lines are repeated in the terminal summary."""
    def log(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE.append(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
