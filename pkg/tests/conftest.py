import numpy as np
import pytest

from densample import Dataset, SplitSpec, benchmark_spec, generate, train_test_split


def make_dataset(features, target=None, **kwargs):
    features = np.asarray(features, dtype=np.float64)
    n, p = features.shape
    if target is None:
        target = np.zeros(n)
    defaults = dict(
        feature_names=tuple(f"x{j + 1}" for j in range(p)),
        row_ids=np.arange(n, dtype=np.int64),
    )
    defaults.update(kwargs)
    return Dataset(features=features, target=np.asarray(target, dtype=np.float64),
                   **defaults)


@pytest.fixture(scope="session")
def benchmark():
    """The fixed synthetic benchmark, generated once per test session."""
    return generate(benchmark_spec())


@pytest.fixture(scope="session")
def benchmark_split(benchmark):
    return train_test_split(benchmark.dataset, SplitSpec(test_fraction=0.2, seed=7))
