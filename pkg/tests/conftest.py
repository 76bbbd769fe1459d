import numpy as np
import pytest

from waferscreen import DataMatrix


@pytest.fixture
def small_matrix() -> DataMatrix:
    rng = np.random.default_rng(1234)
    return DataMatrix(
        values=rng.normal(size=(20, 4)),
        param_ids=("p1", "p2", "p3", "p4"),
        lot_ids=tuple(f"L{i:02d}" for i in range(20)),
    )


def make_matrix(values, param_prefix="p", lot_prefix="L") -> DataMatrix:
    values = np.asarray(values, dtype=np.float64)
    return DataMatrix(
        values=values,
        param_ids=tuple(f"{param_prefix}{j:03d}" for j in range(values.shape[1])),
        lot_ids=tuple(f"{lot_prefix}{i:04d}" for i in range(values.shape[0])),
    )
