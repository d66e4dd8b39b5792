import numpy as np
import pytest

from jointdiff.schema import OutcomeSchema, OutcomeSpec


@pytest.fixture
def bivariate_continuous_schema():
    return OutcomeSchema(
        (OutcomeSpec("y1", "continuous"), OutcomeSpec("y2", "continuous"))
    )


@pytest.fixture
def mixed_schema():
    return OutcomeSchema(
        (
            OutcomeSpec("size", "continuous"),
            OutcomeSpec("grade", "categorical", 3),
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
