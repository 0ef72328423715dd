import numpy as np
import pytest

from resamplekit import SampleSet, parse_system


@pytest.fixture(scope="session")
def two_of_three():
    """2-of-3 indicator system at level t=1."""
    return parse_system("ind(kofn(2; x1, x2, x3) > t)", params={"t": 1.0})


@pytest.fixture(scope="session")
def six_tree():
    """Six-element tree: parallel pair, series pair and a summed pair under a root min."""
    return parse_system("ind(min(max(x1, x2), min(x3, x4), sum(x5, x6)) < t)",
                        params={"t": 10.0})


@pytest.fixture()
def small_samples():
    """Fixed sizes-(3,3,3) samples straddling the t=1 level."""
    return SampleSet.from_samples([
        ("a", np.array([2.0, 0.5, 1.5])),
        ("b", np.array([0.3, 2.5, 0.8])),
        ("c", np.array([1.2, 0.1, 3.0])),
    ])
