import numpy as np
import pytest

from labelflip.dataset import LabeledDataset, SplitSpec, generate_synthetic, split

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synthetic():
    return generate_synthetic(n_per_class=150, d=12, separation=3.0, seed=11)


@pytest.fixture(scope="session")
def synthetic_split(synthetic):
    return split(synthetic, SplitSpec(0.6, 0.2, seed=3))


def make_dataset(rows, labels, names=None):
    rows = np.asarray(rows, dtype=float)
    if names is None:
        names = [f"f{j}" for j in range(rows.shape[1])]
    return LabeledDataset(tuple(names), rows, np.asarray(labels))
