import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from marginal_map import PairwiseModel


def two_node() -> PairwiseModel:
    """SUM node 0 joined to MAX node 1 by an identity coupling."""
    return PairwiseModel([2, 2], [[0.0, 0.0], [0.0, 0.0]], [(0, 1)], [[[1.0, 0.0], [0.0, 1.0]]], "SM")


def random_model(rng: np.random.Generator, n: int, cards, edges, partition, sigma: float = 1.0) -> PairwiseModel:
    nodes = [rng.normal(0, 0.5, size=cards[i]) for i in range(n)]
    tables = [rng.normal(0, sigma, size=(cards[i], cards[j])) for i, j in edges]
    return PairwiseModel(cards, nodes, edges, tables, partition)


def random_tree_edges(rng: np.random.Generator, n: int) -> list[tuple[int, int]]:
    return [(int(rng.integers(k)), k) for k in range(1, n)]


@pytest.fixture
def pair_model() -> PairwiseModel:
    return two_node()


LOG1PE = float(np.log1p(np.e))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
