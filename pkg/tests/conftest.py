import sys
from pathlib import Path

import numpy as np
import pytest

from algoevolve.tsp import TspInstance, distance_matrix

TESTS_DIR = Path(__file__).parent
FAKE_GUEST = TESTS_DIR / "fake_guest.py"
GOLDEN_DIR = TESTS_DIR / "data" / "golden"


def instance_from_coords(coords, seed=999) -> TspInstance:
    coords = np.asarray(coords, dtype=float)
    return TspInstance(n=len(coords), coords=coords,
                       dist=distance_matrix(coords), seed=seed)


@pytest.fixture
def square_instance() -> TspInstance:
    # unit square labelled so the greedy tour from node 0 is 0-1-2-3
    return instance_from_coords([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])


@pytest.fixture
def fake_guest_cmd() -> tuple[str, ...]:
    return (sys.executable, str(FAKE_GUEST))


def scored_response(c1, c2, c3, c4, tau="inf", desc="Balance nearby cost against leaving remote nodes stranded."):
    return (f"Algorithm: {desc}\n"
            f"```\nscored c1={c1} c2={c2} c3={c3} c4={c4} tau={tau}\n```\n")


def greedy_response(desc="Always move to the closest unvisited node."):
    return f"Algorithm: {desc}\n```\ngreedy\n```\n"


GREEDY_SOURCE = """\
import numpy as np

def select_next_node(current_node, destination_node, unvisited_nodes, distance_matrix):
    distances = [distance_matrix[current_node][node] for node in unvisited_nodes]
    next_node = unvisited_nodes[int(np.argmin(distances))]
    return next_node
"""


def greedy_source_response():
    return ("Algorithm: Always move to the closest unvisited node until none "
            "are left.\n```python\n" + GREEDY_SOURCE + "```\n")
