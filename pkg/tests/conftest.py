import numpy as np
import pytest

from causaltext.evaluate import build_test_sets
from causaltext.graphs import gen_causal_graph, gen_relation_graph
from causaltext.scenarios import GraphIndex
from causaltext.templates import load_inventory

GRAPH_SEED = 42


@pytest.fixture(scope="session")
def graph_pair():
    rng = np.random.default_rng(GRAPH_SEED)
    gc = gen_causal_graph(100, rng, seed=GRAPH_SEED)
    gn = gen_relation_graph(gc, rng)
    return gc, gn


@pytest.fixture(scope="session")
def gc(graph_pair):
    return graph_pair[0]


@pytest.fixture(scope="session")
def gn(graph_pair):
    return graph_pair[1]


@pytest.fixture(scope="session")
def index(graph_pair):
    return GraphIndex(*graph_pair)


@pytest.fixture(scope="session")
def sets(gc):
    return build_test_sets(gc)


@pytest.fixture(scope="session")
def inventory():
    return load_inventory()
