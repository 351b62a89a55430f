import numpy as np
import pytest

from superseg import (AdjacencyGraph, GraphConfig, build_knn_graph,
                      canonical_edges, load_scene_spec, synth_scene)
from superseg.synth import scale_for_total

SCENE_DIR = None  # resolved lazily from the installed package


def bundled_scene(name):
    from superseg import cli
    return load_scene_spec(cli._resolve_scene(name))


@pytest.fixture(scope="session")
def rooms_cloud():
    """Small instance of the bundled room scene (about 20k points)."""
    spec = bundled_scene("rooms")
    return synth_scene(7, spec, density_scale=scale_for_total(spec, 20000))


@pytest.fixture(scope="session")
def rooms_graph(rooms_cloud):
    return build_knn_graph(rooms_cloud, GraphConfig(k=8))


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def make_graph(n, pairs, weights=None):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if weights is None:
        weights = np.ones(len(pairs))
    edges, w = canonical_edges(n, pairs, np.asarray(weights, dtype=float))
    return AdjacencyGraph(n, edges, w)


@pytest.fixture
def graph_factory():
    return make_graph
