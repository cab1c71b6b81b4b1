"""Shared fixtures and small generators for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from msplab.matroids import GraphicMatroid, UniformMatroid, complete_graph_edges


@pytest.fixture
def k3():
    """Triangle with the edge listing e01, e12, e02 (ids 0, 1, 2)."""
    return GraphicMatroid(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def k4():
    return GraphicMatroid(4, complete_graph_edges(4))


def random_graphic(rng: random.Random, max_vertices=5, max_edges=8) -> GraphicMatroid:
    n = rng.randint(2, max_vertices)
    pool = complete_graph_edges(n)
    m = rng.randint(1, min(max_edges, len(pool)))
    return GraphicMatroid(n, rng.sample(pool, m))


def random_uniform(rng: random.Random, max_ground=8, max_k=4) -> UniformMatroid:
    n = rng.randint(1, max_ground)
    return UniformMatroid(n, rng.randint(0, max_k))


def random_weight_list(rng: random.Random, count: int, allow_ties=True) -> list[Fraction]:
    if allow_ties and rng.random() < 0.4:
        return [Fraction(rng.randint(0, 4)) for _ in range(count)]
    return [Fraction(rng.randint(1, 10 ** 6), rng.randint(1, 100)) for _ in range(count)]
