"""Independent oracles and fixture builders shared by the tests.

The checkers here deliberately avoid the library's own computation
paths: finite differences instead of the tape, permutation enumeration
instead of the DFS search, inline weight aggregation instead of
path_score. They are the ground truth the implementation is judged
against, so keep them dumb.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from apgf.graphgen import WeightedGraph


def central_difference(f, arr: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of scalar f() w.r.t. arr, in place."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1.0) -> float:
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))


def permutation_best_score(graph: WeightedGraph, end: int, aggregator: str) -> float:
    """Max attack-path score start->end by brute permutation enumeration.

    Every ordering of every subset of intermediate nodes is generated and
    filtered for path validity. Exponential, fine for n <= 8.
    """
    start = graph.start_index
    weights = graph.node_weights
    adjacency = graph.adjacency

    def aggregate(path):
        if aggregator == "product":
            return math.prod(float(weights[v]) for v in path)
        return sum(float(weights[v]) for v in path)

    if end == start:
        return aggregate([start])
    others = [v for v in range(graph.num_nodes) if v != start and v != end]
    best = -math.inf
    for k in range(len(others) + 1):
        for middle in itertools.permutations(others, k):
            path = (start, *middle, end)
            if all(adjacency[path[i], path[i + 1]] for i in range(len(path) - 1)):
                best = max(best, aggregate(path))
    return best


def identity_model(score_clip: float = 10.0):
    """One-dimensional model whose embeddings equal the raw node weights.

    All encoder parameters are zero except a unit input lift, and both
    decoder projections are the 1x1 identity, so the decoder score for
    moving from i to j is clip * tanh(w_i * w_j): a heavier candidate
    always scores higher. Handy for rigging deterministic choices.
    """
    from apgf.model import init_params

    params = init_params(0, embed_dim=1, num_heads=1, ff_dim=1, score_clip=score_clip)
    for name, t in params.named_parameters():
        t.values = np.zeros_like(t.values)
    params.encoder.input_lift.values = np.array([[1.0]])
    params.decoder.query_proj.values = np.array([[1.0]])
    params.decoder.key_proj.values = np.array([[1.0]])
    return params


def build_graph(num_nodes, edges, weights, start=0) -> WeightedGraph:
    return WeightedGraph(
        num_nodes=num_nodes,
        edges=tuple(tuple(e) for e in edges),
        node_weights=np.asarray(weights, dtype=np.float64),
        start_index=start,
    )


def fig10_graph(weights=None, start=0) -> WeightedGraph:
    """The six-node example tree: a-b, a-c, c-d, c-e, d-f as 0..5."""
    if weights is None:
        weights = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
    return build_graph(6, [(0, 1), (0, 2), (2, 3), (2, 4), (3, 5)], weights, start=start)


def path_graph(weights, start=0) -> WeightedGraph:
    n = len(weights)
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], weights, start=start)


def star_graph(weights, center=0) -> WeightedGraph:
    n = len(weights)
    edges = [(center, i) for i in range(n) if i != center]
    return build_graph(n, edges, weights, start=center)
