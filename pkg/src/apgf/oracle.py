"""Exhaustive simple-path search: the ground truth the model is judged against.

For every end node, all simple paths from the start are enumerated by
recursive DFS and the best attack-path score is kept. Complexity is
factorial in the node count, which is exactly why the learned model
exists; a hard cap keeps accidental large runs from burning hours.
Memoization is deliberately absent: the best simple path does not
decompose over subpaths once the visited set matters.
"""

from __future__ import annotations

import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import CapExceededError, ValidationError
from .graphgen import WeightedGraph
from .rollout import RolloutResult, ScoreConfig

DEFAULT_NODE_CAP = 20


@dataclass
class EndNodeBest:
    score: float
    path: list[int]  # start ... end, simple
    explored_paths: int


@dataclass
class OracleResult:
    per_node: dict[int, EndNodeBest]
    explored_path_count: int
    wall_clock: float


@dataclass
class ComparisonRow:
    node: int
    oracle_score: float
    model_score: float
    ratio: float


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    mean_ratio: float
    max_abs_gap: float

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("node,oracle_score,model_score,ratio\n")
        for r in self.rows:
            out.write(f"{r.node},{r.oracle_score!r},{r.model_score!r},{r.ratio!r}\n")
        return out.getvalue()


def _best_for_end(graph: WeightedGraph, end: int, aggregator: str) -> EndNodeBest:
    weights = graph.node_weights
    start = graph.start_index
    product = aggregator == "product"

    best_score = -math.inf
    best_path: list[int] | None = None
    explored = 0
    path = [start]
    on_path = {start}

    def extend(node: int, score: float) -> None:
        nonlocal best_score, best_path, explored
        if node == end:
            explored += 1
            if score > best_score:
                best_score = score
                best_path = list(path)
            return
        for nb in graph.neighbors[node]:
            if nb in on_path:
                continue
            path.append(nb)
            on_path.add(nb)
            extend(nb, score * weights[nb] if product else score + weights[nb])
            path.pop()
            on_path.remove(nb)

    extend(start, float(weights[start]))
    assert best_path is not None  # connectivity guarantees at least one path
    return EndNodeBest(score=best_score, path=best_path, explored_paths=explored)


def worker_count() -> int:
    """Worker cap from APGF_THREADS; defaults to sequential."""
    raw = os.environ.get("APGF_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def brute_force_scores(
    graph: WeightedGraph,
    score_config: ScoreConfig = ScoreConfig(),
    node_cap: int = DEFAULT_NODE_CAP,
    max_workers: int | None = None,
) -> OracleResult:
    """Best attack-path score (and one achieving path) per end node.

    Refuses graphs above ``node_cap``; pass a higher cap explicitly to
    accept the factorial runtime. End nodes are independent, so they may
    be searched on worker threads without changing the result.
    """
    if graph.num_nodes > node_cap:
        raise CapExceededError(
            f"{graph.num_nodes} nodes exceeds the brute-force cap of {node_cap}; "
            "the search is factorial in the node count. Pass an explicit higher "
            "node_cap (CLI: --cap) to run anyway."
        )
    started = time.perf_counter()
    workers = max_workers if max_workers is not None else worker_count()
    nodes = list(range(graph.num_nodes))
    if workers > 1 and graph.num_nodes > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda e: _best_for_end(graph, e, score_config.aggregator), nodes))
        per_node = dict(zip(nodes, results))
    else:
        per_node = {e: _best_for_end(graph, e, score_config.aggregator) for e in nodes}
    wall = time.perf_counter() - started
    total = sum(b.explored_paths for b in per_node.values())
    return OracleResult(per_node=per_node, explored_path_count=total, wall_clock=wall)


def compare(oracle: OracleResult, rollout: RolloutResult) -> ComparisonReport:
    """Per-node model/oracle score pairs with ratios (0/0 counts as 1)."""
    oracle_nodes = set(oracle.per_node)
    model_nodes = set(rollout.per_node_score)
    if oracle_nodes != model_nodes:
        raise ValidationError(
            f"node sets differ: oracle-only {sorted(oracle_nodes - model_nodes)}, "
            f"model-only {sorted(model_nodes - oracle_nodes)}"
        )
    rows = []
    for node in sorted(oracle_nodes):
        o = float(oracle.per_node[node].score)
        m = float(rollout.per_node_score[node])
        if o == 0.0:
            if m == 0.0:
                ratio = 1.0
            else:
                raise ValidationError(
                    f"node {node}: oracle score 0 but model score {m!r} (dominance violated)"
                )
        else:
            ratio = m / o
        rows.append(ComparisonRow(node=node, oracle_score=o, model_score=m, ratio=ratio))
    mean_ratio = sum(r.ratio for r in rows) / len(rows)
    max_abs_gap = max(abs(r.oracle_score - r.model_score) for r in rows)
    return ComparisonReport(rows=rows, mean_ratio=mean_ratio, max_abs_gap=max_abs_gap)
