"""Stack-based DFS traversal driven by the decoder.

A rollout starts at the start node and visits every node exactly once.
At each step the unvisited neighbors of the current node are the
candidates; a node with two or more of them is remembered as a branch
point on a stack before moving on. When the current node has no
candidates left, the most recent branch point that still has unvisited
neighbors is popped and the walk resumes from it (branch points with
nothing left are discarded). Backtracking makes no policy decision, so
it contributes neither reward nor log-probability terms.

Each visited node v is scored by aggregating the node weights along its
DFS-tree path from the start (its parent chain); the rollout reward sums
those per-node scores (or, in literal mode, just the weights of the
selected nodes).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .graphgen import WeightedGraph
from .model import ModelParams, candidate_probs, decoder_scores, encode
from .numcore import Tape, Tensor

AGGREGATORS = ("product", "sum")
REWARD_MODES = ("per_node_path_scores", "literal_weight_sum")


@dataclass(frozen=True)
class ScoreConfig:
    aggregator: str = "product"
    reward_mode: str = "per_node_path_scores"

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ValidationError(f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        if self.reward_mode not in REWARD_MODES:
            raise ValidationError(
                f"reward_mode must be one of {REWARD_MODES}, got {self.reward_mode!r}"
            )


@dataclass(frozen=True)
class TraceRow:
    """One selection step: the state right after the move."""

    step: int
    selected: int  # node the choice was made from
    neighbors: tuple[int, ...]  # unvisited neighbors it chose among
    next: int
    visited: tuple[int, ...]  # in visit order, including `next`
    stack: tuple[int, ...]  # branch points, oldest first


@dataclass
class RolloutResult:
    visit_order: list[int]
    dfs_parent: dict[int, int]
    step_log_probs: list[float]
    per_node_score: dict[int, float]
    reward: float
    branch_trace: list[TraceRow]
    # Present only for sampled rollouts on a live tape; lets the trainer
    # differentiate through the step probabilities.
    log_prob_tensors: list[Tensor] = field(default_factory=list)


def path_score(weights_along_path: Sequence[float], aggregator: str = "product") -> float:
    """Aggregate the node weights of one path into its score."""
    if len(weights_along_path) == 0:
        raise ValidationError("path_score needs a nonempty path")
    if aggregator == "product":
        out = 1.0
        for w in weights_along_path:
            out *= float(w)
        return out
    if aggregator == "sum":
        return float(sum(float(w) for w in weights_along_path))
    raise ValidationError(f"aggregator must be one of {AGGREGATORS}, got {aggregator!r}")


def greedy_choice(score_values: Mapping[int, float]) -> int:
    """Argmax over candidate scores; ties go to the lowest node index."""
    best_node = None
    best_score = None
    for node in sorted(score_values):
        s = float(score_values[node])
        if best_score is None or s > best_score:
            best_node, best_score = node, s
    return best_node


def _sample_choice(prob_values: Mapping[int, float], rng: np.random.Generator) -> int:
    r = float(rng.random())
    acc = 0.0
    nodes = sorted(prob_values)
    for node in nodes:
        acc += float(prob_values[node])
        if r < acc:
            return node
    return nodes[-1]  # guard against accumulated rounding


def decode_all(
    graph: WeightedGraph,
    params: ModelParams,
    start: int,
    mode: str = "sample",
    temperature: float = 1.0,
    rng: np.random.Generator | None = None,
    score_config: ScoreConfig = ScoreConfig(),
    tape: Tape | None = None,
    force_actions: Iterable[int] | None = None,
) -> RolloutResult:
    """Run one full traversal and score it.

    ``mode="sample"`` draws each move from the candidate probabilities
    (recording its log probability); ``mode="greedy"`` takes the
    highest-scoring candidate with lowest-index tie-break and records no
    log probabilities. ``force_actions`` replays a fixed move sequence
    under sample-mode probabilities, which keeps the log-probability
    terms differentiable for a pinned trajectory.
    """
    n = graph.num_nodes
    if not (0 <= start < n):
        raise ValidationError(f"start {start} out of range for {n} nodes")
    if mode not in ("sample", "greedy"):
        raise ValidationError(f"mode must be 'sample' or 'greedy', got {mode!r}")
    forced = None
    if force_actions is not None:
        if mode != "sample":
            raise ValidationError("force_actions requires mode='sample'")
        forced = list(int(a) for a in force_actions)
    elif mode == "sample" and rng is None:
        raise ValidationError("sample mode needs an rng")

    tape = tape if tape is not None else Tape()
    emb = encode(graph, params.encoder, tape)
    weights = graph.node_weights

    current = start
    visit_order = [start]
    visited = {start}
    stack: list[int] = []
    parents: dict[int, int] = {}
    node_scores = {start: path_score([weights[start]], score_config.aggregator)}
    log_probs: list[float] = []
    log_prob_tensors: list[Tensor] = []
    trace: list[TraceRow] = []
    selected_weight_sum = 0.0
    step = 0

    while len(visit_order) < n:
        candidates = [j for j in graph.neighbors[current] if j not in visited]
        if not candidates:
            while stack:
                node = stack.pop()
                if any(j not in visited for j in graph.neighbors[node]):
                    current = node
                    break
            else:
                raise ValidationError(
                    f"rollout stuck at node {current} with {n - len(visit_order)} nodes "
                    "unvisited; graph violates the connectivity invariant"
                )
            continue

        if len(candidates) >= 2:
            stack.append(current)

        scores = decoder_scores(emb, current, candidates, params.decoder, tape)
        if mode == "greedy":
            nxt = greedy_choice({c: s.item() for c, s in scores.items()})
        else:
            probs = candidate_probs(scores, temperature, tape)
            if forced is not None:
                if step >= len(forced):
                    raise ValidationError("force_actions ran out before the rollout finished")
                nxt = forced[step]
                if nxt not in probs:
                    raise ValidationError(
                        f"forced action {nxt} is not a candidate at step {step} "
                        f"(candidates: {sorted(probs)})"
                    )
            else:
                nxt = _sample_choice({c: p.item() for c, p in probs.items()}, rng)
            log_t = tape.log(probs[nxt])
            log_probs.append(log_t.item())
            log_prob_tensors.append(log_t)

        parents[nxt] = current
        visited.add(nxt)
        visit_order.append(nxt)
        if score_config.aggregator == "product":
            node_scores[nxt] = node_scores[current] * float(weights[nxt])
        else:
            node_scores[nxt] = node_scores[current] + float(weights[nxt])
        selected_weight_sum += float(weights[nxt])
        step += 1
        trace.append(
            TraceRow(
                step=step,
                selected=current,
                neighbors=tuple(candidates),
                next=nxt,
                visited=tuple(visit_order),
                stack=tuple(stack),
            )
        )
        current = nxt

    if forced is not None and step != len(forced):
        raise ValidationError(
            f"force_actions has {len(forced)} moves but the rollout made {step}"
        )

    if score_config.reward_mode == "per_node_path_scores":
        reward = float(sum(node_scores.values()))
    else:
        reward = selected_weight_sum

    return RolloutResult(
        visit_order=visit_order,
        dfs_parent=parents,
        step_log_probs=log_probs,
        per_node_score=node_scores,
        reward=reward,
        branch_trace=trace,
        log_prob_tensors=log_prob_tensors,
    )


def greedy_reward(
    graph: WeightedGraph,
    params: ModelParams,
    start: int,
    score_config: ScoreConfig = ScoreConfig(),
) -> float:
    """Reward of the deterministic greedy traversal."""
    return decode_all(graph, params, start, mode="greedy", score_config=score_config).reward


def trace_to_csv(result: RolloutResult) -> str:
    """Render the branch trace as CSV; node lists are space-joined."""
    out = io.StringIO()
    out.write("step,selected,neighbors,next,visited,stack\n")
    for row in result.branch_trace:
        neighbors = " ".join(str(x) for x in row.neighbors)
        visited = " ".join(str(x) for x in row.visited)
        stack = " ".join(str(x) for x in row.stack)
        out.write(f"{row.step},{row.selected},{neighbors},{row.next},{visited},{stack}\n")
    return out.getvalue()
