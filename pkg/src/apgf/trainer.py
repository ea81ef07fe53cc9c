"""REINFORCE training loop with a frozen greedy-rollout baseline.

Each epoch samples one rollout per training graph from a random start
node, evaluates the same graph and start greedily with the frozen
baseline network, and minimizes

    loss = -(reward - baseline_reward) * sum(step log probs)

averaged over the epoch's graphs, with one Adam step on the average.
The baseline network is never touched by gradients; every
``baseline_sync_period`` epochs it is overwritten with a copy of the
policy. Runs are bit-reproducible from the config seed.
"""

from __future__ import annotations

import io
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .graphgen import WeightedGraph, generate_random_graph
from .model import ModelParams, copy_params, init_params, save_checkpoint
from .numcore import AdamState, Tape, Tensor, adam_step, clear_grads
from .oracle import ComparisonReport, DEFAULT_NODE_CAP, brute_force_scores, compare
from .rollout import ScoreConfig, decode_all

DATASET_MODES = ("fixed", "resampled")


@dataclass
class TrainConfig:
    epochs: int = 100
    graphs_per_epoch: int = 16
    num_nodes: int = 20
    num_edges: int = 25
    learning_rate: float = 1e-3
    baseline_sync_period: int = 10
    temperature: float = 1.0
    seed: int = 0
    score_config: ScoreConfig = field(default_factory=ScoreConfig)
    dataset_mode: str = "fixed"
    embed_dim: int = 64
    num_heads: int = 4
    ff_dim: int = 128
    score_clip: float = 10.0

    def validate(self) -> None:
        problems = []
        if self.epochs < 0:
            problems.append(f"epochs must be >= 0, got {self.epochs}")
        for name in ("graphs_per_epoch", "num_nodes", "embed_dim", "num_heads", "ff_dim"):
            value = getattr(self, name)
            if value <= 0:
                problems.append(f"{name} must be positive, got {value}")
        if self.num_edges < self.num_nodes - 1:
            problems.append(
                f"num_edges must be >= num_nodes - 1, got {self.num_edges} for {self.num_nodes} nodes"
            )
        if self.learning_rate <= 0:
            problems.append(f"learning_rate must be positive, got {self.learning_rate}")
        if self.baseline_sync_period < 1:
            problems.append(f"baseline_sync_period must be >= 1, got {self.baseline_sync_period}")
        if self.temperature <= 0:
            problems.append(f"temperature must be positive, got {self.temperature}")
        if self.dataset_mode not in DATASET_MODES:
            problems.append(f"dataset_mode must be one of {DATASET_MODES}, got {self.dataset_mode!r}")
        if self.embed_dim % self.num_heads != 0:
            problems.append(
                f"embed_dim {self.embed_dim} must be divisible by num_heads {self.num_heads}"
            )
        if self.score_clip <= 0:
            problems.append(f"score_clip must be positive, got {self.score_clip}")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    mean_reward: float
    baseline_mean_reward: float
    wall_clock_seconds: float
    synced_baseline: bool


def reinforce_loss(
    reward: float,
    baseline_reward: float,
    log_prob_tensors: Sequence[Tensor],
    tape: Tape,
) -> Tensor:
    """loss = -(reward - baseline_reward) * sum(log probs).

    Reward and baseline enter as constants; the gradient flows only
    through the log-probability terms.
    """
    advantage = float(reward) - float(baseline_reward)
    if not log_prob_tensors:
        if advantage != 0.0:
            warnings.warn(
                "rollout made no choices but has nonzero advantage; loss forced to 0",
                stacklevel=2,
            )
        return Tensor(np.zeros(1))
    total = tape.sum(tape.concat(list(log_prob_tensors), axis=0))
    return tape.reshape(tape.mul_scalar(total, -advantage), (1,))


def _training_graphs(config: TrainConfig, rng: np.random.Generator) -> list[WeightedGraph]:
    return [
        generate_random_graph(
            config.num_nodes, config.num_edges, seed=int(rng.integers(2**63))
        )
        for _ in range(config.graphs_per_epoch)
    ]


def train(
    config: TrainConfig,
    out_dir: str | Path | None = None,
) -> tuple[ModelParams, list[EpochMetrics]]:
    """Run the full training loop; returns the policy and per-epoch metrics.

    With ``out_dir`` set, a checkpoint is written at every baseline sync
    and at the end, alongside ``metrics.csv`` and ``timings.csv``.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    policy = init_params(
        seed=int(rng.integers(2**63)),
        embed_dim=config.embed_dim,
        num_heads=config.num_heads,
        ff_dim=config.ff_dim,
        score_clip=config.score_clip,
    )
    baseline = copy_params(policy, requires_grad=False)
    params = policy.param_dict()
    adam = AdamState(learning_rate=config.learning_rate)

    graphs = _training_graphs(config, rng)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    metrics: list[EpochMetrics] = []
    n = config.graphs_per_epoch
    train_started = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        epoch_started = time.perf_counter()
        if config.dataset_mode == "resampled":
            graphs = _training_graphs(config, rng)

        tape = Tape()
        losses = []
        rewards = []
        baseline_rewards = []
        try:
            for graph in graphs:
                start = int(rng.integers(graph.num_nodes))
                sampled = decode_all(
                    graph,
                    policy,
                    start,
                    mode="sample",
                    temperature=config.temperature,
                    rng=rng,
                    score_config=config.score_config,
                    tape=tape,
                )
                reference = decode_all(
                    graph, baseline, start, mode="greedy", score_config=config.score_config
                )
                losses.append(
                    reinforce_loss(sampled.reward, reference.reward, sampled.log_prob_tensors, tape)
                )
                rewards.append(sampled.reward)
                baseline_rewards.append(reference.reward)

            mean_loss_t = tape.mean(tape.concat(losses, axis=0))
            tape.backward(mean_loss_t)
            grads = {
                name: (p.grad if p.grad is not None else np.zeros_like(p.values))
                for name, p in params.items()
            }
            adam_step(params, grads, adam)
            clear_grads(params)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc

        synced = epoch % config.baseline_sync_period == 0
        if synced:
            baseline = copy_params(policy, requires_grad=False)
            if out_path is not None:
                save_checkpoint(policy, out_path / f"checkpoint_epoch_{epoch:04d}.json")

        metrics.append(
            EpochMetrics(
                epoch=epoch,
                mean_loss=mean_loss_t.item(),
                mean_reward=float(np.mean(rewards)),
                baseline_mean_reward=float(np.mean(baseline_rewards)),
                wall_clock_seconds=time.perf_counter() - epoch_started,
                synced_baseline=synced,
            )
        )

    total_seconds = time.perf_counter() - train_started
    if out_path is not None:
        save_checkpoint(policy, out_path / "checkpoint_final.json")
        (out_path / "metrics.csv").write_text(metrics_to_csv(metrics), encoding="utf-8")
        (out_path / "timings.csv").write_text(
            timings_to_csv(metrics, total_seconds), encoding="utf-8"
        )
    return policy, metrics


def metrics_to_csv(metrics: Sequence[EpochMetrics]) -> str:
    """Deterministic per-epoch metrics; timing lives in timings.csv so two
    identical seeded runs emit byte-identical files."""
    out = io.StringIO()
    out.write("epoch,mean_loss,mean_reward,baseline_mean_reward,synced_baseline\n")
    for m in metrics:
        out.write(
            f"{m.epoch},{m.mean_loss!r},{m.mean_reward!r},"
            f"{m.baseline_mean_reward!r},{int(m.synced_baseline)}\n"
        )
    return out.getvalue()


def timings_to_csv(metrics: Sequence[EpochMetrics], total_seconds: float) -> str:
    out = io.StringIO()
    out.write("epoch,wall_clock_seconds\n")
    for m in metrics:
        out.write(f"{m.epoch},{m.wall_clock_seconds!r}\n")
    out.write(f"total,{total_seconds!r}\n")
    return out.getvalue()


@dataclass
class EvalResult:
    graph_index: int
    greedy_reward: float
    report: ComparisonReport | None  # None when the graph exceeds the oracle cap


def evaluate(
    params: ModelParams,
    eval_graphs: Sequence[WeightedGraph],
    score_config: ScoreConfig = ScoreConfig(),
    node_cap: int = DEFAULT_NODE_CAP,
    with_oracle: bool = True,
) -> list[EvalResult]:
    """Greedy rewards on held-out graphs, each compared against the
    oracle when the graph is within the brute-force cap."""
    results = []
    for i, graph in enumerate(eval_graphs):
        rolled = decode_all(
            graph, params, graph.start_index, mode="greedy", score_config=score_config
        )
        report = None
        if with_oracle and graph.num_nodes <= node_cap:
            oracle_result = brute_force_scores(graph, score_config, node_cap=node_cap)
            report = compare(oracle_result, rolled)
        results.append(EvalResult(graph_index=i, greedy_reward=rolled.reward, report=report))
    return results
