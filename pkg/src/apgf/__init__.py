"""apgf: attack-path inference on weighted graphs.

A graph-attention encoder-decoder policy, trained with REINFORCE
against a frozen greedy baseline, learns to pick high-score attack
paths on random weighted graphs; an exhaustive brute-force oracle
provides the ground truth it is compared to.
"""

__version__ = "0.1.0"

from .errors import ApgfError, CapExceededError, GraphFormatError, NumericError, ValidationError
from .graphgen import WeightedGraph, generate_random_graph, load_graph, save_graph, to_adjacency_tensor
from .model import (
    DecoderParams,
    EncoderParams,
    ModelParams,
    NodeEmbeddings,
    candidate_probs,
    copy_params,
    decoder_scores,
    encode,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .numcore import AdamState, Tape, Tensor, adam_step, tensor
from .oracle import ComparisonReport, OracleResult, brute_force_scores, compare
from .rollout import RolloutResult, ScoreConfig, decode_all, greedy_reward, path_score
from .trainer import EpochMetrics, TrainConfig, evaluate, reinforce_loss, train

__all__ = [
    "ApgfError",
    "CapExceededError",
    "GraphFormatError",
    "NumericError",
    "ValidationError",
    "WeightedGraph",
    "generate_random_graph",
    "load_graph",
    "save_graph",
    "to_adjacency_tensor",
    "DecoderParams",
    "EncoderParams",
    "ModelParams",
    "NodeEmbeddings",
    "candidate_probs",
    "copy_params",
    "decoder_scores",
    "encode",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "tensor",
    "ComparisonReport",
    "OracleResult",
    "brute_force_scores",
    "compare",
    "RolloutResult",
    "ScoreConfig",
    "decode_all",
    "greedy_reward",
    "path_score",
    "EpochMetrics",
    "TrainConfig",
    "evaluate",
    "reinforce_loss",
    "train",
]
