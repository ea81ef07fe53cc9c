"""Graph-attention encoder and next-node decoder.

The encoder lifts each node's scalar weight into an embedding, runs two
multi-head attention layers over graph neighborhoods (self-loop
included, residual connection per layer), then one feedforward layer
with a second residual. The decoder scores a candidate next node j from
the current node i as

    score(j) = clip * tanh( (Q v_i) . (K v_j) / sqrt(embed_dim) )

so every score lands in [-clip, +clip]; a temperature softmax turns the
scores of the unvisited neighbors into move probabilities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import ValidationError
from .graphgen import WeightedGraph
from .numcore import Tape, Tensor, tensor

CHECKPOINT_VERSION = 1

LEAKY_SLOPE = 0.2  # standard GAT negative slope


@dataclass
class HeadParams:
    weight: Tensor  # [embed_dim, head_dim]
    attn: Tensor  # [2*head_dim, 1]; first half scores the source, second the target


@dataclass
class AttentionLayerParams:
    heads: list[HeadParams]


@dataclass
class EncoderParams:
    input_lift: Tensor  # [1, embed_dim]
    layers: list[AttentionLayerParams]
    ff_in_weight: Tensor  # [embed_dim, ff_dim]
    ff_in_bias: Tensor  # [1, ff_dim]
    ff_out_weight: Tensor  # [ff_dim, embed_dim]
    ff_out_bias: Tensor  # [1, embed_dim]


@dataclass
class DecoderParams:
    query_proj: Tensor  # [embed_dim, embed_dim]
    key_proj: Tensor  # [embed_dim, embed_dim]
    score_clip: float
    embed_dim: int

    def __post_init__(self):
        if self.score_clip <= 0:
            raise ValidationError("score_clip must be positive")


@dataclass
class NodeEmbeddings:
    vectors: Tensor  # [num_nodes, embed_dim], one row per node


@dataclass
class ModelParams:
    encoder: EncoderParams
    decoder: DecoderParams

    @property
    def embed_dim(self) -> int:
        return self.decoder.embed_dim

    @property
    def num_heads(self) -> int:
        return len(self.encoder.layers[0].heads)

    @property
    def ff_dim(self) -> int:
        return self.encoder.ff_in_weight.shape[1]

    @property
    def score_clip(self) -> float:
        return self.decoder.score_clip

    def hyper(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "num_heads": self.num_heads,
            "ff_dim": self.ff_dim,
            "score_clip": self.score_clip,
        }

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield "encoder.input_lift", self.encoder.input_lift
        for li, layer in enumerate(self.encoder.layers):
            for hi, head in enumerate(layer.heads):
                yield f"encoder.layer{li}.head{hi}.weight", head.weight
                yield f"encoder.layer{li}.head{hi}.attn", head.attn
        yield "encoder.ff_in_weight", self.encoder.ff_in_weight
        yield "encoder.ff_in_bias", self.encoder.ff_in_bias
        yield "encoder.ff_out_weight", self.encoder.ff_out_weight
        yield "encoder.ff_out_bias", self.encoder.ff_out_bias
        yield "decoder.query_proj", self.decoder.query_proj
        yield "decoder.key_proj", self.decoder.key_proj

    def param_dict(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())


def _expected_shapes(embed_dim: int, num_heads: int, ff_dim: int) -> dict[str, tuple[int, ...]]:
    head_dim = embed_dim // num_heads
    shapes: dict[str, tuple[int, ...]] = {"encoder.input_lift": (1, embed_dim)}
    for li in range(2):
        for hi in range(num_heads):
            shapes[f"encoder.layer{li}.head{hi}.weight"] = (embed_dim, head_dim)
            shapes[f"encoder.layer{li}.head{hi}.attn"] = (2 * head_dim, 1)
    shapes["encoder.ff_in_weight"] = (embed_dim, ff_dim)
    shapes["encoder.ff_in_bias"] = (1, ff_dim)
    shapes["encoder.ff_out_weight"] = (ff_dim, embed_dim)
    shapes["encoder.ff_out_bias"] = (1, embed_dim)
    shapes["decoder.query_proj"] = (embed_dim, embed_dim)
    shapes["decoder.key_proj"] = (embed_dim, embed_dim)
    return shapes


def init_params(
    seed: int,
    embed_dim: int = 64,
    num_heads: int = 4,
    ff_dim: int = 128,
    score_clip: float = 10.0,
) -> ModelParams:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    if embed_dim % num_heads != 0:
        raise ValidationError(f"embed_dim {embed_dim} not divisible by num_heads {num_heads}")
    rng = np.random.default_rng(seed)

    def u(shape: tuple[int, ...], fan_in: int) -> Tensor:
        bound = 1.0 / math.sqrt(fan_in)
        return tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    head_dim = embed_dim // num_heads
    input_lift = u((1, embed_dim), 1)
    layers = []
    for _ in range(2):
        heads = [
            HeadParams(weight=u((embed_dim, head_dim), embed_dim), attn=u((2 * head_dim, 1), 2 * head_dim))
            for _ in range(num_heads)
        ]
        layers.append(AttentionLayerParams(heads=heads))
    encoder = EncoderParams(
        input_lift=input_lift,
        layers=layers,
        ff_in_weight=u((embed_dim, ff_dim), embed_dim),
        ff_in_bias=u((1, ff_dim), embed_dim),
        ff_out_weight=u((ff_dim, embed_dim), ff_dim),
        ff_out_bias=u((1, embed_dim), ff_dim),
    )
    decoder = DecoderParams(
        query_proj=u((embed_dim, embed_dim), embed_dim),
        key_proj=u((embed_dim, embed_dim), embed_dim),
        score_clip=score_clip,
        embed_dim=embed_dim,
    )
    return ModelParams(encoder=encoder, decoder=decoder)


def copy_params(params: ModelParams, requires_grad: bool = False) -> ModelParams:
    """Deep copy, e.g. to freeze a baseline network."""

    def cp(t: Tensor) -> Tensor:
        return Tensor(t.values.copy(), requires_grad=requires_grad)

    encoder = EncoderParams(
        input_lift=cp(params.encoder.input_lift),
        layers=[
            AttentionLayerParams(heads=[HeadParams(cp(h.weight), cp(h.attn)) for h in layer.heads])
            for layer in params.encoder.layers
        ],
        ff_in_weight=cp(params.encoder.ff_in_weight),
        ff_in_bias=cp(params.encoder.ff_in_bias),
        ff_out_weight=cp(params.encoder.ff_out_weight),
        ff_out_bias=cp(params.encoder.ff_out_bias),
    )
    decoder = DecoderParams(
        query_proj=cp(params.decoder.query_proj),
        key_proj=cp(params.decoder.key_proj),
        score_clip=params.decoder.score_clip,
        embed_dim=params.decoder.embed_dim,
    )
    return ModelParams(encoder=encoder, decoder=decoder)


def encode(graph: WeightedGraph, params: EncoderParams, tape: Tape | None = None) -> NodeEmbeddings:
    """Embed every node of the graph.

    Per attention layer and head: score each neighborhood edge (self-loop
    included) with a LeakyReLU of the learned attention form, normalize
    with a masked softmax over the neighborhood, aggregate the projected
    features, concatenate heads, and add the residual. One feedforward
    layer with its own residual follows the second attention layer.
    """
    tape = tape if tape is not None else Tape()
    n = graph.num_nodes
    mask = graph.adjacency | np.eye(n, dtype=bool)

    weights_col = tensor(graph.node_weights.reshape(n, 1))
    h = tape.matmul(weights_col, params.input_lift)  # [n, embed_dim]

    for layer in params.layers:
        head_outputs = []
        for head in layer.heads:
            head_dim = head.weight.shape[1]
            projected = tape.matmul(h, head.weight)  # [n, head_dim]
            attn_src = tape.gather_rows(head.attn, range(head_dim))
            attn_dst = tape.gather_rows(head.attn, range(head_dim, 2 * head_dim))
            score_src = tape.matmul(projected, attn_src)  # [n, 1]
            score_dst = tape.matmul(projected, attn_dst)  # [n, 1]
            # pairwise scores: row i, column j = src score of i + dst score of j
            pair = tape.add(score_src, tape.transpose(score_dst))
            pair = tape.leaky_relu(pair, LEAKY_SLOPE)
            coeff = tape.masked_softmax(pair, mask)
            head_outputs.append(tape.matmul(coeff, projected))
        h = tape.add(h, tape.concat(head_outputs, axis=1))

    inner = tape.leaky_relu(
        tape.add(tape.matmul(h, params.ff_in_weight), params.ff_in_bias), LEAKY_SLOPE
    )
    ff = tape.add(tape.matmul(inner, params.ff_out_weight), params.ff_out_bias)
    return NodeEmbeddings(vectors=tape.add(h, ff))


def decoder_scores(
    embeddings: NodeEmbeddings,
    current: int,
    candidates,
    params: DecoderParams,
    tape: Tape | None = None,
) -> dict[int, Tensor]:
    """Score each candidate next node; every score lies in [-clip, +clip]."""
    cands = sorted(int(c) for c in candidates)
    if not cands:
        raise ValidationError("decoder_scores needs a nonempty candidate set")
    tape = tape if tape is not None else Tape()
    v = embeddings.vectors
    query = tape.matmul(tape.gather_rows(v, [int(current)]), tape.transpose(params.query_proj))
    keys = tape.matmul(tape.gather_rows(v, cands), tape.transpose(params.key_proj))
    raw = tape.matmul(query, tape.transpose(keys))  # [1, m]
    scaled = tape.mul_scalar(raw, 1.0 / math.sqrt(params.embed_dim))
    clipped = tape.mul_scalar(tape.tanh(scaled), params.score_clip)
    return {c: tape.select(clipped, k) for k, c in enumerate(cands)}


def candidate_probs(
    scores: Mapping[int, Tensor],
    temperature: float = 1.0,
    tape: Tape | None = None,
) -> dict[int, Tensor]:
    """Temperature softmax over a score map; probabilities sum to 1."""
    if temperature <= 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    if not scores:
        raise ValidationError("candidate_probs needs a nonempty score map")
    tape = tape if tape is not None else Tape()
    keys = sorted(scores)
    vec = tape.concat([scores[k] for k in keys], axis=0)
    vec = tape.mul_scalar(vec, 1.0 / temperature)
    probs = tape.masked_softmax(vec, np.ones(len(keys), dtype=bool))
    return {k: tape.select(probs, i) for i, k in enumerate(keys)}


def save_checkpoint(params: ModelParams, path) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "hyper": params.hyper(),
        "params": {
            name: {"shape": list(t.shape), "values": [float(x) for x in t.values.reshape(-1)]}
            for name, t in params.named_parameters()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path, expected_hyper: Mapping | None = None) -> ModelParams:
    """Rebuild ModelParams from a checkpoint file.

    The hyperparameter header is validated against the stored blob
    shapes, and against ``expected_hyper`` when the caller pins one.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(
            f"unsupported checkpoint version {doc.get('version')!r} (expected {CHECKPOINT_VERSION})"
        )
    hyper = doc["hyper"]
    if expected_hyper is not None:
        for key, want in expected_hyper.items():
            got = hyper.get(key)
            if got != want:
                raise ValidationError(
                    f"checkpoint {key} = {got!r} does not match configured {key} = {want!r}"
                )
    embed_dim = int(hyper["embed_dim"])
    num_heads = int(hyper["num_heads"])
    ff_dim = int(hyper["ff_dim"])
    score_clip = float(hyper["score_clip"])
    if embed_dim % num_heads != 0:
        raise ValidationError(f"embed_dim {embed_dim} not divisible by num_heads {num_heads}")

    blobs = doc["params"]
    shapes = _expected_shapes(embed_dim, num_heads, ff_dim)
    loaded: dict[str, Tensor] = {}
    for name, shape in shapes.items():
        if name not in blobs:
            raise ValidationError(f"checkpoint missing parameter {name!r}")
        blob = blobs[name]
        got_shape = tuple(blob["shape"])
        if got_shape != shape:
            raise ValidationError(
                f"parameter {name!r} has shape {got_shape}, header implies {shape}"
            )
        arr = np.asarray(blob["values"], dtype=np.float64).reshape(shape)
        loaded[name] = tensor(arr, requires_grad=True)
    extra = sorted(set(blobs) - set(shapes))
    if extra:
        raise ValidationError(f"checkpoint has unexpected parameters: {extra}")

    layers = []
    for li in range(2):
        heads = [
            HeadParams(
                weight=loaded[f"encoder.layer{li}.head{hi}.weight"],
                attn=loaded[f"encoder.layer{li}.head{hi}.attn"],
            )
            for hi in range(num_heads)
        ]
        layers.append(AttentionLayerParams(heads=heads))
    encoder = EncoderParams(
        input_lift=loaded["encoder.input_lift"],
        layers=layers,
        ff_in_weight=loaded["encoder.ff_in_weight"],
        ff_in_bias=loaded["encoder.ff_in_bias"],
        ff_out_weight=loaded["encoder.ff_out_weight"],
        ff_out_bias=loaded["encoder.ff_out_bias"],
    )
    decoder = DecoderParams(
        query_proj=loaded["decoder.query_proj"],
        key_proj=loaded["decoder.key_proj"],
        score_clip=score_clip,
        embed_dim=embed_dim,
    )
    return ModelParams(encoder=encoder, decoder=decoder)
