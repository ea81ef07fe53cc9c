"""Dense float64 tensor arithmetic with taped reverse-mode differentiation.

Every learnable computation in the package is built from the primitives
here. A forward op validates shapes, rejects non-finite results, and
appends its local gradient rule to a ``Tape``; ``Tape.backward`` replays
the records in reverse and accumulates exact chain-rule gradients into
the ``grad`` of every tensor that requires one. ``adam_step`` consumes
those gradients.

All arithmetic is float64 and fully deterministic: the same inputs and
op sequence produce bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NumericError, ValidationError

__all__ = [
    "Tensor",
    "Tape",
    "AdamState",
    "adam_step",
    "tensor",
    "clear_grads",
]


class Tensor:
    """A dense float64 array plus gradient bookkeeping."""

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValidationError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(values, requires_grad: bool = False) -> Tensor:
    """Wrap ``values`` as a Tensor, rejecting non-finite entries."""
    t = Tensor(values, requires_grad=requires_grad)
    if not np.all(np.isfinite(t.values)):
        raise NumericError("tensor values must be finite")
    return t


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{op} produced non-finite values")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# A record is (output, inputs, rule); rule maps the output adjoint to one
# adjoint per input (None for inputs that need no gradient).
_Rule = Callable[[np.ndarray], tuple]


class Tape:
    """Ordered record of primitive ops for one forward pass.

    Records are appended in topological order by construction; ``backward``
    may run once per tape. A tape is single-threaded; run independent
    tapes for concurrent work.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], _Rule]] = []
        self._produced: set[int] = set()
        self._consumed = False

    def __len__(self) -> int:
        return len(self._records)

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], rule: _Rule) -> None:
        # Ops on plain constants leave no record; nothing upstream can
        # need their gradient.
        if any(t.requires_grad or id(t) in self._produced for t in inputs):
            self._records.append((out, inputs, rule))
            self._produced.add(id(out))

    # -- primitive forward ops -------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        av, bv = a.values, b.values
        if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
            raise ValidationError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
        out = Tensor(av @ bv)
        _check_finite(out.values, "matmul")
        self._record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))
        return out

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            out = Tensor(a.values + b.values)
        except ValueError as exc:
            raise ValidationError(f"add shape mismatch: {a.shape} + {b.shape}") from exc
        _check_finite(out.values, "add")
        a_shape, b_shape = a.shape, b.shape
        self._record(out, (a, b), lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))
        return out

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        try:
            out = Tensor(a.values * b.values)
        except ValueError as exc:
            raise ValidationError(f"mul shape mismatch: {a.shape} * {b.shape}") from exc
        _check_finite(out.values, "mul")
        av, bv = a.values, b.values
        a_shape, b_shape = a.shape, b.shape
        self._record(
            out,
            (a, b),
            lambda g: (_unbroadcast(g * bv, a_shape), _unbroadcast(g * av, b_shape)),
        )
        return out

    def mul_scalar(self, a: Tensor, scalar: float) -> Tensor:
        c = float(scalar)
        out = Tensor(a.values * c)
        _check_finite(out.values, "mul_scalar")
        self._record(out, (a,), lambda g: (g * c,))
        return out

    def concat(self, parts: Sequence[Tensor], axis: int = 0) -> Tensor:
        if not parts:
            raise ValidationError("concat needs at least one tensor")
        try:
            out = Tensor(np.concatenate([p.values for p in parts], axis=axis))
        except ValueError as exc:
            raise ValidationError(f"concat shape mismatch along axis {axis}") from exc
        _check_finite(out.values, "concat")
        offsets = np.cumsum([p.values.shape[axis] for p in parts])[:-1]
        self._record(out, tuple(parts), lambda g: tuple(np.split(g, offsets, axis=axis)))
        return out

    def leaky_relu(self, a: Tensor, slope: float = 0.2) -> Tensor:
        av = a.values
        out = Tensor(np.where(av > 0, av, slope * av))
        _check_finite(out.values, "leaky_relu")
        factor = np.where(av > 0, 1.0, slope)
        self._record(out, (a,), lambda g: (g * factor,))
        return out

    def tanh(self, a: Tensor) -> Tensor:
        yv = np.tanh(a.values)
        out = Tensor(yv)
        self._record(out, (a,), lambda g: (g * (1.0 - yv * yv),))
        return out

    def masked_softmax(self, a: Tensor, mask) -> Tensor:
        """Softmax along the last axis with hard-masked entries.

        Masked entries get exactly zero probability; every row must keep
        at least one unmasked entry. Numerically stabilized by
        subtracting the row max before exponentiation.
        """
        m = np.asarray(mask, dtype=bool)
        if m.shape != a.shape:
            raise ValidationError(f"mask shape {m.shape} does not match values shape {a.shape}")
        if not m.any(axis=-1).all():
            raise ValidationError("masked_softmax: at least one fully-masked row")
        x = np.where(m, a.values, -np.inf)
        x = x - x.max(axis=-1, keepdims=True)
        e = np.exp(x)  # exp(-inf) == 0 exactly, so masked entries vanish
        p = e / e.sum(axis=-1, keepdims=True)
        out = Tensor(p)
        _check_finite(out.values, "masked_softmax")

        def rule(g):
            inner = (g * p).sum(axis=-1, keepdims=True)
            return (p * (g - inner),)

        self._record(out, (a,), rule)
        return out

    def log(self, a: Tensor) -> Tensor:
        av = a.values
        if np.any(av <= 0):
            raise NumericError("log of a non-positive value")
        out = Tensor(np.log(av))
        _check_finite(out.values, "log")
        self._record(out, (a,), lambda g: (g / av,))
        return out

    def sum(self, a: Tensor) -> Tensor:
        out = Tensor(a.values.sum())
        _check_finite(out.values, "sum")
        shape = a.shape
        self._record(out, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))
        return out

    def mean(self, a: Tensor) -> Tensor:
        out = Tensor(a.values.mean())
        _check_finite(out.values, "mean")
        shape, size = a.shape, a.values.size
        self._record(out, (a,), lambda g: (np.broadcast_to(g / size, shape).copy(),))
        return out

    def transpose(self, a: Tensor) -> Tensor:
        if a.values.ndim != 2:
            raise ValidationError(f"transpose needs a 2-d tensor, got shape {a.shape}")
        out = Tensor(a.values.T.copy())
        self._record(out, (a,), lambda g: (g.T,))
        return out

    def reshape(self, a: Tensor, shape: tuple[int, ...]) -> Tensor:
        old = a.shape
        try:
            out = Tensor(a.values.reshape(shape))
        except ValueError as exc:
            raise ValidationError(f"cannot reshape {old} to {shape}") from exc
        self._record(out, (a,), lambda g: (g.reshape(old),))
        return out

    def gather_rows(self, a: Tensor, indices: Sequence[int]) -> Tensor:
        if a.values.ndim != 2:
            raise ValidationError(f"gather_rows needs a 2-d tensor, got shape {a.shape}")
        idx = list(int(i) for i in indices)
        n = a.shape[0]
        if any(i < 0 or i >= n for i in idx):
            raise ValidationError(f"gather_rows index out of range for {n} rows: {idx}")
        out = Tensor(a.values[idx, :])
        a_shape = a.shape

        def rule(g):
            z = np.zeros(a_shape)
            np.add.at(z, idx, g)
            return (z,)

        self._record(out, (a,), rule)
        return out

    def select(self, a: Tensor, index: int) -> Tensor:
        """Pick one entry (flat index) as a shape-(1,) tensor."""
        flat = a.values.reshape(-1)
        i = int(index)
        if i < 0 or i >= flat.size:
            raise ValidationError(f"select index {i} out of range for {flat.size} entries")
        out = Tensor(flat[[i]])
        a_shape = a.shape

        def rule(g):
            z = np.zeros(a_shape)
            z.reshape(-1)[i] = g[0]
            return (z,)

        self._record(out, (a,), rule)
        return out

    # -- reverse pass -----------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor that
        requires a gradient. The loss must be a single-element tensor
        produced on this tape; a tape backpropagates only once."""
        if self._consumed:
            raise ValidationError("tape already consumed by a previous backward pass")
        if loss.values.size != 1:
            raise ValidationError(f"loss must be scalar, got shape {loss.shape}")
        self._consumed = True

        adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        holders: dict[int, Tensor] = {id(loss): loss}
        for out, inputs, rule in reversed(self._records):
            g = adjoints.pop(id(out), None)
            if g is None:
                continue
            for inp, gin in zip(inputs, rule(g)):
                if gin is None:
                    continue
                key = id(inp)
                holders[key] = inp
                if key in adjoints:
                    adjoints[key] = adjoints[key] + gin
                else:
                    adjoints[key] = gin
        for key, adj in adjoints.items():
            t = holders[key]
            if t.requires_grad:
                t.grad = adj if t.grad is None else t.grad + adj


def clear_grads(params: Mapping[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[Mapping[str, Tensor], AdamState]:
    """One bias-corrected Adam update, in place.

    Each parameter gets its own effective step size from its moment
    estimates. Returns the mutated ``(params, state)`` pair.
    """
    if state.learning_rate <= 0:
        raise ValidationError("learning_rate must be positive")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step
    for name, p in params.items():
        if name not in grads:
            raise ValidationError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValidationError(
                f"gradient shape {g.shape} does not match parameter {name!r} shape {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / bias1
        v_hat = v / bias2
        p.values = p.values - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
