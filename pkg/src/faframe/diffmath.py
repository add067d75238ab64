"""Reverse-mode autodiff over dense float64 arrays, plus AdamW.

Everything is double precision and deterministic. Graphs are built by the
module-level ops below; each op records its parents and a closure that
scatters the output gradient back to them. ``backward`` seeds a scalar loss
with gradient 1 and walks the graph in reverse topological order,
accumulating into ``.grad``.

Only the compositions the network needs are supported; there is no general
broadcasting. ``add`` accepts equal shapes, a trailing-axis bias vector, or
a scalar; ``mul`` accepts equal shapes or a scalar.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import NonScalarLoss, ShapeMismatch

CHECKPOINT_VERSION = 1


class DiffValue:
    """One node of a computation graph: data, lazy grad, parents, local rule."""

    __slots__ = ("data", "grad", "_parents", "_backward", "name")

    def __init__(self, data, parents=(), backward=None, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def accumulate_grad(self, delta):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += delta

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"DiffValue(shape={self.data.shape}{tag})"


def _as_value(x) -> DiffValue:
    return x if isinstance(x, DiffValue) else DiffValue(x)


def constant(data, name="") -> DiffValue:
    """Wrap an array as a graph leaf (gradients land here but are unused)."""
    return DiffValue(data, name=name)


def matmul(a, b) -> DiffValue:
    a, b = _as_value(a), _as_value(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul needs (n,k)@(k,m), got {a.data.shape} and {b.data.shape}")
    out = DiffValue(a.data @ b.data, parents=(a, b))

    def backward(grad):
        a.accumulate_grad(grad @ b.data.T)
        b.accumulate_grad(a.data.T @ grad)

    out._backward = backward
    return out


def add(a, b) -> DiffValue:
    a, b = _as_value(a), _as_value(b)
    sa, sb = a.data.shape, b.data.shape
    bias = sa != sb and b.data.ndim == 1 and sa and sa[-1] == sb[0]
    scalar = sb == ()
    if not (sa == sb or bias or scalar):
        raise ShapeMismatch(f"add supports equal shapes, a trailing bias, or a scalar; got {sa} and {sb}")
    out = DiffValue(a.data + b.data, parents=(a, b))

    def backward(grad):
        a.accumulate_grad(grad)
        if sa == sb:
            b.accumulate_grad(grad)
        elif scalar:
            b.accumulate_grad(grad.sum())
        else:
            b.accumulate_grad(grad.reshape(-1, sb[0]).sum(axis=0))

    out._backward = backward
    return out


def mul(a, b) -> DiffValue:
    a, b = _as_value(a), _as_value(b)
    sa, sb = a.data.shape, b.data.shape
    if not (sa == sb or sa == () or sb == ()):
        raise ShapeMismatch(f"mul supports equal shapes or a scalar factor, got {sa} and {sb}")
    out = DiffValue(a.data * b.data, parents=(a, b))

    def backward(grad):
        ga = grad * b.data
        gb = grad * a.data
        a.accumulate_grad(ga if sa != () else ga.sum())
        b.accumulate_grad(gb if sb != () else gb.sum())

    out._backward = backward
    return out


def concat(values, axis: int) -> DiffValue:
    values = [_as_value(v) for v in values]
    if not values:
        raise ShapeMismatch("concat needs at least one input")
    out = DiffValue(np.concatenate([v.data for v in values], axis=axis), parents=tuple(values))
    sizes = [v.data.shape[axis] for v in values]
    splits = np.cumsum(sizes)[:-1]

    def backward(grad):
        for v, piece in zip(values, np.split(grad, splits, axis=axis)):
            v.accumulate_grad(piece)

    out._backward = backward
    return out


def gather_rows(x, index) -> DiffValue:
    x = _as_value(x)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1:
        raise ShapeMismatch(f"gather_rows index must be 1-D, got shape {index.shape}")
    out = DiffValue(x.data[index], parents=(x,))

    def backward(grad):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, grad)
        x.accumulate_grad(gx)

    out._backward = backward
    return out


def segment_sum(values, segment_ids, num_segments: int) -> DiffValue:
    values = _as_value(values)
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.ndim != 1 or segment_ids.shape[0] != values.data.shape[0]:
        raise ShapeMismatch(
            f"segment_ids shape {segment_ids.shape} does not index {values.data.shape} rows"
        )
    if segment_ids.size and (segment_ids.min() < 0 or segment_ids.max() >= num_segments):
        raise ValueError("segment id out of range")
    out_data = np.zeros((num_segments,) + values.data.shape[1:])
    np.add.at(out_data, segment_ids, values.data)
    out = DiffValue(out_data, parents=(values,))

    def backward(grad):
        values.accumulate_grad(grad[segment_ids])

    out._backward = backward
    return out


def sigmoid(x) -> DiffValue:
    x = _as_value(x)
    # Split by sign for overflow-free evaluation.
    data = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                    np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    out = DiffValue(data, parents=(x,))

    def backward(grad):
        x.accumulate_grad(grad * data * (1.0 - data))

    out._backward = backward
    return out


def swish(x) -> DiffValue:
    x = _as_value(x)
    sig = np.where(x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
                   np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    out = DiffValue(x.data * sig, parents=(x,))

    def backward(grad):
        x.accumulate_grad(grad * (sig + x.data * sig * (1.0 - sig)))

    out._backward = backward
    return out


def mean(x) -> DiffValue:
    x = _as_value(x)
    out = DiffValue(np.mean(x.data), parents=(x,))

    def backward(grad):
        x.accumulate_grad(np.full_like(x.data, grad / x.data.size))

    out._backward = backward
    return out


def sum_all(x) -> DiffValue:
    x = _as_value(x)
    out = DiffValue(np.sum(x.data), parents=(x,))

    def backward(grad):
        x.accumulate_grad(np.full_like(x.data, grad))

    out._backward = backward
    return out


def mse_loss(prediction, target) -> DiffValue:
    prediction, target = _as_value(prediction), _as_value(target)
    if prediction.data.shape != target.data.shape:
        raise ShapeMismatch(
            f"mse_loss shapes differ: {prediction.data.shape} vs {target.data.shape}"
        )
    diff = prediction.data - target.data
    out = DiffValue(np.mean(diff * diff), parents=(prediction, target))
    scale = 2.0 / max(diff.size, 1)

    def backward(grad):
        prediction.accumulate_grad(grad * scale * diff)
        target.accumulate_grad(-grad * scale * diff)

    out._backward = backward
    return out


def binary_cross_entropy_with_logits(logits, targets) -> DiffValue:
    logits, targets = _as_value(logits), _as_value(targets)
    if logits.data.shape != targets.data.shape:
        raise ShapeMismatch(
            f"bce shapes differ: {logits.data.shape} vs {targets.data.shape}"
        )
    x, y = logits.data, targets.data
    # max(x, 0) - x*y + log(1 + exp(-|x|)) is the overflow-safe form.
    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    out = DiffValue(np.mean(loss), parents=(logits, targets))
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    scale = 1.0 / max(x.size, 1)

    def backward(grad):
        logits.accumulate_grad(grad * scale * (sig - y))
        targets.accumulate_grad(-grad * scale * x)

    out._backward = backward
    return out


def backward(loss: DiffValue):
    """Backpropagate from a scalar loss through its whole graph."""
    if loss.data.shape != ():
        raise NonScalarLoss(f"backward needs a scalar, got shape {loss.data.shape}")

    # Iterative postorder topological sort; recursion depth is unbounded in
    # deep unrolled graphs.
    order: list[DiffValue] = []
    seen: set[int] = set()
    stack: list[tuple[DiffValue, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.accumulate_grad(np.asarray(1.0))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class AdamW:
    """Adam with decoupled weight decay.

    Moments use the usual bias correction; the decay term is applied to the
    parameter directly, scaled by the learning rate, never through the
    moments.
    """

    def __init__(self, params, learning_rate=1e-3, betas=(0.9, 0.999), epsilon=1e-8,
                 weight_decay=0.0):
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.epsilon = float(epsilon)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        t = self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p.data -= self.learning_rate * (
                m_hat / (np.sqrt(v_hat) + self.epsilon) + self.weight_decay * p.data
            )


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape=None) -> np.ndarray:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


def save_checkpoint(params: dict[str, DiffValue], path):
    """Write parameters as a versioned JSON manifest (row-major values)."""
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "precision": "float64",
        "params": [
            {
                "name": name,
                "shape": list(value.data.shape),
                "values": value.data.ravel().tolist(),
            }
            for name, value in params.items()
        ],
    }
    Path(path).write_text(json.dumps(manifest, sort_keys=True) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a manifest written by :func:`save_checkpoint`."""
    manifest = json.loads(Path(path).read_text())
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    out = {}
    for entry in manifest["params"]:
        out[entry["name"]] = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
    return out


def numerical_gradient(func, arrays, step=1e-5):
    """Central-difference gradients of ``func(arrays) -> float`` per input."""
    grads = []
    for array in arrays:
        grad = np.zeros_like(array)
        flat = array.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            up = func(arrays)
            flat[i] = original - step
            down = func(arrays)
            flat[i] = original
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(grad)
    return grads
