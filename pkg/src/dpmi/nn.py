"""Minimal dense feed-forward network with per-example losses and gradients.

Supports relu hidden layers and a softmax/cross-entropy output, plain SGD
and Adam, mini-batch training with early stopping on test loss, and
accuracy evaluation. Everything is driven by an explicit numpy Generator,
so a (config, seed) pair fully determines the trained weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12  # cross-entropy clamp


class ShapeError(ValueError):
    pass


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)


@dataclass
class Network:
    """Stack of dense layers; relu between layers, softmax on the output."""

    layers: list[DenseLayer]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].weights.shape[1]] + [l.weights.shape[0] for l in self.layers]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].weights.shape[0]

    @property
    def n_params(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)

    def copy(self) -> "Network":
        return Network([DenseLayer(l.weights.copy(), l.biases.copy()) for l in self.layers])

    def check_finite(self) -> None:
        for k, l in enumerate(self.layers):
            if not (np.isfinite(l.weights).all() and np.isfinite(l.biases).all()):
                raise FloatingPointError(f"non-finite weights in layer {k}")


@dataclass
class Batch:
    inputs: np.ndarray  # (batch, features)
    labels: np.ndarray  # (batch,) ints in [0, n_classes)

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"inputs rows {self.inputs.shape[0]} != labels {self.labels.shape[0]}")


@dataclass
class PerExampleGradients:
    losses: np.ndarray  # (batch,)
    # per layer: (d_weights (batch, out, in), d_biases (batch, out))
    grads: list[tuple[np.ndarray, np.ndarray]]

    def flat(self) -> np.ndarray:
        """Stack into a (batch, n_params) matrix, layer by layer."""
        parts = []
        for dw, db in self.grads:
            parts.append(dw.reshape(dw.shape[0], -1))
            parts.append(db)
        return np.concatenate(parts, axis=1)


def unflatten_grad(flat: np.ndarray, net: Network) -> list[tuple[np.ndarray, np.ndarray]]:
    """Inverse of PerExampleGradients.flat for a single (n_params,) vector."""
    out = []
    pos = 0
    for l in net.layers:
        w = flat[pos:pos + l.weights.size].reshape(l.weights.shape)
        pos += l.weights.size
        b = flat[pos:pos + l.biases.size]
        pos += l.biases.size
        out.append((w, b))
    return out


def build_network(layer_sizes: list[int], rng: np.random.Generator) -> Network:
    """Dense net with the given sizes, e.g. [features, 128, classes].

    Weights drawn uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)),
    biases zero.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output sizes")
    layers = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-s, s, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out)))
    return Network(layers)


def _stable_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(net: Network, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, softmax) for the batch."""
    logits, _ = _forward_cached(net, batch.inputs)
    return logits, _stable_softmax(logits)


def _forward_cached(net: Network, x: np.ndarray):
    """Forward pass keeping hidden pre-activations for backprop."""
    if x.shape[1] != net.layers[0].weights.shape[1]:
        raise ShapeError(
            f"input width {x.shape[1]} != first layer input {net.layers[0].weights.shape[1]}")
    activations = [x]
    pre = []
    a = x
    for k, l in enumerate(net.layers):
        z = a @ l.weights.T + l.biases
        pre.append(z)
        if k < len(net.layers) - 1:
            a = np.maximum(z, 0.0)
            activations.append(a)
    return pre[-1], (activations, pre)


def per_example_losses(net: Network, batch: Batch) -> np.ndarray:
    _, probs = forward(net, batch)
    p_true = probs[np.arange(len(batch.labels)), batch.labels]
    return -np.log(np.maximum(p_true, PROB_FLOOR))


def per_example_grads(net: Network, batch: Batch) -> PerExampleGradients:
    """Cross-entropy losses and exact backprop gradients, one per example."""
    logits, (activations, pre) = _forward_cached(net, batch.inputs)
    probs = _stable_softmax(logits)
    n = batch.inputs.shape[0]
    labels = batch.labels
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= net.n_classes:
        raise ShapeError("label out of range")

    p_true = probs[np.arange(n), labels]
    losses = -np.log(np.maximum(p_true, PROB_FLOOR))

    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        a_prev = activations[k]
        dw = np.einsum("bo,bi->boi", delta, a_prev)
        grads[k] = (dw, delta.copy())
        if k > 0:
            delta = (delta @ net.layers[k].weights) * (pre[k - 1] > 0.0)
    return PerExampleGradients(losses, grads)


def batch_grads(net: Network, batch: Batch) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean loss and gradient of the mean loss (direct matmul backprop)."""
    logits, (activations, pre) = _forward_cached(net, batch.inputs)
    probs = _stable_softmax(logits)
    n = batch.inputs.shape[0]
    labels = batch.labels
    p_true = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(p_true, PROB_FLOOR)).mean())

    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        grads[k] = (delta.T @ activations[k], delta.sum(axis=0))
        if k > 0:
            delta = (delta @ net.layers[k].weights) * (pre[k - 1] > 0.0)
    return loss, grads


@dataclass
class OptimizerState:
    kind: str  # "sgd" | "adam"
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments1: list[tuple[np.ndarray, np.ndarray]] | None = None
    moments2: list[tuple[np.ndarray, np.ndarray]] | None = None

    @classmethod
    def for_net(cls, net: Network, kind: str, learning_rate: float) -> "OptimizerState":
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        st = cls(kind=kind, learning_rate=learning_rate)
        if kind == "adam":
            st.moments1 = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in net.layers]
            st.moments2 = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in net.layers]
        return st


def optimizer_step(net: Network, state: OptimizerState,
                   grad: list[tuple[np.ndarray, np.ndarray]]) -> None:
    """Apply one update in place; grad must be shaped like the net."""
    if len(grad) != len(net.layers):
        raise ShapeError("gradient layer count mismatch")
    state.step += 1
    lr = state.learning_rate
    for k, (l, (dw, db)) in enumerate(zip(net.layers, grad)):
        if dw.shape != l.weights.shape or db.shape != l.biases.shape:
            raise ShapeError(f"gradient shape mismatch in layer {k}")
        if state.kind == "sgd":
            l.weights -= lr * dw
            l.biases -= lr * db
        else:
            m_w, m_b = state.moments1[k]
            v_w, v_b = state.moments2[k]
            m_w *= state.beta1
            m_w += (1 - state.beta1) * dw
            m_b *= state.beta1
            m_b += (1 - state.beta1) * db
            v_w *= state.beta2
            v_w += (1 - state.beta2) * dw * dw
            v_b *= state.beta2
            v_b += (1 - state.beta2) * db * db
            c1 = 1 - state.beta1 ** state.step
            c2 = 1 - state.beta2 ** state.step
            l.weights -= lr * (m_w / c1) / (np.sqrt(v_w / c2) + state.eps)
            l.biases -= lr * (m_b / c1) / (np.sqrt(v_b / c2) + state.eps)


@dataclass
class FitConfig:
    epochs: int = 200
    batch_size: int = 128
    optimizer: str = "adam"
    learning_rate: float = 0.001
    early_stop: bool = True
    patience: int = 10
    tolerance: float = 1e-4


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    stop_epoch: int = 0
    stop_reason: str = "max-epochs"


def _dataset_batch(data) -> Batch:
    return Batch(data.features, data.labels)


def evaluate_accuracy(net: Network, data) -> float:
    """Fraction of argmax-correct predictions; ties break to the lowest class."""
    if len(data.labels) == 0:
        raise ValueError("empty dataset")
    _, probs = forward(net, _dataset_batch(data))
    return float((probs.argmax(axis=1) == data.labels).mean())


def mean_loss(net: Network, data) -> float:
    return float(per_example_losses(net, _dataset_batch(data)).mean())


def fit(net: Network, train, test, config: FitConfig, rng: np.random.Generator,
        step_fn=None) -> TrainReport:
    """Mini-batch training, reshuffled each epoch, partial last batch kept.

    Stops early once the test loss has failed to improve by config.tolerance
    for config.patience consecutive epochs (patience 0 stops on the first
    non-improving epoch). step_fn overrides the plain gradient step; it is
    called as step_fn(net, state, batch) and is how the DP optimizer hooks in.
    """
    if len(train.labels) == 0 or len(test.labels) == 0:
        raise ValueError("empty dataset")
    state = OptimizerState.for_net(net, config.optimizer, config.learning_rate)
    report = TrainReport()
    n = len(train.labels)
    best_loss = np.inf
    stale = 0

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = Batch(train.features[idx], train.labels[idx])
            if step_fn is None:
                loss, grad = batch_grads(net, batch)
                optimizer_step(net, state, grad)
            else:
                loss = step_fn(net, state, batch)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at epoch {epoch}, batch start {start}")
            epoch_losses.append(loss)
        net.check_finite()

        report.train_loss.append(float(np.mean(epoch_losses)))
        report.train_acc.append(evaluate_accuracy(net, train))
        t_loss = mean_loss(net, test)
        report.test_loss.append(t_loss)
        report.test_acc.append(evaluate_accuracy(net, test))
        report.stop_epoch = epoch + 1

        if config.early_stop:
            if t_loss < best_loss - config.tolerance:
                best_loss = t_loss
                stale = 0
            else:
                stale += 1
                if stale >= max(config.patience, 1):
                    report.stop_reason = "early-stop"
                    break
    return report
