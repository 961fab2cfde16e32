"""Dense feed-forward networks with exact reverse-mode gradients.

Implements everything the two-headed training architecture needs: relu MLPs
with retained activations, stabilized softmax cross-entropy, mean-squared
reconstruction error, the weighted joint objective, Adam/SGD updates, and a
finite-difference gradient checker.

All math is float64. Initialization and shuffling draw from Philox
(counter-based) generators keyed by (seed, stream) so that runs are
bit-reproducible across platforms and so that creating one network never
shifts another network's initialization stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from oosguard.errors import ConfigError, DataError, NumericError

# Fixed stream ids: a component keeps its initialization stream regardless of
# which other components exist in the same run.
STREAM_ENCODER = 0
STREAM_SOFTMAX_HEAD = 1
STREAM_AE_HEAD = 2
STREAM_SHUFFLE = 3


def seeded_generator(seed: int, stream: int) -> np.random.Generator:
    """Philox generator on an independent (seed, stream) keyed sequence."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


@dataclass
class DenseNetwork:
    """Fully-connected relu network with a linear output layer.

    Attributes:
        layer_dims: sizes from input to output, e.g. (768, 512, 64).
        weights: per-layer (in, out) float64 matrices.
        biases: per-layer (out,) float64 vectors.
        hidden_activation: "relu" (the only supported hidden nonlinearity).
        output_activation: "linear" (the only supported output).
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class GradientSet:
    """Per-parameter gradients mirroring a DenseNetwork's shapes."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class OptimizerState:
    """Adam or plain SGD state for one network's parameters."""

    algorithm: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)


def dense_network(layer_dims, seed: int = 0, stream: int = 0) -> DenseNetwork:
    """Build a relu/linear network with Glorot-uniform weights.

    The (seed, stream) pair fully determines the parameters.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"invalid layer dims {dims}")
    rng = seeded_generator(seed, stream)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(layer_dims=dims, weights=weights, biases=biases)


def forward(net: DenseNetwork, batch: np.ndarray) -> list[np.ndarray]:
    """Run the network, retaining every layer's (post-activation) output.

    Args:
        batch: (n, layer_dims[0]) float array.

    Returns:
        Activations [input, h1, ..., output]; length n_layers + 1.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != net.layer_dims[0]:
        raise DataError(
            f"input dim {x.shape[1]} does not match network input {net.layer_dims[0]}"
        )
    acts = [x]
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        if i < net.n_layers - 1:
            z = np.maximum(z, 0.0)  # relu hidden layers
        acts.append(z)
    return acts


def backward(
    net: DenseNetwork, activations: list[np.ndarray], output_grad: np.ndarray
) -> tuple[GradientSet, np.ndarray]:
    """Exact reverse-mode gradients for a retained forward pass.

    Args:
        activations: the list returned by forward() for the same batch.
        output_grad: dLoss/dOutput, shape of activations[-1].

    Returns:
        (gradients, input_grad) where input_grad = dLoss/dInput — required so
        losses attached to a head can flow back into the encoder feeding it.
    """
    if len(activations) != net.n_layers + 1:
        raise DataError("activations do not match this network")
    delta = np.asarray(output_grad, dtype=np.float64)
    if delta.shape != activations[-1].shape:
        raise DataError(
            f"output grad shape {delta.shape} != output shape {activations[-1].shape}"
        )
    grad_w: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    for i in range(net.n_layers - 1, -1, -1):
        if i < net.n_layers - 1:
            # relu mask; activations[i+1] is the post-relu output of layer i
            delta = delta * (activations[i + 1] > 0.0)
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i].T
    return GradientSet(weights=grad_w, biases=grad_b), delta


def softmax_cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) against integer labels.

    Softmax is computed with per-row max subtraction. The returned gradient
    is (softmax - onehot) / batch_size, i.e. d(mean loss)/d(logits).
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise DataError(f"logits {z.shape} and labels {y.shape} do not align")
    if y.size and (y.min() < 0 or y.max() >= z.shape[1]):
        raise DataError(f"label out of range for {z.shape[1]} classes")
    shifted = z - z.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    denom = expz.sum(axis=1, keepdims=True)
    probs = expz / denom
    rows = np.arange(z.shape[0])
    # -log p_true, computed in log space to stay exact in the saturated tail
    log_probs = shifted - np.log(denom)
    loss = float(-log_probs[rows, y].mean())
    grad = probs.copy()
    grad[rows, y] -= 1.0
    grad /= z.shape[0]
    return loss, grad


def mse_reconstruction(s: np.ndarray, r: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-dimension mean-squared reconstruction error, averaged over a batch.

    The per-example loss is (1/d) * sum_k (s_k - r_k)^2; the batch loss is the
    mean of those. Returns d(mean loss)/d(r) = 2(r - s)/(d * batch). The
    gradient with respect to the target s is the negation, which the training
    loop applies when s itself is trainable.
    """
    sv = np.asarray(s, dtype=np.float64)
    rv = np.asarray(r, dtype=np.float64)
    if sv.shape != rv.shape or sv.ndim != 2:
        raise DataError(f"embedding shape {sv.shape} != reconstruction shape {rv.shape}")
    n, d = sv.shape
    diff = rv - sv
    loss = float((diff * diff).sum() / (d * n))
    grad_r = 2.0 * diff / (d * n)
    return loss, grad_r


def joint_loss(ce: float, ae: float, alpha: float) -> float:
    """Weighted total (1 - alpha) * ce + alpha * ae."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * ce + alpha * ae


def init_optimizer(
    net: DenseNetwork,
    algorithm: str = "adam",
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> OptimizerState:
    """Fresh optimizer state with zero moments shaped like the network."""
    if algorithm not in ("adam", "sgd"):
        raise ConfigError(f"unknown optimizer {algorithm!r}")
    state = OptimizerState(
        algorithm=algorithm,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )
    if algorithm == "adam":
        state.m_weights = [np.zeros_like(w) for w in net.weights]
        state.v_weights = [np.zeros_like(w) for w in net.weights]
        state.m_biases = [np.zeros_like(b) for b in net.biases]
        state.v_biases = [np.zeros_like(b) for b in net.biases]
    return state


def optimizer_step(net: DenseNetwork, grads: GradientSet, state: OptimizerState) -> None:
    """Apply one update in place; increments state.step.

    Raises:
        NumericError: naming the offending parameter if any gradient entry is
            non-finite.
    """
    for i in range(net.n_layers):
        for kind, g in (("weights", grads.weights[i]), ("biases", grads.biases[i])):
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in layer {i} {kind}")
    state.step += 1
    lr = state.learning_rate
    if state.algorithm == "sgd":
        for i in range(net.n_layers):
            net.weights[i] -= lr * grads.weights[i]
            net.biases[i] -= lr * grads.biases[i]
        return
    b1, b2, eps = state.beta1, state.beta2, state.eps
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for i in range(net.n_layers):
        for params, g, m, v in (
            (net.weights[i], grads.weights[i], state.m_weights[i], state.v_weights[i]),
            (net.biases[i], grads.biases[i], state.m_biases[i], state.v_biases[i]),
        ):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def flatten_parameters(networks: Mapping[str, DenseNetwork]):
    """Yield (name, array, row, col) views over every scalar parameter."""
    for name, net in networks.items():
        for i, w in enumerate(net.weights):
            yield f"{name}.w{i}", w
        for i, b in enumerate(net.biases):
            yield f"{name}.b{i}", b


def grad_check(
    networks: Mapping[str, DenseNetwork],
    loss_and_grads: Callable[[], tuple[float, Mapping[str, GradientSet]]],
    step: float = 1e-5,
) -> float:
    """Compare analytic gradients against central finite differences.

    Args:
        networks: the networks whose parameters participate in the loss.
        loss_and_grads: closure evaluating the loss at the networks' current
            parameters and returning (loss, per-network GradientSet).
        step: finite-difference half step.

    Returns:
        Maximum relative error over every scalar parameter, with the relative
        scale floored at 1e-6.

    Raises:
        ConfigError: if the networks carry more than 5000 parameters — this
            is a test harness, quadratic in parameter count.
    """
    total = sum(net.parameter_count() for net in networks.values())
    if total > 5000:
        raise ConfigError(f"grad_check is for small networks; got {total} parameters")

    _, analytic = loss_and_grads()
    worst = 0.0
    for name, net in networks.items():
        gset = analytic[name]
        for arrays, grads_arr in ((net.weights, gset.weights), (net.biases, gset.biases)):
            for arr, g in zip(arrays, grads_arr):
                flat = arr.reshape(-1)
                gflat = np.asarray(g).reshape(-1)
                for k in range(flat.size):
                    orig = flat[k]
                    flat[k] = orig + step
                    up, _ = loss_and_grads()
                    flat[k] = orig - step
                    down, _ = loss_and_grads()
                    flat[k] = orig
                    numeric = (up - down) / (2.0 * step)
                    scale = max(abs(numeric), abs(gflat[k]), 1e-6)
                    worst = max(worst, abs(numeric - gflat[k]) / scale)
    return worst
