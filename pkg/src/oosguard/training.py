"""Joint two-head training, head discard, statistics fitting, and the alpha sweep.

The training architecture: a trainable encoder produces embeddings; a
softmax head yields the cross-entropy loss, an autoencoder head yields the
reconstruction loss, and the total objective is their weighted sum
(1 - alpha) * ce + alpha * ae. Gradients from both heads flow back into the
encoder. After training the heads are discarded; per-class means and one
pooled covariance over the training embeddings become the deployed scorer
state.

Reproducibility: every network draws its initialization from its own
(seed, stream) pair and the shuffle schedule has a stream of its own, so an
alpha = 0 run is bit-identical to a run with the autoencoder head ablated
outright.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from oosguard.data import Example
from oosguard.errors import ConfigError, DataError, NumericError
from oosguard.featurizer import EncoderConfig, Featurizer, featurize
from oosguard.linalg import fit_class_statistics
from oosguard.metrics import EvaluationReport, evaluate
from oosguard.nn import (
    STREAM_AE_HEAD,
    STREAM_ENCODER,
    STREAM_SHUFFLE,
    STREAM_SOFTMAX_HEAD,
    DenseNetwork,
    GradientSet,
    backward,
    dense_network,
    forward,
    init_optimizer,
    joint_loss,
    mse_reconstruction,
    optimizer_step,
    seeded_generator,
    softmax_cross_entropy,
)
from oosguard.scorer import FittedScorer

# Autoencoder head layer sizes used at full embedding scale (d = 768):
# compress 768 -> 512 -> 64 -> 16, then mirror back up to 768.
FULL_SCALE_AE_CHAIN = (512, 64, 16, 64, 512)

DEFAULT_ALPHA_GRID = (0.01, 0.1, 0.2, 0.5, 0.9)

THREADS_ENV_VAR = "OOSGUARD_THREADS"


def default_ae_dims(embedding_dim: int) -> tuple[int, ...]:
    """Six-layer autoencoder chain for a given embedding width.

    At d = 768 this is the full-scale compress/reconstruct chain; for
    smaller desk-scale widths the interior is scaled down proportionally
    (floored so every layer keeps at least 2 units and the bottleneck stays
    strictly below d).
    """
    if embedding_dim >= 768:
        interior = FULL_SCALE_AE_CHAIN
    else:
        scale = embedding_dim / 768.0
        interior = tuple(
            max(2, min(embedding_dim - 1, round(h * scale))) for h in FULL_SCALE_AE_CHAIN
        )
    return (embedding_dim, *interior, embedding_dim)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on.

    ae_dims defaults to the scaled six-layer chain for the configured
    embedding width; when given it must start and end at that width.
    """

    class_count: int
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    alpha: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    optimizer: str = "adam"
    ae_dims: tuple[int, ...] | None = None
    covariance_mode: str = "class-centered"
    ridge: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.class_count < 2:
            raise ConfigError(f"class_count must be >= 2, got {self.class_count}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.covariance_mode not in ("class-centered", "global-centered"):
            raise ConfigError(f"unknown covariance mode {self.covariance_mode!r}")
        if self.ae_dims is not None:
            d = self.encoder.embedding_dim
            if self.ae_dims[0] != d or self.ae_dims[-1] != d:
                raise ConfigError(
                    f"autoencoder dims {self.ae_dims} must start and end at {d}"
                )

    def resolved_ae_dims(self) -> tuple[int, ...]:
        if self.ae_dims is not None:
            return tuple(self.ae_dims)
        return default_ae_dims(self.encoder.embedding_dim)


# Hyperparameters as published for the benchmark datasets (alpha = 0.1
# everywhere), plus the desk-scale synthetic preset.
PRESETS: dict[str, dict] = {
    "clinc150": {"alpha": 0.1, "learning_rate": 1e-4, "batch_size": 256, "epochs": 15},
    "stackoverflow": {"alpha": 0.1, "learning_rate": 5e-5, "batch_size": 1024, "epochs": 6},
    "mtop": {"alpha": 0.1, "learning_rate": 2.25e-5, "batch_size": 128, "epochs": 10},
    "car-assistant": {"alpha": 0.1, "learning_rate": 2.25e-5, "batch_size": 1024, "epochs": 7},
    "synthetic": {"alpha": 0.1, "learning_rate": 1e-3, "batch_size": 64, "epochs": 20},
}


@dataclass(frozen=True)
class EpochStats:
    """Example-weighted mean losses over one epoch."""

    ce: float
    ae: float
    total: float


@dataclass
class JointModel:
    """Trained two-head model plus its config and loss log."""

    encoder: DenseNetwork
    softmax_head: DenseNetwork
    ae_head: DenseNetwork | None
    config: TrainConfig
    log: list[EpochStats]


def extract_features(config: TrainConfig, examples: list[Example]) -> np.ndarray:
    """Encoder-input features for a list of examples.

    Text examples go through the configured hashed featurizer; embedding
    examples are used directly (they must match the featurizer dim).
    """
    f: Featurizer = config.encoder.featurizer
    x = np.zeros((len(examples), f.dim), dtype=np.float64)
    for i, ex in enumerate(examples):
        if ex.embedding is not None:
            vec = np.asarray(ex.embedding, dtype=np.float64)
            if vec.shape != (f.dim,):
                raise DataError(
                    f"example {i}: embedding dim {vec.shape[0]} does not match "
                    f"configured input dim {f.dim}"
                )
            x[i] = vec
        elif ex.text is not None:
            x[i] = featurize(f, ex.text)
        else:
            raise DataError(f"example {i} has neither text nor embedding")
    return x


def joint_batch_step(
    encoder: DenseNetwork,
    softmax_head: DenseNetwork,
    ae_head: DenseNetwork | None,
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
) -> tuple[float, float, float, dict[str, GradientSet]]:
    """One forward/backward pass of the joint objective on a batch.

    Both heads read the same embedding tensor from a single encoder pass.
    The encoder receives the sum of (1 - alpha)-scaled cross-entropy
    gradients and alpha-scaled reconstruction gradients; the reconstruction
    term contributes both through the autoencoder and directly (the
    embedding is also the reconstruction target). At alpha = 0 the
    autoencoder is skipped entirely so the float-op sequence matches an
    ablated run bit for bit.

    Returns:
        (ce, ae, total, grads) with grads keyed "encoder", "softmax",
        and "ae" (present only when the autoencoder was active).
    """
    enc_acts = forward(encoder, x)
    emb = enc_acts[-1]

    sm_acts = forward(softmax_head, emb)
    ce, dlogits = softmax_cross_entropy(sm_acts[-1], y)
    sm_grads, demb = backward(softmax_head, sm_acts, (1.0 - alpha) * dlogits)

    grads: dict[str, GradientSet] = {"softmax": sm_grads}
    ae_loss = 0.0
    if ae_head is not None and alpha > 0.0:
        ae_acts = forward(ae_head, emb)
        ae_loss, drecon = mse_reconstruction(emb, ae_acts[-1])
        ae_grads, demb_through_ae = backward(ae_head, ae_acts, alpha * drecon)
        grads["ae"] = ae_grads
        # target-side term: d(ae)/d(emb) holding the reconstruction fixed
        demb = demb + demb_through_ae - alpha * drecon

    enc_grads, _ = backward(encoder, enc_acts, demb)
    grads["encoder"] = enc_grads
    total = joint_loss(ce, ae_loss, alpha)
    return ce, ae_loss, total, grads


def train(
    config: TrainConfig,
    train_examples: list[Example],
    ablate_ae_head: bool = False,
) -> JointModel:
    """Run the joint fine-tuning loop.

    Deterministic given (config, data): initialization and the per-epoch
    shuffle schedule are derived from config.seed through fixed independent
    streams.

    Args:
        ablate_ae_head: skip creating the autoencoder head entirely (the
            cross-entropy-only baseline). Requires alpha = 0.

    Raises:
        DataError: OOS examples or out-of-range labels in the training set.
        NumericError: non-finite loss, with epoch/batch context.
    """
    if not train_examples:
        raise DataError("empty training set")
    for i, ex in enumerate(train_examples):
        if ex.is_oos:
            raise DataError(f"training example {i} is OOS; OOS is never trained on")
        if not 0 <= ex.label < config.class_count:
            raise DataError(
                f"training example {i} has label {ex.label}, outside "
                f"0..{config.class_count - 1}"
            )
    if ablate_ae_head and config.alpha != 0.0:
        raise ConfigError("ablating the autoencoder head requires alpha = 0")

    x = extract_features(config, train_examples)
    y = np.array([ex.label for ex in train_examples], dtype=np.int64)
    n = x.shape[0]

    encoder = dense_network(config.encoder.layer_dims, config.seed, STREAM_ENCODER)
    softmax_head = dense_network(
        (config.encoder.embedding_dim, config.class_count),
        config.seed,
        STREAM_SOFTMAX_HEAD,
    )
    ae_head = (
        None
        if ablate_ae_head
        else dense_network(config.resolved_ae_dims(), config.seed, STREAM_AE_HEAD)
    )

    opt = {
        "encoder": init_optimizer(encoder, config.optimizer, config.learning_rate),
        "softmax": init_optimizer(softmax_head, config.optimizer, config.learning_rate),
    }
    if ae_head is not None:
        opt["ae"] = init_optimizer(ae_head, config.optimizer, config.learning_rate)

    shuffle_rng = seeded_generator(config.seed, STREAM_SHUFFLE)
    log: list[EpochStats] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        ce_sum = ae_sum = total_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            ce, ae_loss, total, grads = joint_batch_step(
                encoder, softmax_head, ae_head, x[batch], y[batch], config.alpha
            )
            if not np.isfinite(total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            optimizer_step(encoder, grads["encoder"], opt["encoder"])
            optimizer_step(softmax_head, grads["softmax"], opt["softmax"])
            if "ae" in grads:
                optimizer_step(ae_head, grads["ae"], opt["ae"])
            ce_sum += ce * batch.size
            ae_sum += ae_loss * batch.size
            total_sum += total * batch.size
        log.append(EpochStats(ce=ce_sum / n, ae=ae_sum / n, total=total_sum / n))

    return JointModel(
        encoder=encoder,
        softmax_head=softmax_head,
        ae_head=ae_head,
        config=config,
        log=log,
    )


def fit_statistics(
    model: JointModel,
    train_examples: list[Example],
    label_map: dict[str, int] | None = None,
) -> FittedScorer:
    """Discard the heads; fit means and pooled covariance on train embeddings.

    The encoder alone embeds every training sample; class means, the
    universal covariance (mode and ridge from the training config), and its
    regularized inverse become the scorer state. tau is left unset.
    """
    config = model.config
    x = extract_features(config, train_examples)
    emb = forward(model.encoder, x)[-1]
    y = np.array([ex.label for ex in train_examples], dtype=np.int64)
    if np.any(y == -1):
        raise DataError("fit_statistics received OOS examples")
    stats = fit_class_statistics(
        emb,
        y,
        class_count=config.class_count,
        mode=config.covariance_mode,
        ridge=config.ridge,
    )
    if label_map is None:
        width = max(2, len(str(config.class_count - 1)))
        label_map = {f"class_{i:0{width}d}": i for i in range(config.class_count)}
    return FittedScorer(
        encoder=model.encoder,
        statistics=stats,
        label_map=label_map,
        featurizer=config.encoder.featurizer,
        tau=None,
    )


@dataclass(frozen=True)
class SweepEntry:
    """One grid candidate's validation outcome."""

    alpha: float
    report: EvaluationReport


@dataclass(frozen=True)
class SweepResult:
    """Winning alpha plus the per-candidate reports, sorted by alpha."""

    best_alpha: float
    best_config: TrainConfig
    best_scorer: FittedScorer
    entries: list[SweepEntry]


def _sweep_workers(grid_size: int) -> int:
    env = os.environ.get(THREADS_ENV_VAR)
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
        return max(1, min(cap, grid_size))
    return 1


def sweep_alpha(
    base_config: TrainConfig,
    grid,
    train_examples: list[Example],
    validation_examples: list[Example],
    label_map: dict[str, int] | None = None,
) -> SweepResult:
    """Train one model per alpha and pick the best validation AUPR.

    Candidates run independently (optionally in parallel, capped by the
    OOSGUARD_THREADS environment variable); results are merged in ascending
    alpha order and ties break toward the smaller alpha.

    Raises:
        ConfigError: empty grid.
        DataError: validation set without both IS and OOS examples.
    """
    alphas = sorted({float(a) for a in grid})
    if not alphas:
        raise ConfigError("alpha grid is empty")
    if not any(ex.is_oos for ex in validation_examples) or not any(
        not ex.is_oos for ex in validation_examples
    ):
        raise DataError("validation set must contain both IS and OOS examples")

    def run(alpha: float) -> tuple[SweepEntry, FittedScorer]:
        config = replace(base_config, alpha=alpha)
        model = train(config, train_examples)
        scorer = fit_statistics(model, train_examples, label_map)
        report = evaluate(scorer, validation_examples)
        return SweepEntry(alpha=alpha, report=report), scorer

    workers = _sweep_workers(len(alphas))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, alphas))
    else:
        outcomes = [run(a) for a in alphas]

    entries = [entry for entry, _ in outcomes]
    best_i = 0
    for i in range(1, len(entries)):
        if entries[i].report.aupr_oos > entries[best_i].report.aupr_oos:
            best_i = i  # strict improvement only: ties keep the smaller alpha
    best_alpha = entries[best_i].alpha
    return SweepResult(
        best_alpha=best_alpha,
        best_config=replace(base_config, alpha=best_alpha),
        best_scorer=outcomes[best_i][1],
        entries=entries,
    )
