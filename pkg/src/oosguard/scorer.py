"""Inference: minimum Mahalanobis distance, candidate intent, OOS decision.

A FittedScorer is immutable after construction — score/decide are pure, so
the serving layer can share one scorer across unbounded concurrent readers.

The decision rule: a query is in-scope iff its minimum class distance d_min
is <= the threshold tau (boundary inclusive); the candidate intent is the
argmin class, ties broken toward the smallest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from oosguard.data import Example
from oosguard.errors import ConfigError, DataError
from oosguard.featurizer import HASHED_BOW, Featurizer, encode, featurize
from oosguard.linalg import ClassStatistics, mahalanobis_table
from oosguard.nn import DenseNetwork

IN_SCOPE = "in-scope"
OOS = "oos"

DEFAULT_POLICY = "is-recall@0.95"
VALID_POLICIES = ("is-recall@<r>", "f1-oos")


@dataclass(frozen=True)
class FittedScorer:
    """Deployed model state: frozen encoder plus class statistics.

    The featurizer tells the scorer how to handle raw text; a passthrough
    featurizer means only precomputed embeddings can be scored.
    """

    encoder: DenseNetwork
    statistics: ClassStatistics
    label_map: dict[str, int]
    featurizer: Featurizer
    tau: float | None = None

    def __post_init__(self):
        if self.statistics.dim != self.encoder.layer_dims[-1]:
            raise ConfigError(
                f"statistics dim {self.statistics.dim} does not match encoder "
                f"output {self.encoder.layer_dims[-1]}"
            )
        if self.tau is not None and self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")

    def label_name(self, index: int) -> str:
        for name, i in self.label_map.items():
            if i == index:
                return name
        raise DataError(f"no label with index {index}")

    def with_tau(self, tau: float) -> "FittedScorer":
        return replace(self, tau=float(tau))


@dataclass(frozen=True)
class ScoreResult:
    """Minimum distance, its class, and the full distance row."""

    d_min: float
    c_min: int
    per_class_distances: np.ndarray | None = None


@dataclass(frozen=True)
class Decision:
    """Thresholded verdict; intent is present iff in-scope."""

    verdict: str
    intent: int | None
    score: float
    threshold: float


def embed_examples(scorer: FittedScorer, examples: list[Example]) -> np.ndarray:
    """Encoder embeddings for a mixed batch of text/embedding examples."""
    feat_dim = scorer.encoder.layer_dims[0]
    features = np.zeros((len(examples), feat_dim), dtype=np.float64)
    for i, ex in enumerate(examples):
        if ex.embedding is not None:
            vec = np.asarray(ex.embedding, dtype=np.float64)
            if vec.shape != (feat_dim,):
                raise DataError(
                    f"example {i}: embedding dim {vec.shape} does not match "
                    f"encoder input {feat_dim}"
                )
            features[i] = vec
        elif ex.text is not None:
            if scorer.featurizer.kind != HASHED_BOW:
                raise DataError("text scoring unavailable: scorer has no featurizer")
            features[i] = featurize(scorer.featurizer, ex.text)
        else:
            raise DataError(f"example {i} has neither text nor embedding")
    return encode(scorer.encoder, features)


def score_batch(
    scorer: FittedScorer, embeddings: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """d_min and c_min arrays for pre-embedded queries.

    Ties in the per-class distances resolve to the smallest class index.
    """
    dists = mahalanobis_table(
        embeddings, scorer.statistics.means, scorer.statistics.precision
    )
    return dists.min(axis=1), dists.argmin(axis=1)


def score(scorer: FittedScorer, query) -> ScoreResult:
    """Score one query: raw text, a feature/embedding vector, or an Example."""
    if isinstance(query, Example):
        example = query
    elif isinstance(query, str):
        example = Example(label=0, text=query)
    else:
        example = Example(label=0, embedding=np.asarray(query, dtype=np.float32))
    emb = embed_examples(scorer, [example])
    dists = mahalanobis_table(
        emb, scorer.statistics.means, scorer.statistics.precision
    )[0]
    c_min = int(dists.argmin())
    return ScoreResult(d_min=float(dists[c_min]), c_min=c_min, per_class_distances=dists)


def decide(result: ScoreResult, tau: float) -> Decision:
    """Apply the threshold: in-scope iff d_min <= tau (boundary inclusive)."""
    if tau < 0:
        raise ConfigError(f"tau must be >= 0, got {tau}")
    if result.d_min <= tau:
        return Decision(
            verdict=IN_SCOPE, intent=result.c_min, score=result.d_min, threshold=tau
        )
    return Decision(verdict=OOS, intent=None, score=result.d_min, threshold=tau)


def parse_policy(policy: str) -> tuple[str, float | None]:
    """Parse a calibration policy string.

    Accepts "is-recall@<r>" with r in (0, 1], or "f1-oos".
    """
    if policy == "f1-oos":
        return "f1-oos", None
    if policy.startswith("is-recall@"):
        try:
            r = float(policy.split("@", 1)[1])
        except ValueError:
            r = -1.0
        if 0.0 < r <= 1.0:
            return "is-recall", r
    raise ConfigError(
        f"unknown calibration policy {policy!r}; valid policies: "
        + ", ".join(VALID_POLICIES)
    )


def calibrate_threshold(
    scorer: FittedScorer, validation: list[Example], policy: str = DEFAULT_POLICY
) -> float:
    """Pick tau from validation distances under the named policy.

    is-recall@r: tau is the r-quantile (linear interpolation) of the
    in-scope validation d_min values, fixing the in-scope false-reject rate.
    f1-oos: tau maximizing OOS F1, searched over the midpoints between
    consecutive distinct sorted distances.

    Raises:
        DataError: fewer than 20 in-scope examples (is-recall), or a missing
            class (f1-oos).
    """
    kind, r = parse_policy(policy)
    emb = embed_examples(scorer, validation)
    d_min, _ = score_batch(scorer, emb)
    is_mask = np.array([not ex.is_oos for ex in validation], dtype=bool)

    if kind == "is-recall":
        is_d = d_min[is_mask]
        if is_d.size < 20:
            raise DataError(
                f"is-recall calibration needs >= 20 in-scope examples, got {is_d.size}"
            )
        return float(np.quantile(is_d, r))

    n_oos = int((~is_mask).sum())
    if n_oos == 0 or int(is_mask.sum()) == 0:
        raise DataError("f1-oos calibration needs both IS and OOS examples")
    distinct = np.unique(d_min)
    if distinct.size < 2:
        # every distance equal: any tau on either side; keep that distance
        return float(distinct[0])
    candidates = (distinct[:-1] + distinct[1:]) / 2.0
    best_tau = float(candidates[0])
    best_f1 = -1.0
    oos_mask = ~is_mask
    for tau in candidates:
        predicted_oos = d_min > tau
        tp = int(np.sum(predicted_oos & oos_mask))
        fp = int(np.sum(predicted_oos & is_mask))
        fn = n_oos - tp
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        if f1 > best_f1:
            best_f1 = f1
            best_tau = float(tau)
    return best_tau
