"""Class statistics and Mahalanobis geometry.

The numeric bedrock shared by training and inference: per-class mean vectors,
a single pooled covariance over all classes, its ridge-regularized inverse,
and the whitened distance computed from them. Everything here accumulates in
float64 even when the stored embeddings are float32 — covariance estimates in
high dimension are precision-sensitive.

All functions are pure; returned arrays are freshly allocated and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from oosguard.errors import DataError, NumericError

# Negative quadratic forms beyond this are treated as a broken precision
# matrix rather than round-off from the factorized inverse.
_QUADFORM_CLAMP = -1e-9

# lambda_auto = _AUTO_RIDGE_SCALE * trace(sigma) / dim when no ridge is given.
_AUTO_RIDGE_SCALE = 1e-6
# Absolute fallback when trace(sigma) is zero (e.g. degenerate single-point
# classes), where a scale-relative ridge would also be zero.
_AUTO_RIDGE_FLOOR = 1e-6


def _as_samples(embeddings) -> np.ndarray:
    """Stack embeddings into an (n, d) float64 matrix, checking finiteness."""
    try:
        x = np.asarray(embeddings, dtype=np.float64)
    except ValueError:
        raise DataError("embeddings have inconsistent dimensions")
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] == 0:
        raise DataError(f"expected a sequence of vectors, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("embeddings contain non-finite values")
    return x


def class_means(embeddings, labels, class_count: int | None = None) -> np.ndarray:
    """Arithmetic mean embedding of each class.

    Args:
        embeddings: sequence of d-dimensional vectors, one per sample.
        labels: class index (0..C-1) per sample.
        class_count: number of classes C; inferred as max(label)+1 if omitted.

    Returns:
        (C, d) float64 array of per-class means.

    Raises:
        DataError: on empty classes (names the class), label out of range,
            or inconsistent dimensions.
    """
    x = _as_samples(embeddings)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise DataError(
            f"got {x.shape[0]} embeddings but {y.size} labels"
        )
    if y.size == 0:
        raise DataError("no samples given")
    if y.min() < 0:
        raise DataError(f"negative class index {y.min()}")
    c = int(class_count) if class_count is not None else int(y.max()) + 1
    if y.max() >= c:
        raise DataError(f"label {y.max()} out of range for {c} classes")

    means = np.zeros((c, x.shape[1]), dtype=np.float64)
    counts = np.bincount(y, minlength=c)
    for j in range(c):
        if counts[j] == 0:
            raise DataError(f"class {j} has no samples")
        means[j] = x[y == j].mean(axis=0)
    return means


def shared_covariance(
    embeddings,
    labels,
    means: np.ndarray,
    mode: str = "class-centered",
    bessel: bool = False,
) -> np.ndarray:
    """Single covariance matrix pooled over every class.

    In "class-centered" mode (the default) each sample is centered by its own
    class mean before the outer-product sum — the standard pooled-within-class
    construction for Mahalanobis scoring. In "global-centered" mode all
    samples are centered by their single global mean instead.

    Normalization divides by N (plug-in / maximum-likelihood convention);
    pass bessel=True for N-1.

    Returns:
        (d, d) float64 symmetric matrix.

    Raises:
        DataError: fewer than 2 samples, unknown mode, or shape mismatch.
    """
    x = _as_samples(embeddings)
    n, d = x.shape
    if n < 2:
        raise DataError(f"need at least 2 samples for a covariance, got {n}")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise DataError(f"got {n} embeddings but {y.size} labels")

    if mode == "class-centered":
        mu = np.asarray(means, dtype=np.float64)
        if mu.ndim != 2 or mu.shape[1] != d:
            raise DataError(
                f"means shape {mu.shape} inconsistent with dim {d}"
            )
        if y.max() >= mu.shape[0] or y.min() < 0:
            raise DataError("label out of range for the given means")
        centered = x - mu[y]
    elif mode == "global-centered":
        centered = x - x.mean(axis=0)
    else:
        raise DataError(f"unknown covariance mode {mode!r}")

    denom = n - 1 if bessel else n
    sigma = centered.T @ centered / denom
    # BLAS can leave asymmetry at the last-ulp level; force exact symmetry.
    return (sigma + sigma.T) / 2.0


def regularized_inverse(sigma: np.ndarray, ridge: float = 0.0) -> tuple[np.ndarray, float]:
    """Invert sigma + lambda*I through a Cholesky factorization.

    lambda is `ridge` when positive, otherwise the automatic scale-relative
    default 1e-6 * trace(sigma)/d (with an absolute floor of 1e-6 when the
    trace itself is zero). If the factorization fails, lambda is escalated by
    x100 twice before giving up.

    Returns:
        (precision, lambda_used) with precision exactly symmetric.

    Raises:
        DataError: sigma not square/symmetric or ridge < 0.
        NumericError: factorization fails even after escalation.
    """
    s = np.asarray(sigma, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DataError(f"covariance must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise DataError("covariance contains non-finite values")
    scale = max(np.abs(s).max(), 1.0)
    if np.abs(s - s.T).max() > 1e-9 * scale:
        raise DataError("covariance is not symmetric")
    if ridge < 0:
        raise DataError(f"ridge must be >= 0, got {ridge}")

    d = s.shape[0]
    if ridge > 0:
        lam = float(ridge)
    else:
        lam = _AUTO_RIDGE_SCALE * float(np.trace(s)) / d
        if lam <= 0.0:
            lam = _AUTO_RIDGE_FLOOR

    eye = np.eye(d)
    last_err: Exception | None = None
    for _ in range(3):  # initial attempt + two x100 escalations
        try:
            factor = cho_factor(s + lam * eye, lower=True)
            precision = cho_solve(factor, eye)
            precision = (precision + precision.T) / 2.0
            return precision, lam
        except np.linalg.LinAlgError as err:  # pragma: no cover - rare path
            last_err = err
            lam *= 100.0
    raise NumericError(
        f"covariance factorization failed even at ridge {lam / 100.0:g}: {last_err}"
    )


def mahalanobis(s, mu, precision: np.ndarray) -> float:
    """Whitened distance sqrt((s-mu)^T P (s-mu)).

    Tiny negative quadratic forms (round-off from the factorized inverse) are
    clamped to zero; anything below -1e-9 means P is not positive
    semi-definite and raises.
    """
    sv = np.asarray(s, dtype=np.float64).ravel()
    mv = np.asarray(mu, dtype=np.float64).ravel()
    p = np.asarray(precision, dtype=np.float64)
    if sv.shape != mv.shape or p.shape != (sv.size, sv.size):
        raise DataError(
            f"dimension mismatch: s {sv.shape}, mu {mv.shape}, precision {p.shape}"
        )
    diff = sv - mv
    q = float(diff @ p @ diff)
    if q < _QUADFORM_CLAMP:
        raise NumericError(
            f"quadratic form {q:g} is negative beyond round-off; "
            "precision matrix is not PSD"
        )
    return float(np.sqrt(max(q, 0.0)))


def mahalanobis_table(x: np.ndarray, means: np.ndarray, precision: np.ndarray) -> np.ndarray:
    """Distances from each of n samples to each of C class means.

    Vectorized batch form of mahalanobis(); same clamping rules.

    Returns:
        (n, C) float64 array.
    """
    xs = _as_samples(x)
    mu = np.asarray(means, dtype=np.float64)
    p = np.asarray(precision, dtype=np.float64)
    if mu.ndim != 2 or mu.shape[1] != xs.shape[1]:
        raise DataError(f"means shape {mu.shape} inconsistent with dim {xs.shape[1]}")
    if p.shape != (xs.shape[1], xs.shape[1]):
        raise DataError(f"precision shape {p.shape} inconsistent with dim {xs.shape[1]}")

    out = np.empty((xs.shape[0], mu.shape[0]), dtype=np.float64)
    for j in range(mu.shape[0]):
        diff = xs - mu[j]
        q = np.einsum("nd,dk,nk->n", diff, p, diff)
        if q.min() < _QUADFORM_CLAMP:
            raise NumericError(
                f"quadratic form {q.min():g} is negative beyond round-off; "
                "precision matrix is not PSD"
            )
        out[:, j] = np.sqrt(np.maximum(q, 0.0))
    return out


@dataclass(frozen=True)
class ClassStatistics:
    """Deployed scorer state: per-class means plus one shared covariance.

    Attributes:
        class_count: number of classes C (>= 2).
        dim: embedding dimension d.
        means: (C, d) per-class mean vectors.
        covariance: (d, d) pooled covariance.
        precision: (d, d) regularized inverse of the covariance.
        ridge_used: the lambda actually added to the diagonal before
            inversion.
    """

    class_count: int
    dim: int
    means: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    ridge_used: float

    def __post_init__(self):
        if self.class_count < 2:
            raise DataError(f"need at least 2 classes, got {self.class_count}")
        if self.means.shape != (self.class_count, self.dim):
            raise DataError(f"means shape {self.means.shape} inconsistent")
        for name, m in (("covariance", self.covariance), ("precision", self.precision)):
            if m.shape != (self.dim, self.dim):
                raise DataError(f"{name} shape {m.shape} inconsistent with dim {self.dim}")
            scale = max(np.abs(m).max(), 1.0)
            if np.abs(m - m.T).max() > 1e-9 * scale:
                raise DataError(f"{name} is not symmetric")
        if self.ridge_used < 0:
            raise DataError("ridge_used must be >= 0")


def fit_class_statistics(
    embeddings,
    labels,
    class_count: int | None = None,
    mode: str = "class-centered",
    ridge: float = 0.0,
) -> ClassStatistics:
    """Fit means, pooled covariance, and regularized precision in one call."""
    means = class_means(embeddings, labels, class_count)
    sigma = shared_covariance(embeddings, labels, means, mode=mode)
    precision, lam = regularized_inverse(sigma, ridge)
    return ClassStatistics(
        class_count=means.shape[0],
        dim=means.shape[1],
        means=means,
        covariance=sigma,
        precision=precision,
        ridge_used=lam,
    )
