"""Text featurization and the trainable encoder's input side.

Two routes produce encoder inputs: a deterministic signed hashed bag-of-words
for raw text (desk-scale stand-in for a frozen transformer tokenizer), and a
passthrough for precomputed sentence embeddings arriving via the EMB1 file
format. Hashing uses keyed blake2b, so equal (text, config) pairs give
bit-identical vectors on every platform.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from oosguard.errors import ConfigError, DataError
from oosguard.nn import DenseNetwork, forward

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

HASHED_BOW = "hashed-bow"
PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class Featurizer:
    """How raw inputs become encoder-input vectors.

    kind "hashed-bow" hashes normalized tokens into `dim` signed buckets;
    kind "passthrough" expects callers to supply `dim`-sized vectors directly
    (precomputed embeddings) and cannot featurize text.
    """

    kind: str = HASHED_BOW
    dim: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (HASHED_BOW, PASSTHROUGH):
            raise ConfigError(f"unknown featurizer kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigError(f"featurizer dim must be positive, got {self.dim}")


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the trainable encoder: featurizer -> hidden layers -> d."""

    featurizer: Featurizer = Featurizer()
    hidden_dims: tuple[int, ...] = (256, 128)
    embedding_dim: int = 64

    def __post_init__(self):
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding dim must be positive, got {self.embedding_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError(f"invalid hidden dims {self.hidden_dims}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.featurizer.dim, *self.hidden_dims, self.embedding_dim)


def _token_hash(token: str, seed: int) -> int:
    key = int(seed).to_bytes(8, "little", signed=True)
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")


def featurize(f: Featurizer, text: str) -> np.ndarray:
    """Signed hashed bag-of-words vector for one string.

    Lowercases, splits on non-alphanumeric runs, hashes each token into one
    of `dim` buckets with a +/-1 sign taken from a separate hash bit, and
    L2-normalizes. Empty text gives the zero vector.

    Returns:
        (dim,) float32 vector with unit L2 norm (or all zeros).
    """
    if f.kind != HASHED_BOW:
        raise ConfigError("passthrough featurizer cannot featurize text")
    vec = np.zeros(f.dim, dtype=np.float64)
    for token in _TOKEN_SPLIT.split(text.lower()):
        if not token:
            continue
        h = _token_hash(token, f.seed)
        bucket = h % f.dim
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[bucket] += sign
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec.astype(np.float32)


def featurize_batch(f: Featurizer, texts) -> np.ndarray:
    """Stack featurize() over a sequence of strings into (n, dim) float32."""
    out = np.zeros((len(texts), f.dim), dtype=np.float32)
    for i, text in enumerate(texts):
        out[i] = featurize(f, text)
    return out


def encode(encoder: DenseNetwork, features: np.ndarray) -> np.ndarray:
    """Embeddings for a feature batch: the encoder's final activation.

    Accepts (n, feat_dim) or a single (feat_dim,) vector; always returns a
    2-D (n, d) float64 array.
    """
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    if x.shape[1] != encoder.layer_dims[0]:
        raise DataError(
            f"feature dim {x.shape[1]} does not match encoder input "
            f"{encoder.layer_dims[0]}"
        )
    return forward(encoder, x)[-1]
