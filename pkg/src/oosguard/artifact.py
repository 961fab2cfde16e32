"""Persisted model artifacts: versioned framed binary, atomic writes.

Layout (little-endian):
    bytes 0-3   ASCII magic "OOS1"
    bytes 4-7   u32 format version (= 1)
    bytes 8-15  u64 header length
    header      UTF-8 JSON: featurizer config, encoder layer dims, label
                map, tau, statistics metadata, training provenance, and an
                array manifest (name + shape per array)
    arrays      float64 values, contiguous, in manifest order

Statistics and encoder parameters are stored at full 64-bit precision, so a
saved-then-loaded scorer reproduces in-memory scores exactly. Writes go
through a temp file + rename so a crash never leaves a corrupt artifact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from oosguard.errors import ConfigError
from oosguard.featurizer import Featurizer
from oosguard.linalg import ClassStatistics
from oosguard.nn import DenseNetwork
from oosguard.scorer import FittedScorer

ARTIFACT_MAGIC = b"OOS1"
ARTIFACT_VERSION = 1


@dataclass
class ModelArtifact:
    """Everything needed to rebuild a FittedScorer, plus provenance."""

    scorer: FittedScorer
    provenance: dict = field(default_factory=dict)
    version: int = ARTIFACT_VERSION


def _arrays_of(scorer: FittedScorer) -> list[tuple[str, np.ndarray]]:
    arrays: list[tuple[str, np.ndarray]] = []
    for i, (w, b) in enumerate(zip(scorer.encoder.weights, scorer.encoder.biases)):
        arrays.append((f"encoder.w{i}", w))
        arrays.append((f"encoder.b{i}", b))
    arrays.append(("means", scorer.statistics.means))
    arrays.append(("covariance", scorer.statistics.covariance))
    arrays.append(("precision", scorer.statistics.precision))
    return arrays


def save_artifact(path, artifact: ModelArtifact) -> None:
    """Serialize to `path` atomically (write temp, then rename)."""
    scorer = artifact.scorer
    arrays = _arrays_of(scorer)
    header = {
        "featurizer": {
            "kind": scorer.featurizer.kind,
            "dim": scorer.featurizer.dim,
            "seed": scorer.featurizer.seed,
        },
        "encoder": {
            "layer_dims": list(scorer.encoder.layer_dims),
            "hidden_activation": scorer.encoder.hidden_activation,
            "output_activation": scorer.encoder.output_activation,
        },
        "label_map": scorer.label_map,
        "tau": scorer.tau,
        "statistics": {
            "class_count": scorer.statistics.class_count,
            "dim": scorer.statistics.dim,
            "ridge_used": scorer.statistics.ridge_used,
        },
        "provenance": artifact.provenance,
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(ARTIFACT_MAGIC)
        fh.write(struct.pack("<IQ", artifact.version, len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    tmp.replace(path)


def load_artifact(path) -> ModelArtifact:
    """Read and validate an artifact file.

    Raises:
        ConfigError: bad magic, unsupported version, truncation, shape or
            finiteness violations.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != ARTIFACT_MAGIC:
        raise ConfigError(f"{path}: not a model artifact (bad magic)")
    version, header_len = struct.unpack_from("<IQ", blob, 4)
    if version != ARTIFACT_VERSION:
        raise ConfigError(
            f"{path}: artifact version {version} unsupported (expected {ARTIFACT_VERSION})"
        )
    if len(blob) < 16 + header_len:
        raise ConfigError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16 : 16 + header_len])
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: corrupt header ({err.msg})")

    offset = 16 + header_len
    loaded: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise ConfigError(f"{path}: truncated array {entry['name']}")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise ConfigError(f"{path}: array {entry['name']} has non-finite values")
        loaded[entry["name"]] = arr.copy()
        offset = end
    if offset != len(blob):
        raise ConfigError(f"{path}: {len(blob) - offset} trailing bytes")

    enc_meta = header["encoder"]
    dims = tuple(enc_meta["layer_dims"])
    weights, biases = [], []
    for i in range(len(dims) - 1):
        w = loaded[f"encoder.w{i}"]
        b = loaded[f"encoder.b{i}"]
        if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
            raise ConfigError(f"{path}: encoder layer {i} shape mismatch")
        weights.append(w)
        biases.append(b)
    encoder = DenseNetwork(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=enc_meta["hidden_activation"],
        output_activation=enc_meta["output_activation"],
    )

    stats_meta = header["statistics"]
    statistics = ClassStatistics(
        class_count=int(stats_meta["class_count"]),
        dim=int(stats_meta["dim"]),
        means=loaded["means"],
        covariance=loaded["covariance"],
        precision=loaded["precision"],
        ridge_used=float(stats_meta["ridge_used"]),
    )
    fz = header["featurizer"]
    scorer = FittedScorer(
        encoder=encoder,
        statistics=statistics,
        label_map={k: int(v) for k, v in header["label_map"].items()},
        featurizer=Featurizer(kind=fz["kind"], dim=int(fz["dim"]), seed=int(fz["seed"])),
        tau=None if header["tau"] is None else float(header["tau"]),
    )
    return ModelArtifact(
        scorer=scorer, provenance=header.get("provenance", {}), version=version
    )
