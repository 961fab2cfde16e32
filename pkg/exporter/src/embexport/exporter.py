"""Batch inference: JSONL corpus -> pooled sentence embeddings -> EMB1."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from embexport.emb_format import build_label_map, write_emb


class ExportError(RuntimeError):
    """Model resolution or inference failure."""


class CorpusError(ValueError):
    """Malformed input corpus."""


@dataclass(frozen=True)
class ExportConfig:
    """One export run.

    pooling "max" takes the per-dimension maximum over non-padding token
    states (the default); "mean" averages over non-padding tokens.
    """

    model: str
    input_path: str
    output_path: str
    pooling: str = "max"
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.pooling not in ("max", "mean"):
            raise ExportError(f"unknown pooling {self.pooling!r}; use max or mean")
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")


def read_corpus(path) -> tuple[list[str], list[str]]:
    """Read {"text", "label"} JSONL rows, preserving order."""
    texts: list[str] = []
    labels: list[str] = []
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"input corpus not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}: line {lineno}: invalid JSON ({err.msg})")
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str) \
                    or not isinstance(obj.get("label"), str):
                raise CorpusError(
                    f"{path}: line {lineno}: expected string 'text' and 'label' fields"
                )
            texts.append(obj["text"])
            labels.append(obj["label"])
    if not texts:
        raise CorpusError(f"{path}: corpus is empty")
    return texts, labels


def _load_encoder(model_id: str, device: str):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as err:
        raise ExportError(f"could not resolve model {model_id!r}: {err}")
    model.to(device)
    model.eval()
    return tokenizer, model


def _pool(hidden: torch.Tensor, mask: torch.Tensor, pooling: str) -> torch.Tensor:
    """Pool token states over the non-padding positions."""
    if pooling == "max":
        neg = torch.finfo(hidden.dtype).min
        masked = hidden.masked_fill(mask.unsqueeze(-1) == 0, neg)
        return masked.max(dim=1).values
    counts = mask.sum(dim=1, keepdim=True).clamp(min=1)
    summed = (hidden * mask.unsqueeze(-1)).sum(dim=1)
    return summed / counts


def embed_texts(config: ExportConfig, texts: list[str]) -> np.ndarray:
    """Pooled embeddings in input order.

    Each distinct string is embedded exactly once and reused for every
    occurrence, so identical inputs always yield identical records no
    matter how batches fall.
    """
    tokenizer, model = _load_encoder(config.model, config.device)
    unique: list[str] = []
    seen: dict[str, int] = {}
    for t in texts:
        if t not in seen:
            seen[t] = len(unique)
            unique.append(t)

    chunks: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(unique), config.batch_size):
            batch = unique[start : start + config.batch_size]
            enc = tokenizer(
                batch, padding=True, truncation=True, return_tensors="pt"
            ).to(config.device)
            hidden = model(**enc).last_hidden_state
            pooled = _pool(hidden, enc["attention_mask"], config.pooling)
            chunks.append(pooled.cpu().to(torch.float32).numpy())
    table = np.concatenate(chunks, axis=0)
    return table[[seen[t] for t in texts]]


def export(config: ExportConfig) -> Path:
    """Run the export; returns the output path.

    One record per input line, order-preserving; the embedding width comes
    from the encoder's hidden size. Output is written atomically, so a
    failed run leaves no partial file.
    """
    texts, labels = read_corpus(config.input_path)
    embeddings = embed_texts(config, texts)
    label_map = build_label_map(labels)
    out = Path(config.output_path)
    write_emb(out, embeddings, labels, label_map)
    return out
