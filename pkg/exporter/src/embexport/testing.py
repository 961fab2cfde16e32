"""Test helpers: build a tiny deterministic encoder for offline runs.

The sandbox has no model-hub access, so tests construct a miniature BERT
with seeded random weights and a word-level vocabulary on disk; any
`from_pretrained`-style consumer can then load it by local path.
"""

from __future__ import annotations

from pathlib import Path

_BASE_VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def make_tiny_encoder(
    path,
    hidden_size: int = 16,
    seed: int = 0,
    vocab_words=(),
) -> Path:
    """Write a loadable miniature BERT checkpoint + tokenizer into `path`.

    Args:
        hidden_size: encoder width (must be divisible by 2 attention heads).
        seed: torch seed for the weight initialization.
        vocab_words: extra whole words for the tokenizer vocabulary; words
            outside it fall back to character wordpieces.

    Returns:
        The directory path, usable as a model identifier.
    """
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    letters = list("abcdefghijklmnopqrstuvwxyz0123456789")
    vocab = (
        _BASE_VOCAB
        + sorted({w.lower() for w in vocab_words} - set(_BASE_VOCAB))
        + letters
        + ["##" + c for c in letters]
    )
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=2 * hidden_size,
        max_position_embeddings=128,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(path)
    BertTokenizer(str(vocab_file)).save_pretrained(path)
    return path
