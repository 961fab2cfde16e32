"""EMB1 binary writer.

Layout (little-endian): 4-byte ASCII magic "EMB1", u32 version (= 1),
u32 dim, u64 record count, then per record a u32 label index
(0xFFFFFFFF = out-of-scope sentinel) followed by dim float32 values.
A "<file>.labels.json" sidecar maps index -> label string.

Label mapping rule: the reserved label string "oos" becomes the sentinel;
all other labels are indexed in sorted order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
OOS_SENTINEL = 0xFFFFFFFF
OOS_LABEL_STRING = "oos"


def build_label_map(labels) -> dict[str, int]:
    """Sorted dense index over the distinct non-"oos" labels."""
    names = sorted({l for l in labels if l != OOS_LABEL_STRING})
    return {name: i for i, name in enumerate(names)}


def write_emb(path, embeddings: np.ndarray, labels, label_map: dict[str, int]) -> None:
    """Write records atomically (temp file + rename) with the label sidecar.

    Args:
        embeddings: (n, dim) array, stored as float32.
        labels: n label strings ("oos" marks out-of-scope records).
        label_map: mapping produced by build_label_map.

    Raises:
        ValueError: shape problems, non-finite values (named by record), or
            a label missing from the map.
    """
    emb = np.ascontiguousarray(embeddings, dtype="<f4")
    if emb.ndim != 2 or emb.shape[0] != len(labels):
        raise ValueError(
            f"embeddings shape {emb.shape} does not match {len(labels)} labels"
        )
    n, dim = emb.shape
    if n == 0:
        raise ValueError("refusing to write an empty EMB1 file")

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(EMB_MAGIC)
            fh.write(struct.pack("<IIQ", EMB_VERSION, dim, n))
            for i, label in enumerate(labels):
                if not np.all(np.isfinite(emb[i])):
                    raise ValueError(f"record {i} contains non-finite values")
                if label == OOS_LABEL_STRING:
                    raw = OOS_SENTINEL
                elif label in label_map:
                    raw = label_map[label]
                else:
                    raise ValueError(f"record {i} label {label!r} not in label map")
                fh.write(struct.pack("<I", raw))
                fh.write(emb[i].tobytes())
        tmp.replace(path)
    finally:
        tmp.unlink(missing_ok=True)

    sidecar = Path(str(path) + ".labels.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({str(v): k for k, v in label_map.items()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
