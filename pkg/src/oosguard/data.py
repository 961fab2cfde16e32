"""Dataset ingestion, split construction, and the EMB1 embedding format.

Covers the whole data side of the pipeline: JSONL text corpora, the binary
EMB1 embedding file format (bit-exact round trips), the two split procedures
used by the benchmarks (coverage-threshold label splitting and designated
OOS-domain splitting), and a synthetic Gaussian-cluster generator for desk
runs.

Conventions:
    - In-scope labels are dense indices 0..C-1; out-of-scope is OOS_LABEL.
    - The reserved label string "oos" always denotes out-of-scope and never
      enters a label map.
    - Train splits never contain OOS examples.
    - Exact duplicate inputs are collapsed before splitting so that no
      content can appear in two splits; the dropped count is recorded in the
      bundle provenance.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from oosguard.errors import ConfigError, DataError

OOS_LABEL = -1
OOS_LABEL_STRING = "oos"

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
_OOS_SENTINEL = 0xFFFFFFFF

DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)

# Generator streams for the synthetic benchmark (independent of nn streams).
_STREAM_PLACEMENT = 10
_STREAM_SAMPLES = 11
_STREAM_OOS = 12
_STREAM_SPLIT = 13


@dataclass
class Example:
    """One labeled input: raw text, a precomputed embedding, or both.

    label is a dense in-scope index or OOS_LABEL. Embeddings are stored
    float32; downstream math promotes to float64.
    """

    label: int
    text: str | None = None
    embedding: np.ndarray | None = None

    @property
    def is_oos(self) -> bool:
        return self.label == OOS_LABEL


@dataclass
class TextDataset:
    """A flat labeled corpus prior to any split."""

    examples: list[Example]
    label_map: dict[str, int]

    @property
    def label_names(self) -> list[str]:
        inv = {v: k for k, v in self.label_map.items()}
        return [inv[i] for i in range(len(inv))]


@dataclass
class DatasetBundle:
    """Train / validation / test splits with a shared label map.

    Invariants (enforced by verify_bundle): the train split is IS-only,
    label indices are dense, and no input content appears in two splits.
    """

    train: list[Example]
    validation: list[Example]
    test: list[Example]
    label_map: dict[str, int]
    provenance: dict = field(default_factory=dict)


def content_hash(example: Example) -> bytes:
    """Digest of the example's input content (text or embedding payload).

    Deliberately ignores the label: identical inputs in two splits are
    leakage no matter how they are labeled.
    """
    h = hashlib.blake2b(digest_size=16)
    if example.text is not None:
        h.update(b"t")
        h.update(example.text.encode("utf-8"))
    elif example.embedding is not None:
        h.update(b"e")
        h.update(np.ascontiguousarray(example.embedding, dtype=np.float32).tobytes())
    else:
        raise DataError("example has neither text nor embedding")
    return h.digest()


def dataset_fingerprint(examples) -> str:
    """Order-sensitive hex digest over example contents and labels."""
    h = hashlib.blake2b(digest_size=16)
    for ex in examples:
        h.update(content_hash(ex))
        h.update(int(ex.label).to_bytes(8, "little", signed=True))
    return h.hexdigest()


def verify_bundle(bundle: DatasetBundle) -> None:
    """Raise DataError if any DatasetBundle invariant is violated."""
    for ex in bundle.train:
        if ex.is_oos:
            raise DataError("train split contains an OOS example")
    indices = sorted(bundle.label_map.values())
    if indices != list(range(len(indices))):
        raise DataError(f"label indices not dense: {indices}")
    seen: dict[bytes, str] = {}
    for name, split in (
        ("train", bundle.train),
        ("validation", bundle.validation),
        ("test", bundle.test),
    ):
        for ex in split:
            digest = content_hash(ex)
            if digest in seen and seen[digest] != name:
                raise DataError(
                    f"content appears in both {seen[digest]} and {name} splits"
                )
            seen[digest] = name


# ---------------------------------------------------------------------------
# JSONL ingestion
# ---------------------------------------------------------------------------


def read_jsonl_dataset(path) -> TextDataset:
    """Read a JSONL corpus of {"text": ..., "label": ...} objects.

    Example order is preserved. The label map is built over the distinct
    non-"oos" label strings in sorted order; the reserved string "oos" maps
    to OOS_LABEL.

    Raises:
        DataError: empty file, or a malformed line (named by 1-based line
            number): invalid JSON, missing/mistyped "text" or "label".
    """
    path = Path(path)
    rows: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({err.msg})")
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno}: expected a JSON object")
            for key in ("text", "label"):
                if key not in obj:
                    raise DataError(f"{path}: line {lineno}: missing {key!r} field")
                if not isinstance(obj[key], str):
                    raise DataError(f"{path}: line {lineno}: {key!r} must be a string")
            rows.append((obj["text"], obj["label"]))
    if not rows:
        raise DataError(f"{path}: dataset is empty")

    names = sorted({label for _, label in rows if label != OOS_LABEL_STRING})
    label_map = {name: i for i, name in enumerate(names)}
    examples = [
        Example(
            label=OOS_LABEL if label == OOS_LABEL_STRING else label_map[label],
            text=text,
        )
        for text, label in rows
    ]
    return TextDataset(examples=examples, label_map=label_map)


def write_jsonl_dataset(path, examples, label_map: dict[str, int]) -> None:
    """Write text examples back out as JSONL; OOS becomes the "oos" label."""
    inv = {v: k for k, v in label_map.items()}
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            if ex.text is None:
                raise DataError("cannot write an embedding-typed example as JSONL")
            label = OOS_LABEL_STRING if ex.is_oos else inv[ex.label]
            fh.write(json.dumps({"text": ex.text, "label": label}) + "\n")


# ---------------------------------------------------------------------------
# EMB1 binary format
# ---------------------------------------------------------------------------
#
# Layout (little-endian throughout):
#   bytes 0-3   ASCII magic "EMB1"
#   bytes 4-7   u32 version (= 1)
#   bytes 8-11  u32 dim
#   bytes 12-19 u64 record count
#   then per record: u32 label index (0xFFFFFFFF = OOS), dim x IEEE-754
#   binary32 values.
# Sidecar "<file>.labels.json" maps index -> label string.


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".labels.json")


def write_emb(path, examples, label_map: dict[str, int]) -> None:
    """Write embedding-typed examples to an EMB1 file plus label sidecar.

    Raises:
        DataError: missing embeddings, inconsistent dims, non-finite values
            (named by record index), or labels outside the map.
    """
    exs = list(examples)
    if not exs:
        raise DataError("refusing to write an empty EMB1 file")
    dims = set()
    for i, ex in enumerate(exs):
        if ex.embedding is None:
            raise DataError(f"record {i} has no embedding")
        dims.add(int(np.asarray(ex.embedding).shape[-1]))
    if len(dims) != 1:
        raise DataError(f"inconsistent embedding dims: {sorted(dims)}")
    dim = dims.pop()
    n_classes = len(label_map)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<IIQ", EMB_VERSION, dim, len(exs)))
        for i, ex in enumerate(exs):
            vec = np.ascontiguousarray(ex.embedding, dtype=np.float32)
            if not np.all(np.isfinite(vec)):
                raise DataError(f"record {i} contains non-finite values")
            if ex.is_oos:
                raw = _OOS_SENTINEL
            elif 0 <= ex.label < n_classes:
                raw = ex.label
            else:
                raise DataError(f"record {i} label {ex.label} outside label map")
            fh.write(struct.pack("<I", raw))
            fh.write(vec.tobytes())
    tmp.replace(path)

    inv = {str(v): k for k, v in label_map.items()}
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(inv, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_emb(path) -> tuple[list[Example], dict[str, int]]:
    """Read an EMB1 file and its label sidecar.

    The float32 payload is returned bit-exactly as written.

    Raises:
        DataError: bad magic or version, truncation, non-finite values (named
            by record index), missing or inconsistent sidecar.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 20:
        raise DataError(f"{path}: truncated header")
    if blob[:4] != EMB_MAGIC:
        if blob[:3] == EMB_MAGIC[:3]:
            raise DataError(f"{path}: unsupported EMB version tag {blob[:4]!r}")
        raise DataError(f"{path}: bad magic {blob[:4]!r}")
    version, dim, count = struct.unpack_from("<IIQ", blob, 4)
    if version != EMB_VERSION:
        raise DataError(f"{path}: unsupported EMB version {version}")
    if dim == 0:
        raise DataError(f"{path}: zero dim")
    record_size = 4 + 4 * dim
    expected = 20 + record_size * count
    if len(blob) != expected:
        raise DataError(
            f"{path}: expected {expected} bytes for {count} records, got {len(blob)}"
        )

    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise DataError(f"{path}: missing label sidecar {sidecar.name}")
    with open(sidecar, "r", encoding="utf-8") as fh:
        inv = json.load(fh)
    label_map = {name: int(idx) for idx, name in inv.items()}

    examples: list[Example] = []
    offset = 20
    for i in range(count):
        (raw,) = struct.unpack_from("<I", blob, offset)
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset + 4).copy()
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{path}: record {i} contains non-finite values")
        if raw == _OOS_SENTINEL:
            label = OOS_LABEL
        elif raw < len(label_map):
            label = int(raw)
        else:
            raise DataError(f"{path}: record {i} label {raw} outside sidecar map")
        examples.append(Example(label=label, embedding=vec))
        offset += record_size
    return examples, label_map


# ---------------------------------------------------------------------------
# Split procedures
# ---------------------------------------------------------------------------


def _dedupe(examples: list[Example]) -> tuple[list[Example], int]:
    """Drop exact duplicate inputs, keeping first occurrences."""
    seen: set[bytes] = set()
    kept: list[Example] = []
    for ex in examples:
        digest = content_hash(ex)
        if digest in seen:
            continue
        seen.add(digest)
        kept.append(ex)
    return kept, len(examples) - len(kept)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _stratified_is_split(
    examples: list[Example],
    rng: np.random.Generator,
    ratios: tuple[float, float, float],
) -> tuple[list[Example], list[Example], list[Example]]:
    """Per-label shuffled split keeping each split within +-1 of the ratios."""
    r_train, r_val, r_test = ratios
    if abs(r_train + r_val + r_test - 1.0) > 1e-9 or min(ratios) < 0:
        raise ConfigError(f"split ratios must be nonnegative and sum to 1: {ratios}")
    by_label: dict[int, list[Example]] = {}
    for ex in examples:
        by_label.setdefault(ex.label, []).append(ex)
    train: list[Example] = []
    val: list[Example] = []
    test: list[Example] = []
    for label in sorted(by_label):
        group = by_label[label]
        order = rng.permutation(len(group))
        n = len(group)
        n_val = _round_half_up(n * r_val)
        n_test = _round_half_up(n * r_test)
        n_train = n - n_val - n_test
        if n_train < 1:
            raise DataError(
                f"class index {label} has too few examples ({n}) for the split"
            )
        shuffled = [group[i] for i in order]
        train.extend(shuffled[:n_train])
        val.extend(shuffled[n_train : n_train + n_val])
        test.extend(shuffled[n_train + n_val :])
    return train, val, test


def _alternate_oos_split(
    examples: list[Example], rng: np.random.Generator
) -> tuple[list[Example], list[Example]]:
    """Seeded shuffle then alternating assignment; odd item to validation."""
    order = rng.permutation(len(examples))
    val = [examples[i] for i in order[0::2]]
    test = [examples[i] for i in order[1::2]]
    return val, test


def _relabel(examples: list[Example], old_to_new: dict[int, int]) -> list[Example]:
    return [
        Example(label=old_to_new[ex.label], text=ex.text, embedding=ex.embedding)
        for ex in examples
    ]


def stackoverflow_style_split(
    dataset: TextDataset,
    seed: int,
    coverage_threshold: float = 0.75,
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
) -> DatasetBundle:
    """Designate IS labels by cumulative example coverage; the rest become OOS.

    Labels are shuffled with the seed, then accumulated (by total example
    count) until their cumulative coverage reaches the threshold — those are
    in-scope. The remaining labels' examples are removed from training,
    relabeled OOS, and split equally (alternating after a seeded shuffle,
    odd item to validation) between validation and test. In-scope examples
    get a stratified train/validation/test split.

    Raises:
        DataError: fewer than 2 distinct labels, or no label left over for
            OOS (e.g. a single label covering everything).
    """
    examples, dropped = _dedupe(dataset.examples)
    if any(ex.is_oos for ex in examples):
        raise DataError("input to stackoverflow_style_split already contains OOS")
    labels_present = sorted({ex.label for ex in examples})
    if len(labels_present) < 2:
        raise DataError("need at least 2 distinct labels to designate OOS")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0])))
    inv = {v: k for k, v in dataset.label_map.items()}
    counts = {label: 0 for label in labels_present}
    for ex in examples:
        counts[ex.label] += 1
    total = len(examples)

    shuffled = [labels_present[i] for i in rng.permutation(len(labels_present))]
    is_labels: list[int] = []
    covered = 0
    for label in shuffled:
        is_labels.append(label)
        covered += counts[label]
        if covered / total >= coverage_threshold:
            break
    oos_labels = [l for l in labels_present if l not in set(is_labels)]
    if not oos_labels:
        raise DataError(
            "coverage threshold consumed every label; no OOS labels remain"
        )

    is_names = sorted(inv[l] for l in is_labels)
    new_map = {name: i for i, name in enumerate(is_names)}
    old_to_new = {dataset.label_map[name]: new_map[name] for name in is_names}
    for l in oos_labels:
        old_to_new[l] = OOS_LABEL

    is_examples = _relabel([ex for ex in examples if ex.label in set(is_labels)], old_to_new)
    oos_examples = _relabel([ex for ex in examples if ex.label in set(oos_labels)], old_to_new)

    train, val, test = _stratified_is_split(is_examples, rng, ratios)
    oos_val, oos_test = _alternate_oos_split(oos_examples, rng)

    bundle = DatasetBundle(
        train=train,
        validation=val + oos_val,
        test=test + oos_test,
        label_map=new_map,
        provenance={
            "procedure": "stackoverflow-style-split",
            "seed": seed,
            "coverage_threshold": coverage_threshold,
            "ratios": list(ratios),
            "is_labels": is_names,
            "oos_labels": sorted(inv[l] for l in oos_labels),
            "is_coverage": covered / total,
            "dropped_duplicates": dropped,
            "counts": {
                "train": len(train),
                "validation": len(val) + len(oos_val),
                "test": len(test) + len(oos_test),
                "oos_validation": len(oos_val),
                "oos_test": len(oos_test),
            },
        },
    )
    verify_bundle(bundle)
    return bundle


def oos_domain_split(
    dataset: TextDataset,
    oos_labels: set[str],
    min_per_class: int = 10,
    seed: int = 0,
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
) -> DatasetBundle:
    """Designate named labels as OOS; drop rare in-scope classes.

    The designated labels' examples go to validation/test only (alternating
    after a seeded shuffle — no stratification). Remaining in-scope classes
    with fewer than min_per_class examples are dropped entirely; the rest are
    split stratified by intent.

    Raises:
        DataError: empty or unknown OOS label set, or nothing left in scope.
    """
    if not oos_labels:
        raise DataError("oos_labels must not be empty")
    missing = sorted(set(oos_labels) - set(dataset.label_map))
    if missing:
        raise DataError(f"designated OOS labels not in data: {missing}")
    if set(oos_labels) >= set(dataset.label_map):
        raise DataError("every label designated OOS; nothing remains in scope")

    examples, dropped = _dedupe(dataset.examples)
    if any(ex.is_oos for ex in examples):
        raise DataError("input to oos_domain_split already contains OOS")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1])))
    inv = {v: k for k, v in dataset.label_map.items()}
    oos_indices = {dataset.label_map[name] for name in oos_labels}

    counts: dict[int, int] = {}
    for ex in examples:
        counts[ex.label] = counts.get(ex.label, 0) + 1
    kept_is = sorted(
        l
        for l in counts
        if l not in oos_indices and counts[l] >= min_per_class
    )
    dropped_rare = sorted(
        inv[l] for l in counts if l not in oos_indices and counts[l] < min_per_class
    )
    if not kept_is:
        raise DataError(
            f"no in-scope class has at least {min_per_class} examples"
        )

    is_names = sorted(inv[l] for l in kept_is)
    new_map = {name: i for i, name in enumerate(is_names)}
    old_to_new = {dataset.label_map[name]: new_map[name] for name in is_names}
    for l in oos_indices:
        old_to_new[l] = OOS_LABEL

    is_examples = _relabel([ex for ex in examples if ex.label in set(kept_is)], old_to_new)
    oos_examples = _relabel([ex for ex in examples if ex.label in oos_indices], old_to_new)

    train, val, test = _stratified_is_split(is_examples, rng, ratios)
    oos_val, oos_test = _alternate_oos_split(oos_examples, rng)

    bundle = DatasetBundle(
        train=train,
        validation=val + oos_val,
        test=test + oos_test,
        label_map=new_map,
        provenance={
            "procedure": "oos-domain-split",
            "seed": seed,
            "oos_labels": sorted(oos_labels),
            "min_per_class": min_per_class,
            "ratios": list(ratios),
            "is_labels": is_names,
            "dropped_rare_classes": dropped_rare,
            "dropped_duplicates": dropped,
            "counts": {
                "train": len(train),
                "validation": len(val) + len(oos_val),
                "test": len(test) + len(oos_test),
                "oos_validation": len(oos_val),
                "oos_test": len(oos_test),
            },
        },
    )
    verify_bundle(bundle)
    return bundle


# ---------------------------------------------------------------------------
# Synthetic benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian-cluster benchmark: C clusters plus out-of-scope points.

    oos_mode:
        "shell": OOS points on a hypersphere strictly outside every
            cluster's 99.9% radius.
        "uniform-box": OOS uniform over the in-scope bounding box scaled
            by 1.5 about its center.
        "held-out-clusters": OOS drawn from extra clusters that never
            appear in training.
    """

    class_count: int = 10
    dim: int = 32
    samples_per_class: int = 200
    sigma: float = 1.0
    placement_scale: float = 3.0
    oos_mode: str = "shell"
    oos_samples: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError(f"need at least 2 classes, got {self.class_count}")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.dim < 1 or self.samples_per_class < 1:
            raise ConfigError("dim and samples_per_class must be positive")
        if self.oos_mode not in ("shell", "uniform-box", "held-out-clusters"):
            raise ConfigError(f"unknown oos_mode {self.oos_mode!r}")


def cluster_radius_999(spec: SyntheticSpec) -> float:
    """99.9% in-cluster radius for the spec's isotropic Gaussians."""
    return spec.sigma * float(np.sqrt(chi2.ppf(0.999, spec.dim)))


def synthesize(
    spec: SyntheticSpec, ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS
) -> DatasetBundle:
    """Generate an embedding-typed DatasetBundle from the spec, deterministically.

    Cluster means are drawn isotropic-normal at placement_scale; samples are
    isotropic-normal at sigma around their mean. In-scope examples get a
    stratified split; OOS points alternate between validation and test.
    """

    def gen(stream: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(np.random.SeedSequence([spec.seed, stream]))
        )

    c, d, n_per = spec.class_count, spec.dim, spec.samples_per_class
    n_oos = spec.oos_samples if spec.oos_samples is not None else 2 * n_per

    placement = gen(_STREAM_PLACEMENT)
    means = placement.normal(scale=spec.placement_scale, size=(c, d))

    samples_rng = gen(_STREAM_SAMPLES)
    xs = np.repeat(means, n_per, axis=0) + spec.sigma * samples_rng.standard_normal(
        (c * n_per, d)
    )
    ys = np.repeat(np.arange(c), n_per)

    oos_rng = gen(_STREAM_OOS)
    if spec.oos_mode == "shell":
        r999 = cluster_radius_999(spec)
        base = float(np.linalg.norm(means, axis=1).max()) + 2.0 * r999
        dirs = oos_rng.standard_normal((n_oos, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = base + r999 * oos_rng.random(n_oos)
        oos = dirs * radii[:, None]
    elif spec.oos_mode == "uniform-box":
        lo, hi = xs.min(axis=0), xs.max(axis=0)
        center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        oos = center + (2.0 * oos_rng.random((n_oos, d)) - 1.0) * 1.5 * half
    else:  # held-out-clusters
        n_extra = max(2, c // 5)
        extra_means = placement.normal(scale=spec.placement_scale, size=(n_extra, d))
        picks = oos_rng.integers(0, n_extra, size=n_oos)
        oos = extra_means[picks] + spec.sigma * oos_rng.standard_normal((n_oos, d))

    is_examples = [
        Example(label=int(y), embedding=x.astype(np.float32)) for x, y in zip(xs, ys)
    ]
    oos_examples = [Example(label=OOS_LABEL, embedding=x.astype(np.float32)) for x in oos]

    split_rng = gen(_STREAM_SPLIT)
    train, val, test = _stratified_is_split(is_examples, split_rng, ratios)
    oos_val, oos_test = _alternate_oos_split(oos_examples, split_rng)

    width = max(2, len(str(c - 1)))
    label_map = {f"intent_{i:0{width}d}": i for i in range(c)}
    bundle = DatasetBundle(
        train=train,
        validation=val + oos_val,
        test=test + oos_test,
        label_map=label_map,
        provenance={
            "procedure": "synthesize",
            "seed": spec.seed,
            "spec": {
                "class_count": c,
                "dim": d,
                "samples_per_class": n_per,
                "sigma": spec.sigma,
                "placement_scale": spec.placement_scale,
                "oos_mode": spec.oos_mode,
                "oos_samples": n_oos,
            },
            "ratios": list(ratios),
            "counts": {
                "train": len(train),
                "validation": len(val) + len(oos_val),
                "test": len(test) + len(oos_test),
                "oos_validation": len(oos_val),
                "oos_test": len(oos_test),
            },
        },
    )
    verify_bundle(bundle)
    return bundle


# ---------------------------------------------------------------------------
# Bundle persistence (used by the CLI)
# ---------------------------------------------------------------------------


def write_bundle(bundle: DatasetBundle, out_dir) -> None:
    """Write the three splits plus provenance.json into a directory.

    Embedding-typed bundles become EMB1 files; text-typed become JSONL.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text_typed = any(
        ex.text is not None for ex in bundle.train + bundle.validation + bundle.test
    )
    for name, split in (
        ("train", bundle.train),
        ("validation", bundle.validation),
        ("test", bundle.test),
    ):
        if text_typed:
            write_jsonl_dataset(out / f"{name}.jsonl", split, bundle.label_map)
        else:
            write_emb(out / f"{name}.emb", split, bundle.label_map)
    with open(out / "provenance.json", "w", encoding="utf-8") as fh:
        json.dump(bundle.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_examples(path) -> tuple[list[Example], dict[str, int]]:
    """Load one split file (.emb or .jsonl) by extension."""
    path = Path(path)
    if path.suffix == ".emb":
        return read_emb(path)
    if path.suffix == ".jsonl":
        ds = read_jsonl_dataset(path)
        return ds.examples, ds.label_map
    raise DataError(f"{path}: unknown dataset extension {path.suffix!r}")


def resolve_split_path(data_path, split: str) -> Path:
    """Resolve --data to a concrete split file.

    A file path is used as-is; a directory is searched for <split>.emb then
    <split>.jsonl.
    """
    p = Path(data_path)
    if p.is_file():
        return p
    if p.is_dir():
        for ext in (".emb", ".jsonl"):
            candidate = p / f"{split}{ext}"
            if candidate.exists():
                return candidate
        raise DataError(f"{p}: no {split}.emb or {split}.jsonl inside")
    raise DataError(f"{data_path}: no such file or directory")
