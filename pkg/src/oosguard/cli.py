"""Command-line surface: train, calibrate, eval, split, synth, score, serve, sweep.

Exit codes are fixed for scriptability: 0 success, 2 usage/config errors,
3 data errors, 4 numeric failures. Diagnostic messages go to stderr;
results (loss tables, reports, score lines) go to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from oosguard.artifact import ModelArtifact, load_artifact, save_artifact
from oosguard.data import (
    DEFAULT_SPLIT_RATIOS,
    SyntheticSpec,
    dataset_fingerprint,
    load_examples,
    oos_domain_split,
    read_jsonl_dataset,
    resolve_split_path,
    stackoverflow_style_split,
    synthesize,
    write_bundle,
)
from oosguard.errors import ConfigError, DataError, NumericError
from oosguard.featurizer import HASHED_BOW, PASSTHROUGH, EncoderConfig, Featurizer
from oosguard.metrics import (
    evaluate,
    report_to_json_dict,
    report_to_text,
    score_examples,
)
from oosguard.scorer import (
    DEFAULT_POLICY,
    IN_SCOPE,
    calibrate_threshold,
    decide,
    score,
)
from oosguard.service import (
    decode_embedding_record,
    serve_stdio,
    serve_tcp,
)
from oosguard.training import (
    DEFAULT_ALPHA_GRID,
    PRESETS,
    TrainConfig,
    fit_statistics,
    sweep_alpha,
    train,
)

_CONFIG_KEYS = {
    "preset",
    "class_count",
    "alpha",
    "learning_rate",
    "batch_size",
    "epochs",
    "seed",
    "optimizer",
    "featurizer",
    "encoder_hidden",
    "embedding_dim",
    "ae_dims",
    "covariance_mode",
    "ridge",
}


def _read_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p}: invalid JSON ({err.msg})")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    unknown = sorted(set(cfg) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{p}: unknown config keys {unknown}")
    return cfg


def _build_train_config(cfg: dict, examples, label_map, args) -> TrainConfig:
    """Merge defaults, preset, explicit config keys, and CLI overrides."""
    merged: dict = {}
    preset = cfg.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
            )
        merged.update(PRESETS[preset])
    merged.update({k: v for k, v in cfg.items() if k != "preset"})
    if getattr(args, "alpha", None) is not None:
        merged["alpha"] = args.alpha
    if getattr(args, "seed", None) is not None:
        merged["seed"] = args.seed

    embedding_typed = bool(examples) and examples[0].embedding is not None
    fz_cfg = merged.pop("featurizer", None)
    if fz_cfg is None:
        if embedding_typed:
            fz_cfg = {"kind": PASSTHROUGH, "dim": int(examples[0].embedding.shape[0])}
        else:
            fz_cfg = {"kind": HASHED_BOW, "dim": 1024}
    if "dim" not in fz_cfg or fz_cfg["dim"] is None:
        if not embedding_typed:
            raise ConfigError("featurizer dim is required for text data")
        fz_cfg["dim"] = int(examples[0].embedding.shape[0])
    featurizer = Featurizer(
        kind=fz_cfg.get("kind", HASHED_BOW),
        dim=int(fz_cfg["dim"]),
        seed=int(fz_cfg.get("seed", 0)),
    )

    embedding_dim = int(merged.pop("embedding_dim", 64))
    hidden = tuple(int(h) for h in merged.pop("encoder_hidden", (256, 128)))
    encoder = EncoderConfig(
        featurizer=featurizer, hidden_dims=hidden, embedding_dim=embedding_dim
    )

    class_count = merged.pop("class_count", None)
    if class_count is None:
        class_count = len(label_map)
    ae_dims = merged.pop("ae_dims", None)
    if ae_dims is not None:
        ae_dims = tuple(int(d) for d in ae_dims)

    return TrainConfig(
        class_count=int(class_count),
        encoder=encoder,
        ae_dims=ae_dims,
        **merged,
    )


def _remap_labels(examples, from_map: dict[str, int], to_map: dict[str, int]):
    """Re-index IS labels from one sidecar map onto the artifact's map."""
    if from_map == to_map:
        return examples
    inv = {v: k for k, v in from_map.items()}
    remapped = []
    for i, ex in enumerate(examples):
        if ex.is_oos:
            remapped.append(ex)
            continue
        name = inv.get(ex.label)
        if name is None or name not in to_map:
            raise DataError(
                f"example {i}: label {name or ex.label!r} not in the artifact's label map"
            )
        remapped.append(
            type(ex)(label=to_map[name], text=ex.text, embedding=ex.embedding)
        )
    return remapped


def _print_loss_table(log) -> None:
    print(f"{'epoch':>5} {'L_CE':>12} {'L_AE':>12} {'L':>12}")
    for i, stats in enumerate(log, start=1):
        print(f"{i:>5} {stats.ce:>12.6f} {stats.ae:>12.6f} {stats.total:>12.6f}")


def _provenance(config: TrainConfig, data_path, examples) -> dict:
    cfg_dict = asdict(config)
    cfg_dict["encoder"] = {
        "featurizer": asdict(config.encoder.featurizer),
        "hidden_dims": list(config.encoder.hidden_dims),
        "embedding_dim": config.encoder.embedding_dim,
    }
    return {
        "train_config": cfg_dict,
        "seed": config.seed,
        "dataset": {
            "path": str(data_path),
            "fingerprint": dataset_fingerprint(examples),
            "count": len(examples),
        },
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _read_config_file(args.config)
    data_path = resolve_split_path(args.data, "train")
    examples, label_map = load_examples(data_path)
    config = _build_train_config(cfg, examples, label_map, args)
    model = train(config, examples)
    scorer = fit_statistics(model, examples, label_map)
    artifact = ModelArtifact(
        scorer=scorer, provenance=_provenance(config, data_path, examples)
    )
    save_artifact(args.out, artifact)
    _print_loss_table(model.log)
    print(f"wrote artifact to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    artifact = load_artifact(args.artifact)
    data_path = resolve_split_path(args.data, "validation")
    examples, label_map = load_examples(data_path)
    examples = _remap_labels(examples, label_map, artifact.scorer.label_map)
    tau = calibrate_threshold(artifact.scorer, examples, args.policy)
    artifact.scorer = artifact.scorer.with_tau(tau)
    artifact.provenance["calibration"] = {
        "policy": args.policy,
        "tau": tau,
        "validation_path": str(data_path),
    }
    save_artifact(args.artifact, artifact)
    print(f"tau={tau:.6f}")
    return 0


def cmd_eval(args) -> int:
    artifact = load_artifact(args.artifact)
    data_path = resolve_split_path(args.data, "test")
    examples, label_map = load_examples(data_path)
    examples = _remap_labels(examples, label_map, artifact.scorer.label_map)
    tau = args.tau if args.tau is not None else artifact.scorer.tau
    report = evaluate(artifact.scorer, examples, tau=tau)
    sys.stdout.write(report_to_text(report))
    if args.json is not None:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report_to_json_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.figures is not None:
        from oosguard.plots import render_report_figures

        items, _ = score_examples(artifact.scorer, examples)
        for path in render_report_figures(items, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.split(",") if p]
    if len(parts) != 3:
        raise ConfigError(f"ratios must be three comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


def cmd_split(args) -> int:
    dataset = read_jsonl_dataset(args.data)
    ratios = _parse_ratios(args.ratios) if args.ratios else DEFAULT_SPLIT_RATIOS
    if args.method == "stackoverflow":
        bundle = stackoverflow_style_split(
            dataset, seed=args.seed, coverage_threshold=args.coverage, ratios=ratios
        )
    else:
        if not args.oos_labels:
            raise ConfigError("--oos-labels is required for the domain method")
        oos_labels = {p for p in args.oos_labels.split(",") if p}
        bundle = oos_domain_split(
            dataset,
            oos_labels,
            min_per_class=args.min_per_class,
            seed=args.seed,
            ratios=ratios,
        )
    write_bundle(bundle, args.out)
    counts = bundle.provenance["counts"]
    print(
        f"train={counts['train']} validation={counts['validation']} "
        f"test={counts['test']} (oos: {counts['oos_validation']}/{counts['oos_test']})"
    )
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        class_count=args.classes,
        dim=args.dim,
        samples_per_class=args.samples_per_class,
        sigma=args.sigma,
        placement_scale=args.placement_scale,
        oos_mode=args.oos_mode,
        oos_samples=args.oos_samples,
        seed=args.seed,
    )
    bundle = synthesize(spec)
    write_bundle(bundle, args.out)
    counts = bundle.provenance["counts"]
    print(
        f"train={counts['train']} validation={counts['validation']} "
        f"test={counts['test']} (oos: {counts['oos_validation']}/{counts['oos_test']})"
    )
    return 0


def cmd_score(args) -> int:
    artifact = load_artifact(args.artifact)
    scorer = artifact.scorer
    if (args.text is None) == (args.embedding_b64 is None):
        raise ConfigError("provide exactly one of --text or --embedding-b64")
    if args.text is not None:
        result = score(scorer, args.text)
    else:
        vec = decode_embedding_record(args.embedding_b64, scorer.encoder.layer_dims[0])
        result = score(scorer, vec)
    tau = args.tau if args.tau is not None else scorer.tau
    if tau is None:
        raise ConfigError("artifact has no threshold; pass --tau or run calibrate")
    decision = decide(result, tau)
    intent = scorer.label_name(decision.intent) if decision.verdict == IN_SCOPE else "oos"
    print(
        json.dumps(
            {
                "verdict": decision.verdict,
                "intent": intent,
                "d_min": decision.score,
                "tau": decision.threshold,
            }
        )
    )
    return 0


def cmd_serve(args) -> int:
    artifact = load_artifact(args.artifact)
    scorer = artifact.scorer
    if scorer.tau is None:
        raise ConfigError("artifact has no threshold; run calibrate before serve")
    if args.stdio:
        serve_stdio(scorer)
        return 0
    if args.addr is None:
        raise ConfigError("provide --addr host:port or --stdio")
    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigError(f"--addr must look like host:port, got {args.addr!r}")
    serve_tcp(scorer, host, int(port_text))
    return 0


def cmd_sweep(args) -> int:
    cfg = _read_config_file(args.config)
    train_path = resolve_split_path(args.data, "train")
    val_path = resolve_split_path(args.data, "validation")
    train_examples, label_map = load_examples(train_path)
    val_examples, val_map = load_examples(val_path)
    val_examples = _remap_labels(val_examples, val_map, label_map)
    config = _build_train_config(cfg, train_examples, label_map, args)
    grid = (
        tuple(float(a) for a in args.grid.split(",") if a)
        if args.grid
        else DEFAULT_ALPHA_GRID
    )
    result = sweep_alpha(config, grid, train_examples, val_examples, label_map)
    print(f"{'alpha':>8} {'aupr_oos':>10} {'auroc':>10} {'accuracy':>10} {'dispersion':>12}")
    for entry in result.entries:
        r = entry.report
        print(
            f"{entry.alpha:>8.3f} {r.aupr_oos:>10.6f} {r.auroc:>10.6f} "
            f"{r.intent_accuracy:>10.6f} {r.dispersion:>12.6f}"
        )
    print(f"best alpha: {result.best_alpha}")
    if args.json is not None:
        payload = {
            "best_alpha": result.best_alpha,
            "entries": [
                {"alpha": e.alpha, **report_to_json_dict(e.report)}
                for e in result.entries
            ],
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.out is not None:
        artifact = ModelArtifact(
            scorer=result.best_scorer,
            provenance=_provenance(result.best_config, train_path, train_examples),
        )
        save_artifact(args.out, artifact)
        print(f"wrote artifact to {args.out}")
    if args.figures is not None:
        from oosguard.plots import render_sweep_figure

        path = render_sweep_figure(result.entries, args.figures)
        print(f"wrote {path}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oosguard",
        description="Intent classification with Mahalanobis-based OOS rejection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write an artifact")
    p.add_argument("--config", required=True, help="JSON training config")
    p.add_argument("--data", required=True, help="train split file or bundle dir")
    p.add_argument("--out", required=True, help="artifact output path")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--alpha", type=float, default=None, help="override config alpha")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="set the OOS threshold on an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True, help="validation split file or bundle dir")
    p.add_argument("--policy", default=DEFAULT_POLICY)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="evaluate an artifact on a test split")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", required=True, help="test split file or bundle dir")
    p.add_argument("--json", default=None, help="write the JSON report here")
    p.add_argument("--figures", default=None, help="render PNG figures into this dir")
    p.add_argument("--tau", type=float, default=None, help="override the artifact's tau")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("split", help="split a JSONL corpus into a bundle")
    p.add_argument("--data", required=True, help="input JSONL corpus")
    p.add_argument("--method", choices=("stackoverflow", "domain"), required=True)
    p.add_argument("--oos-labels", default=None, help="comma-separated (domain method)")
    p.add_argument("--min-per-class", type=int, default=10)
    p.add_argument("--coverage", type=float, default=0.75)
    p.add_argument("--ratios", default=None, help="train,val,test e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="bundle output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate a synthetic benchmark bundle")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--placement-scale", type=float, default=3.0)
    p.add_argument(
        "--oos-mode",
        choices=("shell", "uniform-box", "held-out-clusters"),
        default="shell",
    )
    p.add_argument("--oos-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="bundle output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="score one query against an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--text", default=None)
    p.add_argument("--embedding-b64", default=None, help="base64 EMB1 single record")
    p.add_argument("--tau", type=float, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("serve", help="run the newline-JSON scoring service")
    p.add_argument("--artifact", required=True)
    p.add_argument("--addr", default=None, help="host:port to listen on")
    p.add_argument("--stdio", action="store_true", help="serve over stdin/stdout")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("sweep", help="grid-sweep alpha and report per-candidate metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="bundle dir with train + validation")
    p.add_argument("--grid", default=None, help="comma-separated alphas")
    p.add_argument("--json", default=None, help="write the sweep report here")
    p.add_argument("--out", default=None, help="write the best model artifact here")
    p.add_argument("--figures", default=None, help="render the sweep figure into this dir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (NumericError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
