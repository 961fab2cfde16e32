"""embexport command line: `embexport export --model <id> --in a.jsonl --out a.emb`.

Exit codes mirror the scoring stack's contract: 0 success, 2 usage or model
resolution problems, 3 corpus problems, 4 numeric failures.
"""

from __future__ import annotations

import argparse
import sys

from embexport.exporter import CorpusError, ExportConfig, ExportError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export pooled transformer sentence embeddings to EMB1.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="embed a JSONL corpus into an EMB1 file")
    p.add_argument("--model", required=True, help="pretrained encoder name or path")
    p.add_argument("--pooling", choices=("max", "mean"), default="max")
    p.add_argument("--in", dest="input_path", required=True, help="input JSONL")
    p.add_argument("--out", dest="output_path", required=True, help="output EMB1")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExportConfig(
            model=args.model,
            input_path=args.input_path,
            output_path=args.output_path,
            pooling=args.pooling,
            batch_size=args.batch_size,
            device=args.device,
        )
        out = export(config)
    except ExportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (CorpusError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ArithmeticError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
