"""Bridge from pretrained sentence encoders to the EMB1 embedding format.

Runs a frozen transformer encoder over a JSONL intent corpus, pools the
token states (max pooling by default), and writes the embeddings as an EMB1
binary file with a label sidecar — the file interface consumed by the
scoring stack. Inference only; no fine-tuning happens here.
"""

from embexport import cli
from embexport.exporter import ExportConfig, ExportError, export

__version__ = "0.1.0"

__all__ = ["ExportConfig", "ExportError", "export", "cli", "__version__"]
