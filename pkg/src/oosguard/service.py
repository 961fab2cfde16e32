"""Newline-delimited JSON scoring service over TCP or stdio.

One request object per line, one response per line, order-preserving per
connection. The scorer is immutable, so any number of connection threads can
share it without locks. Responses for a given input are byte-for-byte the
same JSON the library produces offline.

Request:  {"text": "..."} or {"embedding": "<base64 EMB1 single record>"}
Response: {"verdict": "in-scope"|"oos", "intent": <label or "oos">,
           "d_min": <float>, "tau": <float>}
Errors come back as {"error": "..."} on the offending line; the connection
stays open.
"""

from __future__ import annotations

import base64
import json
import socketserver
import struct
import sys
import threading

import numpy as np

from oosguard.errors import ConfigError, DataError
from oosguard.scorer import IN_SCOPE, FittedScorer, decide, score


def decode_embedding_record(payload_b64: str, dim: int) -> np.ndarray:
    """Decode one base64 EMB1 record (u32 label + dim float32 LE).

    The label field is ignored for queries; clients conventionally send the
    OOS sentinel 0xFFFFFFFF.
    """
    try:
        raw = base64.b64decode(payload_b64, validate=True)
    except (ValueError, TypeError):
        raise DataError("embedding is not valid base64")
    if len(raw) != 4 + 4 * dim:
        raise DataError(
            f"embedding record must be {4 + 4 * dim} bytes for dim {dim}, "
            f"got {len(raw)}"
        )
    vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=4).copy()
    if not np.all(np.isfinite(vec)):
        raise DataError("embedding contains non-finite values")
    return vec


def encode_embedding_record(vec: np.ndarray, label: int | None = None) -> str:
    """Base64-encode a vector as an EMB1 single record (client-side helper)."""
    raw_label = 0xFFFFFFFF if label is None else int(label)
    payload = struct.pack("<I", raw_label) + np.ascontiguousarray(
        vec, dtype="<f4"
    ).tobytes()
    return base64.b64encode(payload).decode("ascii")


def handle_request(scorer: FittedScorer, line: str) -> dict:
    """Score one request line; never raises — errors become error objects."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return {"error": "malformed request: not valid JSON"}
    if not isinstance(obj, dict):
        return {"error": "malformed request: expected a JSON object"}
    has_text = "text" in obj
    has_emb = "embedding" in obj
    if has_text == has_emb:
        return {"error": "request must carry exactly one of 'text' or 'embedding'"}
    try:
        if has_text:
            if not isinstance(obj["text"], str):
                return {"error": "'text' must be a string"}
            result = score(scorer, obj["text"])
        else:
            vec = decode_embedding_record(obj["embedding"], scorer.encoder.layer_dims[0])
            result = score(scorer, vec)
        decision = decide(result, scorer.tau)
        intent = (
            scorer.label_name(decision.intent)
            if decision.verdict == IN_SCOPE
            else "oos"
        )
        return {
            "verdict": decision.verdict,
            "intent": intent,
            "d_min": decision.score,
            "tau": decision.threshold,
        }
    except (DataError, ConfigError) as err:
        return {"error": str(err)}


def require_servable(scorer: FittedScorer) -> None:
    if scorer.tau is None:
        raise ConfigError("artifact has no threshold; run calibrate before serve")


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        scorer: FittedScorer = self.server.scorer  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            response = handle_request(scorer, line)
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            self.wfile.flush()


class ScoringServer(socketserver.ThreadingTCPServer):
    """TCP server sharing one immutable scorer across connection threads."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], scorer: FittedScorer):
        require_servable(scorer)
        super().__init__(address, _Handler)
        self.scorer = scorer


def serve_tcp(scorer: FittedScorer, host: str, port: int) -> None:
    """Run the TCP service until interrupted."""
    with ScoringServer((host, port), scorer) as server:
        bound = server.server_address
        print(f"serving on {bound[0]}:{bound[1]}", file=sys.stderr, flush=True)
        server.serve_forever()


def start_background_server(
    scorer: FittedScorer, host: str = "127.0.0.1", port: int = 0
) -> tuple[ScoringServer, threading.Thread]:
    """Start a server thread and return it with its bound server (for tests)."""
    server = ScoringServer((host, port), scorer)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


def serve_stdio(scorer: FittedScorer, stdin=None, stdout=None) -> None:
    """Serve requests from standard input, one response line each."""
    require_servable(scorer)
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        stdout.write(json.dumps(handle_request(scorer, line)) + "\n")
        stdout.flush()
