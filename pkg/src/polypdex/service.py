"""Read-only HTTP query service over a loaded hash index.

Endpoints:
  GET  /v1/health -> {"status": "ok"}
  POST /v1/query  -> retrieval result with evidence; body carries either
                     {"embedding": [...]} or {"hash_hex": "..."} plus an
                     optional "k".

The index is loaded once and never mutated, so request handlers share it
across threads without locking. Malformed bodies get 400; dimension or
range errors get 422.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .classify import KnnConfig, classify_code, explain
from .errors import CorruptFileError, DimMismatchError, KTooLargeError
from .hashing import hex_to_code, quantize
from .index import BallTreeIndex


def _handler_for(index: BallTreeIndex, default_k: int):
    class QueryHandler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt, *args):  # keep test output quiet
            pass

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, {"status": "ok"})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path != "/v1/query":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                doc = json.loads(self.rfile.read(length))
            except (ValueError, json.JSONDecodeError):
                self._send(400, {"error": "body is not valid JSON"})
                return
            if not isinstance(doc, dict):
                self._send(400, {"error": "body must be a JSON object"})
                return
            has_embedding = "embedding" in doc
            has_hash = "hash_hex" in doc
            if has_embedding == has_hash:
                self._send(400, {"error": "provide exactly one of 'embedding' or 'hash_hex'"})
                return
            k = doc.get("k", default_k)
            if not isinstance(k, int) or isinstance(k, bool) or k < 1:
                self._send(400, {"error": "'k' must be a positive integer"})
                return

            try:
                if has_embedding:
                    emb = doc["embedding"]
                    if not isinstance(emb, list) or not all(
                        isinstance(v, (int, float)) and not isinstance(v, bool) for v in emb
                    ):
                        self._send(400, {"error": "'embedding' must be a list of numbers"})
                        return
                    vec = np.asarray(emb, dtype=np.float64)
                    if vec.size != index.nbits:
                        raise DimMismatchError(
                            f"embedding has {vec.size} dims, index expects {index.nbits}"
                        )
                    code = quantize(vec)
                else:
                    if not isinstance(doc["hash_hex"], str):
                        self._send(400, {"error": "'hash_hex' must be a string"})
                        return
                    code = hex_to_code(doc["hash_hex"], index.nbits)
                result = classify_code(index, code, KnnConfig(k=k, metric="hamming"))
            except CorruptFileError as exc:
                self._send(400, {"error": str(exc)})
                return
            except (DimMismatchError, KTooLargeError) as exc:
                self._send(422, {"error": str(exc)})
                return

            self._send(200, explain(result, index))

    return QueryHandler


def make_server(index: BallTreeIndex, host: str = "127.0.0.1", port: int = 0,
                default_k: int = 5) -> ThreadingHTTPServer:
    """Bind a threaded server; port 0 picks a free port."""
    return ThreadingHTTPServer((host, port), _handler_for(index, default_k))


def serve_forever(index: BallTreeIndex, host: str, port: int, default_k: int = 5) -> None:
    server = make_server(index, host, port, default_k)
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_in_thread(index: BallTreeIndex, host: str = "127.0.0.1",
                    default_k: int = 5) -> tuple[ThreadingHTTPServer, threading.Thread]:
    """Test helper: serve on a free port in a daemon thread."""
    server = make_server(index, host, 0, default_k)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread
