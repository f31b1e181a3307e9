"""In-process stand-in for a range-query monitoring server.

Serves ``GET /api/v1/query_range`` with the exact envelope the metrics client
expects.  The metric is picked from the query expression by substring
(``cpu``, ``memory``, ``fs_``).  With a fixture the server returns those
samples verbatim; otherwise it synthesises one sample per step over
``[start, end]`` from a deterministic function.  Every request's query string
is recorded in ``requests`` for inspection.
"""
from __future__ import annotations

import json
import math
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Sequence

# metric -> list of (timestamp, value)
Fixture = Mapping[str, Sequence[tuple[float, float]]]


def metric_of(query: str) -> str | None:
    if "cpu" in query:
        return "cpu"
    if "memory" in query:
        return "memory"
    if "fs_" in query:
        return "io"
    return None


def synthetic_value(metric: str, ts: float) -> float:
    base = {"cpu": 0.5, "memory": 2.0e9, "io": 1.0e6}[metric]
    return base * (1.0 + 0.25 * math.sin(ts / 600.0))


def envelope(values: Sequence[tuple[float, float]], labels: Mapping[str, str] | None = None) -> dict:
    return {
        "status": "success",
        "data": {
            "resultType": "matrix",
            "result": [{"metric": dict(labels or {}),
                        "values": [[float(t), repr(float(v))] for t, v in values]}],
        },
    }


class _Handler(BaseHTTPRequestHandler):
    server: "MockMonitor"

    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, body: bytes, ctype="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urllib.parse.urlsplit(self.path)
        if url.path != "/api/v1/query_range":
            self._send(404, b'{"status":"error","error":"not found"}')
            return
        q = {k: v[0] for k, v in urllib.parse.parse_qs(url.query).items()}
        self.server.requests.append(q)
        if self.server.malformed:
            self._send(200, b'{"status":"success","data":{"unexpected":true}}')
            return
        metric = metric_of(q.get("query", ""))
        if metric is None:
            self._send(400, b'{"status":"error","errorType":"bad_data","error":"unknown query"}')
            return
        if self.server.fixture is not None:
            values = list(self.server.fixture.get(metric, []))
        else:
            start, end, step = float(q["start"]), float(q["end"]), float(q["step"])
            n = int(math.floor((end - start) / step + 1e-9)) + 1
            values = [(start + i * step, synthetic_value(metric, start + i * step)) for i in range(n)]
        self._send(200, json.dumps(envelope(values, {"pod": q.get("query", "")})).encode())


class MockMonitor(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, fixture: Fixture | None = None, address=("127.0.0.1", 0), malformed: bool = False):
        super().__init__(address, _Handler)
        self.fixture = fixture
        self.malformed = malformed
        self.requests: list[dict] = []
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockMonitor":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
