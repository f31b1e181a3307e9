"""HTTP front-end for a store, and a client speaking the same protocol.

Protocol (JSON over HTTP/1.1):

* ``GET /v1/health`` -> ``{"ok": true}``
* ``POST /v1/<op>`` with a JSON object of keyword arguments, where ``<op>`` is
  one of ``create_or_open_study``, ``get_study``, ``list_studies``,
  ``begin_trial``, ``complete_trial``, ``fail_trial``, ``set_trial_attr``,
  ``list_trials``, ``get_trial``, ``append_snapshot``, ``abandon_running``.
* success: HTTP 200, ``{"ok": true, "result": <value>}``; studies and trials
  are encoded with the same field names as the file-log records.
* failure: HTTP 404 (unknown study/trial), 409 (illegal transition, config
  mismatch) or 400, body ``{"ok": false, "error": {"type": <exception class
  name>, "message": <text>}}``.

Trial ids are assigned by the server.  The client attaches a fresh
``request_id`` to every begin/complete/fail call and reuses it on retries, so
a request that reached the server before the connection dropped is not
applied twice.
"""
from __future__ import annotations

import http.client
import json
import logging
import math
import threading
import time
import urllib.error
import urllib.request
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import StoreError, StoreUnavailable, VarExploreError, error_class
from ..errors import IllegalTransition, NonFiniteValue, StudyConfigMismatch, StudyNotFound, UnknownTrial
from ..paramspace import SearchSpace
from .base import StoreBackend
from .model import Study, Trial, TrialState

log = logging.getLogger(__name__)

OPS = (
    "create_or_open_study", "get_study", "list_studies", "begin_trial", "complete_trial",
    "fail_trial", "set_trial_attr", "list_trials", "get_trial", "append_snapshot",
    "abandon_running",
)


def _encode(result):
    if isinstance(result, (Study, Trial)):
        return result.to_dict()
    if isinstance(result, list):
        return [_encode(r) for r in result]
    return result


def _dispatch(backend: StoreBackend, op: str, args: dict):
    if op == "create_or_open_study":
        args = dict(args, space=SearchSpace.from_dict(args["space"]))
    elif op == "list_trials" and args.get("states") is not None:
        args = dict(args, states=[TrialState(s) for s in args["states"]])
    return _encode(getattr(backend, op)(**args))


def _status_for(exc) -> int:
    if isinstance(exc, (StudyNotFound, UnknownTrial)):
        return 404
    if isinstance(exc, (IllegalTransition, StudyConfigMismatch)):
        return 409
    return 400


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "StoreServer"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _reply(self, status, doc):
        body = json.dumps(doc, allow_nan=False).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path.rstrip("/") == "/v1/health":
            self._reply(200, {"ok": True})
        else:
            self._reply(404, {"ok": False, "error": {"type": "NotFound", "message": self.path}})

    def do_POST(self):
        parts = self.path.strip("/").split("/")
        if len(parts) != 2 or parts[0] != "v1" or parts[1] not in OPS:
            self._reply(404, {"ok": False, "error": {"type": "NotFound", "message": self.path}})
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length)
        if not self.server.enter():
            self._reply(503, {"ok": False, "error": {"type": "StoreUnavailable", "message": "server is stopping"}})
            return
        try:
            args = json.loads(body or b"{}")
            result = _dispatch(self.server.backend, parts[1], args)
        except VarExploreError as exc:
            self._reply(_status_for(exc), {"ok": False, "error": {"type": type(exc).__name__, "message": str(exc)}})
            return
        except (TypeError, ValueError, KeyError) as exc:
            self._reply(400, {"ok": False, "error": {"type": "StoreError", "message": repr(exc)}})
            return
        finally:
            self.server.leave()
        self._reply(200, {"ok": True, "result": result})


class StoreServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, backend: StoreBackend, address=("127.0.0.1", 0)):
        self.backend = backend
        self._cond = threading.Condition()
        self._inflight = 0
        self._stopping = False
        super().__init__(address, _Handler)

    def enter(self) -> bool:
        with self._cond:
            if self._stopping:
                return False
            self._inflight += 1
            return True

    def leave(self) -> None:
        with self._cond:
            self._inflight -= 1
            self._cond.notify_all()

    def stop(self, timeout: float = 30.0) -> None:
        """Stop accepting, let in-flight operations finish, close the socket.

        Requests arriving meanwhile get 503, which clients retry.  The backend
        is left open for the caller to close.
        """
        with self._cond:
            self._stopping = True
            self._cond.wait_for(lambda: self._inflight == 0, timeout)
        self.shutdown()
        self.server_close()

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> threading.Thread:
        """Serve on a daemon thread; stop with :meth:`stop`."""
        th = threading.Thread(target=self.serve_forever, name="store-server", daemon=True)
        th.start()
        return th


def serve(backend: StoreBackend, listen_address=("127.0.0.1", 0)) -> StoreServer:
    """Bind a server for ``backend``; call ``serve_forever()`` or ``start()`` on it."""
    if isinstance(listen_address, str):
        host, _, port = listen_address.rpartition(":")
        listen_address = (host or "127.0.0.1", int(port))
    return StoreServer(backend, listen_address)


class RemoteStore(StoreBackend):
    """StoreBackend over HTTP with retry on transport failures."""

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 40, backoff: float = 0.05,
                 max_backoff: float = 1.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.max_backoff = max_backoff

    def _call(self, op, **args):
        body = json.dumps(args, allow_nan=False).encode()
        delay = self.backoff
        last = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(f"{self.url}/v1/{op}", data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    doc = json.loads(resp.read())
                return doc["result"]
            except urllib.error.HTTPError as exc:
                if exc.code >= 500:
                    last = exc
                else:
                    try:
                        err = json.loads(exc.read())["error"]
                    except (ValueError, KeyError):
                        raise StoreError(f"{op}: HTTP {exc.code}") from None
                    raise error_class(err["type"])(err["message"]) from None
            except (urllib.error.URLError, ConnectionError, http.client.HTTPException, TimeoutError) as exc:
                last = exc
            if attempt < self.retries:
                time.sleep(delay)
                delay = min(delay * 2, self.max_backoff)
        raise StoreUnavailable(f"store at {self.url} unreachable after {self.retries + 1} attempts: {last}")

    def ping(self) -> bool:
        try:
            with urllib.request.urlopen(f"{self.url}/v1/health", timeout=self.timeout) as resp:
                return json.loads(resp.read()).get("ok", False)
        except (urllib.error.URLError, ConnectionError, http.client.HTTPException, TimeoutError):
            return False

    def create_or_open_study(self, name, space, directions, metric_names=None, sampler_assignments=None):
        doc = self._call("create_or_open_study", name=name, space=space.to_dict(), directions=list(directions),
                         metric_names=list(metric_names) if metric_names else None,
                         sampler_assignments=list(sampler_assignments or []))
        return Study.from_dict(doc)

    def get_study(self, name):
        return Study.from_dict(self._call("get_study", name=name))

    def list_studies(self):
        return self._call("list_studies")

    def begin_trial(self, study, agent_id, params, request_id=None):
        return Trial.from_dict(self._call("begin_trial", study=study, agent_id=int(agent_id), params=dict(params),
                                          request_id=request_id or uuid.uuid4().hex))

    def complete_trial(self, study, trial_id, values, request_id=None):
        values = [float(v) for v in values]
        if not all(math.isfinite(v) for v in values):
            # JSON cannot carry NaN/inf; reject locally with the server's error
            raise NonFiniteValue(f"{study}: trial {trial_id} values {values} are not all finite")
        return Trial.from_dict(self._call("complete_trial", study=study, trial_id=trial_id, values=values,
                                          request_id=request_id or uuid.uuid4().hex))

    def fail_trial(self, study, trial_id, reason="", request_id=None):
        return Trial.from_dict(self._call("fail_trial", study=study, trial_id=trial_id, reason=str(reason),
                                          request_id=request_id or uuid.uuid4().hex))

    def set_trial_attr(self, study, trial_id, key, value):
        self._call("set_trial_attr", study=study, trial_id=trial_id, key=str(key), value=str(value))

    def list_trials(self, study, states=None):
        states = None if states is None else [TrialState(s).value for s in states]
        return [Trial.from_dict(d) for d in self._call("list_trials", study=study, states=states)]

    def get_trial(self, study, trial_id):
        return Trial.from_dict(self._call("get_trial", study=study, trial_id=trial_id))

    def append_snapshot(self, study, trial_count, reports):
        return bool(self._call("append_snapshot", study=study, trial_count=int(trial_count), reports=reports))

    def abandon_running(self, study, agent_id=None, reason="abandoned"):
        return self._call("abandon_running", study=study, agent_id=agent_id, reason=reason)
