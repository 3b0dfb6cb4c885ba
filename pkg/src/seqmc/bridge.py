"""Wire-protocol client that turns an external process into a scorer.

Protocol v1 is newline-delimited JSON over a TCP socket or a child
process's stdin/stdout; any language can implement the server side.
Message shapes (exact field names):

* hello     ``{"kind": "hello", "protocol_version": 1}``
* info      ``{"kind": "info", "vocab_size": V, "mask_id": M,
  "max_length": L, "name": "...", "protocol_version": 1}``
* logits    ``{"kind": "logits", "id": n, "tokens": [...], "masked": [...]}``
  with the server-side mask id substituted at masked slots
* rows      ``{"kind": "rows", "id": n, "rows": [[...], ...]}`` with one
  vocab-size row per masked position, in ascending position order
* error     ``{"kind": "error", "message": "..."}``

Reals travel as JSON decimal text (shortest round-trip form, at most 17
significant digits) so float64 values survive transport exactly.  Requests
carry an id echoed in responses; this client pipelines at most one request
per connection.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass

import numpy as np

from .core import MaskedView, Vocab
from .errors import ConnectFailure, MalformedResponse, ScorerFailure, VersionMismatch

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ModelInfo:
    vocab_size: int
    mask_id: int
    max_length: int
    name: str


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        self._addr = (host, port)
        self._timeout = timeout
        try:
            self._sock = socket.create_connection(self._addr, timeout=timeout)
        except OSError as exc:
            raise ConnectFailure(f"cannot connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rwb")

    def send_line(self, line: str) -> None:
        self._file.write(line.encode("utf-8") + b"\n")
        self._file.flush()

    def recv_line(self) -> str:
        line = self._file.readline()
        if not line:
            raise ConnectionError("connection closed by server")
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


class _StdioTransport:
    def __init__(self, argv: list[str], timeout: float):
        del timeout  # child-process pipes block; liveness comes from EOF
        try:
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
        except OSError as exc:
            raise ConnectFailure(f"cannot start {argv[0]}: {exc}") from exc

    def send_line(self, line: str) -> None:
        self._proc.stdin.write(line.encode("utf-8") + b"\n")
        self._proc.stdin.flush()

    def recv_line(self) -> str:
        line = self._proc.stdout.readline()
        if not line:
            raise ConnectionError("server process closed its output")
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        self._proc.terminate()
        self._proc.wait(timeout=5)


def _open_transport(endpoint: str, timeout: float):
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[4:].rpartition(":")
        return _TcpTransport(host or "127.0.0.1", int(port), timeout)
    if endpoint.startswith("stdio:"):
        return _StdioTransport(shlex.split(endpoint[6:]), timeout)
    raise ValueError(f"endpoint must start with tcp: or stdio:, got {endpoint!r}")


def _parse_message(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedResponse(f"invalid JSON from server: {line!r}") from exc
    if not isinstance(msg, dict) or "kind" not in msg:
        raise MalformedResponse(f"message without a kind: {line!r}")
    return msg


def handshake(transport) -> ModelInfo:
    """Exchange hello/info and validate the advertised protocol version."""
    transport.send_line(json.dumps({"kind": "hello",
                                    "protocol_version": PROTOCOL_VERSION}))
    msg = _parse_message(transport.recv_line())
    if msg.get("protocol_version", PROTOCOL_VERSION) != PROTOCOL_VERSION:
        raise VersionMismatch(f"server speaks protocol {msg['protocol_version']}, "
                              f"client speaks {PROTOCOL_VERSION}")
    if msg["kind"] == "error":
        raise ScorerFailure(f"server rejected handshake: {msg.get('message')}")
    if msg["kind"] != "info":
        raise MalformedResponse(f"expected info, got {msg['kind']!r}")
    try:
        info = ModelInfo(int(msg["vocab_size"]), int(msg["mask_id"]),
                         int(msg["max_length"]), str(msg.get("name", "")))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedResponse(f"bad info message: {msg}") from exc
    if info.vocab_size < 2:
        raise MalformedResponse(f"server vocab size {info.vocab_size} < 2")
    if info.mask_id < 0 or info.max_length < 1:
        raise MalformedResponse(f"implausible server info: {info}")
    return info


class RemoteScorer:
    """A scorer evaluated by a protocol-v1 server.

    Ordinary token ids are passed through opaquely; only the mask sentinel
    is remapped between the local convention (``vocab.size``) and the
    server's advertised id.  Transient transport failures are retried with
    exponential backoff, reconnecting and re-handshaking each time; the
    sampler sees a :class:`ScorerFailure` only once retries are exhausted.
    """

    def __init__(self, endpoint: str, length: int | None = None,
                 timeout: float = 10.0, retries: int = 2, backoff: float = 0.05):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._lock = threading.Lock()
        self._next_id = 0
        self._transport = _open_transport(endpoint, timeout)
        self.info = handshake(self._transport)
        self.vocab = Vocab(self.info.vocab_size)
        self.length = length if length is not None else self.info.max_length

    def close(self) -> None:
        if self._transport is not None:
            self._transport.close()
            self._transport = None

    def _reconnect(self) -> None:
        self.close()
        self._transport = _open_transport(self.endpoint, self.timeout)
        info = handshake(self._transport)
        if info != self.info:
            raise ScorerFailure(f"server identity changed across reconnect: {info}")

    def logits(self, view: MaskedView) -> list[tuple[int, np.ndarray]]:
        if view.base.length > self.info.max_length:
            raise ScorerFailure(f"view length {view.base.length} exceeds server "
                                f"max_length {self.info.max_length}")
        masked = sorted(view.masked)
        tokens = [self.info.mask_id if i in view.masked else tok
                  for i, tok in enumerate(view.readout())]
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            payload = json.dumps({"kind": "logits", "id": request_id,
                                  "tokens": tokens, "masked": masked})
            msg = self._roundtrip(payload)
        rows = self._validate_rows(msg, request_id, len(masked))
        return list(zip(masked, rows))

    def _roundtrip(self, payload: str) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                if self._transport is None:
                    self._reconnect()
                self._transport.send_line(payload)
                msg = _parse_message(self._transport.recv_line())
                if msg["kind"] == "error":
                    raise ScorerFailure(f"server error: {msg.get('message')}")
                return msg
            except (ConnectionError, ConnectFailure, OSError, socket.timeout) as exc:
                last_error = exc
                self.close()
                if attempt < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise ScorerFailure(f"request failed after {self.retries + 1} attempts: "
                            f"{last_error}") from last_error

    def _validate_rows(self, msg: dict, request_id: int, expected: int) -> list[np.ndarray]:
        if msg["kind"] != "rows":
            raise MalformedResponse(f"expected rows, got {msg['kind']!r}")
        if msg.get("id") != request_id:
            raise MalformedResponse(f"response id {msg.get('id')} does not match "
                                    f"request id {request_id}")
        raw = msg.get("rows")
        if not isinstance(raw, list) or len(raw) != expected:
            raise MalformedResponse(f"expected {expected} rows, got "
                                    f"{len(raw) if isinstance(raw, list) else raw!r}")
        rows = []
        for row in raw:
            arr = np.asarray(row, dtype=np.float64)
            if arr.shape != (self.info.vocab_size,):
                raise MalformedResponse(f"row has shape {arr.shape}, expected "
                                        f"({self.info.vocab_size},)")
            if not np.all(np.isfinite(arr)):
                raise MalformedResponse("non-finite value in server row")
            rows.append(arr)
        return rows


def connect(endpoint: str, length: int | None = None, timeout: float = 10.0,
            retries: int = 2) -> RemoteScorer:
    """Open a connection, handshake, and wrap it as a scorer."""
    return RemoteScorer(endpoint, length=length, timeout=timeout, retries=retries)


def remote_logits(conn: RemoteScorer, view: MaskedView) -> list[tuple[int, np.ndarray]]:
    """Logit rows for a view, evaluated by the remote server."""
    return conn.logits(view)
