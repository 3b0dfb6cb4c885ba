"""Protocol-v1 serve loop over stdio or TCP.

Newline-delimited JSON, one request at a time per connection.  Malformed
requests get an error message and the connection stays open; only EOF (or
socket teardown) ends a session.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass

from .backends import RequestError

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ServerConfig:
    backend: str  # "tabular" | "pretrained"
    source: str  # file path or pretrained model name
    transport: str = "stdio"  # "stdio" | "tcp"
    port: int = 0
    device: str = "cpu"


def load_backend(config: ServerConfig):
    if config.backend == "tabular":
        from .backends import TabularBackend

        return TabularBackend(config.source)
    if config.backend == "pretrained":
        from .backends import PretrainedBackend

        return PretrainedBackend.load(config.source, device=config.device)
    raise ValueError(f"unknown backend {config.backend!r}")


def _info_message(backend) -> dict:
    return {"kind": "info", "protocol_version": PROTOCOL_VERSION,
            "vocab_size": backend.vocab_size, "mask_id": backend.mask_id,
            "max_length": backend.max_length, "name": backend.name}


def _error(message: str) -> dict:
    return {"kind": "error", "message": message}


def handle_request(backend, msg: dict) -> dict:
    kind = msg.get("kind")
    if kind == "hello":
        return _info_message(backend)
    if kind == "logits":
        tokens = msg.get("tokens")
        masked = msg.get("masked")
        if not isinstance(tokens, list) or not all(isinstance(t, int) for t in tokens):
            return _error("tokens must be a list of integers")
        if not isinstance(masked, list) or not all(isinstance(p, int) for p in masked):
            return _error("masked must be a list of positions")
        if not masked:
            return _error("nothing is masked")
        if sorted(masked) != masked or len(set(masked)) != len(masked):
            return _error("masked positions must be sorted and unique")
        if any(not 0 <= p < len(tokens) for p in masked):
            return _error("masked position out of range")
        try:
            rows = backend.rows(tokens, masked)
        except RequestError as exc:
            return _error(str(exc))
        return {"kind": "rows", "id": msg.get("id"), "rows": rows}
    return _error(f"unknown kind {kind!r}")


def serve_stream(backend, reader, writer) -> None:
    """Answer requests line by line until the peer closes the stream."""
    for raw in reader:
        try:
            msg = json.loads(raw)
            if not isinstance(msg, dict):
                raise json.JSONDecodeError("not an object", "", 0)
        except json.JSONDecodeError:
            reply = _error("invalid JSON")
        else:
            reply = handle_request(backend, msg)
        writer.write((json.dumps(reply) + "\n").encode("utf-8"))
        writer.flush()


def serve(config: ServerConfig) -> None:
    """Run the server until the transport is exhausted (stdio) or killed."""
    backend = load_backend(config)
    if config.transport == "stdio":
        serve_stream(backend, sys.stdin.buffer, sys.stdout.buffer)
        return
    if config.transport != "tcp":
        raise ValueError(f"unknown transport {config.transport!r}")
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind(("127.0.0.1", config.port))
    sock.listen(1)
    print(f"listening on {sock.getsockname()[1]}", file=sys.stderr, flush=True)
    try:
        while True:
            conn, _ = sock.accept()
            with conn:
                fh = conn.makefile("rwb")
                try:
                    serve_stream(backend, fh, fh)
                except (ConnectionError, OSError):
                    pass
    finally:
        sock.close()
