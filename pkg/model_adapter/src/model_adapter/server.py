"""The serve loop: newline-delimited JSON over a pipe or a TCP socket.

The server speaks first with ``{"labels": ..., "n": ...}``. Every request
line ``{"id": ..., "xs": [[...], ...]}`` is answered with ``{"id": ...,
"ys": [...]}``; anything wrong with a line (bad JSON, missing fields, wrong
point width, a predictor exception) produces ``{"error": ..., "id": ...}``
with whatever id could be recovered, and the connection stays open. EOF
shuts the loop down cleanly. Messages are serialized with sorted keys and
compact separators so a fixed request byte sequence yields a fixed response
byte sequence.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import IO

from .served import ServedModel

_MAX_POINTS_PER_MESSAGE = 65536


def _dumps(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":")) + "\n"


def _answer_line(served: ServedModel, line: str) -> dict:
    request_id = None
    try:
        message = json.loads(line)
        if not isinstance(message, dict):
            raise ValueError("request must be a JSON object")
        request_id = message.get("id")
        if "xs" not in message:
            raise ValueError("request carries no xs field")
        xs = message["xs"]
        if isinstance(xs, list) and len(xs) > _MAX_POINTS_PER_MESSAGE:
            raise ValueError(f"request exceeds {_MAX_POINTS_PER_MESSAGE} points")
        return {"id": request_id, "ys": served.answer(xs)}
    except Exception as exc:
        return {"id": request_id, "error": str(exc)}


def serve(served: ServedModel, reader: IO[str], writer: IO[str]) -> None:
    """Handshake, then answer requests until the peer closes the stream."""
    writer.write(_dumps({"n": served.n, "labels": served.labels}))
    writer.flush()
    for line in reader:
        if not line.strip():
            continue
        writer.write(_dumps(_answer_line(served, line)))
        writer.flush()


def serve_stdio(served: ServedModel) -> None:
    serve(served, sys.stdin, sys.stdout)


def serve_tcp(served: ServedModel, port: int, announce: IO[str] | None = None) -> None:
    """Serve one connection on 127.0.0.1:port (port 0 picks a free one)."""
    with socket.create_server(("127.0.0.1", port)) as listener:
        bound = listener.getsockname()[1]
        print(f"listening: {bound}", file=announce or sys.stderr, flush=True)
        conn, _ = listener.accept()
        with conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            writer = conn.makefile("w", encoding="utf-8", newline="\n")
            try:
                serve(served, reader, writer)
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                # The file wrappers hold the socket open past conn.close().
                for stream in (writer, reader):
                    try:
                        stream.close()
                    except OSError:
                        pass
