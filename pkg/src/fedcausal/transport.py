"""Moving encoded uploads from clients to the server.

Two interchangeable transports: an in-process bus for simulation and
tests, and a length-prefixed byte stream over a local TCP socket. Both
carry opaque byte payloads; framing is a 4-byte big-endian length prefix
per message on the socket path.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading

from .errors import TruncatedPayload

_LENGTH_PREFIX = struct.Struct(">I")
MAX_MESSAGE_BYTES = 1 << 30


class InProcessBus:
    """Thread-safe mailbox: clients send bytes, the server collects them."""

    def __init__(self):
        self._queue: queue.Queue[bytes] = queue.Queue()

    def send(self, payload: bytes) -> None:
        self._queue.put(bytes(payload))

    def collect(self, expected: int, timeout: float | None = None) -> list[bytes]:
        """Block until `expected` messages have arrived and return them."""
        out = []
        for _ in range(expected):
            out.append(self._queue.get(timeout=timeout))
        return out


def frame_message(payload: bytes) -> bytes:
    if len(payload) > MAX_MESSAGE_BYTES:
        raise ValueError("message too large to frame")
    return _LENGTH_PREFIX.pack(len(payload)) + payload


def read_message(stream) -> bytes:
    """Read one length-prefixed message from a socket-like object."""
    header = _read_exact(stream, _LENGTH_PREFIX.size)
    (length,) = _LENGTH_PREFIX.unpack(header)
    if length > MAX_MESSAGE_BYTES:
        raise ValueError(f"declared message length {length} too large")
    return _read_exact(stream, length)


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = stream.recv(remaining)
        if not chunk:
            raise TruncatedPayload(
                f"stream closed with {remaining} of {count} bytes unread"
            )
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class UploadServer:
    """Collects one framed message per connection on a local socket.

    Accepts in a background thread until `expected` messages arrived;
    `result()` joins and returns the raw payloads.
    """

    def __init__(self, expected: int, host: str = "127.0.0.1", port: int = 0):
        self.expected = expected
        self._sock = socket.create_server((host, port))
        self.host, self.port = self._sock.getsockname()[:2]
        self._payloads: list[bytes] = []
        self._error: BaseException | None = None
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self) -> None:
        try:
            with self._sock:
                for _ in range(self.expected):
                    conn, _addr = self._sock.accept()
                    with conn:
                        self._payloads.append(read_message(conn))
        except BaseException as exc:
            self._error = exc

    def result(self, timeout: float | None = 30.0) -> list[bytes]:
        self._thread.join(timeout=timeout)
        if self._thread.is_alive():
            raise TimeoutError("upload server still waiting for messages")
        if self._error is not None:
            raise self._error
        return list(self._payloads)


def send_bytes(host: str, port: int, payload: bytes, timeout: float = 30.0) -> None:
    """Open a connection, send one framed message, close."""
    with socket.create_connection((host, port), timeout=timeout) as conn:
        conn.sendall(frame_message(payload))
