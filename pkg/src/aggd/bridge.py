"""Client for the line-JSON bridge protocol that drives an external encoder.

Each message is one line of UTF-8 JSON. Requests carry a session-unique
integer ``id``; responses echo it, so pipelined requests may be answered in
any order. Float matrices travel as base64 little-endian float32 with an
explicit ``shape``. The default transport is a child process on stdio; TCP
is available for encoders that run elsewhere.
"""

from __future__ import annotations

import base64
import json
import queue
import shutil
import socket
import subprocess
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PROTOCOL_PREFIX = "aggd-bridge/1"
PIPELINE_WINDOW = 16
DEFAULT_TIMEOUT = 30.0


class BridgeError(RuntimeError):
    """Protocol violation, transport failure or server-reported error."""


def encode_f32(matrix: np.ndarray) -> tuple[list[int], str]:
    """Row-major little-endian float32 payload: (shape, base64 data)."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    return list(arr.shape), base64.b64encode(arr.tobytes(order="C")).decode("ascii")


def decode_f32(data: str, shape: Sequence[int]) -> np.ndarray:
    raw = base64.b64decode(data)
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise BridgeError(f"payload length {len(raw)} does not match shape {list(shape)}")
    return np.frombuffer(raw, dtype="<f4").reshape(tuple(shape)).copy()


@dataclass(frozen=True)
class RemoteQuerySet:
    """Opaque server-side handle for a registered query set."""

    handle: str


class _StdioTransport:
    def __init__(self, cmd: Sequence[str]):
        self.proc = subprocess.Popen(
            list(cmd),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )

    def send_line(self, line: str) -> None:
        if self.proc.stdin is None or self.proc.poll() is not None:
            raise BridgeError("bridge process is not running")
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def readline(self) -> str:
        return self.proc.stdout.readline()

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(None)
        self._reader = self.sock.makefile("r", encoding="utf-8")
        self._writer = self.sock.makefile("w", encoding="utf-8")

    def send_line(self, line: str) -> None:
        self._writer.write(line + "\n")
        self._writer.flush()

    def readline(self) -> str:
        return self._reader.readline()

    def close(self) -> None:
        for stream in (self._reader, self._writer):
            try:
                stream.close()
            except OSError:
                pass
        self.sock.close()


class BridgeSession:
    """One logical connection to a bridge server.

    Callers on one session must serialize their requests; responses may
    arrive in any order and are re-associated by id. Use separate sessions
    for concurrent attack workers.
    """

    def __init__(self, transport, timeout: float = DEFAULT_TIMEOUT):
        self._transport = transport
        self._timeout = timeout
        self._next_id = 0
        self._lock = threading.Lock()
        self._inbox: "queue.Queue[object]" = queue.Queue()
        self._received: dict[int, dict] = {}
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.dim: int | None = None
        self.vocab_size: int | None = None
        self.version: str | None = None

    @classmethod
    def spawn(cls, cmd: Sequence[str], timeout: float = DEFAULT_TIMEOUT) -> "BridgeSession":
        if not cmd:
            raise ValueError("empty bridge command")
        if shutil.which(cmd[0]) is None:
            raise BridgeError(f"bridge command not found: {cmd[0]}")
        return cls(_StdioTransport(cmd), timeout=timeout)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> "BridgeSession":
        return cls(_TcpTransport(host, port, timeout), timeout=timeout)

    def _pump(self) -> None:
        while True:
            try:
                line = self._transport.readline()
            except (OSError, ValueError):
                break
            if not line:
                break
            self._inbox.put(line)
        self._inbox.put(None)  # EOF marker

    def _take_id(self) -> int:
        with self._lock:
            rid = self._next_id
            self._next_id += 1
        return rid

    def _send(self, op: str, **payload) -> int:
        rid = self._take_id()
        message = {"id": rid, "op": op, **payload}
        self._transport.send_line(json.dumps(message))
        return rid

    def _await(self, rid: int) -> dict:
        while rid not in self._received:
            try:
                line = self._inbox.get(timeout=self._timeout)
            except queue.Empty:
                raise BridgeError(f"timeout after {self._timeout}s waiting for response {rid}")
            if line is None:
                raise BridgeError("bridge closed the connection")
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeError(f"malformed response line: {exc.msg}") from exc
            if not isinstance(msg, dict) or "id" not in msg:
                raise BridgeError("response missing id")
            self._received[int(msg["id"])] = msg
        msg = self._received.pop(rid)
        if not msg.get("ok", False):
            raise BridgeError(str(msg.get("error", "unspecified bridge error")))
        return msg

    def _call(self, op: str, **payload) -> dict:
        return self._await(self._send(op, **payload))

    def _call_many(self, requests: Iterable[tuple[str, dict]]) -> list[dict]:
        """Issue requests with at most PIPELINE_WINDOW in flight; results in request order."""
        requests = list(requests)
        responses: list[dict | None] = [None] * len(requests)
        pending: list[tuple[int, int]] = []  # (request id, slot)
        cursor = 0
        while cursor < len(requests) or pending:
            while cursor < len(requests) and len(pending) < PIPELINE_WINDOW:
                op, payload = requests[cursor]
                pending.append((self._send(op, **payload), cursor))
                cursor += 1
            rid, slot = pending.pop(0)
            responses[slot] = self._await(rid)
        return responses

    # -- protocol operations -------------------------------------------------

    def handshake_info(self) -> tuple[int, int, str]:
        """Fetch and cache (dim, vocab_size, version); rejects unknown protocol majors."""
        msg = self._call("info")
        version = str(msg.get("version", ""))
        if not version.startswith(PROTOCOL_PREFIX):
            raise BridgeError(f"unsupported bridge version {version!r}")
        self.dim = int(msg["dim"])
        self.vocab_size = int(msg["vocab_size"])
        self.version = version
        return self.dim, self.vocab_size, version

    def _ensure_handshake(self) -> None:
        if self.dim is None:
            self.handshake_info()

    def set_queries(self, texts: Sequence[str]) -> RemoteQuerySet:
        if not texts:
            raise ValueError("query set is empty")
        self._ensure_handshake()
        msg = self._call("set_queries", texts=list(texts))
        return RemoteQuerySet(handle=str(msg["handle"]))

    def encode_passages(self, seqs: Sequence) -> np.ndarray:
        self._ensure_handshake()
        token_ids = [[int(t) for t in seq] for seq in seqs]
        for ids in token_ids:
            for t in ids:
                if not 0 <= t < self.vocab_size:
                    raise ValueError(f"token id {t} out of range for remote vocab {self.vocab_size}")
        if not token_ids:
            return np.zeros((0, self.dim), dtype=np.float32)
        msg = self._call("encode_passages", token_ids=token_ids)
        matrix = decode_f32(msg["data"], msg["shape"])
        if matrix.shape != (len(token_ids), self.dim):
            raise BridgeError(f"unexpected shape {list(matrix.shape)} for {len(token_ids)} passages")
        return matrix

    def loss_and_grad(self, seq, queries: RemoteQuerySet) -> tuple[float, np.ndarray]:
        self._ensure_handshake()
        token_ids = [int(t) for t in seq]
        msg = self._call("loss_and_grad", token_ids=token_ids, handle=queries.handle)
        grad = decode_f32(msg["data"], msg["shape"])
        if grad.shape != (len(token_ids), self.dim):
            raise BridgeError(f"gradient shape {list(grad.shape)} does not match passage length {len(token_ids)}")
        return float(msg["loss"]), grad.astype(np.float64)

    def loss_and_grad_many(self, seqs: Sequence, queries: RemoteQuerySet) -> list[tuple[float, np.ndarray]]:
        """Pipelined loss_and_grad over several passages."""
        self._ensure_handshake()
        requests = [("loss_and_grad", {"token_ids": [int(t) for t in seq], "handle": queries.handle}) for seq in seqs]
        out = []
        for seq, msg in zip(seqs, self._call_many(requests)):
            grad = decode_f32(msg["data"], msg["shape"])
            out.append((float(msg["loss"]), grad.astype(np.float64)))
        return out

    def shutdown(self) -> None:
        try:
            self._call("shutdown")
        except BridgeError:
            pass

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "BridgeSession":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()
        self.close()
