"""Client/server recognition over TCP (PARS wire protocol).

Frame layout (big-endian integers):
  magic "PARS" | version u8 = 1 | msg_type u8 | payload_len u32 | payload
msg_type: 1 = RecognizeRequest (payload = PGM bytes),
          2 = RecognizeResponse, 3 = Error (payload = UTF-8 text).
Response payload: object_id i64 (-1 = no match), match_count u32,
total_query_features u32, then name_len u16 + UTF-8 name only when a
match was found.

One request per connection; the database and index are built once at
startup and shared read-only across handler threads.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading
from dataclasses import dataclass

from . import featuredb, match, recognizer, surf
from .imagecore import PgmError, decode_pgm
from .recognizer import Recognition

MAGIC = b"PARS"
VERSION = 1
MSG_RECOGNIZE_REQUEST = 1
MSG_RECOGNIZE_RESPONSE = 2
MSG_ERROR = 3
MAX_PAYLOAD = 16 * 1024 * 1024
REQUEST_TIMEOUT_S = 30.0
SHUTDOWN_GRACE_S = 5.0

_HEADER = struct.Struct(">4sBBI")


class ProtocolError(Exception):
    """Malformed frame or payload."""


class ServerError(Exception):
    """The server answered with an Error message."""


class ConnectError(Exception):
    """Could not reach the recognition server."""


@dataclass(frozen=True)
class WireMessage:
    msg_type: int
    payload: bytes


def encode_frame(msg: WireMessage) -> bytes:
    if msg.msg_type not in (MSG_RECOGNIZE_REQUEST, MSG_RECOGNIZE_RESPONSE, MSG_ERROR):
        raise ProtocolError(f"unknown msg_type {msg.msg_type}")
    if len(msg.payload) > MAX_PAYLOAD:
        raise ProtocolError("payload too large")
    return _HEADER.pack(MAGIC, VERSION, msg.msg_type, len(msg.payload)) + msg.payload


def decode_frame(data: bytes) -> WireMessage:
    """Decode one complete frame from bytes (must consume them exactly)."""
    msg, rest = _decode_prefix(data)
    if rest:
        raise ProtocolError(f"{len(rest)} trailing bytes after frame")
    return msg


def _decode_prefix(data: bytes) -> tuple[WireMessage, bytes]:
    if len(data) < _HEADER.size:
        raise ProtocolError("truncated frame header")
    magic, version, msg_type, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if msg_type not in (MSG_RECOGNIZE_REQUEST, MSG_RECOGNIZE_RESPONSE, MSG_ERROR):
        raise ProtocolError(f"unknown msg_type {msg_type}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    body = data[_HEADER.size : _HEADER.size + length]
    if len(body) < length:
        raise ProtocolError("truncated payload")
    return WireMessage(msg_type, body), data[_HEADER.size + length :]


def encode_response(rec: Recognition) -> bytes:
    if rec.object_id is None:
        return struct.pack(
            ">qII", -1, rec.match_count, rec.total_query_features
        )
    name = (rec.object_name or "").encode("utf-8")
    return (
        struct.pack(">qII", rec.object_id, rec.match_count, rec.total_query_features)
        + struct.pack(">H", len(name))
        + name
    )


def decode_response(payload: bytes) -> Recognition:
    if len(payload) < 16:
        raise ProtocolError("response payload too short")
    object_id, match_count, total = struct.unpack_from(">qII", payload)
    if object_id == -1:
        if len(payload) != 16:
            raise ProtocolError("no-match response must carry no name")
        return Recognition(None, None, match_count, total, 0.0)
    if len(payload) < 18:
        raise ProtocolError("response payload missing name length")
    (name_len,) = struct.unpack_from(">H", payload, 16)
    if len(payload) != 18 + name_len:
        raise ProtocolError("response name length mismatch")
    name = payload[18 : 18 + name_len].decode("utf-8")
    return Recognition(
        object_id, name, match_count, total, match_count / max(total, 1)
    )


def _recv_frame(sock: socket.socket) -> WireMessage:
    header = _recv_exact(sock, _HEADER.size)
    magic, version, msg_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if msg_type not in (MSG_RECOGNIZE_REQUEST, MSG_RECOGNIZE_RESPONSE, MSG_ERROR):
        raise ProtocolError(f"unknown msg_type {msg_type}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    return WireMessage(msg_type, _recv_exact(sock, length))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(65536, n - got))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


@dataclass
class RecognizerConfig:
    ratio: float = recognizer.DEFAULT_RATIO
    checks: int | None = match.DEFAULT_CHECKS
    min_matches: int = recognizer.DEFAULT_MIN_MATCHES
    sign_filter: bool = True
    threshold: float = surf.DEFAULT_THRESHOLD
    num_trees: int = match.DEFAULT_NUM_TREES
    seed: int = 42


class RecognitionServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    # Drain in-flight handlers on shutdown (bounded by the request timeout).
    block_on_close = True

    def __init__(self, address, db, forest, config: RecognizerConfig):
        self.db = db
        self.forest = forest
        self.config = config
        super().__init__(address, _Handler)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(REQUEST_TIMEOUT_S)
        try:
            msg = _recv_frame(self.request)
        except ProtocolError as exc:
            self._send_error(str(exc))
            return
        except (socket.timeout, OSError):
            return
        if msg.msg_type != MSG_RECOGNIZE_REQUEST:
            self._send_error(f"unexpected msg_type {msg.msg_type}")
            return
        cfg: RecognizerConfig = self.server.config
        try:
            img = decode_pgm(msg.payload)
        except PgmError as exc:
            self._send_error(f"bad image: {exc}")
            return
        try:
            rec = recognizer.recognize(
                self.server.db,
                self.server.forest,
                img,
                ratio=cfg.ratio,
                checks=cfg.checks,
                min_matches=cfg.min_matches,
                sign_filter=cfg.sign_filter,
                threshold=cfg.threshold,
            )
        except Exception as exc:  # never let one request kill the server
            self._send_error(f"recognition failed: {exc}")
            return
        self._send(WireMessage(MSG_RECOGNIZE_RESPONSE, encode_response(rec)))

    def _send(self, msg: WireMessage) -> None:
        try:
            self.request.sendall(encode_frame(msg))
        except OSError:
            pass

    def _send_error(self, text: str) -> None:
        self._send(WireMessage(MSG_ERROR, text.encode("utf-8")))
        # Drain whatever the client is still sending so closing the socket
        # does not turn into a reset that clobbers the error frame.
        try:
            self.request.settimeout(1.0)
            self.request.shutdown(socket.SHUT_WR)
            for _ in range(256):
                if not self.request.recv(65536):
                    break
        except OSError:
            pass


def start_server(
    db_path, bind_address: str, port: int, config: RecognizerConfig | None = None
) -> RecognitionServer:
    """Load the database, build the index, and start serving in a thread.

    Returns the server; call shutdown()/server_close() to stop it.  The
    bound port is server.server_address[1] (useful with port 0).
    """
    config = config or RecognizerConfig()
    db = featuredb.load(db_path)
    forest = featuredb.build_index(db, num_trees=config.num_trees, seed=config.seed)
    server = RecognitionServer((bind_address, port), db, forest, config)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    server._serve_thread = thread
    return server


def serve(db_path, bind_address: str, port: int, config: RecognizerConfig | None = None):
    """Blocking variant of start_server; runs until interrupted."""
    server = start_server(db_path, bind_address, port, config)
    try:
        server._serve_thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()


def client_recognize(host: str, port: int, pgm_bytes: bytes) -> Recognition:
    """Send one image to the server and decode its answer."""
    try:
        sock = socket.create_connection((host, port), timeout=REQUEST_TIMEOUT_S)
    except OSError as exc:
        raise ConnectError(f"cannot connect to {host}:{port}: {exc}") from exc
    with sock:
        sock.sendall(encode_frame(WireMessage(MSG_RECOGNIZE_REQUEST, pgm_bytes)))
        reply = _recv_frame(sock)
    if reply.msg_type == MSG_ERROR:
        raise ServerError(reply.payload.decode("utf-8", "replace"))
    if reply.msg_type != MSG_RECOGNIZE_RESPONSE:
        raise ProtocolError(f"unexpected reply type {reply.msg_type}")
    return decode_response(reply.payload)
