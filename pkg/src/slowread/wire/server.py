"""Minimal HTTP/1.0 server with a hard connection cap and an idle timeout.

Single-threaded ``selectors`` loop. A connection counts as making progress
whenever ``send()`` accepts bytes or the peer acknowledges more of the
response, read from the kernel send-queue depth (``TIOCOUTQ``, Linux).
Connections past ``max_clients`` receive a 503 and are closed. Idle
connections are reset (RST) so the slot frees at once.

Only accepted connections count against ``max_clients``; connections
still waiting in the kernel's accept queue do not.
"""
from __future__ import annotations

import fcntl
import selectors
import signal
import socket
import struct
import sys
import termios
import threading
import time
from dataclasses import dataclass

from ..errors import BindError
from .guard import ensure_loopback

REFUSAL = (b"HTTP/1.0 503 Service Unavailable\r\nContent-Length: 0\r\n"
           b"Connection: close\r\n\r\n")
MAX_REQUEST = 8192
REFUSED_LINGER = 1.0


@dataclass
class WireServerConfig:
    host: str = "127.0.0.1"
    port: int = 0
    max_clients: int = 50
    idle_timeout: float = 10.0
    body_size: int = 256 * 1024
    allow_non_loopback: bool = False
    backlog: int = 1024

    def __post_init__(self):
        if self.max_clients < 0:
            raise ValueError("max_clients must be >= 0")
        if self.idle_timeout <= 0:
            raise ValueError("idle_timeout must be > 0")


def _outq(sock) -> int:
    try:
        return struct.unpack("i", fcntl.ioctl(sock.fileno(), termios.TIOCOUTQ, b"\0\0\0\0"))[0]
    except OSError:
        return 0


class _Client:
    __slots__ = ("sock", "request", "response", "sent", "acked", "last_progress", "writing")

    def __init__(self, sock, now):
        self.sock = sock
        self.request = b""
        self.response = b""
        self.sent = 0
        self.acked = 0
        self.last_progress = now
        self.writing = False


class WireServer:
    def __init__(self, cfg: WireServerConfig, out=None):
        self.cfg = cfg
        self.out = out or sys.stdout
        host = ensure_loopback(cfg.host, cfg.allow_non_loopback)
        self.listener = socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self.listener.bind((host, cfg.port))
        except OSError as exc:
            self.listener.close()
            raise BindError(f"cannot bind {host}:{cfg.port}: {exc}") from exc
        self.listener.listen(cfg.backlog)
        self.listener.setblocking(False)
        self.address = self.listener.getsockname()[:2]
        self.body = b"x" * cfg.body_size
        self.header = (f"HTTP/1.0 200 OK\r\nContent-Type: application/octet-stream\r\n"
                       f"Content-Length: {cfg.body_size}\r\nConnection: close\r\n\r\n").encode()
        self.sel = selectors.DefaultSelector()
        self.sel.register(self.listener, selectors.EVENT_READ, None)
        self.clients: dict[int, _Client] = {}
        self.refused: dict[int, tuple[socket.socket, float]] = {}
        self.accepted_total = 0
        self.refused_total = 0
        self.timeouts_total = 0
        self.max_open = 0
        self._stop = threading.Event()

    @property
    def open(self) -> int:
        return len(self.clients)

    def stats_line(self) -> str:
        return (f"ts={int(time.time() * 1000)} open={self.open} accepted_total={self.accepted_total} "
                f"refused_total={self.refused_total} timeouts_total={self.timeouts_total}")

    def stop(self):
        self._stop.set()

    def serve_forever(self, stats_interval: float = 1.0):
        print(f"listening host={self.address[0]} port={self.address[1]}", file=self.out, flush=True)
        next_stats = time.monotonic() + stats_interval
        try:
            while not self._stop.is_set():
                for key, mask in self.sel.select(timeout=0.05):
                    if key.data is None:
                        self._accept()
                    else:
                        self._service(key.data, mask)
                now = time.monotonic()
                self._sweep(now)
                if now >= next_stats:
                    print(self.stats_line(), file=self.out, flush=True)
                    next_stats += stats_interval
        finally:
            self.close()

    def close(self):
        for c in list(self.clients.values()):
            self._drop(c, reset=True)
        for fd in list(self.refused):
            self._drop_refused(fd)
        self.sel.close()
        self.listener.close()

    # internals -----------------------------------------------------------

    def _accept(self):
        while True:
            try:
                sock, _ = self.listener.accept()
            except (BlockingIOError, InterruptedError):
                return
            sock.setblocking(False)
            now = time.monotonic()
            if len(self.clients) >= self.cfg.max_clients:
                self.refused_total += 1
                try:
                    sock.send(REFUSAL)
                    sock.shutdown(socket.SHUT_WR)
                except OSError:
                    sock.close()
                    continue
                self.refused[sock.fileno()] = (sock, now + REFUSED_LINGER)
                self.sel.register(sock, selectors.EVENT_READ, ("refused", sock.fileno()))
                continue
            c = _Client(sock, now)
            self.clients[sock.fileno()] = c
            self.accepted_total += 1
            self.max_open = max(self.max_open, len(self.clients))
            self.sel.register(sock, selectors.EVENT_READ, c)

    def _service(self, c, mask):
        if isinstance(c, tuple):
            fd = c[1]
            sock = self.refused[fd][0]
            try:
                if not sock.recv(4096):
                    self._drop_refused(fd)
            except OSError:
                self._drop_refused(fd)
            return
        now = time.monotonic()
        if mask & selectors.EVENT_READ and not c.writing:
            try:
                data = c.sock.recv(4096)
            except OSError:
                self._drop(c)
                return
            if not data:
                self._drop(c)
                return
            c.request += data
            if b"\r\n\r\n" in c.request or len(c.request) > MAX_REQUEST:
                c.response = self.header + self.body
                c.writing = True
                c.last_progress = now
                self.sel.modify(c.sock, selectors.EVENT_WRITE, c)
                self._write(c, now)
            return
        if mask & selectors.EVENT_WRITE:
            self._write(c, now)

    def _write(self, c, now):
        if c.sent < len(c.response):
            try:
                n = c.sock.send(memoryview(c.response)[c.sent:c.sent + 65536])
            except (BlockingIOError, InterruptedError):
                n = 0
            except OSError:
                self._drop(c)
                return
            if n:
                c.sent += n
                c.last_progress = now
            if c.sent >= len(c.response):
                self.sel.modify(c.sock, selectors.EVENT_READ, c)

    def _sweep(self, now):
        idle = self.cfg.idle_timeout
        for c in list(self.clients.values()):
            if c.writing:
                acked = c.sent - _outq(c.sock)
                if acked > c.acked:
                    c.acked = acked
                    c.last_progress = now
                if c.sent >= len(c.response) and c.acked >= c.sent:
                    self._drop(c)
                    continue
            if now - c.last_progress >= idle:
                self.timeouts_total += 1
                self._drop(c, reset=True)
        for fd, (_, deadline) in list(self.refused.items()):
            if now >= deadline:
                self._drop_refused(fd)

    def _drop(self, c, reset=False):
        fd = c.sock.fileno()
        self.clients.pop(fd, None)
        try:
            self.sel.unregister(c.sock)
        except (KeyError, ValueError):
            pass
        if reset:
            try:
                c.sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
            except OSError:
                pass
        c.sock.close()

    def _drop_refused(self, fd):
        sock, _ = self.refused.pop(fd)
        try:
            self.sel.unregister(sock)
        except (KeyError, ValueError):
            pass
        sock.close()


def serve(cfg: WireServerConfig, out=None):
    """Run until SIGINT/SIGTERM, printing one stats line per second."""
    server = WireServer(cfg, out)
    prev = {}
    for sig in (signal.SIGINT, signal.SIGTERM):
        prev[sig] = signal.signal(sig, lambda *_: server.stop())
    try:
        server.serve_forever()
    finally:
        for sig, h in prev.items():
            signal.signal(sig, h)
    return server
