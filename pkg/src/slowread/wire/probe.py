from __future__ import annotations

import socket
import time

from .attack import request_bytes
from .guard import ensure_loopback

PROBE_DEADLINE = 2.0  # seconds; must stay well under any timeout under test


def probe(host: str, port: int, allow_non_loopback: bool = False,
          deadline: float = PROBE_DEADLINE) -> dict:
    """One fast GET. Outcome is ``ok`` (full 200 body), ``refused`` (503,
    connection refused or reset) or ``timeout`` (deadline passed)."""
    host = ensure_loopback(host, allow_non_loopback)
    t0 = time.monotonic()
    stop = t0 + deadline

    def result(outcome, status=None, nbytes=0):
        return {"outcome": outcome, "latency": round(time.monotonic() - t0, 6),
                "status": status, "bytes": nbytes}

    s = socket.socket(socket.AF_INET6 if ":" in host else socket.AF_INET)
    try:
        s.settimeout(deadline)
        try:
            s.connect((host, port))
            s.sendall(request_bytes(host))
        except ConnectionError:
            return result("refused")
        except socket.timeout:
            return result("timeout")
        except OSError:
            return result("refused")
        buf = bytearray()
        while True:
            left = stop - time.monotonic()
            if left <= 0:
                return result("timeout", nbytes=len(buf))
            s.settimeout(left)
            try:
                data = s.recv(65536)
            except socket.timeout:
                return result("timeout", nbytes=len(buf))
            except ConnectionError:
                return result("refused", nbytes=len(buf))
            if not data:
                break
            buf += data
        head, sep, body = bytes(buf).partition(b"\r\n\r\n")
        if not sep or len(head) < 12:
            return result("refused", nbytes=len(buf))
        status = int(head[9:12])
        if status != 200:
            return result("refused", status, len(buf))
        length = None
        for line in head.split(b"\r\n")[1:]:
            k, _, v = line.partition(b":")
            if k.strip().lower() == b"content-length":
                length = int(v)
        if length is not None and len(body) != length:
            return result("refused", status, len(buf))
        return result("ok", status, len(buf))
    finally:
        s.close()
