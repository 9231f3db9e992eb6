"""Command-line entry point.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 runtime I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import BindError, NonLoopbackRefused, ScenarioError

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3


def _wire_common(p, port_default=8080):
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=port_default)
    p.add_argument("--unsafe-allow-non-loopback", action="store_true",
                   help="permit a non-loopback address (testbed use on hosts you own only)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowread", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"slowread {__version__}")
    ap.add_argument("--schema", action="store_true", help="print the scenario JSON schema and exit")
    sub = ap.add_subparsers(dest="cmd")

    sim = sub.add_parser("simulate", help="run a scenario file")
    sim.add_argument("scenario")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--out", help="output directory (default: out/<scenario name>)")

    wire = sub.add_parser("wire", help="real-socket loopback harness")
    wsub = wire.add_subparsers(dest="wire_cmd", required=True)
    s = wsub.add_parser("serve", help="capped HTTP/1.0 server; one stats line per second")
    _wire_common(s)
    s.add_argument("--max-clients", type=int, default=50)
    s.add_argument("--idle-timeout", type=float, default=10.0, help="seconds")
    s.add_argument("--body-size", type=int, default=256 * 1024, help="bytes")
    a = wsub.add_parser("attack", help="slow-read client; prints one JSON summary line")
    _wire_common(a)
    a.add_argument("--count", type=int, default=60)
    a.add_argument("--rcvbuf", type=int, default=1024, help="SO_RCVBUF bytes")
    a.add_argument("--read-rate", type=float, default=64.0, help="bytes/s per connection")
    a.add_argument("--hold", type=float, default=20.0, help="seconds")
    a.add_argument("--chunk", type=int, default=16, help="bytes per paced read")
    pr = wsub.add_parser("probe", help="single fast request with a 2 s deadline")
    _wire_common(pr)
    return ap


def _simulate(args) -> int:
    from .scenario import parse_scenario, run_scenario
    try:
        sc = parse_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out) if args.out else Path("out") / sc.name
    try:
        run_scenario(sc, out, seed=args.seed)
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"out": str(out), "fingerprint": (out / "fingerprint.txt").read_text().split()[1]}))
    return EXIT_OK


def _wire(args) -> int:
    from . import wire
    allow = args.unsafe_allow_non_loopback
    try:
        if args.wire_cmd == "serve":
            wire.serve(wire.WireServerConfig(args.host, args.port, args.max_clients, args.idle_timeout,
                                             args.body_size, allow))
        elif args.wire_cmd == "attack":
            summary = wire.slow_read_attack(wire.WireAttackConfig(
                args.host, args.port, args.count, args.rcvbuf, args.read_rate, args.hold,
                args.chunk, allow_non_loopback=allow))
            print(json.dumps(summary, sort_keys=True), flush=True)
        else:
            print(json.dumps(wire.probe(args.host, args.port, allow), sort_keys=True), flush=True)
    except NonLoopbackRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BindError, OSError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.schema:
        from .scenario import SCHEMA
        print(json.dumps(SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    if args.cmd == "simulate":
        return _simulate(args)
    if args.cmd == "wire":
        return _wire(args)
    ap.print_help()
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
