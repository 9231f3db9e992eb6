"""Brute-force arithmetic oracle for single-zone runs without analysis.

Independent of the simulator: nothing is scheduled. Each connection's read
instants and close instant are computed in closed form, and admission is
decided by counting which earlier connections still hold a slot. A slot
released at ``t`` still counts against an arrival at ``t``.
"""
import random

US = 1_000_000


def _up(num, den):
    q, r = divmod(num, den)
    return q + (r > 0)


def read_instants(at, size, window, rate, rtt):
    """Instants at which each chunk finishes draining, and bytes through it."""
    out = []
    through = 0
    k = 0
    while through < size:
        k += 1
        through = min(through + window, size)
        out.append((at + _up(through * US, rate) + k * rtt, through))
    return out


def expected_transitions(conns, max_clients, timeout, policy, rtt, horizon):
    """``conns``: (id, at, size, window, rate) tuples. Returns the sorted
    (time, id, what[, bytes]) transitions the simulator log must show."""
    out = []
    held = []  # release instant per admitted conn; None if never released
    for cid, at, size, window, rate in sorted(conns, key=lambda c: (c[1], c[0])):
        if at > horizon:
            continue
        busy = sum(1 for rel in held if rel is None or rel >= at)
        if busy >= max_clients:
            out.append((at, cid, "rejected"))
            continue
        out.append((at, cid, "admitted"))
        reads = read_instants(at, size, window, rate, rtt)
        close_at, how = at, "complete"
        last = at
        for t, _ in reads:
            limit = last + timeout if policy == "idle" else at + timeout
            if t >= limit:
                close_at, how = limit, "timeout"
                break
            last = close_at = t
        for t, through in reads:
            if t <= close_at and t < horizon and not (how == "timeout" and t == close_at):
                out.append((t, cid, "delivered", through))
        if close_at < horizon:
            out.append((close_at, cid, how))
            held.append(close_at)
        else:
            held.append(None)
    return sorted(out)


def observed_transitions(log):
    """Project a simulator log onto the oracle's vocabulary."""
    out = []
    for r in log:
        f = dict(tok.partition("=")[::2] for tok in r.text.split())
        if r.kind == "ConnectAttempt":
            out.append((r.at, int(f["conn"]), f["result"]))
        elif r.kind == "ReadTick" and "delivered" in f:
            out.append((r.at, int(f["conn"]), "delivered", int(f["delivered"])))
        elif r.kind in ("ReadTick", "TimeoutCheck") and "timeout" in f:
            out.append((r.at, int(f["conn"]), "timeout"))
        elif r.kind == "TransferComplete":
            out.append((r.at, int(f["conn"]), "complete"))
    return sorted(out)


def grid(n_cases=160):
    """Deterministic case grid: at most 5 connections, 3 chunks each, 60 s.

    Roughly a third of the connections read at a rate whose chunk gap equals
    the timeout exactly, to exercise the inclusive boundary.
    """
    cases = []
    for i in range(n_cases):
        r = random.Random(i)
        timeout = r.choice([2, 3, 5, 10]) * US
        case = {
            "max_clients": r.randint(0, 3),
            "timeout": timeout,
            "policy": r.choice(["idle", "absolute"]),
            "rtt": r.choice([0, 0, 250_000]),
            "horizon": r.choice([20, 30, 45, 60]) * US,
            "conns": [],
        }
        for cid in range(r.randint(1, 5)):
            if r.random() < 0.35:
                rate = r.choice([1, 2, 5])
                window = rate * timeout // US
            else:
                rate = r.choice([1, 2, 5, 7, 16, 100])
                window = r.randint(1, 40)
            chunks = r.randint(1, 3)
            size = window * (chunks - 1) + r.randint(1, window)
            at = r.randrange(0, 40) * 500_000
            case["conns"].append((cid, at, size, window, rate))
        case["conns"].sort(key=lambda c: (c[1], c[0]))
        case["conns"] = [(j, *c[1:]) for j, c in enumerate(case["conns"])]
        cases.append(case)
    return cases
