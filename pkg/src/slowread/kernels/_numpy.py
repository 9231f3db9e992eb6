"""Pure-numpy implementations of the batch kernels."""
import numpy as np

US_PER_S = 1_000_000


def chunk_drain_times(size, window, rate, rtt):
    """Walk every chunk of every transfer; return (finish time, max tick gap).

    Vectorised across transfers, looping over chunk index.
    """
    size = np.asarray(size, dtype=np.int64)
    window = np.asarray(window, dtype=np.int64)
    rate = np.asarray(rate, dtype=np.int64)
    rtt = np.broadcast_to(np.asarray(rtt, dtype=np.int64), size.shape)
    through = np.zeros_like(size)
    prev = np.zeros_like(size)
    max_gap = np.zeros_like(size)
    k = 0
    active = through < size
    while active.any():
        k += 1
        through = np.where(active, np.minimum(through + window, size), through)
        tick = -(-(through * US_PER_S) // rate) + k * rtt
        gap = tick - prev
        max_gap = np.where(active, np.maximum(max_gap, gap), max_gap)
        prev = np.where(active, tick, prev)
        active = through < size
    return prev, max_gap


def throughput_mask(opened, delivered, now, min_observation, slow_threshold):
    opened = np.asarray(opened, dtype=np.int64)
    delivered = np.asarray(delivered, dtype=np.int64)
    elapsed = now - opened
    observed = (elapsed >= min_observation) & (elapsed > 0)
    safe = np.where(observed, elapsed, 1)
    thr = np.where(observed, delivered * float(US_PER_S) / safe, np.nan)
    slow = observed & (delivered * float(US_PER_S) < slow_threshold * elapsed)
    return thr, observed, slow


def segment_max_gap(offsets, times):
    """Largest consecutive difference inside each CSR segment of ``times``.

    Segments with fewer than two points get 0.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    nseg = len(offsets) - 1
    out = np.zeros(max(nseg, 0), dtype=np.int64)
    if len(times) < 2 or nseg <= 0:
        return out
    seg = np.repeat(np.arange(nseg), np.diff(offsets))
    same = seg[1:] == seg[:-1]
    np.maximum.at(out, seg[:-1][same], np.diff(times)[same])
    return out


def window_tally(at, admitted, window, n_windows):
    at = np.asarray(at, dtype=np.int64)
    admitted = np.asarray(admitted, dtype=bool)
    idx = at // window
    keep = (idx >= 0) & (idx < n_windows)
    attempts = np.bincount(idx[keep], minlength=n_windows).astype(np.int64)
    admits = np.bincount(idx[keep & admitted], minlength=n_windows).astype(np.int64)
    return attempts, admits
