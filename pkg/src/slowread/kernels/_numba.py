"""numba-compiled versions of the batch kernels; same contracts as _numpy."""
import numpy as np
from numba import njit

US_PER_S = 1_000_000


@njit(cache=True, nogil=True)
def chunk_drain_times(size, window, rate, rtt):
    n = size.shape[0]
    finish = np.zeros(n, dtype=np.int64)
    max_gap = np.zeros(n, dtype=np.int64)
    for i in range(n):
        through = 0
        prev = 0
        k = 0
        while through < size[i]:
            k += 1
            through = min(through + window[i], size[i])
            tick = -(-(through * US_PER_S) // rate[i]) + k * rtt[i]
            if tick - prev > max_gap[i]:
                max_gap[i] = tick - prev
            prev = tick
        finish[i] = prev
    return finish, max_gap


@njit(cache=True, nogil=True)
def throughput_mask(opened, delivered, now, min_observation, slow_threshold):
    n = opened.shape[0]
    thr = np.empty(n, dtype=np.float64)
    observed = np.zeros(n, dtype=np.bool_)
    slow = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        elapsed = now - opened[i]
        if elapsed >= min_observation and elapsed > 0:
            observed[i] = True
            thr[i] = delivered[i] * float(US_PER_S) / elapsed
            slow[i] = delivered[i] * float(US_PER_S) < slow_threshold * elapsed
        else:
            thr[i] = np.nan
    return thr, observed, slow


@njit(cache=True, nogil=True)
def segment_max_gap(offsets, times):
    nseg = offsets.shape[0] - 1
    out = np.zeros(max(nseg, 0), dtype=np.int64)
    for s in range(nseg):
        best = 0
        for j in range(offsets[s] + 1, offsets[s + 1]):
            d = times[j] - times[j - 1]
            if d > best:
                best = d
        out[s] = best
    return out


@njit(cache=True, nogil=True)
def window_tally(at, admitted, window, n_windows):
    attempts = np.zeros(n_windows, dtype=np.int64)
    admits = np.zeros(n_windows, dtype=np.int64)
    for i in range(at.shape[0]):
        w = at[i] // window
        if 0 <= w < n_windows:
            attempts[w] += 1
            if admitted[i]:
                admits[w] += 1
    return attempts, admits
