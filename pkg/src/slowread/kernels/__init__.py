"""Batch numeric kernels with a numba fast path.

Set ``SLOWREAD_PURE_NUMPY=1`` to force the pure-numpy implementations; they
are also used automatically when numba cannot be imported. ``BACKEND``
names the active path.
"""
import os

import numpy as np

from . import _numpy

BACKEND = "numpy"
_impl = _numpy

if os.environ.get("SLOWREAD_PURE_NUMPY", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _numba
    except ImportError:  # numba missing or broken for this interpreter
        pass
    else:
        _impl = _numba
        BACKEND = "numba"


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def chunk_drain_times(size, window, rate, rtt=0):
    """Enumerate the read ticks of each transfer.

    Returns ``(finish_us, max_gap_us)`` arrays: the last tick time relative
    to admission and the largest spacing between consecutive progress
    instants (admission counts as the first).
    """
    size = _i64(size)
    rtt = _i64(np.broadcast_to(rtt, size.shape))
    return _impl.chunk_drain_times(size, _i64(window), _i64(rate), rtt)


def throughput_mask(opened, delivered, now, min_observation, slow_threshold):
    """Return ``(throughput, observed, slow)``; throughput is NaN when unobserved."""
    return _impl.throughput_mask(_i64(opened), _i64(delivered), int(now),
                                 int(min_observation), float(slow_threshold))


def segment_max_gap(offsets, times):
    return _impl.segment_max_gap(_i64(offsets), _i64(times))


def window_tally(at, admitted, window, n_windows):
    """Per-window counts of attempts and admissions for attempt times ``at``."""
    return _impl.window_tally(_i64(at), np.ascontiguousarray(admitted, dtype=np.bool_),
                              int(window), int(n_windows))
