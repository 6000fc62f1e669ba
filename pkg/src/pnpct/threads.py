"""Worker-parallelism cap shared by the kernels and the experiment runner.

``PNPCT_THREADS`` limits both the numba thread pool and the number of
experiment variants computed concurrently. Unset means library defaults
(numba's own pool size, sequential variants).
"""

import os

import numba

__all__ = ["thread_cap", "apply_thread_cap"]


def thread_cap() -> int:
    """Configured cap (>= 1); 0 means unconfigured."""
    raw = os.environ.get("PNPCT_THREADS", "").strip()
    if not raw:
        return 0
    try:
        n = int(raw)
    except ValueError:
        return 0
    return max(n, 1)


def apply_thread_cap():
    """Clamp the numba pool to the configured cap, if any."""
    cap = thread_cap()
    if cap:
        numba.set_num_threads(min(cap, numba.config.NUMBA_NUM_THREADS))
    return cap


def kernels_reentrant() -> bool:
    """Whether parallel kernels may be invoked from several Python threads.

    Only the omp and tbb layers are thread-safe; workqueue is not.
    """
    try:
        return numba.threading_layer() in ("omp", "tbb")
    except ValueError:
        # no parallel kernel has run yet, the layer is unknown
        return False
