"""Process-wide knobs. Results never depend on these values, only speed."""

import os

_state = {"threads": os.cpu_count() or 1}


def configure_numba():
    import numba

    # skip the TBB probe, which warns on older system TBB builds
    if numba.config.THREADING_LAYER == "default":
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    return numba


def get_num_threads():
    return _state["threads"]


def set_num_threads(n):
    """Cap internal data parallelism (FFT workers, compiled kernels)."""
    n = int(n)
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _state["threads"] = n
    numba = configure_numba()
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
