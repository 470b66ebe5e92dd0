"""Backend selection for the hot numerical kernels.

Two interchangeable implementations of the low-level primitives exist:

* ``numba`` -- cyclic-Jacobi eigensolver and the Dykstra projection loop
  compiled with ``numba.njit`` (the default when numba imports cleanly);
* ``numpy`` -- pure-numpy fallback backed by LAPACK ``eigh``.

Set ``OPSYSLAB_PURE_NUMPY=1`` in the environment to force the numpy path
(useful on platforms where numba is unavailable, and for benchmarking:
see ``benchmarks/bench_backends.py``).
"""

import os

_FORCE_NUMPY = os.environ.get("OPSYSLAB_PURE_NUMPY", "").strip() not in ("", "0")

if not _FORCE_NUMPY:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover
        HAS_NUMBA = False
else:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _FORCE_NUMPY


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
