"""Kernel dispatch: numba-compiled hot loops with pure-numpy fallbacks.

Every hot kernel exists twice, as ``<name>_numba`` (an ``@njit`` loop)
and ``<name>_numpy`` (a vectorized implementation). The public alias
``<name>`` points at the numba build unless the environment variable
``TSDFMAP_NUMBA`` is set to ``0``/``false``/``off`` or numba is not
importable. ``benchmarks/bench_kernels.py`` times both paths.
"""

import os


def _env_wants_jit() -> bool:
    value = os.environ.get("TSDFMAP_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


JIT_ENABLED = _env_wants_jit()

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(*args, **kwargs):
        """No-op stand-in so the _numba variants stay importable."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
