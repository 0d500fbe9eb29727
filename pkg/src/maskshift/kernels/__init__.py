"""Backend dispatch for the hot training kernels.

The jitted numba backend is used by default. Set MASKSHIFT_BACKEND=numpy
to force the pure-numpy fallback (useful where numba is unavailable or
for benchmarking: see benchmarks/bench_kernels.py), or
MASKSHIFT_BACKEND=numba to fail loudly if numba cannot be imported.
"""

from __future__ import annotations

import os

from ..errors import ConfigError

_requested = os.environ.get("MASKSHIFT_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ConfigError(
        f"MASKSHIFT_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import reference as _impl
elif _requested == "numba":
    from . import jitted as _impl
else:
    try:
        from . import jitted as _impl
    except ImportError:  # pragma: no cover - numba is a hard dep normally
        from . import reference as _impl

BACKEND = _impl.BACKEND_NAME

batch_ce_grad = _impl.batch_ce_grad
editor_batch_grad = _impl.editor_batch_grad
mask_batch_grad = _impl.mask_batch_grad
