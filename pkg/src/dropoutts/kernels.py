"""Kernel backend selection.

The compiled extension (``_kernels``) is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` is used. Set ``DROPOUTTS_PURE_PYTHON=1`` to
force the fallback.

``spectral_gate`` stays on numpy even when the extension is present. It is
dominated by exp/log calls, the compiled loop is at most ~1.3x faster and the
gate is a small share of a training step (see ``benchmarks/bench_kernels.py``),
so the scorer keeps a single numpy path.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("DROPOUTTS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

keep_mask = impl.keep_mask
uniforms = impl.uniforms
ols_detrend = impl.ols_detrend
adam_update = impl.adam_update
spectral_gate = python_backend.spectral_gate

_MASK64 = (1 << 64) - 1


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, *ids: int) -> int:
    """Derive a 64-bit counter key from a seed and a path of integer ids.

    ``stream_key(seed, epoch, step, sample, site)`` names one mask stream;
    distinct paths give statistically independent streams.
    """
    k = _mix(int(seed) & _MASK64)
    for i in ids:
        k = _mix((k ^ (int(i) & _MASK64)) + 0x9E3779B97F4A7C15 & _MASK64)
    return k
