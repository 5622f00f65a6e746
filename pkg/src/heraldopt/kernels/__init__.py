"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The Cython extension ``_speedups`` is built at install time; if it is
missing (source checkout without a compiler, unsupported platform) the
numpy implementation in ``_pure`` is used instead.  ``BACKEND`` records
which one was selected.
"""

from . import _pure

try:
    from . import _speedups as _impl

    BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build environment
    _impl = _pure
    BACKEND = "python"

permanent = _impl.permanent
transition_matrix = _impl.transition_matrix
transition_gradient = _impl.transition_gradient

__all__ = ["BACKEND", "permanent", "transition_matrix", "transition_gradient"]
