"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback with identical signatures takes over.
"""
from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

backend = "compiled" if _compiled is not None else "python"
_impl = BACKENDS[backend]


def use_backend(name: str):
    """Switch the active backend ("compiled" or "python")."""
    global backend, _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    backend = name
    _impl = BACKENDS[name]


def two_estimate_vi(*args):
    return _impl.two_estimate_vi(*args)


def master_value(*args):
    return _impl.master_value(*args)
