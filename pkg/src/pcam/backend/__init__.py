"""Backend selection: compiled Cython kernels when available, numpy otherwise.

Set ``PCAM_BACKEND=numpy`` in the environment to force the fallback even
when the extension is importable.  ``active()`` returns the module in use;
both backends expose the same functions (see ``_ref`` for the contract).
"""

import os

from . import _ref

_IMPORT_ERROR = None
try:
    from . import _kernels  # compiled extension, may be absent
except ImportError as exc:  # pragma: no cover - depends on build environment
    _kernels = None
    _IMPORT_ERROR = exc

if os.environ.get("PCAM_BACKEND") == "numpy" or _kernels is None:
    _active = _ref
else:
    _active = _kernels


def active():
    """The backend module currently dispatching the hot kernels."""
    return _active


def available():
    """Mapping of backend name to module, for benchmarks and tests."""
    out = {"numpy": _ref}
    if _kernels is not None:
        out["cython"] = _kernels
    return out


def use(name):
    """Switch the active backend ('numpy' or 'cython'). Returns the module."""
    global _active
    mods = available()
    if name not in mods:
        raise ValueError(f"backend {name!r} not available (have {sorted(mods)})")
    _active = mods[name]
    return _active
