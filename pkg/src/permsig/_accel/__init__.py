"""Trial-scoring kernels: compiled fast path with a pure-numpy fallback.

The permutation engine spends nearly all of its time scoring permuted
copies of one column block through a frozen model. That inner loop lives
here in two interchangeable implementations:

* ``_fastkern`` — optional Cython extension (built in place via
  ``python setup_ext.py build_ext --inplace``); releases the GIL so trial
  chunks scale across worker threads.
* ``pykernels`` — pure numpy, always available.

Selection happens at import: the compiled core is used when importable,
unless ``PERMSIG_BACKEND=python`` (or ``compiled``) overrides it. Both
backends receive identical per-trial permutations, so results agree to
floating-point roundoff and all decisions downstream are shared code.
"""

from __future__ import annotations

import os

from . import pykernels

try:
    from . import _fastkern  # compiled in place; absent on pure installs
    _HAVE_COMPILED = True
except ImportError:
    _fastkern = None
    _HAVE_COMPILED = False

_FORCED = os.environ.get("PERMSIG_BACKEND", "").strip().lower()


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if _HAVE_COMPILED else ("python",)


def active_backend() -> str:
    if _FORCED == "python":
        return "python"
    if _FORCED == "compiled":
        if not _HAVE_COMPILED:
            raise ImportError(
                "PERMSIG_BACKEND=compiled but the extension is not built; "
                "run: python setup_ext.py build_ext --inplace"
            )
        return "compiled"
    return "compiled" if _HAVE_COMPILED else "python"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active one)."""
    name = name or active_backend()
    if name == "python":
        return pykernels
    if name == "compiled":
        if not _HAVE_COMPILED:
            raise ImportError("compiled backend not built")
        return _fastkern
    raise ValueError(f"unknown backend {name!r}")
