"""Backend selection for the batch trial kernels.

The compiled extension is used when it imports; otherwise the numpy twin.
Set ``EPRLAB_PURE=1`` to force the numpy backend.
"""

from __future__ import annotations

import os

from . import _pykernel

if os.environ.get("EPRLAB_PURE", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernel as _compiled  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None

BACKENDS = {"numpy": _pykernel}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

default = _compiled if _compiled is not None else _pykernel


def get(name: str | None = None):
    if name is None:
        return default
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
