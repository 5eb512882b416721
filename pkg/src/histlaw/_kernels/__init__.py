"""Backend selection for the combinatorial hot kernels.

Two interchangeable implementations of path enumeration and backward
sampling: a Cython extension (``_compiled``) and a vectorized numpy fallback
(``reference``).  Both emit only integer path/edge structures; every float or
complex value is computed afterwards by shared code, so the backends are
bit-identical by construction and tested as such.

Selection: the compiled module when importable, else the fallback.  Override
with HISTLAW_BACKEND=python|compiled.
"""

from __future__ import annotations

import os

from . import reference

_BACKENDS = {"python": reference}

try:  # pragma: no cover - exercised indirectly
    from . import _compiled  # type: ignore[attr-defined]
    _BACKENDS["compiled"] = _compiled
except ImportError:
    _compiled = None

_FORCED = os.environ.get("HISTLAW_BACKEND", "").strip().lower()


def get_backend(name=None):
    """Return the backend module; ``name`` (a name or an already-resolved
    backend module) overrides env/default selection."""
    if name is not None and not isinstance(name, str):
        return name
    pick = name or _FORCED
    if pick:
        try:
            return _BACKENDS[pick]
        except KeyError:
            raise ImportError(
                f"backend {pick!r} unavailable (have: {sorted(_BACKENDS)})") from None
    return _BACKENDS.get("compiled", reference)


def backend_name(name: str | None = None) -> str:
    mod = get_backend(name)
    return "compiled" if mod is _BACKENDS.get("compiled") else "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))
