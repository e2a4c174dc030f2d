from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

# Override any of these from a Django project with
#   CRYSTAL_CERTIFICATES = {"SAMPLE_SIZE": 200, ...}
DEFAULTS = {
    # Dense bitset engine refuses domains larger than 2**BITSET_MAX_LOG2 cells.
    "BITSET_MAX_LOG2": 24,
    # Symbolic results are cross-checked by the bitset engine up to this m_k.
    "CROSS_CHECK_MAX_LOG2": 16,
    # Full 2D rasterization (2**(2 m_k) cells) only up to this m_k.
    "RASTER_2D_MAX_LOG2": 12,
    # Translate lists materialize their offsets only below 2**ENUMERATION_CAP_LOG2.
    "ENUMERATION_CAP_LOG2": 20,
    # Largest m_k the symbolic engine accepts. Copy counts are ints with up to
    # m_k bits, so the tower basis stops at k = 3.
    "SYMBOLIC_MAX_EXPONENT": 1 << 28,
    # Families with at most this many members are checked member by member.
    "EXHAUSTIVE_CHECK_MAX": 4096,
    "SAMPLE_SIZE": 1000,
    "SAMPLE_SEED": 0,
    # Brute-force superlevel oracle grid cap.
    "ORACLE_MAX_LOG2": 12,
    # Working precision for the logarithms in the Orlicz gauges.
    "PHI_PRECISION_BITS": 128,
}

# Overrides set by the command line (e.g. --seed). Each thread or task sees its
# own copy; runs scope theirs with `overridden`.
_runtime_overrides: ContextVar[dict[str, Any]] = ContextVar(
    "crystal_certificates_overrides", default={}
)


def _check_known(overrides: dict[str, Any]):
    unknown = set(overrides) - set(DEFAULTS)
    if unknown:
        raise KeyError(f"unknown settings: {sorted(unknown)}")


def configure(**overrides):
    _check_known(overrides)
    _runtime_overrides.set({**_runtime_overrides.get(), **overrides})


def reset():
    _runtime_overrides.set({})


def runtime_overrides() -> dict[str, Any]:
    return dict(_runtime_overrides.get())


@contextmanager
def overridden(**overrides):
    """Apply runtime overrides for the duration of a block, then restore the previous ones."""
    _check_known(overrides)
    token = _runtime_overrides.set({**_runtime_overrides.get(), **overrides})
    try:
        yield
    finally:
        _runtime_overrides.reset(token)


def get_setting(name: str) -> Any:
    """
    Return a setting: command-line overrides first, then the Django project's
    CRYSTAL_CERTIFICATES dict when Django is configured, then DEFAULTS. The
    mathematical core also runs standalone, so an unconfigured Django is not an
    error.
    """
    from django.conf import settings

    overrides = _runtime_overrides.get()
    if name in overrides:
        return overrides[name]
    if settings.configured:
        project = getattr(settings, "CRYSTAL_CERTIFICATES", None) or {}
        if name in project:
            return project[name]
    return DEFAULTS[name]
