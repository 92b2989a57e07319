# dcda/utils/validators.py
"""Shared argument checks"""

import numpy as np

from dcda.core.exceptions import ConfigurationError, DomainError


def require_finite(v, name: str = "input") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def require_probability(value: float, name: str, allow_zero: bool = False, allow_one: bool = True) -> float:
    """Check ``value`` lies in (0, 1], with optional closed/open ends"""
    low_ok = value >= 0 if allow_zero else value > 0
    high_ok = value <= 1 if allow_one else value < 1
    if not (low_ok and high_ok):
        lo = "[" if allow_zero else "("
        hi = "]" if allow_one else ")"
        raise DomainError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return float(value)


def require_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return float(value)


def require_divides(m: int, d: int) -> None:
    if m < 1 or d % m != 0:
        raise ConfigurationError(f"m must divide d (m={m}, d={d})")
