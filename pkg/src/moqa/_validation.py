"""Input validation helpers shared across modules."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import SymmetryError, ValidationError

SYMMETRY_ATOL = 1e-12


def as_square_matrix(M, name="matrix"):
    arr = np.array(M, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValidationError(f"{name} must have at least one row")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_symmetric(M, name="matrix", atol=SYMMETRY_ATOL):
    """Return ``M`` as a float array, raising :class:`SymmetryError` if asymmetric."""
    arr = as_square_matrix(M, name)
    scale = max(1.0, float(np.max(np.abs(arr))))
    dev = float(np.max(np.abs(arr - arr.T)))
    if dev > atol * scale:
        raise SymmetryError(f"{name} is not symmetric (max |M - M^T| = {dev:.3g})")
    # exact symmetry downstream
    return 0.5 * (arr + arr.T)


def as_vector(v, n=None, name="vector"):
    arr = np.atleast_1d(np.array(v, dtype=np.float64)).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise ValidationError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_spins(s, n):
    """Validate a sign vector (1-D) or a batch of them (2-D, one per row)."""
    arr = np.asarray(s)
    if arr.ndim not in (1, 2) or arr.shape[-1] != n:
        raise ValidationError(f"spin input must have trailing dimension {n}, got shape {arr.shape}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ValidationError("spins must be +1 or -1")
    return arr.astype(np.float64)


def check_bits(b, n):
    arr = np.asarray(b)
    if arr.ndim not in (1, 2) or arr.shape[-1] != n:
        raise ValidationError(f"bit input must have trailing dimension {n}, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("bits must be 0 or 1")
    return arr.astype(np.int8)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
