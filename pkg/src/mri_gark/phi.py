"""Exponential phi-functions on complex arguments.

``phi_0(z) = exp(z)`` and ``phi_k(z) = int_0^1 exp(z (1 - t)) t^(k-1) dt`` for
``k >= 1``. Small arguments use the Taylor series, larger ones the upward
recurrence ``phi_{k+1}(z) = (k phi_k(z) - 1) / z`` (``phi_1 = (exp(z) - 1) / z``). It loses
accuracy once ``k`` exceeds ``|z|``, so the series is used for ``|z| < max(1, k)``.
"""

from __future__ import annotations

from typing import Any

import numpy as np

MAX_K = 12
TAYLOR_TERMS = 60


def _check_k(k: int) -> None:
    if not 0 <= k <= MAX_K:
        raise ValueError(f"phi index must lie in [0, {MAX_K}], got {k}")


def series_radius(k: int) -> float:
    """Largest ``|z|`` (exclusive) evaluated by the Taylor branch."""
    return max(1.0, float(k))


def phi_taylor(k: int, z: Any) -> np.ndarray:
    """Taylor branch: ``sum_j z^j / (j + k)!`` scaled by ``(k-1)!``, for ``k >= 1``."""
    z = np.asarray(z, dtype=complex)
    term = np.full(z.shape, 1.0 / k, dtype=complex)
    total = term.copy()
    for j in range(TAYLOR_TERMS):
        term = term * z / (j + k + 1)
        total += term
    return total


def phi_recurrence(k: int, z: Any) -> np.ndarray:
    """Upward recurrence branch; ``z`` must be nonzero."""
    z = np.asarray(z, dtype=complex)
    value = np.exp(z)
    for j in range(k):
        value = (max(j, 1) * value - 1.0) / z
    return value


def _phi_array(k: int, z: np.ndarray) -> np.ndarray:
    if k == 0:
        return np.exp(z)
    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.shape, dtype=complex)
    small = np.abs(flat) < series_radius(k)
    if small.any():
        out[small] = phi_taylor(k, flat[small])
    if not small.all():
        out[~small] = phi_recurrence(k, flat[~small])
    return out.reshape(z.shape)


def phi(k: int, z: Any) -> Any:
    """Evaluate ``phi_k(z)``.

    Args:
        k: Index, 0 <= k <= MAX_K
        z: Complex scalar or array

    Returns:
        A Python complex for scalar input, otherwise a complex ndarray of the
        same shape as ``z``.
    """
    _check_k(k)
    z_arr = np.asarray(z, dtype=complex)
    out = _phi_array(k, z_arr)
    if z_arr.ndim == 0:
        return complex(out)
    return out


def phi_row(kmax: int, z: Any) -> np.ndarray:
    """Return ``[phi_0(z), ..., phi_kmax(z)]`` stacked along a new first axis."""
    _check_k(kmax)
    z_arr = np.asarray(z, dtype=complex)
    return np.stack([_phi_array(k, z_arr) for k in range(kmax + 1)])
