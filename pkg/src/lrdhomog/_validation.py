"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

import numbers

import numpy as np


class EmbeddingError(RuntimeError):
    """Circulant embedding stayed indefinite after the allowed padding doublings."""


class ConvergenceError(RuntimeError):
    """A numerical refinement or iteration failed to converge."""


def check_hurst(H0, *, name="H0", allow_one=False):
    H0 = float(H0)
    upper_ok = H0 <= 1.0 if allow_one else H0 < 1.0
    if not (H0 > 0.0 and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {H0!r}")
    return H0


def check_lrd_hurst(H0, m):
    """Check H0 in (1 - 1/(2m), 1) and return the Hermite-process index H."""
    m = check_order(m, name="m", minimum=1)
    H0 = float(H0)
    lo = 1.0 - 1.0 / (2 * m)
    if not (lo < H0 < 1.0):
        raise ValueError(
            f"H0={H0!r} outside the long-range interval ({lo:g}, 1) for order m={m}"
        )
    return 1.0 + m * (H0 - 1.0)


def check_order(k, *, name="q", minimum=0, maximum=None):
    if isinstance(k, bool) or not isinstance(k, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(k).__name__}")
    k = int(k)
    if k < minimum or (maximum is not None and k > maximum):
        hi = "inf" if maximum is None else maximum
        raise ValueError(f"{name} must lie in [{minimum}, {hi}], got {k}")
    return k


def check_positive(x, *, name):
    x = float(x)
    if not (np.isfinite(x) and x > 0):
        raise ValueError(f"{name} must be a positive finite number, got {x!r}")
    return x


def check_unit_interval(x, *, name):
    x = float(x)
    if not (0.0 < x < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {x!r}")
    return x


def integral_ratio(numer, denom, *, name, rtol=1e-9):
    """Return numer/denom as an int, raising if it is not (numerically) integral."""
    r = float(numer) / float(denom)
    k = int(round(r))
    if k < 1 or abs(r - k) > rtol * max(1.0, r):
        raise ValueError(f"{name} must be a positive integer, got {r!r}")
    return k


def check_finite_1d(values, *, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def frozen(arr):
    """Return a read-only float array (copying only when needed)."""
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out
