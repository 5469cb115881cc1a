"""Scalar special functions and profile-width measurement.

``ssi`` is the shifted sine integral ``Si(x) - pi/2``.  Small arguments use the
Maclaurin series of ``Si``; larger ones evaluate the auxiliary functions of the
sine integral through the continued fraction of ``E1(ix)``, which stays at
machine precision all the way to the clipping argument used by the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import maybe_njit

__all__ = ["sinc", "si", "ssi", "Profile1D", "fwhm", "ProfileError", "SERIES_LIMIT"]

#: Largest |x| evaluated with the power series.
SERIES_LIMIT = 4.0
_HALF_PI = 0.5 * np.pi
_CF_EPS = 1e-16
_CF_MAXIT = 400


def sinc(x):
    """Unnormalized sinc, ``sin(x)/x`` with ``sinc(0) = 1``.

    Note that :func:`numpy.sinc` is the normalized ``sin(pi x)/(pi x)``; the
    kernels here all use the unnormalized convention.
    """
    x = np.asarray(x, dtype=float)
    return np.sinc(x / np.pi)


def _ssi_scalar(x):
    ax = abs(x)
    if ax <= SERIES_LIMIT:
        # Si(x) = sum (-1)^n x^(2n+1) / ((2n+1) (2n+1)!)
        x2 = ax * ax
        term = ax
        total = ax
        n = 0
        while True:
            n += 1
            term = -term * x2 / ((2 * n) * (2 * n + 1))
            contrib = term / (2 * n + 1)
            total += contrib
            if abs(contrib) <= 1e-17 * abs(total) or n > 60:
                break
        si_abs = total
    else:
        # Modified Lentz evaluation of E1(i x); Si(x) - pi/2 = Im(h e^{-ix}).
        b = complex(1.0, ax)
        c = 1e300
        d = 1.0 / b
        h = d
        for i in range(2, _CF_MAXIT):
            a = -float((i - 1) * (i - 1))
            b = b + 2.0
            d = 1.0 / (a * d + b)
            c = b + a / c
            delta = c * d
            h = h * delta
            if abs(delta.real - 1.0) + abs(delta.imag) < _CF_EPS:
                break
        h = h * complex(np.cos(ax), -np.sin(ax))
        si_abs = _HALF_PI + h.imag
    if x < 0:
        return -si_abs - _HALF_PI
    return si_abs - _HALF_PI


_ssi_scalar_jit = maybe_njit(_ssi_scalar)
if _ssi_scalar_jit is not None:
    from numba import njit as _nj

    @_nj(cache=True)
    def _ssi_loop_jit(xs, out):
        for i in range(xs.size):
            out[i] = _ssi_scalar_jit(xs[i])
        return out

else:
    _ssi_loop_jit = None


def _ssi_numpy(xs):
    """Vectorized fallback used when numba is unavailable."""
    ax = np.abs(xs)
    out = np.empty_like(ax)
    small = ax <= SERIES_LIMIT
    if np.any(small):
        v = ax[small]
        x2 = v * v
        term = v.copy()
        total = v.copy()
        n = 0
        while True:
            n += 1
            term = -term * x2 / ((2 * n) * (2 * n + 1))
            contrib = term / (2 * n + 1)
            total += contrib
            if np.all(np.abs(contrib) <= 1e-17 * np.abs(total)) or n > 60:
                break
        out[small] = total - _HALF_PI
    big = ~small
    if np.any(big):
        v = ax[big]
        b = 1.0 + 1j * v
        c = np.full(v.shape, 1e300, dtype=complex)
        d = 1.0 / b
        h = d.copy()
        active = np.ones(v.shape, dtype=bool)
        for i in range(2, _CF_MAXIT):
            a = -float((i - 1) * (i - 1))
            b = b + 2.0
            d = 1.0 / (a * d + b)
            c = b + a / c
            delta = c * d
            h = np.where(active, h * delta, h)
            active &= np.abs(delta.real - 1.0) + np.abs(delta.imag) >= _CF_EPS
            if not active.any():
                break
        h = h * (np.cos(v) - 1j * np.sin(v))
        out[big] = h.imag
    neg = xs < 0
    # Si is odd: Ssi(-x) = -Si(x) - pi/2 = -(Ssi(x) + pi/2) - pi/2
    out[neg] = -out[neg] - np.pi
    return out


def ssi(x, *, backend: str | None = None):
    """Shifted sine integral ``Si(x) - pi/2``.

    Parameters
    ----------
    x : array_like
        Real argument(s).  Negative values use the odd extension of ``Si``.
    backend : {"numba", "numpy"}, optional
        Force a code path; the default uses numba when it is available.

    Returns
    -------
    ndarray or float
        Same shape as ``x``.  Absolute accuracy is better than 1e-13.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("ssi requires finite arguments")
    flat = np.ascontiguousarray(arr.ravel())
    use_jit = _ssi_loop_jit is not None and backend != "numpy"
    if backend == "numba" and _ssi_loop_jit is None:
        raise RuntimeError("numba backend requested but numba is unavailable")
    if use_jit:
        res = _ssi_loop_jit(flat, np.empty_like(flat))
    else:
        res = _ssi_numpy(flat)
    res = res.reshape(arr.shape)
    return float(res) if res.ndim == 0 else res


def si(x, **kw):
    """Sine integral ``Si(x) = int_0^x sin(t)/t dt``."""
    return np.asarray(ssi(x, **kw)) + _HALF_PI


class ProfileError(ValueError):
    """Raised when a width cannot be measured on a profile."""


@dataclass(frozen=True)
class Profile1D:
    """Nonnegative samples ``y`` at strictly increasing positions ``x``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 3:
            raise ValueError("Profile1D needs matching 1D arrays with at least 3 samples")
        if not np.all(np.diff(x) > 0):
            raise ValueError("Profile1D positions must be strictly increasing")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise ValueError("Profile1D values must be finite and nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def fwhm(p: Profile1D) -> float:
    """Full width at half maximum by linear interpolation of the crossings.

    The crossings are searched outward from the global maximum, so only the
    main lobe is measured even when side lobes exceed half maximum further
    out.

    Raises
    ------
    ProfileError
        ``"profile not localized"`` when the profile never drops below half
        maximum on one side of the peak.
    """
    x, y = p.x, p.y
    i0 = int(np.argmax(y))
    peak = y[i0]
    if peak <= 0:
        raise ProfileError("profile not localized")
    half = 0.5 * peak

    j = i0
    while j > 0 and y[j - 1] >= half:
        j -= 1
    if j == 0:
        raise ProfileError("profile not localized")
    # crossing between j-1 (below) and j (above)
    xl = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])

    j = i0
    n = y.size
    while j < n - 1 and y[j + 1] >= half:
        j += 1
    if j == n - 1:
        raise ProfileError("profile not localized")
    xr = x[j] + (y[j] - half) * (x[j + 1] - x[j]) / (y[j] - y[j + 1])
    return float(xr - xl)
