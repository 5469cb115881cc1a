"""Thin wrappers over :mod:`scipy.fft` with a process-wide worker count."""

from __future__ import annotations

import os

import numpy as np
import scipy.fft as _sfft

_THREADS: int | None = None


def _env_threads() -> int:
    raw = os.environ.get("AWP_LAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"AWP_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"AWP_LAB_THREADS must be a positive integer, got {n}")
    return n


def set_threads(n: int | None) -> None:
    """Set the FFT worker count; ``None`` reverts to ``AWP_LAB_THREADS`` (default 1)."""
    global _THREADS
    if n is not None and int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = None if n is None else int(n)


def get_threads() -> int:
    return _THREADS if _THREADS is not None else _env_threads()


def fft2(a: np.ndarray) -> np.ndarray:
    return _sfft.fft2(a, axes=(-2, -1), workers=get_threads())


def ifft2(a: np.ndarray) -> np.ndarray:
    return _sfft.ifft2(a, axes=(-2, -1), workers=get_threads())


def fft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    return _sfft.fft(a, axis=axis, workers=get_threads())


def ifft(a: np.ndarray, axis: int = -1) -> np.ndarray:
    return _sfft.ifft(a, axis=axis, workers=get_threads())


def centered_fft2(a: np.ndarray) -> np.ndarray:
    """FFT of an array whose origin sits at index ``n // 2`` on both axes."""
    return _sfft.fftshift(fft2(_sfft.ifftshift(a, axes=(-2, -1))), axes=(-2, -1))


def centered_ifft2(a: np.ndarray) -> np.ndarray:
    return _sfft.fftshift(ifft2(_sfft.ifftshift(a, axes=(-2, -1))), axes=(-2, -1))
