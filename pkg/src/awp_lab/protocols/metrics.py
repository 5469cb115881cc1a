"""Scalar measurements on sampled images: widths, centroids, fringe visibility."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..grid import Grid2D
from ..special import Profile1D, fwhm

__all__ = ["fwhm_through_peak", "centroid", "four_step_visibility", "four_step_phase", "median_visibility"]


def fwhm_through_peak(img: np.ndarray, grid: Grid2D, axis: str = "x") -> float:
    """FWHM (meters) of the row or column of ``img`` through its maximum."""
    img = np.asarray(img, dtype=float)
    iy, ix = np.unravel_index(int(np.argmax(img)), img.shape)
    if axis == "x":
        return fwhm(Profile1D(grid.x, np.clip(img[iy, :], 0.0, None)))
    return fwhm(Profile1D(grid.y, np.clip(img[:, ix], 0.0, None)))


def centroid(img: np.ndarray, grid: Grid2D) -> tuple[float, float]:
    """Intensity-weighted mean position ``(x, y)``."""
    img = np.asarray(img, dtype=float)
    tot = img.sum()
    if not tot > 0:
        raise ValueError("image has no positive intensity")
    X, Y = grid.mesh()
    return float((X * img).sum() / tot), float((Y * img).sum() / tot)


def _check_four(frames: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
    if len(frames) != 4:
        raise ValueError("four frames at C = 0, pi/2, pi, 3pi/2 are required")
    return tuple(np.asarray(f, dtype=float) for f in frames)


def four_step_visibility(frames: Sequence[np.ndarray]) -> np.ndarray:
    """Per-pixel visibility ``(I_max - I_min)/(I_max + I_min)`` of the sinusoid through four frames."""
    i0, i1, i2, i3 = _check_four(frames)
    mean = 0.25 * (i0 + i1 + i2 + i3)
    amp = 0.5 * np.hypot(i0 - i2, i3 - i1)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(mean > 0, amp / mean, 0.0)
    return v


def four_step_phase(frames: Sequence[np.ndarray]) -> np.ndarray:
    """Phase ``atan2(I_{3pi/2} - I_{pi/2}, I_0 - I_pi)`` of frames ``I_C = a + b cos(phi + C)``."""
    i0, i1, i2, i3 = _check_four(frames)
    return np.arctan2(i3 - i1, i0 - i2)


def median_visibility(vis: np.ndarray, T: np.ndarray, mean_intensity: np.ndarray,
                      t_min: float = 0.1, floor: float = 1e-2) -> float:
    """Median visibility over pixels with ``|T| > t_min`` and mean intensity above ``floor`` of its maximum."""
    sel = (np.abs(T) > t_min) & (mean_intensity > floor * mean_intensity.max())
    if not np.any(sel):
        raise ValueError("no pixel passes the transmittance and intensity cuts")
    return float(np.median(vis[sel]))
