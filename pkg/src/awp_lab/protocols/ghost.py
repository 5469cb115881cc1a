"""Ghost imaging with a bucket detector behind the object."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..crystal import CrystalSpec
from ..elements import FourfSystem, ThinMask
from ..engine import Point, UnfoldedSetup, bucket_jpd, conditional_wavefunction
from ..grid import Grid2D, GridMismatchError
from ..kernels import position_kernel
from .metrics import fwhm_through_peak

__all__ = ["LensPlacement", "GhostImagingConfig", "ghost_image"]


class LensPlacement(str, enum.Enum):
    DETECTION_PATH = "DetectionPath"
    OBJECT_PATH = "ObjectPath"


@dataclass(frozen=True, eq=False)
class GhostImagingConfig:
    """Perfect imaging lens of magnification ``-M`` between object and camera.

    Parameters
    ----------
    T : ndarray
        Object amplitude transmittance on ``object_grid``.
    object_grid : Grid2D
        Sampling of ``T``; it may not be finer than ``grid``.
    grid : Grid2D
        Simulation grid at the object plane.
    crystal : CrystalSpec
        Collinear type-I crystal under plane-wave pumping.  For a
        nondegenerate crystal the signal photon passes the object.
    placement : LensPlacement
        Which arm holds the imaging lens.
    M : float
        Lens magnification (> 0).
    focal : float
        Focal length of the shorter 4f lens; only the ratio ``M`` matters.
    """

    T: np.ndarray
    object_grid: Grid2D
    grid: Grid2D
    crystal: CrystalSpec
    placement: LensPlacement = LensPlacement.DETECTION_PATH
    M: float = 1.0
    focal: float = 0.1
    conv_mode: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "placement", LensPlacement(self.placement))
        if not self.M > 0:
            raise ValueError("magnification M must be positive")
        if self.object_grid.dx < self.grid.dx * (1 - 1e-9) or self.object_grid.dy < self.grid.dy * (1 - 1e-9):
            raise GridMismatchError("object is sampled more finely than the simulation grid; coarsen it first")
        if np.shape(self.T) != self.object_grid.shape:
            raise GridMismatchError("object transmittance does not match its grid")

    @property
    def degenerate(self) -> bool:
        return self.crystal.is_degenerate

    def sampled_T(self) -> np.ndarray:
        """Object transmittance on the simulation grid (nearest-pixel lookup)."""
        if self.object_grid.same_as(self.grid):
            return np.asarray(self.T, dtype=complex)
        X, Y = self.grid.mesh()
        og = self.object_grid
        ix = np.clip(np.rint(X / og.dx).astype(int) + og.nx // 2, 0, og.nx - 1)
        iy = np.clip(np.rint(Y / og.dy).astype(int) + og.ny // 2, 0, og.ny - 1)
        return np.asarray(self.T, dtype=complex)[iy, ix]


def _setup(cfg: GhostImagingConfig, T: np.ndarray) -> UnfoldedSetup:
    f, M = cfg.focal, cfg.M
    if cfg.placement == LensPlacement.DETECTION_PATH:
        arm1 = [ThinMask(T, cfg.grid)]
        arm2 = [FourfSystem(f, M * f)]
        kgrid = cfg.grid
    else:
        # crystal sits at the image plane: arm 1 images the object onto it
        arm1 = [FourfSystem(M * f, f), ThinMask(T, cfg.grid)]
        arm2 = []
        kgrid = cfg.grid.scaled(M)
    k = position_kernel(cfg.crystal, kgrid, None, conv_mode=cfg.conv_mode, photon1="signal")
    return UnfoldedSetup(arm1, k, arm2, cfg.grid)


def ghost_image(cfg: GhostImagingConfig, batch: int = 64) -> dict:
    """Bucket-triggered camera image and the object-plane PSF width.

    Returns
    -------
    dict
        ``image`` (camera intensity), ``image_grid``, ``psf`` (pinhole
        response), ``psf_width`` (meters at the object plane) and
        ``magnification``.
    """
    T = cfg.sampled_T()
    image, image_grid = bucket_jpd(_setup(cfg, T), np.abs(T) > 0, batch=batch)
    pin = _setup(cfg, np.ones(cfg.grid.shape, dtype=complex))
    psf = np.abs(conditional_wavefunction(pin, Point(0.0, 0.0)).amp) ** 2
    width_cam = fwhm_through_peak(psf, image_grid, "x")
    mag = image_grid.dx / cfg.grid.dx
    return {
        "image": image,
        "image_grid": image_grid,
        "psf": psf,
        "psf_width": width_cam / mag,
        "magnification": mag,
    }
