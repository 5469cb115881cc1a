"""Imaging with undetected photons in a Mach-Zehnder arrangement of two crystals.

The undetected idler's advanced waves start incoherently from the exit
plane behind the second crystal (unit intensity per point) and from the
absorbing parts of the object (weight ``1 - |T|^2``).  A wave from the exit
plane converts at the second crystal (path A) and, after passing the object,
at the first crystal (path B); the two signal fields meet at a beam splitter
with the relative phase ``C`` and the camera records one output port.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from ..crystal import CrystalSpec
from ..elements import FourfSystem, FourierLens, ThinMask, trace_grid
from ..engine import SourceEnsemble, UnfoldedSetup, conditional_batch, pairwise_sum, undetected_ensemble
from ..grid import Grid2D
from ..kernels import Ordering, position_kernel
from .metrics import centroid, four_step_visibility, fwhm_through_peak, median_visibility

__all__ = ["Momentum", "Position", "SingleMode", "QiupConfig", "qiup_run", "qiup_frames", "qiup_metrics",
           "DEFAULT_STEPS"]

DEFAULT_STEPS = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


@dataclass(frozen=True)
class Momentum:
    """Fourier lenses: ``f1`` crystal 1 to object, ``f2`` object to crystal 2, ``f3`` crystal 2 to camera."""

    f1: float
    f2: float
    f3: float

    def __post_init__(self):
        if min(self.f1, self.f2, self.f3) <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class Position:
    """4f imaging: ``M2`` crystal 1 to object, ``M4`` object to crystal 2, ``M6`` crystal 2 to camera."""

    M2: float
    M4: float
    M6: float
    focal: float = 0.1

    def __post_init__(self):
        if min(self.M2, self.M4, self.M6, self.focal) <= 0:
            raise ValueError("magnifications must be positive")


@dataclass(frozen=True)
class SingleMode:
    """No optics and thin crystals: every pixel is an independent interferometer."""


Variant = Union[Momentum, Position, SingleMode]


@dataclass(frozen=True, eq=False)
class QiupConfig:
    """Two identical crystals with the same pump.

    Parameters
    ----------
    variant : Momentum, Position or SingleMode
    crystal : CrystalSpec
        Collinear type-I (or thin) crystal; the idler is the undetected photon.
    pump_w : float or None
        Gaussian pump waist; ``None`` for a plane wave.
    T : ndarray or None
        Object transmittance on the object-plane grid (``None`` means 1).
    exit_grid : Grid2D
        Sampling at the second crystal, where idler advanced waves start.
    steps : sequence of float
        Phase offsets ``C``.
    object_background : bool
        Include the advanced waves emitted by the absorbing object (the
        physically complete model); ``False`` is a diagnostic switch.
    """

    variant: Variant
    crystal: CrystalSpec
    exit_grid: Grid2D
    pump_w: Optional[float] = None
    T: Optional[np.ndarray] = None
    steps: tuple = DEFAULT_STEPS
    object_background: bool = True
    conv_mode: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if self.pump_w is not None and not self.pump_w > 0:
            raise ValueError("pump waist must be positive")
        if self.T is not None:
            t = np.asarray(self.T, dtype=complex)
            if np.any(np.abs(t) > 1 + 1e-12):
                raise ValueError("object transmittance must satisfy |T| <= 1")
            if t.shape != self.exit_grid.shape:
                raise ValueError("object transmittance must have the grid's sample count")

    def with_T(self, T) -> "QiupConfig":
        return replace(self, T=T)


# ---------------------------------------------------------------------------
# unfolded paths


@dataclass(frozen=True, eq=False)
class _Paths:
    a: UnfoldedSetup           # exit plane -> crystal 2 -> camera
    b: UnfoldedSetup           # exit plane -> object -> crystal 1 -> camera
    obj: UnfoldedSetup         # object plane -> crystal 1 -> camera
    object_grid: Grid2D
    magnification: float       # camera pitch over object pitch


def _kernel(cfg: QiupConfig, grid: Grid2D):
    pump = "plane" if cfg.pump_w is None else cfg.pump_w
    return position_kernel(cfg.crystal, grid, pump, Ordering.MASK_BEFORE_CONV, cfg.conv_mode, photon1="idler")


def _build(cfg: QiupConfig) -> _Paths:
    g2 = cfg.exit_grid
    lam_i = cfg.crystal.lambda_i
    v = cfg.variant
    # back_* lists follow the backward idler wave: crystal 2 -> object -> crystal 1
    if isinstance(v, Momentum):
        back_obj = [FourierLens(v.f2)]
        back_c1 = [FourierLens(v.f1)]
        a_out = [FourierLens(v.f3)]
        b_out = [FourierLens(v.f1), FourfSystem(v.f2, v.f3)]
    elif isinstance(v, Position):
        f = v.focal
        back_obj = [FourfSystem(v.M4 * f, f)]
        back_c1 = [FourfSystem(v.M2 * f, f)]
        a_out = [FourfSystem(f, v.M6 * f)]
        b_out = [FourfSystem(f, v.M2 * f), FourfSystem(f, v.M4 * f), FourfSystem(f, v.M6 * f)]
    else:
        back_obj, back_c1, a_out, b_out = [], [], [], []
    g_obj, _ = trace_grid(back_obj, g2, lam_i)
    g_c1, _ = trace_grid(back_c1, g_obj, lam_i)
    T = np.ones(g_obj.shape, dtype=complex) if cfg.T is None else np.asarray(cfg.T, dtype=complex)
    mask = ThinMask(T, g_obj)

    def physical(back):
        return [e.transposed() for e in reversed(back)]

    arm_b = physical(back_obj + [mask] + back_c1)
    k1, k2 = _kernel(cfg, g_c1), _kernel(cfg, g2)
    a = UnfoldedSetup([], k2, a_out, g2)
    b = UnfoldedSetup(arm_b, k1, b_out, g2)
    obj = UnfoldedSetup(physical(back_c1), k1, b_out, g_obj)
    cam = a.output_grid
    if not cam.same_as(b.output_grid):
        raise RuntimeError("paths A and B reach the camera on different grids")
    return _Paths(a, b, obj, g_obj, cam.dx / g_obj.dx)


def _accumulate(paths: _Paths, ens: SourceEnsemble, batch: int):
    sa, sb, sab = [], [], []
    for w, amps, g, lam in ens.batches(batch):
        A, _ = conditional_batch(paths.a, amps)
        B, _ = conditional_batch(paths.b, amps)
        ww = w[:, None, None]
        sa.append(pairwise_sum(list(ww * np.abs(A) ** 2)))
        sb.append(pairwise_sum(list(ww * np.abs(B) ** 2)))
        sab.append(pairwise_sum(list(ww * B * np.conj(A))))
    return pairwise_sum(sa), pairwise_sum(sb), pairwise_sum(sab)


def _background(paths: _Paths, T: np.ndarray, lam_i: float, batch: int) -> np.ndarray:
    ens = undetected_ensemble(None, lam_i, [(ThinMask(T, paths.object_grid), "object")])
    parts = []
    for w, amps, g, lam in ens.batches(batch):
        out, _ = conditional_batch(paths.obj, amps)
        parts.append(pairwise_sum(list(w[:, None, None] * np.abs(out) ** 2)))
    if not parts:
        return np.zeros(paths.a.output_grid.shape)
    return pairwise_sum(parts)


def qiup_frames(cfg: QiupConfig, batch: int = 64) -> dict:
    """Camera frames for every phase step plus the per-path intensity sums.

    Returns
    -------
    dict
        ``frames`` (one array per step), ``sum_a``, ``sum_b``, ``cross``,
        ``background``, ``camera_grid``, ``object_grid``, ``magnification``.
    """
    paths = _build(cfg)
    lam_i = cfg.crystal.lambda_i
    exit_ens = undetected_ensemble(cfg.exit_grid, lam_i)
    sa, sb, sab = _accumulate(paths, exit_ens, batch)
    T = np.ones(paths.object_grid.shape, dtype=complex) if cfg.T is None else np.asarray(cfg.T, dtype=complex)
    bg = np.zeros_like(sa)
    if cfg.object_background and np.any(np.abs(T) < 1):
        bg = _background(paths, T, lam_i, batch)
    frames = [0.5 * (sa + sb + 2.0 * np.real(np.exp(1j * C) * sab) + bg) for C in cfg.steps]
    return {
        "frames": frames,
        "sum_a": sa,
        "sum_b": sb,
        "cross": sab,
        "background": bg,
        "camera_grid": paths.a.output_grid,
        "object_grid": paths.object_grid,
        "magnification": paths.magnification,
    }


def _pinhole(shape, iy: int, ix: int) -> np.ndarray:
    t = np.zeros(shape, dtype=complex)
    t[iy, ix] = 1.0
    return t


def qiup_metrics(cfg: QiupConfig, pinhole_offset: int = 4, batch: int = 64) -> dict:
    """Resolution, field of view and magnification at the object plane.

    Resolution is the FWHM of the path-B response to a one-pixel pinhole at
    the centre, divided by the magnification.  The field of view is the
    narrower FWHM of the two path envelopes for a clear object.  The
    magnification is the camera centroid shift of an off-centre pinhole
    over its object-plane offset.
    """
    if isinstance(cfg.variant, SingleMode):
        raise ValueError("the single-mode variant has no spatial metrics")
    g = cfg.exit_grid
    cy, cx = g.ny // 2, g.nx // 2
    clear = qiup_frames(replace(cfg, T=None, object_background=False), batch)
    cam, og = clear["camera_grid"], clear["object_grid"]
    mag = clear["magnification"]
    fov = min(fwhm_through_peak(clear["sum_a"], cam), fwhm_through_peak(clear["sum_b"], cam)) / mag
    pin = qiup_frames(replace(cfg, T=_pinhole(g.shape, cy, cx), object_background=False), batch)
    resolution = fwhm_through_peak(pin["sum_b"], cam) / mag
    off = qiup_frames(replace(cfg, T=_pinhole(g.shape, cy, cx + pinhole_offset), object_background=False), batch)
    xc, _ = centroid(off["sum_b"], cam)
    measured_mag = xc / (pinhole_offset * og.dx)
    return {"resolution": resolution, "fov": fov, "magnification": measured_mag}


def qiup_run(cfg: QiupConfig, metrics: bool = True, batch: int = 64) -> dict:
    """Frames, visibility map and (for imaging variants) resolution, FOV and magnification."""
    if len(cfg.steps) != 4 or not np.allclose(np.mod(cfg.steps, 2 * np.pi), DEFAULT_STEPS):
        raise ValueError("visibility extraction needs the four steps 0, pi/2, pi, 3pi/2")
    out = qiup_frames(cfg, batch)
    vis = four_step_visibility(out["frames"])
    T = np.ones(out["object_grid"].shape) if cfg.T is None else np.asarray(cfg.T)
    mean = 0.25 * sum(out["frames"])
    out["visibility_map"] = vis
    out["visibility"] = median_visibility(vis, T, mean)
    if metrics and not isinstance(cfg.variant, SingleMode):
        out.update(qiup_metrics(cfg, batch=batch))
    return out
