"""Phase-shifting holography with polarization-entangled photon pairs.

Two stacked crystals convert an H advanced wave into H and a V wave into V
(tensor entries ``chi_VHH`` and ``chi_HVV`` driven by a diagonal pump).
Photon 1 meets a phase-only SLM on its H component, photon 2 a constant
phase ``C`` on its H component, and both are analyzed along D.  Behind a
common Fourier lens the pair is anticorrelated in position, so the
coincidence rate of pixel ``rho`` with ``-rho`` follows ``1 + cos(Phi + C)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..crystal import CrystalSpec
from ..elements import ConstantPhase, FourierLens, JonesMask, Polarizer, Propagate
from ..engine import PolarizedPoint, PolarizedSetup, conditional_polarized
from ..grid import Grid2D
from ..kernels import KernelElement, position_kernel
from .metrics import four_step_phase

__all__ = ["HolographyConfig", "holography_run", "fit_equivalent_distance", "HOLOGRAPHY_STEPS"]

HOLOGRAPHY_STEPS = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)
_D = (1 / np.sqrt(2), 1 / np.sqrt(2))


@dataclass(frozen=True, eq=False)
class HolographyConfig:
    """Parameters of the holography run.

    Parameters
    ----------
    phi : ndarray
        SLM phase on photon 1's camera grid.
    grid : Grid2D
        Camera (and SLM) sampling.
    focal : float
        Fourier-lens focal length.
    lambda_p : float
        Pump wavelength; the pairs are degenerate at ``2 lambda_p``.
    L : float
        Thickness of each crystal; ``0`` selects the thin-crystal limit.
    n_o : float
        Ordinary index of the down-converted light.
    steps : tuple
        Constant phases ``C``; the retrieval needs exactly ``0, pi/2, pi, 3pi/2``.
    compensate : bool
        Add the paraboloid that cancels the thickness-induced H/V path
        difference to the SLM phase.
    """

    phi: np.ndarray
    grid: Grid2D
    focal: float
    lambda_p: float
    L: float = 0.0
    n_o: float = 1.0
    steps: tuple = HOLOGRAPHY_STEPS
    compensate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if np.shape(self.phi) != self.grid.shape:
            raise ValueError("SLM phase must be sampled on the camera grid")
        if self.focal <= 0 or self.L < 0 or self.n_o <= 0:
            raise ValueError("focal length and index must be positive and L nonnegative")

    @property
    def lambda_pair(self) -> float:
        return 2.0 * self.lambda_p

    @property
    def equivalent_distance(self) -> float:
        """Vacuum-equivalent H/V diffraction-distance difference between the stacked crystals."""
        return 2.0 * self.L / self.n_o

    def compensation(self) -> np.ndarray:
        """SLM paraboloid cancelling the H/V path difference (zero for thin crystals)."""
        k = 2 * np.pi / self.lambda_pair
        return k * self.grid.r2() * self.equivalent_distance / (2.0 * self.focal**2)


def _check_steps(steps) -> None:
    if len(steps) != 4 or not np.allclose(np.mod(steps, 2 * np.pi), HOLOGRAPHY_STEPS):
        raise ValueError("four-step retrieval needs the phase steps 0, pi/2, pi, 3pi/2")


def _setup(cfg: HolographyConfig, phi: np.ndarray, C: float) -> PolarizedSetup:
    lam = cfg.lambda_pair
    crystal_grid = FourierLens(cfg.focal).output_grid(cfg.grid, lam)
    thin = CrystalSpec.thin(cfg.lambda_p, n_o=cfg.n_o)
    kel = KernelElement(position_kernel(thin, crystal_grid, "plane"))
    k = 2 * np.pi / lam
    channels = {}
    # The H pair is born in the crystal nearer the lenses' far side, the V pair
    # in the other one; the offsets s are measured from the interface.
    for key, s in ((("V", "H", "H"), 0.5 * cfg.L), (("H", "V", "V"), -0.5 * cfg.L)):
        if cfg.L == 0:
            channels[key] = [kel]
        else:
            # Fields at the crystal are periodic discrete spectra of the camera
            # pixels, so propagation there must not zero-pad.  The pump phase
            # at the conversion plane cancels the pair's carrier.
            channels[key] = [Propagate(s, cfg.n_o, padding=1), kel, Propagate(s, cfg.n_o, padding=1),
                             ConstantPhase(-2 * cfg.n_o * k * s)]
    arm1 = [FourierLens(cfg.focal), JonesMask(np.exp(1j * phi), 1.0)]
    arm2 = [FourierLens(cfg.focal), JonesMask(np.exp(1j * C), 1.0), Polarizer(_D)]
    return PolarizedSetup(arm1, {("V", "H", "H"): 1.0, ("H", "V", "V"): 1.0}, channels,
                          {"H": _D[0], "V": _D[1]}, arm2, cfg.grid, lam)


def _anti_index(n: int, j: np.ndarray) -> np.ndarray:
    return (2 * (n // 2) - j) % n


def holography_run(cfg: HolographyConfig, pixels: Optional[np.ndarray] = None) -> dict:
    """Coincidence frames at anticorrelated pixel pairs and the retrieved phase.

    Parameters
    ----------
    pixels : ndarray of bool, optional
        Photon-1 pixels to scan (all by default).

    Returns
    -------
    dict
        ``frames`` (one array per step; NaN outside ``pixels``),
        ``retrieved_phase``, ``compensation`` and ``equivalent_distance``.
    """
    _check_steps(cfg.steps)
    g = cfg.grid
    phi = np.asarray(cfg.phi, dtype=float) + (cfg.compensation() if cfg.compensate else 0.0)
    sel = np.ones(g.shape, bool) if pixels is None else np.asarray(pixels, bool)
    iys, ixs = np.nonzero(sel)
    frames = []
    for C in cfg.steps:
        s = _setup(cfg, phi, C)
        fr = np.full(g.shape, np.nan)
        for iy, ix in zip(iys, ixs):
            x, y = g.position(iy, ix)
            out = conditional_polarized(s, PolarizedPoint(x, y, _D))
            amp = out.project(np.asarray(_D)).amp
            fr[iy, ix] = abs(amp[_anti_index(g.ny, iy), _anti_index(g.nx, ix)]) ** 2
        frames.append(fr)
    return {
        "frames": frames,
        "retrieved_phase": four_step_phase(frames),
        "compensation": cfg.compensation(),
        "equivalent_distance": cfg.equivalent_distance,
    }


def fit_equivalent_distance(phase: np.ndarray, grid: Grid2D, focal: float, lambda_vac: float,
                            mask: Optional[np.ndarray] = None) -> float:
    """Distance ``d`` whose paraboloid ``k |rho|^2 d / (2 f^2)`` best fits ``phase`` (plus a constant).

    The phase is compared through ``exp(i phase)`` relative to the centre
    pixel, so it must not wrap between neighbouring pixels; the fit uses a
    least-squares line in ``|rho|^2`` on the unwrapped difference.
    """
    r2 = grid.r2()
    sel = np.isfinite(phase) if mask is None else (np.asarray(mask, bool) & np.isfinite(phase))
    ref = phase[grid.ny // 2, grid.nx // 2]
    d = np.angle(np.exp(1j * (phase - ref)))
    A = np.c_[r2[sel], np.ones(sel.sum())]
    c, _ = np.linalg.lstsq(A, d[sel], rcond=None)[0]
    k = 2 * np.pi / lambda_vac
    return float(2.0 * focal**2 * abs(c) / k)
