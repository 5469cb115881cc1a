"""Biphoton kernels: the down-conversion source as a classical filter plus mask.

A kernel maps the advanced wave ``a(rho1)`` arriving at the crystal plane to
the photon-2 field leaving it,

    out(rho2) = sum_rho1 a(rho1) K(rho1, rho2) dA,

with ``K = c(rho2 - rho1) * mask``.  ``c`` is a radial correlation function
(optionally carrying a transverse tilt) and the mask is the pump amplitude
evaluated at ``rho2``, ``rho1`` or the midpoint, depending on ``ordering``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _fft
from ._accel import HAS_NUMBA, maybe_njit
from .crystal import CrystalSpec, PMType, PhaseMatchingError
from .elements import Element, _crop, _embed, _freqs
from .grid import Grid2D, GridMismatchError, ScalarField, gaussian_beam, plane_wave
from .special import sinc, ssi

__all__ = [
    "Ordering",
    "SsiCorr",
    "GaussianCorr",
    "DeltaCorr",
    "BiphotonKernel",
    "KernelElement",
    "position_kernel",
    "beamlike_type2_kernel",
    "momentum_transfer",
    "correlation_coefficient",
    "DoubleGaussianState",
    "double_gaussian_from_kernel",
    "propagate_double_gaussian",
    "qpm_profile",
    "apply_kernel",
    "SINC_GAUSS_MATCH",
    "SSI_CLIP",
]

#: Gaussian exp(-0.455 a x^2) reaching 1/e^2 (squared) where sinc(a x^2)^2 does.
SINC_GAUSS_MATCH = 0.455
#: Ssi arguments beyond this are treated as zero (|Ssi| < 1e-4 there).
SSI_CLIP = 1e4


class Ordering(str, enum.Enum):
    """Where the pump mask is evaluated relative to the correlation convolution."""

    MASK_AFTER_CONV = "MaskAfterConv"  # U_p(rho2): rho1 + rho2 ~ 2 rho2
    MASK_BEFORE_CONV = "MaskBeforeConv"  # U_p(rho1): rho1 + rho2 ~ 2 rho1
    MIDPOINT = "Midpoint"  # U_p((rho1 + rho2) / 2), exact for a thin pump plane


# ---------------------------------------------------------------------------
# correlation functions


@dataclass(frozen=True)
class SsiCorr:
    """``c(d) = Ssi(coef |d|^2)``."""

    coef: float

    def __post_init__(self):
        if not self.coef > 0:
            raise ValueError("Ssi coefficient must be positive")

    def evaluate(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        x = self.coef * (dx * dx + dy * dy)
        out = np.zeros(x.shape)
        keep = x <= SSI_CLIP
        out[keep] = ssi(x[keep])
        return out

    def transfer(self, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
        """Continuous 2D Fourier transform, ``-(pi/coef) sinc(|q|^2 / (4 coef))``."""
        return -(np.pi / self.coef) * sinc((qx * qx + qy * qy) / (4.0 * self.coef))

    @property
    def fwhm(self) -> float:
        """FWHM of ``|c|^2`` from the half-maximum argument of ``Ssi^2``."""
        return 2.0 * np.sqrt(_SSI_HALF_ARG / self.coef)


@dataclass(frozen=True)
class GaussianCorr:
    """``c(d) = exp(-|d|^2 / (4 sigma_minus_sq))`` (complex widths allowed)."""

    sigma_minus_sq: complex

    def evaluate(self, dx, dy):
        return np.exp(-(dx * dx + dy * dy) / (4.0 * self.sigma_minus_sq))

    def transfer(self, qx, qy):
        s = self.sigma_minus_sq
        return 4.0 * np.pi * s * np.exp(-s * (qx * qx + qy * qy))


@dataclass(frozen=True)
class DeltaCorr:
    """Thin-crystal limit: the crystal acts as a (pump-masked) mirror."""

    def evaluate(self, dx, dy):
        raise TypeError("the delta correlation has no sampled form")

    def transfer(self, qx, qy):
        return np.ones(np.broadcast(qx, qy).shape)


Corr = Union[SsiCorr, GaussianCorr, DeltaCorr]

# Ssi(x)^2 = Ssi(0)^2 / 2 at this argument; solved once on import by bisection.


def _solve_ssi_half() -> float:
    target = (np.pi / 2) ** 2 / 2
    lo, hi = 0.0, 1.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ssi(mid) ** 2 > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_SSI_HALF_ARG = _solve_ssi_half()


# ---------------------------------------------------------------------------
# kernel


@dataclass(frozen=True, eq=False)
class BiphotonKernel:
    """Factorized biphoton wave function ``c(rho2 - rho1) * U_p(...)``.

    Parameters
    ----------
    corr : SsiCorr, GaussianCorr or DeltaCorr
    lambda_1, lambda_2 : float
        Vacuum wavelengths of the photon entering (advanced wave) and leaving.
    pump_mask : ScalarField, optional
        Pump amplitude on the crystal-plane grid; ``None`` is a unit plane wave.
    ordering : Ordering
    tilt : float
        Transverse phase slope ``kappa`` (rad/m); ``c`` gains ``exp(i kappa (x2 - x1))``.
    sigma_plus : float, optional
        Pump width used by the double-Gaussian approximation.
    conv_mode : {"linear", "circular"}
        ``"linear"`` convolves with the sampled correlation function on a
        zero-padded grid; ``"circular"`` multiplies the padded spectrum by the
        analytic transfer function (band-limited kernel).
    crystal : CrystalSpec, optional
        Source crystal, kept for validation and reporting.
    """

    corr: Corr
    lambda_1: float
    lambda_2: float
    pump_mask: Optional[ScalarField] = None
    ordering: Ordering = Ordering.MASK_AFTER_CONV
    tilt: float = 0.0
    sigma_plus: Optional[float] = None
    conv_mode: str = "linear"
    crystal: Optional[CrystalSpec] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        if self.conv_mode not in ("linear", "circular"):
            raise ValueError(f"conv_mode must be 'linear' or 'circular' (got {self.conv_mode!r})")
        if isinstance(self.corr, DeltaCorr):
            if self.crystal is not None and self.crystal.pm_type != PMType.THIN:
                raise ValueError("the delta correlation requires a thin crystal (pm_type Thin)")
            if self.tilt != 0.0:
                raise ValueError("a delta correlation cannot carry a tilt")
        for name in ("lambda_1", "lambda_2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive")

    @property
    def grid(self) -> Optional[Grid2D]:
        return None if self.pump_mask is None else self.pump_mask.grid

    def with_pump(self, pump_mask: Optional[ScalarField]) -> "BiphotonKernel":
        return BiphotonKernel(self.corr, self.lambda_1, self.lambda_2, pump_mask, self.ordering, self.tilt,
                              self.sigma_plus, self.conv_mode, self.crystal)

    def with_ordering(self, ordering) -> "BiphotonKernel":
        return BiphotonKernel(self.corr, self.lambda_1, self.lambda_2, self.pump_mask, Ordering(ordering),
                              self.tilt, self.sigma_plus, self.conv_mode, self.crystal)

    def swapped(self) -> "BiphotonKernel":
        """Kernel with the photon roles exchanged, ``K'(a, b) = K(b, a)``."""
        flip = {
            Ordering.MASK_AFTER_CONV: Ordering.MASK_BEFORE_CONV,
            Ordering.MASK_BEFORE_CONV: Ordering.MASK_AFTER_CONV,
            Ordering.MIDPOINT: Ordering.MIDPOINT,
        }[self.ordering]
        return BiphotonKernel(self.corr, self.lambda_2, self.lambda_1, self.pump_mask, flip, -self.tilt,
                              self.sigma_plus, self.conv_mode, self.crystal)

    def correlation(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """``c(d)`` including the tilt, for displacement ``d = rho2 - rho1``."""
        c = self.corr.evaluate(dx, dy).astype(complex)
        if self.tilt:
            c = c * np.exp(1j * self.tilt * dx)
        return c

    def matrix_element(self, rho1, rho2) -> complex:
        """``K(rho1, rho2)`` for grid points; pump looked up on the mask grid."""
        (x1, y1), (x2, y2) = rho1, rho2
        if isinstance(self.corr, DeltaCorr):
            raise TypeError("matrix elements of a delta kernel are singular")
        c = complex(self.correlation(np.array(x2 - x1), np.array(y2 - y1)))
        return c * self._pump_at(rho1, rho2)

    def _pump_at(self, rho1, rho2) -> complex:
        if self.pump_mask is None:
            return 1.0
        if self.ordering == Ordering.MASK_AFTER_CONV:
            return self.pump_mask.at(*rho2)
        if self.ordering == Ordering.MASK_BEFORE_CONV:
            return self.pump_mask.at(*rho1)
        g = self.pump_mask.grid
        up = _half_pitch_pump(self.pump_mask.amp)
        iy1, ix1 = g.index_of(*rho1)
        iy2, ix2 = g.index_of(*rho2)
        return complex(up[iy1 + iy2 - 2 * (g.ny // 2) + g.ny, ix1 + ix2 - 2 * (g.nx // 2) + g.nx])


@dataclass(frozen=True, eq=False)
class KernelElement(Element):
    """A kernel placed inside a pipeline (used for multi-crystal unfoldings)."""

    kernel: BiphotonKernel

    def apply(self, f: ScalarField) -> ScalarField:
        return apply_kernel(self.kernel, f)

    def apply_batch(self, a, grid, lam):
        _check_wavelength(self.kernel, lam)
        return apply_kernel_array(self.kernel, a, grid), grid, self.kernel.lambda_2

    def output_grid_of(self, grid, lam):
        _check_wavelength(self.kernel, lam)
        return grid, self.kernel.lambda_2

    def transposed(self) -> "KernelElement":
        return KernelElement(self.kernel.swapped())


# ---------------------------------------------------------------------------
# constructors


def _pump_field(pump, grid: Grid2D, lambda_p: float) -> Optional[ScalarField]:
    if pump is None or (isinstance(pump, str) and pump == "plane"):
        return None
    if isinstance(pump, ScalarField):
        if not pump.grid.same_as(grid):
            raise GridMismatchError("pump mask grid differs from the crystal-plane grid")
        return pump
    if isinstance(pump, (int, float)):
        return gaussian_beam(grid, lambda_p, float(pump))
    raise TypeError("pump must be None, 'plane', a Gaussian waist in meters, or a ScalarField")


def correlation_coefficient(c: CrystalSpec) -> float:
    """Coefficient ``coef`` of ``Ssi(coef |d|^2)`` for a collinear type-I crystal."""
    if c.pm_type == PMType.TYPE_I_DEGENERATE:
        return c.index_s * c.k_s / (2.0 * c.L)
    if c.pm_type == PMType.TYPE_I_NONDEGENERATE:
        return 2.0 * np.pi / (c.L * c.lambda_plus)
    if c.pm_type == PMType.TYPE_II_BEAMLIKE:
        n, eta = c.index_s, c.eta
        return n * eta * c.k_s / (c.L * (n + eta))
    raise ValueError(f"no Ssi correlation for pm_type {c.pm_type.value}")


def _check_type1(c: CrystalSpec) -> None:
    if c.pm_type not in (PMType.TYPE_I_DEGENERATE, PMType.TYPE_I_NONDEGENERATE, PMType.THIN):
        raise ValueError(f"position_kernel needs a collinear type-I or thin crystal (got {c.pm_type.value})")
    if c.pm_type != PMType.THIN and abs(c.delta_k) > 1e-9 * c.eta * c.k_p:
        raise PhaseMatchingError(c.residual_mismatch)


def position_kernel(c: CrystalSpec, grid: Grid2D, pump=None, ordering=Ordering.MASK_AFTER_CONV,
                    conv_mode: str = "linear", photon1: str = "signal") -> BiphotonKernel:
    """Position-space kernel of a collinear type-I (or thin) crystal.

    Degenerate crystals give ``Ssi(n k |d|^2 / (2L))``; nondegenerate ones
    ``Ssi(2 pi |d|^2 / (L lambda_plus))``; thin crystals a delta.

    Parameters
    ----------
    pump : None, "plane", float or ScalarField
        A float is the waist ``w`` of ``exp(-|rho|^2/w^2)`` sampled on ``grid``.
    photon1 : {"signal", "idler"}
        Which down-converted photon the advanced wave represents.
    """
    _check_type1(c)
    lam1, lam2 = (c.lambda_s, c.lambda_i) if photon1 == "signal" else (c.lambda_i, c.lambda_s)
    mask = _pump_field(pump, grid, c.lambda_p)
    corr = DeltaCorr() if c.pm_type == PMType.THIN else SsiCorr(correlation_coefficient(c))
    sp = float(pump) if isinstance(pump, (int, float)) else None
    return BiphotonKernel(corr, lam1, lam2, mask, ordering, 0.0, sp, conv_mode, c)


def beamlike_type2_kernel(c: CrystalSpec, grid: Grid2D, pump=None, ordering=Ordering.MASK_AFTER_CONV,
                          conv_mode: str = "linear") -> BiphotonKernel:
    """Beamlike type-II kernel: narrower Ssi plus the tilt ``exp(i theta_beam k (x2 - x1))``.

    ``theta_beam = n eta alpha / (n + eta)`` with ``eta = n (alpha^2 + sqrt(16 + alpha^4)) / 4``.
    Photon 1 is the ordinary photon and photon 2 the extraordinary one.
    """
    if c.pm_type != PMType.TYPE_II_BEAMLIKE:
        raise ValueError("beamlike_type2_kernel needs pm_type TypeII_beamlike")
    n, eta, alpha = c.index_s, c.eta, c.alpha
    theta_beam = n * eta * alpha / (n + eta)
    mask = _pump_field(pump, grid, c.lambda_p)
    sp = float(pump) if isinstance(pump, (int, float)) else None
    return BiphotonKernel(SsiCorr(correlation_coefficient(c)), c.lambda_s, c.lambda_i, mask, ordering,
                          theta_beam * c.k_s, sp, conv_mode, c)


def momentum_transfer(c: CrystalSpec, qx: np.ndarray, qy: np.ndarray | None = None) -> np.ndarray:
    """Momentum-space phase-matching factor over ``q = q1 - q2``.

    Degenerate: ``sinc(L |q|^2 / (8 n k))``; nondegenerate:
    ``sinc(L lambda_plus |q|^2 / (32 pi))``.  Accepts 1D ``qx`` (with ``qy``
    omitted meaning ``qy = 0``) or meshes.
    """
    _check_type1(c)
    q2 = np.asarray(qx, dtype=float) ** 2 + (0.0 if qy is None else np.asarray(qy, dtype=float) ** 2)
    if c.pm_type == PMType.THIN:
        return np.ones(np.shape(q2))
    if c.pm_type == PMType.TYPE_I_DEGENERATE:
        return sinc(c.L * q2 / (8.0 * c.index_s * c.k_s))
    return sinc(c.L * c.lambda_plus * q2 / (32.0 * np.pi))


# ---------------------------------------------------------------------------
# kernel application


def _half_pitch_pump(amp: np.ndarray) -> np.ndarray:
    """Band-limited 2x upsampling of the pump onto a grid of half the pitch.

    Index ``m`` of the ``(2N)``-sized output sits at ``(m - N) dx / 2``, so the
    midpoint of grid indices ``i1, i2`` is ``m = i1 + i2 - 2 (N // 2) + N``.
    """
    ny, nx = amp.shape
    spec = _fft.centered_fft2(amp)
    big = np.zeros((2 * ny, 2 * nx), dtype=complex)
    oy, ox = ny - ny // 2, nx - nx // 2
    big[oy : oy + ny, ox : ox + nx] = spec
    return _fft.centered_ifft2(big) * 4.0


def _midpoint_loop(src_iy, src_ix, src_val, corr_big, pump_half, ny, nx, out):
    cy, cx = ny // 2, nx // 2
    for s in range(src_val.size):
        i1, j1 = src_iy[s], src_ix[s]
        a = src_val[s]
        for i2 in range(ny):
            dyi = i2 - i1 + ny
            my = i1 + i2 - 2 * cy + ny
            for j2 in range(nx):
                out[i2, j2] += a * corr_big[dyi, j2 - j1 + nx] * pump_half[my, j1 + j2 - 2 * cx + nx]
    return out


_midpoint_loop_jit = maybe_njit(_midpoint_loop)


def _midpoint_numpy(src_iy, src_ix, src_val, corr_big, pump_half, ny, nx, out):
    cy, cx = ny // 2, nx // 2
    I2 = np.arange(ny)[:, None]
    J2 = np.arange(nx)[None, :]
    for i1, j1, a in zip(src_iy, src_ix, src_val):
        c = corr_big[I2 - i1 + ny, J2 - j1 + nx]
        p = pump_half[i1 + I2 - 2 * cy + ny, j1 + J2 - 2 * cx + nx]
        out += a * c * p
    return out


def _difference_grid(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Displacements ``(m - N) d`` for ``m`` in ``[0, 2N)``, as ``(ny2, nx2)`` meshes."""
    dx = (np.arange(2 * grid.nx) - grid.nx) * grid.dx
    dy = (np.arange(2 * grid.ny) - grid.ny) * grid.dy
    return np.meshgrid(dx, dy)


def _sampled_corr(kernel: BiphotonKernel, grid: Grid2D) -> np.ndarray:
    key = ("corr", grid)
    hit = kernel._cache.get(key)
    if hit is None:
        DX, DY = _difference_grid(grid)
        hit = kernel.correlation(DX, DY)
        hit.setflags(write=False)
        kernel._cache[key] = hit
    return hit


def _linear_spectrum(kernel: BiphotonKernel, grid: Grid2D) -> np.ndarray:
    key = ("linear", grid)
    hit = kernel._cache.get(key)
    if hit is None:
        hit = _fft.fft2(_sampled_corr(kernel, grid)) * grid.cell_area
        kernel._cache[key] = hit
    return hit


def _circular_transfer(kernel: BiphotonKernel, grid: Grid2D) -> np.ndarray:
    key = ("circular", grid)
    hit = kernel._cache.get(key)
    if hit is None:
        qx = _freqs(2 * grid.nx, grid.dx)
        qy = _freqs(2 * grid.ny, grid.dy)
        QX, QY = np.meshgrid(qx, qy)
        # tilt exp(i kappa dx) shifts the transfer function to q - kappa
        hit = kernel.corr.transfer(QX - kernel.tilt, QY).astype(complex)
        if kernel.tilt:
            # the Nyquist column stands for both +q and -q; averaging keeps swapped() an exact transpose
            n = grid.nx
            hit[:, n] = 0.5 * (hit[:, n] + kernel.corr.transfer(QX[:, n] + kernel.tilt, QY[:, n]))
        kernel._cache[key] = hit
    return hit


SPARSE_MAX = 8


def _convolve_sparse(kernel: BiphotonKernel, a: np.ndarray, grid: Grid2D) -> Optional[np.ndarray]:
    """Direct shift-and-add linear convolution when every input has at most ``SPARSE_MAX`` nonzero pixels.

    Returns ``None`` when the input is too dense for this path to pay off.
    """
    ny, nx = grid.ny, grid.nx
    flat = a.reshape((-1, ny, nx))
    nnz = np.count_nonzero(flat, axis=(1, 2))
    if nnz.max(initial=0) > SPARSE_MAX:
        return None
    corr = _sampled_corr(kernel, grid) * grid.cell_area
    out = np.zeros(flat.shape, dtype=complex)
    b, iy, ix = np.nonzero(flat)
    for k, jy, jx in zip(b, iy, ix):
        out[k] += flat[k, jy, jx] * corr[ny - jy : 2 * ny - jy, nx - jx : 2 * nx - jx]
    return out.reshape(a.shape)


def _convolve(kernel: BiphotonKernel, a: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``(c * a)(rho2) = sum_rho1 a(rho1) c(rho2 - rho1) dA`` on ``grid``; batch axes allowed."""
    if isinstance(kernel.corr, DeltaCorr):
        return a.astype(complex, copy=True)
    ny, nx = grid.ny, grid.nx
    lead = a.shape[:-2]
    if kernel.conv_mode == "linear":
        sparse = _convolve_sparse(kernel, a, grid)
        if sparse is not None:
            return sparse
        padded = np.zeros(lead + (2 * ny, 2 * nx), dtype=complex)
        padded[..., :ny, :nx] = a
        full = _fft.ifft2(_fft.fft2(padded) * _linear_spectrum(kernel, grid))
        return full[..., ny : 2 * ny, nx : 2 * nx]
    shape = (2 * ny, 2 * nx)
    if lead:
        padded = np.zeros(lead + shape, dtype=complex)
        oy, ox = ny - ny // 2, nx - nx // 2
        padded[..., oy : oy + ny, ox : ox + nx] = a
    else:
        padded = _embed(a, shape)
    spec = _fft.fft2(np.fft.ifftshift(padded, axes=(-2, -1)))
    out = np.fft.fftshift(_fft.ifft2(spec * _circular_transfer(kernel, grid)), axes=(-2, -1))
    oy, ox = ny - ny // 2, nx - nx // 2
    return out[..., oy : oy + ny, ox : ox + nx]


def apply_kernel_array(kernel: BiphotonKernel, a: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Array form of :func:`apply_kernel`; ``a`` may carry leading batch axes."""
    if kernel.pump_mask is not None and not kernel.pump_mask.grid.same_as(grid):
        raise GridMismatchError("advanced wave and pump mask live on different grids")
    up = None if kernel.pump_mask is None else kernel.pump_mask.amp
    if kernel.ordering == Ordering.MIDPOINT and up is not None:
        if isinstance(kernel.corr, DeltaCorr):
            return a * up
        if a.ndim > 2:
            return np.stack([apply_kernel_array(kernel, x, grid) for x in a.reshape((-1,) + grid.shape)]).reshape(a.shape)
        return _apply_midpoint(kernel, a, grid)
    if kernel.ordering == Ordering.MASK_BEFORE_CONV and up is not None:
        return _convolve(kernel, a * up, grid)
    out = _convolve(kernel, a, grid)
    return out if up is None else out * up


def _apply_midpoint(kernel: BiphotonKernel, a: np.ndarray, grid: Grid2D) -> np.ndarray:
    key = ("half_pump", grid)
    pump_half = kernel._cache.get(key)
    if pump_half is None:
        pump_half = _half_pitch_pump(kernel.pump_mask.amp)
        kernel._cache[key] = pump_half
    corr_big = _sampled_corr(kernel, grid) * grid.cell_area
    iy, ix = np.nonzero(a)
    vals = a[iy, ix].astype(complex)
    out = np.zeros(grid.shape, dtype=complex)
    if _midpoint_loop_jit is not None:
        return _midpoint_loop_jit(iy.astype(np.int64), ix.astype(np.int64), vals, np.ascontiguousarray(corr_big),
                                  pump_half, grid.ny, grid.nx, out)
    return _midpoint_numpy(iy, ix, vals, corr_big, pump_half, grid.ny, grid.nx, out)


def _check_wavelength(kernel: BiphotonKernel, lam: float) -> None:
    if abs(lam - kernel.lambda_1) > 1e-9 * kernel.lambda_1:
        raise GridMismatchError(
            f"advanced wave at {lam:.6g} m reaches a kernel expecting {kernel.lambda_1:.6g} m; "
            "check which arm each photon is routed through"
        )


def apply_kernel(kernel: BiphotonKernel, adv: ScalarField) -> ScalarField:
    """Convert the advanced wave at the crystal into the photon-2 field.

    Raises
    ------
    GridMismatchError
        If the advanced wave's wavelength is not the kernel's ``lambda_1`` or
        its grid differs from the pump-mask grid.
    """
    _check_wavelength(kernel, adv.lambda_vac)
    out = apply_kernel_array(kernel, adv.amp, adv.grid)
    return ScalarField(adv.grid, out, kernel.lambda_2)


# ---------------------------------------------------------------------------
# double-Gaussian approximation


@dataclass(frozen=True)
class DoubleGaussianState:
    """``exp(-|rho1 + rho2|^2 / (4 s+) - |rho1 - rho2|^2 / (4 s-))`` with complex ``s+-``.

    ``evaluate`` includes the amplitude prefactor ``s0 / s`` per factor so that
    propagated states keep their norm; ``s0`` are the widths at creation.
    """

    sigma_plus_sq: complex
    sigma_minus_sq: complex
    lambda_vac: float
    sigma_plus_sq0: Optional[complex] = None
    sigma_minus_sq0: Optional[complex] = None

    def __post_init__(self):
        for name in ("sigma_plus_sq", "sigma_minus_sq"):
            v = complex(getattr(self, name))
            if not v.real > 0:
                raise ValueError(f"Re({name}) must be positive for a normalizable state")
            object.__setattr__(self, name, v)
        if self.sigma_plus_sq0 is None:
            object.__setattr__(self, "sigma_plus_sq0", self.sigma_plus_sq)
        if self.sigma_minus_sq0 is None:
            object.__setattr__(self, "sigma_minus_sq0", self.sigma_minus_sq)

    @property
    def k(self) -> float:
        return 2 * np.pi / self.lambda_vac

    @property
    def strongly_correlated(self) -> bool:
        """True when ``sigma_plus / sigma_minus > 10`` (real widths at creation)."""
        return float(np.sqrt(self.sigma_plus_sq0.real / self.sigma_minus_sq0.real)) > 10.0

    def evaluate_1d(self, x1, x2) -> np.ndarray:
        """One transverse axis of the separable wave function (prefactor ``sqrt(s0/s)``)."""
        sp, sm = self.sigma_plus_sq, self.sigma_minus_sq
        pref = np.sqrt(self.sigma_plus_sq0 / sp) * np.sqrt(self.sigma_minus_sq0 / sm)
        u = np.asarray(x1) + np.asarray(x2)
        v = np.asarray(x1) - np.asarray(x2)
        return pref * np.exp(-u * u / (4 * sp) - v * v / (4 * sm))

    def evaluate(self, rho1, rho2) -> np.ndarray:
        (x1, y1), (x2, y2) = rho1, rho2
        return self.evaluate_1d(x1, x2) * self.evaluate_1d(y1, y2)


def double_gaussian_from_kernel(kernel: BiphotonKernel, pump_w: float) -> DoubleGaussianState:
    """Gaussian surrogate of a Ssi kernel driven by a Gaussian pump of waist ``pump_w``.

    The momentum factor ``sinc(a |Q|^2)`` (``Q`` conjugate to ``rho1 - rho2``) is
    replaced by ``exp(-0.455 a |Q|^2)``, giving ``sigma_minus^2 = 0.455 a``;
    the pump ``exp(-|rho|^2/w^2)`` at the midpoint gives ``sigma_plus = w``.
    """
    if not isinstance(kernel.corr, SsiCorr):
        raise TypeError("double-Gaussian matching needs a Ssi correlation kernel")
    if kernel.tilt:
        raise ValueError("tilted kernels have no double-Gaussian surrogate here")
    a = 1.0 / (4.0 * kernel.corr.coef)
    return DoubleGaussianState(pump_w**2, SINC_GAUSS_MATCH * a, kernel.lambda_1)


def propagate_double_gaussian(s: DoubleGaussianState, z: float) -> DoubleGaussianState:
    """Free-space propagation of both photons by ``z``: ``s+- -> s+- + i z / k``."""
    shift = 1j * z / s.k
    return DoubleGaussianState(s.sigma_plus_sq + shift, s.sigma_minus_sq + shift, s.lambda_vac,
                               s.sigma_plus_sq0, s.sigma_minus_sq0)


# ---------------------------------------------------------------------------
# quasi-phase matching


def qpm_profile(phi, C: float = 1.0) -> np.ndarray | Callable:
    """Sign-modulated nonlinearity ``C sgn(cos phi)``.

    ``phi`` is either an array of phases sampled on crystal voxels (returns
    the modulation array) or a callable ``phi(z)`` (returns a callable usable
    as ``CrystalSpec.chi2_profile``).  ``sgn(0)`` is taken as ``+1``.
    """
    def _sgn(p):
        c = np.cos(p)
        return np.where(c >= 0, C, -C).astype(float)

    if callable(phi):
        return lambda z: _sgn(phi(z))
    return _sgn(np.asarray(phi, dtype=float))
