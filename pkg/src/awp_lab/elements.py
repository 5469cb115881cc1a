"""Linear optical elements acting on sampled fields.

Every element maps a field to a field.  Free-space and birefringent slabs use
angular-spectrum transfer functions; thin elements multiply pointwise; Fourier
lenses are scaled FFTs that change the pixel pitch.  ``transposed()`` returns the
element seen by light traversing it backward, which is what the advanced wave
needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import _fft
from .crystal import CrystalSpec
from .grid import Grid2D, GridMismatchError, PolarizedField, ScalarField

__all__ = [
    "SamplingError",
    "Element",
    "Propagate",
    "PropagateExtraordinary",
    "ThinMask",
    "ThinLens",
    "FourierLens",
    "FourfSystem",
    "ConstantPhase",
    "JonesMask",
    "Polarizer",
    "propagate",
    "propagate_extraordinary",
    "apply_element",
    "apply_pipeline",
    "apply_pipeline_batch",
    "trace_grid",
    "resample",
    "DEFAULT_PADDING",
]

DEFAULT_PADDING = 2

AnyField = Union[ScalarField, PolarizedField]


class SamplingError(ValueError):
    """The transfer phase changes by more than pi between adjacent frequency samples."""

    def __init__(self, max_step: float, what: str = "transfer phase"):
        self.max_step = float(max_step)
        super().__init__(
            f"grid too coarse for the {what}: max phase step {self.max_step:.4g} rad per pixel exceeds pi; "
            "increase padding or sample count, or reduce the distance"
        )


def _padded_shape(grid: Grid2D, padding: int) -> tuple[int, int]:
    if int(padding) != padding or padding < 1:
        raise ValueError(f"padding must be an integer >= 1 (got {padding})")
    return grid.ny * int(padding), grid.nx * int(padding)


def _embed(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Zero-pad the last two axes to ``shape`` keeping index ``n // 2`` centered."""
    ny, nx = a.shape[-2:]
    py, px = shape
    if (py, px) == (ny, nx):
        return a.astype(complex, copy=True)
    out = np.zeros(a.shape[:-2] + (py, px), dtype=complex)
    oy, ox = py // 2 - ny // 2, px // 2 - nx // 2
    out[..., oy : oy + ny, ox : ox + nx] = a
    return out


def _crop(a: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    py, px = a.shape[-2:]
    ny, nx = shape
    if (py, px) == (ny, nx):
        return a
    oy, ox = py // 2 - ny // 2, px // 2 - nx // 2
    return a[..., oy : oy + ny, ox : ox + nx]


def _freqs(n: int, d: float) -> np.ndarray:
    # unshifted FFT ordering
    return 2 * np.pi * np.fft.fftfreq(n, d)


def _transfer(grid: Grid2D, padding: int, lam: float, z: float, n_eff: float,
              beta: float = 1.0, gamma: float = 1.0, alpha: float = 0.0,
              alpha_nyquist: float | None = None) -> np.ndarray:
    """Paraxial transfer function on the padded, unshifted frequency grid.

    ``alpha_nyquist`` sets the walk-off slope used in the Nyquist column of
    an even-length axis, where +q and -q share one sample.  Keeping it fixed
    when ``alpha`` is mirrored makes the mirrored operator the exact matrix
    transpose.
    """
    py, px = _padded_shape(grid, padding)
    k = 2 * np.pi / lam
    qx = _freqs(px, grid.dx)
    qy = _freqs(py, grid.dy)
    dqx = 2 * np.pi / (px * grid.dx)
    dqy = 2 * np.pi / (py * grid.dy)
    # analytic phase gradient at the band edge sets the sampling check
    qx_max = np.pi / grid.dx
    qy_max = np.pi / grid.dy
    step_x = abs(z) * max(abs(beta**2 * qx_max / (n_eff * k) - alpha), abs(beta**2 * qx_max / (n_eff * k) + alpha)) * dqx
    step_y = abs(z) * gamma**2 * qy_max / (n_eff * k) * dqy
    step = max(step_x, step_y)
    if step > np.pi * (1 + 1e-12):
        raise SamplingError(step)
    # the carrier n k z is kept separate to avoid large-argument phase loss
    phx = -(beta**2) * qx**2 / (2 * n_eff * k) + alpha * qx
    if alpha_nyquist is not None and px % 2 == 0:
        phx[px // 2] += (alpha_nyquist - alpha) * qx[px // 2]
    phy = -(gamma**2) * qy**2 / (2 * n_eff * k)
    carrier = np.exp(1j * ((n_eff * k * z) % (2 * np.pi)))
    return carrier * np.exp(1j * z * phy)[:, None] * np.exp(1j * z * phx)[None, :]


def _transfer_array(a: np.ndarray, grid: Grid2D, H: np.ndarray, padding: int) -> np.ndarray:
    shape = _padded_shape(grid, padding)
    p = _embed(a, shape)
    # ifftshift moves the grid origin (index n//2) to index 0 before the FFT
    spec = _fft.fft2(np.fft.ifftshift(p, axes=(-2, -1)))
    out = np.fft.fftshift(_fft.ifft2(spec * H), axes=(-2, -1))
    return _crop(out, grid.shape)


def _apply_transfer(f: ScalarField, H: np.ndarray, padding: int) -> ScalarField:
    return f.with_amp(_transfer_array(f.amp, f.grid, H, padding))


def propagate(field: ScalarField, z: float, n: float = 1.0, padding: int = DEFAULT_PADDING) -> ScalarField:
    """Paraxial free-space propagation over signed distance ``z`` in index ``n``.

    The angular spectrum is multiplied by ``exp(i (n k - |q|^2/(2 n k)) z)``.
    ``padding`` embeds the field in a zero guard band of that many times the
    grid size; ``padding=1`` gives the exactly invertible circular version.

    Raises
    ------
    SamplingError
        If the transfer phase steps by more than pi per frequency pixel.
    """
    if not n > 0:
        raise ValueError(f"refractive index must be positive (got {n})")
    H = _transfer(field.grid, padding, field.lambda_vac, z, n)
    return _apply_transfer(field, H, padding)


def propagate_extraordinary(field: ScalarField, z: float, c: CrystalSpec, padding: int = DEFAULT_PADDING,
                            mirror_walkoff: bool = False) -> ScalarField:
    """Propagation of an extraordinary wave through the birefringent crystal ``c``.

    The transfer phase is ``[eta k - (beta^2 qx^2 + gamma^2 qy^2)/(2 eta k) + alpha qx] z``,
    which walks a beam off by ``-alpha z`` along x.  ``mirror_walkoff`` flips the sign
    of ``alpha`` (the transpose of the operator).
    """
    H = _extraordinary_transfer(field.grid, padding, field.lambda_vac, z, c, mirror_walkoff)
    return _apply_transfer(field, H, padding)


def _extraordinary_transfer(grid: Grid2D, padding: int, lam: float, z: float, c: CrystalSpec,
                            mirror_walkoff: bool) -> np.ndarray:
    alpha = -c.alpha if mirror_walkoff else c.alpha
    return _transfer(grid, padding, lam, z, c.eta, c.beta, c.gamma, alpha, alpha_nyquist=c.alpha)


# ---------------------------------------------------------------------------
# element variants


class Element:
    """Base class; subclasses implement ``apply`` and ``transposed``."""

    lossless = False

    def apply(self, f: ScalarField) -> ScalarField:  # pragma: no cover - abstract
        raise NotImplementedError

    def apply_batch(self, a: np.ndarray, grid: Grid2D, lam: float) -> tuple[np.ndarray, Grid2D, float]:
        """Apply to a stack of amplitudes ``a[..., ny, nx]``; returns ``(a, grid, lambda)``."""
        flat = a.reshape((-1,) + grid.shape)
        outs = [self.apply(ScalarField(grid, x, lam)) for x in flat]
        g2, l2 = outs[0].grid, outs[0].lambda_vac
        return np.stack([o.amp for o in outs]).reshape(a.shape[:-2] + g2.shape), g2, l2

    def transposed(self) -> "Element":
        return self

    def output_grid_of(self, grid: Grid2D, lam: float) -> tuple[Grid2D, float]:
        """Grid and wavelength of the output for an input on ``grid`` at ``lam``."""
        return grid, lam


@dataclass(frozen=True, eq=False)
class Propagate(Element):
    z: float
    n: float = 1.0
    padding: int = DEFAULT_PADDING
    lossless = True

    def apply(self, f: ScalarField) -> ScalarField:
        return propagate(f, self.z, self.n, self.padding)

    def apply_batch(self, a, grid, lam):
        if not self.n > 0:
            raise ValueError(f"refractive index must be positive (got {self.n})")
        H = _transfer(grid, self.padding, lam, self.z, self.n)
        return _transfer_array(a, grid, H, self.padding), grid, lam


@dataclass(frozen=True, eq=False)
class PropagateExtraordinary(Element):
    z: float
    crystal: CrystalSpec
    padding: int = DEFAULT_PADDING
    mirror_walkoff: bool = False
    lossless = True

    def apply(self, f: ScalarField) -> ScalarField:
        return propagate_extraordinary(f, self.z, self.crystal, self.padding, self.mirror_walkoff)

    def apply_batch(self, a, grid, lam):
        H = _extraordinary_transfer(grid, self.padding, lam, self.z, self.crystal, self.mirror_walkoff)
        return _transfer_array(a, grid, H, self.padding), grid, lam

    def transposed(self) -> "PropagateExtraordinary":
        return PropagateExtraordinary(self.z, self.crystal, self.padding, not self.mirror_walkoff)


@dataclass(frozen=True, eq=False)
class ThinMask(Element):
    """Pointwise complex transmittance ``T``; ``grid`` pins the pitch it was sampled on."""

    T: np.ndarray
    grid: Grid2D | None = None

    def __post_init__(self):
        t = np.array(self.T, dtype=complex, copy=True)
        t.setflags(write=False)
        object.__setattr__(self, "T", t)

    @property
    def lossless(self) -> bool:  # phase-only masks conserve the norm
        return bool(np.allclose(np.abs(self.T), 1.0, rtol=0, atol=1e-12))

    def apply(self, f: ScalarField) -> ScalarField:
        self._check(f.grid)
        return f.with_amp(f.amp * self.T)

    def apply_batch(self, a, grid, lam):
        self._check(grid)
        return a * self.T, grid, lam

    def _check(self, grid: Grid2D) -> None:
        if self.T.shape != grid.shape:
            raise GridMismatchError(f"mask shape {self.T.shape} does not match field grid {grid.shape}")
        if self.grid is not None and not self.grid.same_as(grid):
            raise GridMismatchError("mask was sampled on a different pitch; resample the field or the mask first")


@dataclass(frozen=True, eq=False)
class ThinLens(Element):
    """Quadratic phase ``exp(-i k |rho|^2 / (2 f))`` (vacuum wavenumber)."""

    f: float
    lossless = True

    def apply(self, fld: ScalarField) -> ScalarField:
        r2 = fld.grid.r2()
        return fld.with_amp(fld.amp * np.exp(-1j * fld.k * r2 / (2 * self.f)))

    def apply_batch(self, a, grid, lam):
        return a * np.exp(-1j * (2 * np.pi / lam) * grid.r2() / (2 * self.f)), grid, lam


@dataclass(frozen=True, eq=False)
class FourierLens(Element):
    """Front-to-back focal-plane transform with focal length ``f``.

    Output amplitude is ``(1/(lambda f)) * sum U(rho') exp(-i 2 pi rho.rho'/(lambda f)) dx dy``
    on a grid of pitch ``lambda f / (N dx)``.  The constant ``1/i`` is dropped.
    """

    f: float
    lossless = True

    def output_grid(self, grid: Grid2D, lam: float) -> Grid2D:
        return Grid2D(grid.nx, grid.ny, lam * self.f / (grid.nx * grid.dx), lam * self.f / (grid.ny * grid.dy))

    def output_grid_of(self, grid, lam):
        return self.output_grid(grid, lam), lam

    def apply(self, fld: ScalarField) -> ScalarField:
        lam = fld.lambda_vac
        g2 = self.output_grid(fld.grid, lam)
        out = _fft.centered_fft2(fld.amp) * (fld.grid.cell_area / (lam * self.f))
        return ScalarField(g2, out, lam)

    def apply_batch(self, a, grid, lam):
        return _fft.centered_fft2(a) * (grid.cell_area / (lam * self.f)), self.output_grid(grid, lam), lam


def _flip_centered(a: np.ndarray) -> np.ndarray:
    """``a(rho) -> a(-rho)`` about index ``n // 2`` (index ``j -> -j mod n``)."""
    ny, nx = a.shape[-2:]
    return np.roll(a[..., ::-1, ::-1], shift=(1 - ny % 2, 1 - nx % 2), axis=(-2, -1))


@dataclass(frozen=True, eq=False)
class FourfSystem(Element):
    """Ideal 4f imager with magnification ``-f_b / f_a``.

    The output grid pitch is scaled by ``f_b / f_a`` so the mapping is exact
    pixel-to-pixel; it equals two successive :class:`FourierLens` transforms.
    """

    f_a: float
    f_b: float
    lossless = True

    @property
    def magnification(self) -> float:
        return -self.f_b / self.f_a

    def apply(self, fld: ScalarField) -> ScalarField:
        m = abs(self.magnification)
        g2 = fld.grid.scaled(m)
        return ScalarField(g2, _flip_centered(fld.amp) / m, fld.lambda_vac)

    def apply_batch(self, a, grid, lam):
        m = abs(self.magnification)
        return _flip_centered(a) / m, grid.scaled(m), lam

    def output_grid_of(self, grid, lam):
        return grid.scaled(abs(self.magnification)), lam

    def transposed(self) -> "FourfSystem":
        return FourfSystem(self.f_b, self.f_a)


@dataclass(frozen=True, eq=False)
class ConstantPhase(Element):
    C: float
    lossless = True

    def apply(self, fld: ScalarField) -> ScalarField:
        return fld.with_amp(fld.amp * np.exp(1j * self.C))

    def apply_batch(self, a, grid, lam):
        return a * np.exp(1j * self.C), grid, lam


@dataclass(frozen=True, eq=False)
class JonesMask(Element):
    """Polarization-diagonal transmittance ``diag(t_h, t_v)`` (scalars or arrays)."""

    t_h: object = 1.0
    t_v: object = 1.0

    def apply(self, fld):
        if not isinstance(fld, PolarizedField):
            raise TypeError("JonesMask acts on polarized fields")
        return PolarizedField(fld.h.with_amp(fld.h.amp * np.asarray(self.t_h)),
                              fld.v.with_amp(fld.v.amp * np.asarray(self.t_v)))


@dataclass(frozen=True, eq=False)
class Polarizer(Element):
    """Projector onto the (normalized) Jones vector ``jones``."""

    jones: tuple

    def apply(self, fld):
        if not isinstance(fld, PolarizedField):
            raise TypeError("Polarizer acts on polarized fields")
        j = np.asarray(self.jones, dtype=complex)
        j = j / np.linalg.norm(j)
        s = fld.project(j)
        return PolarizedField(s * j[0], s * j[1])

    def transposed(self) -> "Polarizer":
        return Polarizer(tuple(np.conj(np.asarray(self.jones, dtype=complex))))


def apply_element(fld: AnyField, e: Element) -> AnyField:
    """Apply one element; scalar elements act on both components of a polarized field."""
    if isinstance(fld, PolarizedField) and not isinstance(e, (JonesMask, Polarizer)):
        return PolarizedField(e.apply(fld.h), e.apply(fld.v))
    return e.apply(fld)


def apply_pipeline(fld: AnyField, pipeline: Sequence[Element], reverse: bool = False) -> AnyField:
    """Run ``fld`` through ``pipeline``.

    With ``reverse=True`` the transposed elements are applied in reverse
    order, i.e. the path is traversed backward.
    """
    seq = [e.transposed() for e in reversed(pipeline)] if reverse else list(pipeline)
    for e in seq:
        fld = apply_element(fld, e)
    return fld


def apply_pipeline_batch(a: np.ndarray, grid: Grid2D, lam: float, pipeline: Sequence[Element],
                         reverse: bool = False) -> tuple[np.ndarray, Grid2D, float]:
    """Array counterpart of :func:`apply_pipeline` for stacks ``a[..., ny, nx]``."""
    seq = [e.transposed() for e in reversed(pipeline)] if reverse else list(pipeline)
    for e in seq:
        a, grid, lam = e.apply_batch(a, grid, lam)
    return a, grid, lam


def trace_grid(pipeline: Sequence[Element], grid: Grid2D, lam: float, reverse: bool = False) -> tuple[Grid2D, float]:
    """Grid and wavelength at the end of ``pipeline`` without moving any field."""
    seq = [e.transposed() for e in reversed(pipeline)] if reverse else list(pipeline)
    for e in seq:
        grid, lam = e.output_grid_of(grid, lam)
    return grid, lam


def resample(fld: ScalarField, grid: Grid2D) -> ScalarField:
    """Linear interpolation of ``fld`` onto ``grid`` (zero outside the source window)."""
    from scipy.interpolate import RegularGridInterpolator

    src = fld.grid
    pts = np.stack(np.meshgrid(grid.y, grid.x, indexing="ij"), axis=-1)
    out = np.zeros(grid.shape, dtype=complex)
    for part, unit in ((fld.amp.real, 1.0), (fld.amp.imag, 1j)):
        interp = RegularGridInterpolator((src.y, src.x), part, bounds_error=False, fill_value=0.0)
        out += unit * interp(pts)
    return ScalarField(grid, out, fld.lambda_vac)
