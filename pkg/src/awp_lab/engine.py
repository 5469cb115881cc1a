"""Advanced-wave unfolding: conditional states and detection ensembles.

The conditional photon-2 field for a photon-1 detection is obtained by
launching a classical wave backward from the detection point through arm 1,
converting it at the crystal with the biphoton kernel, and sending the result
forward through arm 2.  Incoherent detection cases (bucket detectors,
undetected photons, partially coherent pumps) are weighted sums of such runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from .elements import Element, apply_pipeline, apply_pipeline_batch, trace_grid
from .grid import Grid2D, GridMismatchError, PolarizedField, ScalarField, impulse
from .kernels import BiphotonKernel, KernelElement, apply_kernel_array, _check_wavelength

__all__ = [
    "UnfoldedSetup",
    "Point",
    "PureState",
    "PolarizedPoint",
    "PointSource",
    "SourceComponent",
    "SourceEnsemble",
    "PolarizedSetup",
    "conditional_wavefunction",
    "conditional_batch",
    "conditional_polarized",
    "bucket_jpd",
    "undetected_ensemble",
    "ensemble_intensity",
    "partially_coherent_jpd",
    "nphoton_conditional",
    "pairwise_sum",
    "PerfectCavityError",
]

POL = ("H", "V")


def pairwise_sum(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Sum in a fixed balanced-tree order so results do not depend on batching."""
    items = list(arrays)
    if not items:
        raise ValueError("nothing to sum")
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


# ---------------------------------------------------------------------------
# post-selection


@dataclass(frozen=True)
class Point:
    """Photon 1 detected at ``(x, y)`` on the arm-1 detection grid."""

    x: float
    y: float


@dataclass(frozen=True)
class PureState:
    """Photon 1 projected onto the mode ``psi``; the conjugate is sent backward."""

    psi: ScalarField

    def __post_init__(self):
        if not self.psi.norm2() > 0:
            raise ValueError("post-selected state must have a nonzero norm")


@dataclass(frozen=True)
class PolarizedPoint:
    """Detection at ``(x, y)`` behind an analyzer along Jones vector ``jones``."""

    x: float
    y: float
    jones: tuple

    def __post_init__(self):
        j = np.asarray(self.jones, dtype=complex)
        if j.shape != (2,) or abs(np.vdot(j, j).real - 1.0) > 1e-9:
            raise ValueError("Jones vector must have two components with |c_H|^2 + |c_V|^2 = 1")


# ---------------------------------------------------------------------------
# unfolded setup


@dataclass(frozen=True, eq=False)
class UnfoldedSetup:
    """Arm 1 (traversed backward), kernel, arm 2 (traversed forward).

    ``det_grid`` is the arm-1 detection grid.  The grid reached at the
    crystal must match the kernel's pump-mask grid when one is present.
    """

    arm1: tuple
    kernel: BiphotonKernel
    arm2: tuple
    det_grid: Grid2D

    def __post_init__(self):
        object.__setattr__(self, "arm1", tuple(self.arm1))
        object.__setattr__(self, "arm2", tuple(self.arm2))
        g, lam = trace_grid(self.arm1, self.det_grid, self.kernel.lambda_1, reverse=True)
        _check_wavelength(self.kernel, lam)
        if self.kernel.grid is not None and not self.kernel.grid.same_as(g):
            raise GridMismatchError(
                f"arm 1 reaches the crystal on pitch ({g.dx:.4g}, {g.dy:.4g}) m but the kernel's pump mask "
                f"is sampled on ({self.kernel.grid.dx:.4g}, {self.kernel.grid.dy:.4g}) m"
            )
        object.__setattr__(self, "_crystal_grid", g)

    @property
    def crystal_grid(self) -> Grid2D:
        return self._crystal_grid

    @property
    def output_grid(self) -> Grid2D:
        return trace_grid(self.arm2, self.crystal_grid, self.kernel.lambda_2)[0]

    def swapped(self) -> "UnfoldedSetup":
        """Same physical setup with the roles of photons 1 and 2 exchanged."""
        return UnfoldedSetup(self.arm2, self.kernel.swapped(), self.arm1, self.output_grid)


def _initial_field(s: UnfoldedSetup, ps) -> ScalarField:
    lam = s.kernel.lambda_1
    if isinstance(ps, Point):
        return impulse(s.det_grid, ps.x, ps.y, lam)
    if isinstance(ps, PureState):
        if not ps.psi.grid.same_as(s.det_grid):
            raise GridMismatchError("post-selected state is not sampled on the arm-1 detection grid")
        return ScalarField(s.det_grid, np.conj(ps.psi.amp), lam)
    raise TypeError(f"unsupported post-selection {type(ps).__name__}")


def conditional_wavefunction(s: UnfoldedSetup, ps) -> ScalarField:
    """Photon-2 conditional field for the post-selection ``ps`` on photon 1.

    ``Point`` launches a discrete delta; ``PureState`` launches ``conj(psi)``,
    so that the result equals ``sum psi*(rho1) psi(rho1, rho2) dA``.
    """
    a = _initial_field(s, ps)
    a = apply_pipeline(a, s.arm1, reverse=True)
    out = apply_kernel_array(s.kernel, a.amp, a.grid)
    b = ScalarField(a.grid, out, s.kernel.lambda_2)
    return apply_pipeline(b, s.arm2)


def conditional_batch(s: UnfoldedSetup, amps: np.ndarray) -> tuple[np.ndarray, Grid2D]:
    """Run a stack of arm-1 detection-plane amplitudes ``amps[b, ny, nx]`` through the setup."""
    a, g, lam = apply_pipeline_batch(amps, s.det_grid, s.kernel.lambda_1, s.arm1, reverse=True)
    a = apply_kernel_array(s.kernel, a, g)
    a, g, _ = apply_pipeline_batch(a, g, s.kernel.lambda_2, s.arm2)
    return a, g


def _region_pixels(grid: Grid2D, region) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(region)
    if r.dtype == bool:
        if r.shape != grid.shape:
            raise GridMismatchError("bucket region mask does not match the detection grid")
        iy, ix = np.nonzero(r)
    else:
        r = r.reshape(-1, 2)
        iy, ix = r[:, 0].astype(int), r[:, 1].astype(int)
    if iy.size == 0:
        raise ValueError("bucket region is empty")
    if iy.min() < 0 or ix.min() < 0 or iy.max() >= grid.ny or ix.max() >= grid.nx:
        raise GridMismatchError("bucket region extends outside the detection grid")
    return iy, ix


def _impulse_stack(grid: Grid2D, iy: np.ndarray, ix: np.ndarray) -> np.ndarray:
    st = np.zeros((iy.size,) + grid.shape, dtype=complex)
    st[np.arange(iy.size), iy, ix] = 1.0 / grid.cell_area
    return st


def bucket_jpd(s: UnfoldedSetup, region, batch: int = 64) -> tuple[np.ndarray, Grid2D]:
    """Photon-2 intensity conditioned on photon 1 anywhere in ``region`` (incoherent sum).

    ``region`` is a boolean mask on the detection grid or a list of
    ``(iy, ix)`` pixels.  Returns the intensity array and its grid.
    """
    iy, ix = _region_pixels(s.det_grid, region)
    parts = []
    grid = None
    for k in range(0, iy.size, batch):
        out, grid = conditional_batch(s, _impulse_stack(s.det_grid, iy[k : k + batch], ix[k : k + batch]))
        parts.append(pairwise_sum(list(np.abs(out) ** 2)))
    return pairwise_sum(parts), grid


# ---------------------------------------------------------------------------
# source ensembles


@dataclass(frozen=True)
class PointSource:
    """Lazily materialized discrete delta at pixel ``(iy, ix)``."""

    grid: Grid2D
    iy: int
    ix: int
    lambda_vac: float

    def field(self) -> ScalarField:
        return impulse(self.grid, *self.grid.position(self.iy, self.ix), self.lambda_vac)


@dataclass(frozen=True)
class SourceComponent:
    weight: float
    source: Union[ScalarField, PolarizedField, PointSource]
    location: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight >= 0):
            raise ValueError("ensemble weights must be finite and nonnegative")

    def field(self):
        return self.source.field() if isinstance(self.source, PointSource) else self.source


@dataclass(frozen=True)
class SourceEnsemble:
    """Incoherent mixture ``J(r, r') = sum_j w_j U_j(r) U_j*(r')`` kept as a mode list."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __len__(self) -> int:
        return len(self.components)

    def at(self, location: str) -> "SourceEnsemble":
        return SourceEnsemble(tuple(c for c in self.components if c.location == location))

    def locations(self) -> list[str]:
        seen = []
        for c in self.components:
            if c.location not in seen:
                seen.append(c.location)
        return seen

    def batches(self, size: int = 64) -> Iterator[tuple[np.ndarray, np.ndarray, Grid2D, float]]:
        """Yield ``(weights, amps, grid, lambda)`` for nonzero-weight scalar components.

        Consecutive components must share a grid and wavelength to be batched
        together; a change starts a new batch.
        """
        buf_w, buf_a, key = [], [], None
        for c in self.components:
            if c.weight == 0:
                continue
            f = c.field()
            if isinstance(f, PolarizedField):
                raise TypeError("polarized ensembles are evaluated component by component")
            k = (f.grid, f.lambda_vac)
            if key is not None and (k != key or len(buf_w) == size):
                yield np.array(buf_w), np.stack(buf_a), key[0], key[1]
                buf_w, buf_a = [], []
            key = k
            buf_w.append(c.weight)
            buf_a.append(f.amp)
        if buf_w:
            yield np.array(buf_w), np.stack(buf_a), key[0], key[1]


class PerfectCavityError(ValueError):
    """The photon-1 path has neither an exit surface nor any absorption."""


def undetected_ensemble(exit_grid: Optional[Grid2D], lambda_vac: float,
                        absorbers: Sequence[tuple] = ()) -> SourceEnsemble:
    """Advanced-wave sources for an undetected photon 1.

    Parameters
    ----------
    exit_grid : Grid2D or None
        Plane where photon 1 escapes; tiled with point sources at grid
        resolution, each weighted by its cell area.  ``None`` means no escape route.
    lambda_vac : float
        Photon-1 wavelength.
    absorbers : sequence of ``(ThinMask, location)`` or ``(ThinMask, location, grid)``
        Each absorbing pixel emits with weight ``(1 - |T|^2) dA``.

    Raises
    ------
    PerfectCavityError
        When there is no exit surface and nothing absorbs.
    """
    comps = []
    if exit_grid is not None:
        for iy in range(exit_grid.ny):
            for ix in range(exit_grid.nx):
                comps.append(SourceComponent(exit_grid.cell_area, PointSource(exit_grid, iy, ix, lambda_vac), "exit"))
    absorbing = False
    for entry in absorbers:
        mask, loc = entry[0], entry[1]
        g = entry[2] if len(entry) > 2 else mask.grid
        if g is None:
            raise ValueError(f"absorber at {loc!r} needs a grid")
        w = 1.0 - np.abs(mask.T) ** 2
        if np.any(w < -1e-12):
            raise ValueError(f"absorber at {loc!r} has |T| > 1, which would need gain")
        w = np.clip(w, 0.0, None) * g.cell_area
        absorbing |= bool(np.any(w > 0))
        for iy in range(g.ny):
            for ix in range(g.nx):
                comps.append(SourceComponent(float(w[iy, ix]), PointSource(g, iy, ix, lambda_vac), loc))
    if exit_grid is None and not absorbing:
        raise PerfectCavityError("photon 1 can neither escape nor be absorbed (perfect cavity); not supported")
    return SourceEnsemble(tuple(comps))


def ensemble_intensity(s: UnfoldedSetup, ens: SourceEnsemble, batch: int = 64) -> tuple[np.ndarray, Grid2D]:
    """``sum_j w_j |conditional field of component j|^2`` for sources on the arm-1 start plane."""
    parts, grid = [], s.output_grid
    for w, amps, g, lam in ens.batches(batch):
        if not g.same_as(s.det_grid):
            raise GridMismatchError("ensemble components are not on the arm-1 start grid")
        out, grid = conditional_batch(s, amps)
        parts.append(pairwise_sum(list(w[:, None, None] * np.abs(out) ** 2)))
    if not parts:
        return np.zeros(grid.shape), grid
    return pairwise_sum(parts), grid


def partially_coherent_jpd(modes: Sequence[tuple], ps) -> ScalarField:
    """``sum_j w_j |psi_j|^2`` over pump modes given as ``(weight, UnfoldedSetup)`` pairs.

    Returns the conditional intensity slice for post-selection ``ps`` as a
    real-valued field.
    """
    if not modes:
        raise ValueError("at least one pump mode is required")
    parts, ref = [], None
    for w, setup in modes:
        if w < 0:
            raise ValueError("mode weights must be nonnegative")
        f = conditional_wavefunction(setup, ps)
        ref = f
        parts.append(w * np.abs(f.amp) ** 2)
    return ref.with_amp(pairwise_sum(parts))


# ---------------------------------------------------------------------------
# polarization


@dataclass(frozen=True, eq=False)
class PolarizedSetup:
    """Polarization-resolved unfolding.

    Parameters
    ----------
    arm1, arm2 : sequence of Element
        Scalar elements act on both components; ``JonesMask``/``Polarizer``
        act on the pair.
    chi : mapping ``(sp, s1, s2) -> complex``
        Nonlinear tensor entries with ``sp`` the pump polarization and
        ``s1``, ``s2`` those of photons 1 and 2 (each ``"H"`` or ``"V"``).
    channels : mapping ``(sp, s1, s2) -> BiphotonKernel or sequence of Element``
        Spatial conversion for each tensor entry.  A pipeline may wrap the
        kernel in propagations to place the conversion plane.
    pump : mapping ``sp -> complex``
        Pump Jones amplitudes.
    det_grid : Grid2D
    lambda_1 : float
    """

    arm1: tuple
    chi: Mapping
    channels: Mapping
    pump: Mapping
    arm2: tuple
    det_grid: Grid2D
    lambda_1: float

    def __post_init__(self):
        missing = [key for key, val in self.chi.items() if val != 0 and key not in self.channels]
        if missing:
            listed = ", ".join("chi_" + "".join(k) for k in sorted(missing))
            raise KeyError(f"no kernel supplied for nonzero tensor entries: {listed}")


def _run_channel(ch, fld: ScalarField) -> ScalarField:
    if isinstance(ch, BiphotonKernel):
        ch = [KernelElement(ch)]
    return apply_pipeline(fld, list(ch))


def conditional_polarized(s: PolarizedSetup, ps: PolarizedPoint) -> PolarizedField:
    """Polarized conditional field: the advanced wave starts with ``conj(P)``."""
    if not isinstance(ps, PolarizedPoint):
        raise TypeError("conditional_polarized needs a PolarizedPoint")
    base = impulse(s.det_grid, ps.x, ps.y, s.lambda_1)
    adv = PolarizedField.from_jones(base, np.conj(np.asarray(ps.jones, dtype=complex)))
    adv = apply_pipeline(adv, s.arm1, reverse=True)
    comps = {"H": adv.h, "V": adv.v}
    out: dict[str, Optional[ScalarField]] = {"H": None, "V": None}
    for (sp, s1, s2), chi in s.chi.items():
        if chi == 0:
            continue
        up = complex(s.pump.get(sp, 0.0))
        if up == 0:
            continue
        f = _run_channel(s.channels[(sp, s1, s2)], comps[s1]) * (chi * up)
        out[s2] = f if out[s2] is None else out[s2] + f
    ref = next((f for f in out.values() if f is not None), None)
    if ref is None:
        raise ValueError("no tensor entry is driven by the pump polarization")
    h = out["H"] if out["H"] is not None else ref * 0.0
    v = out["V"] if out["V"] is not None else ref * 0.0
    return apply_pipeline(PolarizedField(h, v), s.arm2)


# ---------------------------------------------------------------------------
# N-photon thin-crystal source


def nphoton_conditional(grid: Grid2D, partners: Sequence[tuple], lambda_out: float,
                        pump: Optional[ScalarField] = None, arm_out: Sequence[Element] = (),
                        padding: int = 2) -> ScalarField:
    """Photon-1 field when the other ``N - 1`` photons of a thin-crystal event are detected.

    Parameters
    ----------
    partners : sequence of ``((x, y), d, lambda)``
        Detection point, distance from the crystal and wavelength of each
        post-selected partner.
    lambda_out : float
        Wavelength of photon 1.
    pump : ScalarField, optional
        Pump amplitude at the crystal (unit plane wave when omitted).
    arm_out : sequence of Element
        Path of photon 1 after the crystal.

    The product of the partners' advanced waves at the crystal, times the
    pump, is the photon-1 field leaving the crystal.
    """
    from .elements import propagate

    if len(partners) < 1:
        raise ValueError("N-photon post-selection needs N >= 2 (at least one partner)")
    amp = np.ones(grid.shape, dtype=complex) if pump is None else pump.amp.astype(complex)
    for (x, y), d, lam in partners:
        adv = propagate(impulse(grid, x, y, lam), d, padding=padding)
        amp = amp * adv.amp
    return apply_pipeline(ScalarField(grid, amp, lambda_out), list(arm_out))
