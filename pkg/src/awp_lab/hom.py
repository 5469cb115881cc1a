"""Quasimonochromatic two-photon interference in one spatial mode per path.

Packets live on a uniform axis ``z = c t`` so that delays and path
differences share units.  Shifts are applied spectrally, which is exact for
packets that are band-limited and vanish at the window edges.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "TemporalPacket",
    "Monochromatic",
    "Pulsed",
    "HomConfig",
    "WindowClippingError",
    "hom_amplitudes",
    "coincidence_probability",
    "coincidence_scan",
    "pulsed_gate",
    "nondegenerate_beat",
    "rect_bandpass",
    "write_scan_csv",
]

SUPPORT_TOL = 1e-12


class WindowClippingError(ValueError):
    """A shifted packet would leave the sampled window."""


@dataclass(frozen=True, eq=False)
class TemporalPacket:
    """Even envelope ``f`` sampled on the symmetric uniform axis ``z``."""

    z: np.ndarray
    f: np.ndarray
    even_tol: float = 1e-9

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        f = np.asarray(self.f, dtype=complex)
        if z.ndim != 1 or z.shape != f.shape or z.size < 4:
            raise ValueError("packet needs matching 1D z and f arrays")
        dz = np.diff(z)
        if not np.allclose(dz, dz[0], rtol=1e-9, atol=0) or dz[0] <= 0:
            raise ValueError("z axis must be uniform and increasing")
        if not np.allclose(z, -z[::-1], rtol=0, atol=1e-9 * dz[0]):
            raise ValueError("z axis must be symmetric about 0")
        E = float(np.sum(np.abs(f) ** 2) * dz[0])
        if not E > 0:
            raise ValueError("packet energy must be positive")
        if np.max(np.abs(f - f[::-1])) > self.even_tol * np.max(np.abs(f)):
            raise ValueError("packet envelope must be even, f(-z) = f(z)")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "f", f)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], half_width: float, n: int) -> "TemporalPacket":
        """Sample ``func`` on ``n`` (even) points spanning ``[-half_width, half_width)`` symmetrically."""
        if n % 2:
            raise ValueError("use an even sample count")
        dz = 2.0 * half_width / n
        z = (np.arange(n) - (n - 1) / 2.0) * dz
        return cls(z, func(z))

    @classmethod
    def gaussian(cls, s: float, half_width: Optional[float] = None, n: int = 4096) -> "TemporalPacket":
        """``exp(-z^2 / (2 s^2))``."""
        hw = 40.0 * s if half_width is None else half_width
        return cls.from_function(lambda z: np.exp(-z * z / (2 * s * s)), hw, n)

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.f) ** 2) * self.dz)

    @property
    def support_half_width(self) -> float:
        """Largest ``|z|`` where ``|f|`` exceeds a tiny fraction of its peak."""
        a = np.abs(self.f)
        live = a > SUPPORT_TOL * a.max()
        return float(np.max(np.abs(self.z[live])))

    @property
    def window_half_width(self) -> float:
        return float(self.z[-1] + 0.5 * self.dz)

    def shifted(self, s: float) -> np.ndarray:
        """Samples of ``f(z - s)`` by a spectral phase ramp."""
        q = 2 * np.pi * np.fft.fftfreq(self.z.size, self.dz)
        # the axis is centred on a half-sample offset; the ramp is relative, so it cancels
        return np.fft.ifft(np.fft.fft(self.f) * np.exp(-1j * q * s))


@dataclass(frozen=True)
class Monochromatic:
    """Constant pump: every crossing is converted."""


@dataclass(frozen=True, eq=False)
class Pulsed:
    """Pump envelope ``g(z)`` in the same ``z = c t`` units."""

    envelope: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class HomConfig:
    """Packet, extra length ``d`` of the upper path, and pump model."""

    packet: TemporalPacket
    d: float = 0.0
    pump: Union[Monochromatic, Pulsed] = Monochromatic()

    def __post_init__(self):
        if not (np.isfinite(self.d) and self.d >= 0):
            raise ValueError("path difference d must be >= 0 (the sign is a convention)")


def _check_window(p: TemporalPacket, z1: float, d: float) -> None:
    need = abs(z1) + d + p.support_half_width
    if need >= p.window_half_width:
        raise WindowClippingError(
            f"shifted packets reach |z| = {need:.4g} but the window ends at {p.window_half_width:.4g}; widen the axis"
        )


def hom_amplitudes(cfg: HomConfig, z1: float = 0.0) -> dict:
    """Amplitudes at the two beam-splitter outputs after a detection at ``z1``.

    ``upper = i [f(z - z1 - d) + f(z - z1 + d)] / 2`` and
    ``lower = [-f(z - z1 - d) + f(z - z1 + d)] / 2``.
    """
    p = cfg.packet
    _check_window(p, z1, cfg.d)
    a = p.shifted(z1 + cfg.d)
    b = p.shifted(z1 - cfg.d)
    return {"z": p.z, "upper": 0.5j * (a + b), "lower": 0.5 * (b - a)}


def coincidence_probability(cfg: HomConfig) -> float:
    """``P(d) = int |lower|^2 / E``, which equals ``(E - Re int f*(z-d) f(z+d)) / (2E)``."""
    amps = hom_amplitudes(cfg)
    p = cfg.packet
    return float(np.sum(np.abs(amps["lower"]) ** 2) * p.dz / p.energy)


def coincidence_scan(packet: TemporalPacket, ds: Sequence[float]) -> np.ndarray:
    """``P(|d|)`` for each path difference (P is even in ``d``)."""
    return np.array([coincidence_probability(HomConfig(packet, abs(float(d)))) for d in ds])


def pulsed_gate(cfg: HomConfig, offset: float, z1: float = 0.0) -> dict:
    """Retarded amplitudes: advanced components times the pump envelope where they cross the crystal.

    ``offset`` positions the pump envelope ``g(z - offset)`` on the packet
    axis.  A monochromatic pump leaves :func:`hom_amplitudes` unchanged.
    """
    amps = hom_amplitudes(cfg, z1)
    if isinstance(cfg.pump, Monochromatic):
        return amps
    g = np.asarray(cfg.pump.envelope(amps["z"] - offset), dtype=complex)
    return {"z": amps["z"], "upper": amps["upper"] * g, "lower": amps["lower"] * g}


def nondegenerate_beat(packet: TemporalPacket, ds: Sequence[float], k_s: float, k_i: float) -> np.ndarray:
    """Coincidence scan with distinct carriers: ``P = (1 - cos((k_s - k_i) d) O(d) / E) / 2``.

    ``O(d) = Re int f*(z - d) f(z + d) dz`` is the envelope overlap, taken
    from the degenerate dip as ``O = E (1 - 2 P_0)``.
    """
    P0 = coincidence_scan(packet, ds)
    overlap = 1.0 - 2.0 * P0
    return 0.5 * (1.0 - np.cos((k_s - k_i) * np.asarray(ds, dtype=float)) * overlap)


def rect_bandpass(f: np.ndarray, dz: float, k_center: float, bandwidth: float) -> np.ndarray:
    """Rectangular spectral filter of ``f(z)``: keep wavenumbers within ``bandwidth/2`` of ``k_center``."""
    q = 2 * np.pi * np.fft.fftfreq(np.size(f), dz)
    keep = np.abs(q - k_center) <= 0.5 * bandwidth
    return np.fft.ifft(np.fft.fft(f) * keep)


def write_scan_csv(path: Union[str, os.PathLike], ds: Sequence[float], P: Sequence[float]) -> None:
    """Write ``d_m,P`` rows atomically (temporary file then rename)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d_m", "P"])
    for d, p in zip(ds, P):
        w.writerow([repr(float(d)), repr(float(p))])
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
