"""Nonlinear crystal description and birefringent propagation coefficients."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PMType",
    "CrystalSpec",
    "PhaseMatchingError",
    "walkoff_coefficients",
    "beamlike_eta",
    "matched_theta",
]


class PMType(str, enum.Enum):
    TYPE_I_DEGENERATE = "TypeI_collinear_degenerate"
    TYPE_I_NONDEGENERATE = "TypeI_collinear_nondegenerate"
    TYPE_II_BEAMLIKE = "TypeII_beamlike"
    THIN = "Thin"


class PhaseMatchingError(ValueError):
    """Collinear matching is violated; ``residual`` is the half-crystal phase mismatch."""

    def __init__(self, residual: float, message: str | None = None):
        self.residual = float(residual)
        super().__init__(message or f"collinear phase matching violated: residual mismatch {self.residual:.6g} rad")


def walkoff_coefficients(n_o: float, n_e: float, theta: float) -> tuple[float, float, float, float]:
    """Extraordinary-wave coefficients ``(alpha, eta, beta, gamma)``.

    ``alpha`` is the walk-off slope, ``eta`` the effective index of a normally
    incident plane wave and ``beta``, ``gamma`` rescale the x and y diffraction.
    The optic axis lies in the x-z plane at angle ``theta`` from z.
    """
    t = np.tan(theta)
    alpha = (n_o**2 - n_e**2) * t / (n_o**2 * t**2 + n_e**2)
    eta = n_o * n_e / np.sqrt(n_o**2 * np.sin(theta) ** 2 + n_e**2 * np.cos(theta) ** 2)
    beta = eta**2 / (n_o * n_e)
    gamma = eta / n_e
    return float(alpha), float(eta), float(beta), float(gamma)


def beamlike_eta(n_o: float, alpha: float) -> float:
    """Effective index that removes the linear-in-z phase for beamlike type-II emission."""
    return float(n_o * (alpha**2 + np.sqrt(16.0 + alpha**4)) / 4.0)


def matched_theta(n_o_pump: float, n_e_pump: float, eta_target: float) -> float:
    """Optic-axis angle giving an extraordinary pump the effective index ``eta_target``."""
    num = 1.0 / eta_target**2 - 1.0 / n_o_pump**2
    den = 1.0 / n_e_pump**2 - 1.0 / n_o_pump**2
    s2 = num / den
    if not (0.0 <= s2 <= 1.0):
        raise PhaseMatchingError(0.0, f"no optic-axis angle reaches eta={eta_target} with n_o={n_o_pump}, n_e={n_e_pump}")
    return float(np.arcsin(np.sqrt(s2)))


@dataclass(frozen=True)
class CrystalSpec:
    """Geometry, optics and phase-matching type of a chi(2) crystal.

    Parameters
    ----------
    L : float
        Thickness in meters.
    n_o, n_e : float
        Principal indices entering the extraordinary-wave coefficients.  For
        type-I cases they describe the pump; for beamlike type-II they describe
        the extraordinary down-converted photon.
    theta : float
        Optic-axis angle from z (rad).
    lambda_p, lambda_s, lambda_i : float
        Vacuum wavelengths; ``1/lambda_p = 1/lambda_s + 1/lambda_i``.
    pm_type : PMType
    n_s, n_i : float, optional
        Ordinary indices of signal and idler (default ``n_o``).
    chi2_profile : callable, optional
        ``chi2(z)`` for ``z`` in ``[-L/2, L/2]``; constant 1 when omitted.
    unit_beta_gamma : bool
        Force ``beta = gamma = 1`` (the isotropic-diffraction shortcut).
    check_matching : bool
        Validate collinear matching on construction for type-I cases.
    """

    L: float
    n_o: float
    n_e: float
    theta: float
    lambda_p: float
    lambda_s: float
    lambda_i: float
    pm_type: PMType = PMType.TYPE_I_DEGENERATE
    n_s: Optional[float] = None
    n_i: Optional[float] = None
    chi2_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    unit_beta_gamma: bool = False
    check_matching: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pm_type", PMType(self.pm_type))
        problems = self.violations()
        if problems:
            raise ValueError("invalid crystal: " + "; ".join(problems))
        if self.check_matching and self.pm_type in (PMType.TYPE_I_DEGENERATE, PMType.TYPE_I_NONDEGENERATE):
            dk = self.delta_k
            scale = self.eta * self.k_p
            if abs(dk) > 1e-9 * scale:
                raise PhaseMatchingError(dk * self.L / 2.0)

    def violations(self) -> list[str]:
        """Every violated invariant (empty for a valid crystal description)."""
        out = []
        if not (np.isfinite(self.L) and self.L > 0):
            out.append(f"L must be > 0 (got {self.L})")
        for name in ("n_o", "n_e", "lambda_p", "lambda_s", "lambda_i"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0 (got {v})")
        for name in ("n_s", "n_i"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0 (got {v})")
        if not out:
            lhs = 1.0 / self.lambda_p
            rhs = 1.0 / self.lambda_s + 1.0 / self.lambda_i
            if abs(lhs - rhs) > 1e-12 * lhs:
                out.append("energy conservation 1/lambda_p = 1/lambda_s + 1/lambda_i violated")
            if self.pm_type == PMType.TYPE_I_DEGENERATE and abs(self.lambda_s - self.lambda_i) > 1e-12 * self.lambda_s:
                out.append("degenerate type requires lambda_s == lambda_i")
        return out

    # derived optics -------------------------------------------------------
    @property
    def index_s(self) -> float:
        return self.n_o if self.n_s is None else float(self.n_s)

    @property
    def index_i(self) -> float:
        return self.n_o if self.n_i is None else float(self.n_i)

    @property
    def _coeffs(self):
        return walkoff_coefficients(self.n_o, self.n_e, self.theta)

    @property
    def alpha(self) -> float:
        return self._coeffs[0]

    @property
    def eta(self) -> float:
        """Effective extraordinary index.

        For beamlike type-II this is the matched value fixed by ``alpha``
        rather than the plane-wave index at ``theta``.
        """
        if self.pm_type == PMType.TYPE_II_BEAMLIKE:
            return beamlike_eta(self.index_s, self.alpha)
        return self._coeffs[1]

    @property
    def beta(self) -> float:
        return 1.0 if self.unit_beta_gamma else self._coeffs[2]

    @property
    def gamma(self) -> float:
        return 1.0 if self.unit_beta_gamma else self._coeffs[3]

    @property
    def k_p(self) -> float:
        return 2 * np.pi / self.lambda_p

    @property
    def k_s(self) -> float:
        return 2 * np.pi / self.lambda_s

    @property
    def k_i(self) -> float:
        return 2 * np.pi / self.lambda_i

    @property
    def lambda_plus(self) -> float:
        """Sum of the signal and idler wavelengths inside the crystal."""
        return self.lambda_s / self.index_s + self.lambda_i / self.index_i

    @property
    def delta_k(self) -> float:
        """Collinear on-axis mismatch ``eta k_p - n_s k_s - n_i k_i`` (rad/m)."""
        return self.eta * self.k_p - self.index_s * self.k_s - self.index_i * self.k_i

    @property
    def residual_mismatch(self) -> float:
        """Half-crystal mismatch phase; ``(eta - n_o) k L`` in the degenerate case."""
        return self.delta_k * self.L / 2.0

    def chi2(self, z) -> np.ndarray:
        z = np.asarray(z)
        if self.chi2_profile is None:
            return np.ones(z.shape)
        return np.asarray(self.chi2_profile(z), dtype=float)

    @property
    def is_degenerate(self) -> bool:
        return abs(self.lambda_s - self.lambda_i) <= 1e-12 * self.lambda_s

    # constructors -------------------------------------------------------------
    @classmethod
    def degenerate_type1(cls, L: float, n_o: float, lambda_p: float, **kw) -> "CrystalSpec":
        """Collinear degenerate type-I crystal with the pump index matched to ``n_o``.

        The birefringence of the pump is not needed by the kernels, so the
        pump is described by ``n_e = n_o`` at ``theta = 0`` unless overridden.
        """
        kw.setdefault("n_e", n_o)
        kw.setdefault("theta", 0.0)
        return cls(L=L, n_o=n_o, lambda_p=lambda_p, lambda_s=2 * lambda_p, lambda_i=2 * lambda_p,
                   pm_type=PMType.TYPE_I_DEGENERATE, **kw)

    @classmethod
    def nondegenerate_type1(cls, L: float, n_o: float, lambda_s: float, lambda_i: float, **kw) -> "CrystalSpec":
        """Collinear nondegenerate type-I crystal without dispersion (matched at ``theta = 0``)."""
        lambda_p = 1.0 / (1.0 / lambda_s + 1.0 / lambda_i)
        kw.setdefault("n_e", n_o)
        kw.setdefault("theta", 0.0)
        return cls(L=L, n_o=n_o, lambda_p=lambda_p, lambda_s=lambda_s, lambda_i=lambda_i,
                   pm_type=PMType.TYPE_I_NONDEGENERATE, **kw)

    @classmethod
    def beamlike_type2(cls, L: float, n_o: float, n_e: float, theta: float, lambda_p: float, **kw) -> "CrystalSpec":
        return cls(L=L, n_o=n_o, n_e=n_e, theta=theta, lambda_p=lambda_p, lambda_s=2 * lambda_p,
                   lambda_i=2 * lambda_p, pm_type=PMType.TYPE_II_BEAMLIKE, **kw)

    @classmethod
    def thin(cls, lambda_p: float, lambda_s: float | None = None, L: float = 1e-9, n_o: float = 1.0, **kw) -> "CrystalSpec":
        lambda_s = 2 * lambda_p if lambda_s is None else lambda_s
        lambda_i = 1.0 / (1.0 / lambda_p - 1.0 / lambda_s)
        kw.setdefault("n_e", n_o)
        kw.setdefault("theta", 0.0)
        return cls(L=L, n_o=n_o, lambda_p=lambda_p, lambda_s=lambda_s, lambda_i=lambda_i,
                   pm_type=PMType.THIN, check_matching=False, **kw)
