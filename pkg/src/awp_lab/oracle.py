"""Brute-force biphoton amplitudes by direct crystal-volume integration.

The amplitude for photons 1 and 2 found at ``rho1`` and ``rho2`` on the
crystal's central plane is

    psi(rho1, rho2) = int dz chi2(z) int d^2rho G_{-z}(rho1 - rho) U_p(rho, z) G_{-z}(rho2 - rho)

with paraxial Fresnel Green's functions (the extraordinary one for the
second photon of a beamlike type-II source).  The depth integral is a
principal value around ``z = 0``; it is evaluated with nodes placed
symmetrically about the origin, either on the real segment or on the
half-circle ``|z| = L/2`` in the upper half plane, where the integrand is
analytic and decays (the two paths enclose no singularity).

Two routes evaluate the transverse integral at each depth node: a closed
Gaussian product (``route="analytic"``) and a direct sum over a sampled
crystal plane (``route="numeric"``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .crystal import CrystalSpec, PMType
from .elements import propagate
from .grid import Grid2D, ScalarField

__all__ = [
    "VolumeQuadrature",
    "OracleWindowError",
    "direct_integral",
    "reduced_z_integral",
    "backward_suppression",
    "mismatch_integral",
    "align",
    "aligned_relative_l2",
    "MAX_TRANSVERSE",
    "MAX_NODES",
]

MAX_TRANSVERSE = 128
MAX_NODES = 256


class OracleWindowError(RuntimeError):
    """The sampled crystal plane clips or aliases the transverse integrand."""


@dataclass(frozen=True)
class VolumeQuadrature:
    """Depth nodes and weights for ``int_{-L/2}^{L/2} dz``, symmetric about ``z = 0``.

    Parameters
    ----------
    L : float
        Crystal thickness.
    n_nodes : int
        Even number of Gauss-Legendre nodes.
    contour : {"arc", "real"}
        ``"arc"`` places the nodes on ``z = (L/2) exp(i theta)``, ``theta`` in
        ``(0, pi)``, traversed from ``-L/2`` to ``L/2``; ``"real"`` uses the
        segment itself.  In both cases nodes come in mirror pairs
        (``z`` and ``-conj(z)``), so ``z = 0`` is never sampled.
    grid : Grid2D, optional
        Crystal-plane sampling for the numeric transverse route.
    """

    L: float
    n_nodes: int = 128
    contour: str = "arc"
    grid: Optional[Grid2D] = None

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError("crystal thickness must be positive")
        if self.n_nodes < 2 or self.n_nodes % 2:
            raise ValueError("node count must be even so that no node sits at z = 0")
        if self.n_nodes > MAX_NODES:
            raise ValueError(f"at most {MAX_NODES} depth nodes are supported (got {self.n_nodes})")
        if self.contour not in ("arc", "real"):
            raise ValueError("contour must be 'arc' or 'real'")
        if self.grid is not None and max(self.grid.nx, self.grid.ny) > MAX_TRANSVERSE:
            raise ValueError(f"transverse grid limited to {MAX_TRANSVERSE}^2 (got {self.grid.ny}x{self.grid.nx})")

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        t, w = np.polynomial.legendre.leggauss(self.n_nodes)
        if self.contour == "real":
            z = 0.5 * self.L * t
            return z.astype(complex), (0.5 * self.L * w).astype(complex)
        theta = 0.5 * np.pi * (t + 1.0)
        wt = 0.5 * np.pi * w
        z = 0.5 * self.L * np.exp(1j * theta)
        # dz = i z dtheta, and the path runs from theta = pi down to 0
        return z, -1j * z * wt

    def doubled(self) -> "VolumeQuadrature":
        return VolumeQuadrature(self.L, 2 * self.n_nodes, self.contour, self.grid)


# ---------------------------------------------------------------------------
# photon and pump models


@dataclass(frozen=True)
class _Photon:
    nk: float          # index times vacuum wave number
    lam: float
    beta: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.0  # walk-off slope; nonzero only for the extraordinary photon
    ext: bool = False


def _photons(c: CrystalSpec) -> tuple[_Photon, _Photon, float]:
    """Both photons plus the pump's index times wave number."""
    if c.pm_type == PMType.THIN:
        raise ValueError("a thin crystal has a delta correlation; the volume integral is not needed")
    p1 = _Photon(c.index_s * c.k_s, c.lambda_s)
    if c.pm_type == PMType.TYPE_II_BEAMLIKE:
        p2 = _Photon(c.eta * c.k_i, c.lambda_i, c.beta, c.gamma, c.alpha, True)
    else:
        p2 = _Photon(c.index_i * c.k_i, c.lambda_i)
    return p1, p2, c.eta * c.k_p


def _as_points(rho) -> np.ndarray:
    r = np.atleast_2d(np.asarray(rho, dtype=float))
    if r.shape[-1] != 2:
        raise ValueError("points must be given as (x, y) pairs")
    return r.reshape(-1, 2)


def _pump_params(pump, nk_p: float):
    """``(kind, w, z_R)`` for plane and Gaussian pumps."""
    if pump is None or (isinstance(pump, str) and pump == "plane"):
        return "plane", None, None
    if isinstance(pump, (int, float)):
        w = float(pump)
        if not w > 0:
            raise ValueError("pump waist must be positive")
        return "gauss", w, 0.5 * nk_p * w * w
    if isinstance(pump, ScalarField):
        return "field", None, None
    raise TypeError("pump must be None, 'plane', a waist in meters, or a ScalarField")


def _axis_coeffs(ph: _Photon, z: complex, axis: int) -> complex:
    s = ph.beta if axis == 0 else ph.gamma
    return 1j * ph.nk / (2.0 * z * s * s)


def _node_prefactor(p1: _Photon, p2: _Photon, nk_p: float, z: complex) -> complex:
    g1 = 1j * p1.nk / (2 * np.pi * z)
    g2 = 1j * p2.nk / (2 * np.pi * z * p2.beta * p2.gamma)
    return g1 * g2 * np.exp(1j * (nk_p - p1.nk - p2.nk) * z)


# ---------------------------------------------------------------------------
# transverse routes


def _gauss_axis(a1, u1, a2, u2, p):
    """``int exp(-a1 (x-u1)^2 - a2 (x-u2)^2 - p x^2) dx`` for broadcastable centres."""
    A = a1 + a2 + p
    e = (a1 * a2 * (u1 - u2) ** 2 + a1 * p * u1**2 + a2 * p * u2**2) / A
    return np.sqrt(np.pi / A) * np.exp(-e)


def _analytic_node(r1, r2, p1, p2, z, kind, w, zR):
    if kind == "gauss":
        q = 1.0 + 1j * z / zR
        p, amp = 1.0 / (w * w * q), 1.0 / q
    else:
        p, amp = 0.0, 1.0
    x1, y1 = r1[:, None, 0], r1[:, None, 1]
    x2, y2 = r2[None, :, 0] - p2.alpha * z, r2[None, :, 1]
    ix = _gauss_axis(_axis_coeffs(p1, z, 0), x1, _axis_coeffs(p2, z, 0), x2, p)
    iy = _gauss_axis(_axis_coeffs(p1, z, 1), y1, _axis_coeffs(p2, z, 1), y2, p)
    return amp * ix * iy


def _window_check(expo: np.ndarray, h: float, tol: float = 1e-8, alias_tol: float = 1e-2):
    """Flag truncation or aliasing of ``exp(expo)`` sampled along the last axis with pitch ``h``."""
    mag = np.real(expo)
    peak = mag.max(axis=-1, keepdims=True)
    rel = np.exp(mag - peak)
    if np.any(rel[..., 0] > tol) or np.any(rel[..., -1] > tol):
        raise OracleWindowError(
            f"integrand is still {max(rel[..., 0].max(), rel[..., -1].max()):.2e} of its peak at the window edge; "
            "enlarge the crystal-plane window or use a narrower pump"
        )
    # the exponent's imaginary part is the continuous phase itself; unwrapping would hide aliasing
    step = np.abs(np.diff(np.imag(expo), axis=-1))
    pair = np.minimum(rel[..., 1:], rel[..., :-1])
    aliased = np.sum(np.where(step > np.pi, pair, 0.0), axis=-1) / np.sum(rel, axis=-1)
    if np.any(aliased > alias_tol):
        raise OracleWindowError(
            f"crystal-plane pitch aliases the chirp ({aliased.max():.1%} of the integrand's magnitude "
            "sits where the phase steps exceed pi); refine the transverse sampling"
        )


def _numeric_node(r1, r2, p1, p2, z, kind, w, zR, grid: Grid2D, pump_amp=None, check=True):
    """Direct transverse sum at one depth node."""
    xs, ys = grid.x, grid.y
    exps = []
    for axis, coords in ((0, xs), (1, ys)):
        a1 = _axis_coeffs(p1, z, axis)
        a2 = _axis_coeffs(p2, z, axis)
        u1 = r1[:, axis][:, None]
        u2 = r2[:, axis][:, None] - (p2.alpha * z if axis == 0 else 0.0)
        e1 = -a1 * (coords[None, :] - u1) ** 2
        e2 = -a2 * (coords[None, :] - u2) ** 2
        exps.append((e1, e2))
    if kind == "gauss":
        q = 1.0 + 1j * z / zR
        ep = -(xs**2) / (w * w * q), -(ys**2) / (w * w * q)
        amp = 1.0 / q
    else:
        ep = (np.zeros_like(xs), np.zeros_like(ys))
        amp = 1.0
    if check:
        h = (grid.dx, grid.dy)
        for axis in (0, 1):
            e1, e2 = exps[axis]
            tot = e1[:, None, :] + e2[None, :, :] + ep[axis][None, None, :]
            _window_check(tot, h[axis])
    (e1x, e2x), (e1y, e2y) = exps
    if kind == "field":
        # non-separable pump: contract y and x separately per pair
        E1x, E2x, E1y, E2y = np.exp(e1x), np.exp(e2x), np.exp(e1y), np.exp(e2y)
        tx = E1x[:, None, :] * E2x[None, :, :]
        ty = E1y[:, None, :] * E2y[None, :, :]
        return np.einsum("ijy,yx,ijx->ij", ty, pump_amp, tx) * grid.dx * grid.dy
    sx = (np.exp(e1x + ep[0][None, :]) @ np.exp(e2x).T) * grid.dx
    sy = (np.exp(e1y + ep[1][None, :]) @ np.exp(e2y).T) * grid.dy
    return amp * sx * sy


# ---------------------------------------------------------------------------
# public operations


def direct_integral(c: CrystalSpec, rho1, rho2, pump=None, quad: Optional[VolumeQuadrature] = None,
                    route: str = "analytic", rho1_weights=None, check_window: bool = True) -> np.ndarray:
    """Biphoton amplitude ``psi(rho1_i, rho2_j)`` by crystal-volume integration.

    Parameters
    ----------
    c : CrystalSpec
        Type-I (degenerate or not) or beamlike type-II crystal.  Photon 1 is
        the ordinary photon at ``lambda_s``, photon 2 the one at ``lambda_i``.
    rho1, rho2 : array_like, shape (m, 2)
        Detection points on the central crystal plane.
    pump : None, "plane", float or ScalarField
        Plane wave, Gaussian waist focused at the crystal centre, or a
        sampled pump (numeric route on the real contour only).
    quad : VolumeQuadrature, optional
        Defaults to 128 arc nodes.
    route : {"analytic", "numeric"}
        Transverse integral in closed form or by direct summation over
        ``quad.grid``.
    rho1_weights : array_like, optional
        Contract photon 1 against these weights at every depth node before
        the depth sum; the result then has shape ``(1, m2)``.

    Returns
    -------
    ndarray, shape (m1, m2)
        Amplitudes up to an overall constant.
    """
    quad = quad or VolumeQuadrature(c.L)
    if abs(quad.L - c.L) > 1e-12 * c.L:
        raise ValueError("quadrature thickness does not match the crystal")
    r1, r2 = _as_points(rho1), _as_points(rho2)
    p1, p2, nk_p = _photons(c)
    kind, w, zR = _pump_params(pump, nk_p)
    if quad.contour == "arc":
        if kind == "field":
            raise ValueError("a sampled pump cannot be continued off the real axis; use contour='real'")
        if c.chi2_profile is not None:
            raise ValueError("a chi2 profile is only defined on the real axis; use contour='real'")
        if kind == "gauss" and zR <= 0.5 * c.L:
            raise ValueError("the arc would pass the Gaussian pump's focal singularity (z_R <= L/2); use contour='real'")
    if route == "numeric" and quad.grid is None:
        raise ValueError("the numeric route needs a crystal-plane grid in the quadrature")
    if route not in ("analytic", "numeric"):
        raise ValueError("route must be 'analytic' or 'numeric'")
    if kind == "field" and route != "numeric":
        raise ValueError("a sampled pump needs the numeric route")
    if kind == "field" and not pump.grid.same_as(quad.grid):
        raise ValueError("pump field must be sampled on the quadrature grid")
    wts = None if rho1_weights is None else np.asarray(rho1_weights, dtype=complex).reshape(-1)
    if wts is not None and wts.size != r1.shape[0]:
        raise ValueError("one weight per photon-1 point is required")

    zs, ws = quad.nodes_weights()
    chi = c.chi2(zs.real) if quad.contour == "real" else np.ones(zs.size)
    out = np.zeros((1 if wts is not None else r1.shape[0], r2.shape[0]), dtype=complex)
    for z, wz, ch in zip(zs, ws, chi):
        if ch == 0:
            continue
        if route == "analytic":
            f = _analytic_node(r1, r2, p1, p2, z, kind, w, zR)
        else:
            pa = None
            if kind == "field":
                pa = propagate(pump, float(z.real), c.eta).amp * np.exp(-1j * nk_p * float(z.real))
            f = _numeric_node(r1, r2, p1, p2, z, kind, w, zR, quad.grid, pa, check_window)
        f = f * _node_prefactor(p1, p2, nk_p, z)
        if wts is not None:
            f = (wts @ f)[None, :]
        out += wz * ch * f
    return out


def _graded_panels(x: float, n_per: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [0, pi/2] refined geometrically toward 0 on the scale 1/x."""
    h = min(0.5 * np.pi, 1.0 / max(x, 1e-300))
    edges = [0.0]
    b = h / 64.0
    while b < 0.5 * np.pi:
        edges.append(b)
        b *= 2.0
    edges.append(0.5 * np.pi)
    t, w = np.polynomial.legendre.leggauss(n_per)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def reduced_z_integral(a: float, L: float, n_per_panel: int = 24) -> complex:
    """Principal value of ``int_{-L/2}^{L/2} exp(-i a / z) / z dz``.

    Evaluated on the half-circle ``|z| = L/2`` above the real axis, where
    ``exp(-i a / z)`` decays.  The mirror pairing ``theta <-> pi - theta``
    makes the result purely imaginary by construction.

    Raises
    ------
    ValueError
        If ``a <= 0``.
    """
    if not (np.isfinite(a) and a > 0):
        raise ValueError("a must be positive")
    if not L > 0:
        raise ValueError("L must be positive")
    x = 2.0 * a / L
    th, wt = _graded_panels(x, n_per_panel)
    # integrand along the arc: -i exp(-i x e^{-i theta}); the partner at
    # pi - theta is its complex conjugate, so each pair sums to 2 Re
    f = np.exp(-1j * x * np.exp(-1j * th))
    pair = 2.0 * np.sum(wt * f.real)
    return complex(0.0, -pair)


def mismatch_integral(delta_nk: float, L: float, n_nodes: int = 64, profile=None) -> complex:
    """``int_{-L/2}^{L/2} chi2(z) exp(i 2 delta_nk z) dz`` by Gauss-Legendre quadrature.

    ``delta_nk`` is the wave-number mismatch per photon (e.g. ``(eta - n) k``).
    """
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    z = 0.5 * L * t
    chi = np.ones_like(z) if profile is None else np.asarray(profile(z), dtype=float)
    return complex(np.sum(0.5 * L * w * chi * np.exp(2j * delta_nk * z)))


def backward_suppression(c: CrystalSpec, z_offset: float = 0.0, n_nodes: Optional[int] = None) -> float:
    """Ratio of backward- to forward-emitted conditional amplitude for a collinear type-I crystal.

    A photon leaving through the entrance face accumulates ``exp(i 2 n k z)``
    across the emission depth instead of a matched constant.  ``z_offset``
    (distance of the backward detection plane from the crystal) only adds a
    common phase.
    """
    if c.pm_type not in (PMType.TYPE_I_DEGENERATE, PMType.TYPE_I_NONDEGENERATE):
        raise ValueError("backward suppression is defined for collinear type-I crystals")
    nk = c.index_i * c.k_i
    if n_nodes is None:
        # resolve the 2 n k L / (2 pi) oscillations with margin
        n_nodes = int(min(4096, max(64, 4 * nk * c.L / np.pi + 32)))
    prof = c.chi2_profile
    back = mismatch_integral(nk, c.L, n_nodes, prof) * np.exp(1j * nk * z_offset)
    fwd = mismatch_integral(0.0, c.L, n_nodes, prof)
    if abs(fwd) == 0:
        raise ValueError("forward emission vanishes for this chi2 profile")
    return float(abs(back) / abs(fwd))


def align(reference: np.ndarray, trial: np.ndarray) -> complex:
    """Complex scalar ``s`` minimizing ``||s * trial - reference||``."""
    den = np.vdot(trial, trial)
    if den == 0:
        raise ValueError("trial array is identically zero")
    return complex(np.vdot(trial, reference) / den)


def aligned_relative_l2(reference: np.ndarray, trial: np.ndarray) -> float:
    """``||s trial - reference|| / ||reference||`` after optimal complex alignment."""
    s = align(reference, trial)
    return float(np.linalg.norm(s * trial - reference) / np.linalg.norm(reference))
